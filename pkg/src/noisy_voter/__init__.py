"""Noisy voter model on finite graphs: forward simulation, exact stationary
sampling through coalescing random walks, a brute-force oracle for small
graphs, and analytics for the Gaussian / Bernoulli regimes of ``S``."""

__version__ = "0.1.0"

from .forward import NvmParams, OpinionConfig, ParameterError  # noqa: E402
from .graphs import GraphSpec, TransitionKernel, build_kernel  # noqa: E402
from .streams import stream  # noqa: E402

__all__ = ["GraphSpec", "NvmParams", "OpinionConfig", "ParameterError", "TransitionKernel", "build_kernel", "stream",
           "__version__"]
