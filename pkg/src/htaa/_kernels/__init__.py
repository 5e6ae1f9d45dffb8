"""Numerical kernels: a compiled core when built, otherwise the numpy fallback."""

from htaa._kernels._kde_py import log_ndtr_diff

try:
    from htaa._kernels._kde_ext import mixture_logpdf
    BACKEND = "compiled"
except ImportError:  # extension not built (e.g. plain source checkout)
    from htaa._kernels._kde_py import mixture_logpdf
    BACKEND = "python"

__all__ = ["BACKEND", "log_ndtr_diff", "mixture_logpdf"]
