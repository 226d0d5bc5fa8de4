"""Hierarchical dialogue understanding at toy scale.

A from-scratch transformer encoder with turn-level attention masking, a
heterogeneous turn/argument graph refined by channel composition and graph
convolution, and a linear classification head, trained with plain SGD.
"""

from .errors import ConfigError, DataError, HierDialogError, NumericError
from .kernels import backend_name

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "HierDialogError", "NumericError", "backend_name", "__version__"]
