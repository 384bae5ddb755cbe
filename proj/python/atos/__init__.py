"""Sparse adversarial attacks with overlapping smoothed l0 regularization.

Arrays are float64 with shape (channels, height, width).
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
