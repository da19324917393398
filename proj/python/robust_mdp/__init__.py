"""Robust policy evaluation and improvement for MDPs with uncertain transition kernels."""

from ._core import *  # noqa: F401,F403
from ._core import ConvergenceError, RmdpError

__all__ = [name for name in dir() if not name.startswith("_")]
