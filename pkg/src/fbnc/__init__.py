"""Feedback-based online network coding over erasure broadcast channels."""

from fbnc.kernel import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
