"""Multi-state single-object tracker with a linear-time state-space
fusion stage, plus the training/evaluation harness around it."""

__version__ = "0.1.0"
