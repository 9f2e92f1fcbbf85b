"""Pose-conditioned human motion transfer with a two-branch Transformer decoder, on a numpy autodiff engine."""

__version__ = "0.1.0"
