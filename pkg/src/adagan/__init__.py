"""Desk-scale GAN image synthesis with adaptive discriminator augmentation.

The package builds everything above BLAS itself: a reverse-mode float64
tensor core, a style-based generator with weight demodulation, a residual
discriminator, an augmentation controller driven by overfitting
heuristics, distribution metrics (FID/KID) with a from-scratch SPD matrix
square root, a seekable binary corpus format, and a deterministic
single-process trainer behind one CLI.
"""

__version__ = "0.1.0"
