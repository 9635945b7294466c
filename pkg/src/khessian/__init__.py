"""k-Hessian eigenvalues by non-degenerate inverse iteration, with Garding-theory checks."""

__version__ = "0.1.0"
