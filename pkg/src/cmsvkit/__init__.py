"""q-ratio sparsity, q-ratio CMSV estimation and Basis Pursuit recovery checks."""

__version__ = "0.1.0"
