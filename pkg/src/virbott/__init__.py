"""Structure-preserving numerics for the KdV / Camassa-Holm / Hunter-Saxton family on the Virasoro-Bott group."""

__version__ = "0.1.0"
