"""steinqd: quality-diversity policy ensembles via Stein variational policy
gradients with f-divergence kernels over stationary distributions."""

__version__ = "0.1.0"
