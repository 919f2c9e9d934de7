"""crossdiff: two-type reflecting Brownian particles on the circle and the
cross-diffusion system they converge to, with a comparison harness."""

__version__ = "0.1.0"

from . import coefficients, expressions, particles, pde

__all__ = ["coefficients", "expressions", "particles", "pde", "__version__"]
