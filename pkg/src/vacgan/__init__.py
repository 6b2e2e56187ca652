"""Conditional GAN toolkit built around a classifier placed beside the discriminator.

Subpackages and modules:

- :mod:`vacgan.autodiff` reverse-mode differentiation on float64 tensors
- :mod:`vacgan.models` generator, discriminator and classifier builders
- :mod:`vacgan.latent` sign-partitioned latent sampling
- :mod:`vacgan.training` losses, optimisers and the training loop
- :mod:`vacgan.divergence` densities, quadrature divergences and checks
- :mod:`vacgan.metrics` image similarity metrics and the pairwise protocol
- :mod:`vacgan.data` synthetic datasets and PGM input/output
- :mod:`vacgan.config` / :mod:`vacgan.cli` the experiment runner
"""

from vacgan.errors import VacganError

__version__ = "0.1.0"

__all__ = ["VacganError", "__version__"]
