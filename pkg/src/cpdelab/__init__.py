"""Monte Carlo laboratory for the contact process on dynamical bond
percolation: keyed random fields, dominated exploration processes and
their infection trees, percolation couplings, the two-site second-chance
machinery, and the enhanced two-type percolation model."""

from .randomness import ModelParams, VariableFamilies

__version__ = "0.1.0"

__all__ = ["ModelParams", "VariableFamilies", "__version__"]
