"""Large-neighborhood search for one-hot constrained Potts problems."""
__version__ = "0.1.0"
