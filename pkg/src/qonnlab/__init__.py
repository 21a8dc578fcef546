"""qonnlab: quantum-orthogonal operator-network ensembles with conformal uncertainty."""

__version__ = "0.1.0"
