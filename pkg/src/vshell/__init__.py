"""Static matter shells of the spherically symmetric Vlasov-Poisson system
around a fixed central point mass."""

__version__ = "0.1.0"
