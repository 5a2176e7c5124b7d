"""Hybrid real-time quantum dynamics: McLachlan variational evolution under a field kick, then exact
fast-forwarding through a Cartan factorisation ``H0 = K h K^dag``.

Submodules are imported on demand so that the command line can cap thread pools first.
"""

__version__ = "0.1.0"

__all__ = ["ansatz", "cartan", "cli", "figures", "models", "pauli", "pipeline", "spectra", "statevector", "vqds"]
