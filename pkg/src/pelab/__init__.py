"""Desk-scale laboratory for public-key pseudoentanglement.

Lossy function families (DCRA and LWE), phase states built from them,
entanglement measurements in one and two dimensions, clock Turing machines
and their history-state Hamiltonians.
"""

__version__ = "0.1.0"
