"""Variational simulation workbench for a three-link SU(2) gauge model.

Modules, bottom up: ``recoupling`` (3j/6j symbols), ``theta`` (exact
Hamiltonian and spectra), ``encoding`` (qubit registers and Pauli algebra),
``circuit`` and ``simulator`` (gates, statevectors, noise), ``ansatz``,
``transpiler``, ``powell``, ``vqe``, ``mitigation`` and ``cli``.
"""

__version__ = "0.1.0"
