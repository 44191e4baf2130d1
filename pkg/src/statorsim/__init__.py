"""State-vector simulator for stator-based Z_N lattice gauge theory with fermions.

Submodules: ``lattice`` (geometry), ``algebra`` (clock/shift operators),
``state`` (register and gates), ``hamiltonian`` (generator, Gauss law and
exact reference), ``stator`` (ancilla-mediated routines), ``protocol``
(Trotter step), ``atomic`` (pulse-level compilation for N = 2) and ``cli``.
"""

__version__ = "0.1.0"
