"""Correlated multiphoton emission criterion and its cavity-QED case study.

Modules
-------
hilbert       truncated qubit (x) cavity space, ladder and Pauli operators
jc_model      driven Jaynes-Cummings Hamiltonian, dressed levels, resonances
lindblad      Liouvillian and steady-state solver
moments       g(n), C(n), conditional ratios R_{k,k-1}, measure M_n
trajectories  quantum-jump click records and factorial-moment estimators
scan          detuning sweeps, figure presets, CSV output
"""
__version__ = "0.1.0"
