"""Coupled-pair simulation and contraction certification for jump-driven
Hamiltonian dynamics.

Subpackages by role: ``measures`` (jump measures and overlap machinery),
``model`` (systems, potentials, certificates, Lyapunov weights),
``generator`` (operator quadrature and identity checks), ``constants``
(the contraction constant chain and distance profiles), ``simulate``
(single and coupled path sampling), ``ergodicity`` (decay estimation and
equilibrium diagnostics), ``cli``/``config`` (experiment runner).
"""

from .pair import PairState

__version__ = "0.1.0"

__all__ = ["PairState", "__version__"]
