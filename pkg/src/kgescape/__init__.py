"""Escape functions, Hamilton flows and commutator estimates for wave-type operators on R^n."""

from .geometry import Cometric, GaussianBump, PhasePoint, PowerDecay, RingTrap, beta, tau_incoming, tau_outgoing
from .symbols import CutoffParams, Ladder, ScalarSymbol, observable, principal_symbol
from .flow import classify_null_nontrapping, integrate
from .quantize import GridSpec, coherent_state, weyl_quantize
from .estimates import (MarginReport, verify_incoming_cutoff_sign, verify_operator_commutator,
                        verify_outgoing_cutoff)
from .probe import DiscreteOperator, assemble_P

__version__ = "0.1.0"

__all__ = [
    "Cometric",
    "GaussianBump",
    "PhasePoint",
    "PowerDecay",
    "RingTrap",
    "beta",
    "tau_incoming",
    "tau_outgoing",
    "CutoffParams",
    "Ladder",
    "ScalarSymbol",
    "observable",
    "principal_symbol",
    "classify_null_nontrapping",
    "integrate",
    "GridSpec",
    "coherent_state",
    "weyl_quantize",
    "MarginReport",
    "verify_incoming_cutoff_sign",
    "verify_operator_commutator",
    "verify_outgoing_cutoff",
    "DiscreteOperator",
    "assemble_P",
]
