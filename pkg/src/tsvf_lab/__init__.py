"""Two-state vector simulations of particles in interferometers.

Forward and backward state propagation through staged optical circuits,
weak values of local projectors, exact Gaussian-pointer weak measurements
and Monte Carlo ensembles of pre- and post-selected runs.
"""

__version__ = "0.1.0"

from .errors import ImpossiblePostSelection, InvalidCircuit, StructuralError, TSVFError
from .state import (
    CIRCULAR_LEFT,
    CIRCULAR_RIGHT,
    BasisLabel,
    LocalProjector,
    PureState,
    Space,
    apply,
    inner_product,
    tensor,
)
from .circuit import Circuit, Element, MarkedPoint, Selection, backward_propagate, forward_propagate, validate
from .tsvf import TwoStateVector, WeakValue, reduce_subsystem, two_state_at, weak_value, weak_value_table
from .pointer import (
    GaussianSum,
    JointState,
    PointerConfig,
    PointerState,
    couple,
    first_order_shift,
    leak_ratio,
    pointer_expectation,
    postselect,
    projective_readout,
)
from . import scenarios
