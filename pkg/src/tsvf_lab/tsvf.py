"""Two-state vectors, weak values and reduction to a subsystem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Selection, backward_propagate, forward_propagate
from .errors import ImpossiblePostSelection, StructuralError
from .state import ATOL, LocalProjector, PureState, Space, apply, inner_product

__all__ = [
    "IMPOSSIBLE_THRESHOLD",
    "TwoStateVector",
    "WeakValue",
    "two_state_at",
    "two_state_at_boundary",
    "weak_value",
    "point_projector",
    "weak_value_table",
    "reduce_subsystem",
]

# Relative to the norms of the two states.
IMPOSSIBLE_THRESHOLD = 1e-10


def _is_impossible(forward: PureState, backward: PureState, overlap: complex) -> bool:
    scale = forward.norm() * backward.norm()
    return scale == 0.0 or abs(overlap) < IMPOSSIBLE_THRESHOLD * scale


@dataclass(frozen=True, eq=False)
class TwoStateVector:
    """Forward state |Psi> and backward state <Phi| (stored as the ket |Phi>)."""

    forward: PureState
    backward: PureState
    boundary: int | None = None
    overlap: complex = 0j

    def __post_init__(self):
        if self.forward.space != self.backward.space:
            raise StructuralError("forward and backward states live on different spaces")
        object.__setattr__(self, "overlap", inner_product(self.backward, self.forward))

    @property
    def space(self) -> Space:
        return self.forward.space

    @property
    def possible(self) -> bool:
        return not _is_impossible(self.forward, self.backward, self.overlap)

    def __str__(self) -> str:
        return f"<Phi| = conj[{self.backward}]   |Psi> = {self.forward}"


@dataclass(frozen=True)
class WeakValue:
    value: complex
    operator_id: str

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag

    def __complex__(self) -> complex:
        return self.value


def two_state_at_boundary(circuit: Circuit, pre: Selection, post: Selection, boundary: int,
                          check: bool = True) -> TwoStateVector:
    if pre.kind != "input_state":
        raise StructuralError("pre-selection must be an input_state")
    tsv = TwoStateVector(forward_propagate(circuit, pre.state, boundary),
                         backward_propagate(circuit, post, boundary), boundary)
    if check and not tsv.possible:
        raise ImpossiblePostSelection(tsv.forward, tsv.backward)
    return tsv


def two_state_at(circuit: Circuit, pre: Selection, post: Selection, point: str) -> TwoStateVector:
    """Two-state vector at the boundary of the marked point ``point``.

    Raises ImpossiblePostSelection when <Phi|Psi> vanishes.
    """
    return two_state_at_boundary(circuit, pre, post, circuit.point(point).boundary)


def weak_value(tsv: TwoStateVector, op: LocalProjector) -> WeakValue:
    """Return <Phi|op|Psi> / <Phi|Psi>."""
    if not tsv.possible:
        raise ImpossiblePostSelection(tsv.forward, tsv.backward)
    num = inner_product(tsv.backward, apply(op, tsv.forward))
    return WeakValue(num / tsv.overlap, op.label)


def point_projector(circuit: Circuit, point: str, **extra) -> LocalProjector:
    """Projector onto the mode of a marked point, optionally times local factor projectors."""
    pt = circuit.point(point)
    name = f"P_{point}"
    if extra:
        name += "".join(f"[{k}]" for k in extra)
    return LocalProjector.on(name=name, path=pt.mode, **extra)


def weak_value_table(circuit: Circuit, pre: Selection, post: Selection,
                     points=None) -> dict[str, complex]:
    """Weak value of the path projector at each marked point."""
    points = list(circuit.marked_points) if points is None else list(points)
    out = {}
    for p in points:
        tsv = two_state_at(circuit, pre, post, p)
        out[p] = weak_value(tsv, point_projector(circuit, p)).value
    return out


def _split(state: PureState, keep: str) -> tuple[np.ndarray, Space, Space]:
    # matrix with rows indexed by the kept factor, columns by the rest
    space = state.space
    axis = space.names.index(keep)
    arr = np.moveaxis(state.tensor_view(), axis, 0)
    return arr.reshape(space.shape[axis], -1), space.only(keep), space.without(keep)


def _product_factors(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    u, s, vh = np.linalg.svd(mat)
    if s[0] == 0.0 or (s.size > 1 and s[1] > ATOL * s[0]):
        return None
    return u[:, 0] * s[0], vh[0]


def reduce_subsystem(tsv: TwoStateVector, keep: str) -> TwoStateVector | None:
    """Two-state vector of the factor ``keep`` alone, or None if there is none.

    If the backward state is a product |phi_keep>|phi_rest>, the kept factor's
    effective forward state is <phi_rest|Psi>, and weak values of any operator
    local to ``keep`` are unchanged.  The time-reversed case (product forward
    state, entangled backward state) is handled the same way.  When both
    states are entangled a generalized two-state vector would be needed and
    None is returned.
    """
    if tsv.space.names == (keep,):
        return tsv
    fwd, sub, rest = _split(tsv.forward, keep)
    bwd, _, _ = _split(tsv.backward, keep)
    bfac = _product_factors(bwd)
    if bfac is not None:
        b_keep, b_rest = bfac
        # (v^H conj-contracts the rest factor) -> effective forward on `keep`
        f_eff = fwd @ b_rest.conj()
        forward, backward = PureState(sub, f_eff), PureState(sub, b_keep)
    else:
        ffac = _product_factors(fwd)
        if ffac is None:
            return None
        f_keep, f_rest = ffac
        b_eff = bwd @ f_rest.conj()
        forward, backward = PureState(sub, f_keep), PureState(sub, b_eff)
    if forward.norm() == 0.0 or backward.norm() == 0.0:
        raise ImpossiblePostSelection(tsv.forward, tsv.backward)
    return TwoStateVector(forward.normalize(), backward.normalize(), tsv.boundary)
