"""Staged interferometer circuits and unitary propagation of the particle state.

A circuit is a fixed set of path modes ("rails") and an ordered list of
stages.  Boundary ``k`` is the moment after the first ``k`` stages, so
boundary 0 is the input and boundary ``len(stages)`` the detection time.
Marked points name a (boundary, mode) pair, e.g. point ``C`` of a nested
interferometer.

Beam splitter convention, in the basis (mode_a, mode_b)::

    U = [[cos t,             1j*exp(1j*phi)*sin t],
         [1j*exp(-1j*phi)*sin t, cos t           ]]

with ``t = pi/4, phi = 0`` for a balanced splitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidCircuit, StructuralError
from .state import ATOL, PureState, Space, factor_state, tensor

__all__ = [
    "Element",
    "MarkedPoint",
    "Circuit",
    "Selection",
    "validate",
    "forward_propagate",
    "backward_propagate",
    "seed_state",
]

ELEMENT_KINDS = (
    "beam_splitter",
    "mirror",
    "phase_shifter",
    "polarization_rotator",
    "ancilla_flip",
    "detector",
)

_ARITY = {
    "beam_splitter": 2,
    "mirror": 2,
    "phase_shifter": 1,
    "polarization_rotator": 1,
    "ancilla_flip": 1,
    "detector": 1,
}


@dataclass(frozen=True)
class Element:
    """One optical element acting on one or two modes.

    Angles are in radians.  ``theta`` and ``phi`` parametrize beam splitters,
    ``phi`` alone a phase shifter, ``angle`` a polarization rotator.  A mirror
    moves the amplitude of ``modes[0]`` into ``modes[1]`` (and back, so that it
    stays unitary).  A detector names the outcome of finding the particle in
    its mode.
    """

    kind: str
    modes: tuple[str, ...]
    theta: float = math.pi / 4
    phi: float = 0.0
    angle: float = 0.0
    name: str | None = None

    @classmethod
    def beam_splitter(cls, a: str, b: str, theta: float = math.pi / 4, phi: float = 0.0) -> "Element":
        return cls("beam_splitter", (a, b), theta=theta, phi=phi)

    @classmethod
    def mirror(cls, src: str, dst: str) -> "Element":
        return cls("mirror", (src, dst))

    @classmethod
    def phase_shifter(cls, mode: str, phi: float) -> "Element":
        return cls("phase_shifter", (mode,), phi=phi)

    @classmethod
    def polarization_rotator(cls, mode: str, angle: float) -> "Element":
        return cls("polarization_rotator", (mode,), angle=angle)

    @classmethod
    def ancilla_flip(cls, mode: str) -> "Element":
        return cls("ancilla_flip", (mode,))

    @classmethod
    def detector(cls, mode: str, name: str) -> "Element":
        return cls("detector", (mode,), name=name)

    def problems(self, modes: Sequence[str], space: Space) -> list[str]:
        out = []
        if self.kind not in ELEMENT_KINDS:
            return [f"unknown element kind {self.kind!r}"]
        if len(self.modes) != _ARITY[self.kind]:
            out.append(f"{self.kind} takes {_ARITY[self.kind]} mode(s), got {list(self.modes)}")
        if len(set(self.modes)) != len(self.modes):
            out.append(f"{self.kind} repeats a mode: {list(self.modes)}")
        for m in self.modes:
            if m not in modes:
                out.append(f"{self.kind} references undeclared mode {m!r}")
        for pname in ("theta", "phi", "angle"):
            if not math.isfinite(getattr(self, pname)):
                out.append(f"{self.kind} on {list(self.modes)} has non-finite {pname}")
        if self.kind == "polarization_rotator" and not space.has("polarization"):
            out.append("polarization_rotator used in a circuit without a polarization factor")
        if self.kind == "ancilla_flip" and not space.has("ancilla"):
            out.append("ancilla_flip used in a circuit without an ancilla factor")
        if self.kind == "detector" and not self.name:
            out.append(f"detector on {list(self.modes)} has no name")
        return out

    def unitary(self, space: Space) -> np.ndarray:
        """Dense unitary of this element on the full circuit space."""
        modes = space.levels("path")
        n = len(modes)
        rest = space.dim // n
        if self.kind in ("beam_splitter", "mirror", "phase_shifter", "detector"):
            u = np.eye(n, dtype=complex)
            idx = [modes.index(m) for m in self.modes]
            if self.kind == "beam_splitter":
                a, b = idx
                c, s = math.cos(self.theta), math.sin(self.theta)
                u[a, a] = c
                u[a, b] = 1j * np.exp(1j * self.phi) * s
                u[b, a] = 1j * np.exp(-1j * self.phi) * s
                u[b, b] = c
            elif self.kind == "mirror":
                a, b = idx
                u[[a, b]] = u[[b, a]]
            elif self.kind == "phase_shifter":
                u[idx[0], idx[0]] = np.exp(1j * self.phi)
            return np.kron(u, np.eye(rest))
        # conditional on the particle occupying the element's mode
        proj = np.zeros((n, n), dtype=complex)
        proj[modes.index(self.modes[0]), modes.index(self.modes[0])] = 1.0
        if self.kind == "polarization_rotator":
            c, s = math.cos(self.angle), math.sin(self.angle)
            local = _embed(space, "polarization", np.array([[c, -s], [s, c]], dtype=complex))
        elif self.kind == "ancilla_flip":
            local = _embed(space, "ancilla", np.array([[0, 1], [1, 0]], dtype=complex))
        else:
            raise StructuralError(f"unknown element kind {self.kind!r}")
        return np.kron(proj, local) + np.kron(np.eye(n) - proj, np.eye(rest))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "modes": list(self.modes)}
        if self.kind == "beam_splitter":
            d.update(theta=self.theta, phi=self.phi)
        elif self.kind == "phase_shifter":
            d["phi"] = self.phi
        elif self.kind == "polarization_rotator":
            d["angle"] = self.angle
        elif self.kind == "detector":
            d["name"] = self.name
        return d


def _embed(space: Space, factor: str, mat: np.ndarray) -> np.ndarray:
    # `mat` acts on `factor`; identity on the other non-path factors
    out = np.ones((1, 1), dtype=complex)
    for name, levels in space.factors[1:]:
        out = np.kron(out, mat if name == factor else np.eye(len(levels)))
    return out


@dataclass(frozen=True)
class MarkedPoint:
    boundary: int
    mode: str


@dataclass(frozen=True)
class Circuit:
    """Declarative staged circuit.  Immutable; stage unitaries are cached."""

    modes: tuple[str, ...]
    stages: tuple[tuple[Element, ...], ...]
    marked_points: Mapping[str, MarkedPoint] = field(default_factory=dict)
    polarization: bool = False
    ancilla: bool = False
    name: str = "circuit"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "stages", tuple(tuple(s) for s in self.stages))
        object.__setattr__(self, "marked_points", dict(self.marked_points))

    def __hash__(self):
        return id(self)

    @cached_property
    def space(self) -> Space:
        return Space.build(self.modes, polarization=self.polarization, ancilla=self.ancilla)

    @property
    def n_boundaries(self) -> int:
        return len(self.stages) + 1

    @property
    def final_boundary(self) -> int:
        return len(self.stages)

    @cached_property
    def detectors(self) -> dict[str, str]:
        """Detector name -> mode."""
        out = {}
        for stage in self.stages:
            for el in stage:
                if el.kind == "detector":
                    out[el.name] = el.modes[0]
        return out

    @cached_property
    def stage_unitaries(self) -> tuple[np.ndarray, ...]:
        self.check()
        out = []
        for stage in self.stages:
            u = np.eye(self.space.dim, dtype=complex)
            for el in stage:
                u = el.unitary(self.space) @ u
            u.setflags(write=False)
            out.append(u)
        return tuple(out)

    def point(self, name: str) -> MarkedPoint:
        try:
            return self.marked_points[name]
        except KeyError:
            raise StructuralError(
                f"unknown marked point {name!r}; known: {sorted(self.marked_points)}"
            ) from None

    def check(self) -> None:
        diags = validate(self)
        if diags:
            raise InvalidCircuit(diags)

    def replace_stage(self, index: int, elements: Sequence[Element], name: str | None = None) -> "Circuit":
        stages = list(self.stages)
        stages[index] = tuple(elements)
        return Circuit(self.modes, tuple(stages), self.marked_points, self.polarization,
                       self.ancilla, name or self.name)


def validate(circuit: Circuit) -> list[str]:
    """Return every structural problem found in ``circuit``; empty means valid."""
    diags: list[str] = []
    if len(set(circuit.modes)) != len(circuit.modes):
        diags.append(f"duplicate mode names: {list(circuit.modes)}")
    if not circuit.modes:
        diags.append("circuit declares no modes")
        return diags
    space = circuit.space
    last = len(circuit.stages) - 1
    seen_detectors: set[str] = set()
    for k, stage in enumerate(circuit.stages):
        touched: dict[str, str] = {}
        for el in stage:
            diags.extend(f"stage {k}: {p}" for p in el.problems(circuit.modes, space))
            for m in el.modes:
                if m in touched:
                    diags.append(f"stage {k}: mode {m!r} touched by both {touched[m]} and {el.kind}")
                touched[m] = el.kind
            if el.kind == "detector":
                if k != last:
                    diags.append(f"stage {k}: detector {el.name!r} outside the final stage")
                if el.name in seen_detectors:
                    diags.append(f"stage {k}: duplicate detector name {el.name!r}")
                seen_detectors.add(el.name)
    for name, pt in circuit.marked_points.items():
        if not 0 <= pt.boundary <= len(circuit.stages):
            diags.append(f"marked point {name!r} references boundary {pt.boundary} outside 0..{len(circuit.stages)}")
        if pt.mode not in circuit.modes:
            diags.append(f"marked point {name!r} references undeclared mode {pt.mode!r}")
    return diags


@dataclass(frozen=True, eq=False)
class Selection:
    """Pre-selection (an input state) or post-selection (a detector click).

    A click may carry the state the internal factors (polarization, ancilla)
    were found in, e.g. ``Selection.click("D2", polarization="H")``.
    """

    kind: str
    state: PureState | None = None
    detector: str | None = None
    internal: tuple[tuple[str, object], ...] = ()
    label: str | None = None

    @classmethod
    def input(cls, state: PureState) -> "Selection":
        if not state.normalized and abs(state.norm() - 1.0) > ATOL:
            raise StructuralError("pre-selected state must be normalized")
        return cls("input_state", state=state)

    @classmethod
    def click(cls, detector: str, label: str | None = None, **internal) -> "Selection":
        parts = []
        for factor in ("polarization", "ancilla"):
            if factor in internal:
                spec = internal.pop(factor)
                parts.append((factor, spec if isinstance(spec, str) else tuple(complex(x) for x in spec)))
        if internal:
            raise StructuralError(f"unknown internal factors {sorted(internal)}")
        return cls("detector_click", detector=detector, internal=tuple(parts), label=label)

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "input_state":
            return "input"
        extra = "".join(f"_{v}" if isinstance(v, str) else "_custom" for _, v in self.internal)
        return f"{self.detector}{extra}"


def seed_state(circuit: Circuit, post: Selection) -> PureState:
    """The post-selected basis state at the final boundary."""
    if post.kind != "detector_click":
        raise StructuralError("backward propagation needs a detector_click selection")
    if post.detector not in circuit.detectors:
        raise StructuralError(
            f"unknown detector {post.detector!r}; known: {sorted(circuit.detectors)}"
        )
    space = circuit.space
    parts = [PureState.basis(space.only("path"), path=circuit.detectors[post.detector])]
    given = dict(post.internal)
    for factor in space.names[1:]:
        if factor not in given:
            raise StructuralError(
                f"post-selection on {post.detector!r} must fix the {factor} state "
                "(the click alone is not a complete measurement)"
            )
        parts.append(factor_state(factor, given.pop(factor), space.levels(factor)))
    if given:
        raise StructuralError(f"circuit has no factor(s) {sorted(given)}")
    return tensor(*parts)


def _check_boundary(circuit: Circuit, boundary: int) -> None:
    if not 0 <= boundary <= circuit.final_boundary:
        raise StructuralError(f"boundary {boundary} outside 0..{circuit.final_boundary}")


def _check_input(circuit: Circuit, state: PureState) -> None:
    if state.space != circuit.space:
        raise StructuralError(
            f"input state space {state.space.names} does not match circuit space {circuit.space.names}"
        )


def forward_propagate(circuit: Circuit, input: PureState | Selection, boundary: int | None = None) -> PureState:
    """Evolve the input through the first ``boundary`` stages."""
    state = input.state if isinstance(input, Selection) else input
    boundary = circuit.final_boundary if boundary is None else boundary
    _check_boundary(circuit, boundary)
    _check_input(circuit, state)
    vec = state.amplitudes
    for u in circuit.stage_unitaries[:boundary]:
        vec = u @ vec
    return PureState(circuit.space, vec)


def backward_propagate(circuit: Circuit, post: Selection, boundary: int) -> PureState:
    """Evolve the post-selected state backward in time down to ``boundary``.

    Returned as a ket; the backward-evolving bra is its conjugate.
    """
    _check_boundary(circuit, boundary)
    seed = seed_state(circuit, post)
    vec = seed.amplitudes
    for u in reversed(circuit.stage_unitaries[boundary:]):
        vec = u.conj().T @ vec
    return PureState(circuit.space, vec)
