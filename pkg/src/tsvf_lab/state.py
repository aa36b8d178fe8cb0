"""Finite-dimensional composite Hilbert spaces, pure states and local projectors.

A space is an ordered product of named factors.  The factor names are
``"path"`` (the spatial modes of the particle), ``"polarization"`` (``H``/``V``)
and ``"ancilla"`` (``up``/``down``), always kept in that order.  Basis labels
are symbolic, so states print as ``|A,H>`` rather than as vector indices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import StructuralError

__all__ = [
    "ATOL",
    "POLARIZATION_LEVELS",
    "ANCILLA_LEVELS",
    "CIRCULAR_RIGHT",
    "CIRCULAR_LEFT",
    "BasisLabel",
    "Space",
    "PureState",
    "LocalProjector",
    "inner_product",
    "apply",
    "tensor",
]

ATOL = 1e-12

FACTOR_ORDER = ("path", "polarization", "ancilla")
POLARIZATION_LEVELS = ("H", "V")
ANCILLA_LEVELS = ("up", "down")

# Rank-1 circular polarization states in the {H, V} basis.  Which of the two is
# called "clockwise" is a convention; CIRCULAR_RIGHT is the one used by the
# presets and the CLI.
CIRCULAR_RIGHT = np.array([1.0, 1.0j]) / np.sqrt(2.0)
CIRCULAR_LEFT = np.array([1.0, -1.0j]) / np.sqrt(2.0)


class BasisLabel(NamedTuple):
    path: str | None = None
    polarization: str | None = None
    ancilla: str | None = None

    def __str__(self) -> str:
        return ",".join(x for x in self if x is not None)


@dataclass(frozen=True)
class Space:
    """Ordered product of named factors, each with a tuple of level names."""

    factors: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        names = [name for name, _ in self.factors]
        if len(set(names)) != len(names):
            raise StructuralError(f"duplicate factors in space: {names}")
        for name, levels in self.factors:
            if name not in FACTOR_ORDER:
                raise StructuralError(f"unknown factor {name!r}")
            if not levels:
                raise StructuralError(f"factor {name!r} has no levels")
            if len(set(levels)) != len(levels):
                raise StructuralError(f"repeated level in factor {name!r}")
        if names != sorted(names, key=FACTOR_ORDER.index):
            raise StructuralError(f"factors out of canonical order: {names}")

    @classmethod
    def build(cls, modes: Sequence[str] | None = None, polarization: bool = False,
              ancilla: bool = False) -> "Space":
        factors = []
        if modes is not None:
            factors.append(("path", tuple(modes)))
        if polarization:
            factors.append(("polarization", POLARIZATION_LEVELS))
        if ancilla:
            factors.append(("ancilla", ANCILLA_LEVELS))
        return cls(tuple(factors))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(levels) for _, levels in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape, dtype=int))

    def levels(self, factor: str) -> tuple[str, ...]:
        for name, levels in self.factors:
            if name == factor:
                return levels
        raise StructuralError(f"factor {factor!r} absent from space {self.names}")

    def has(self, factor: str) -> bool:
        return factor in self.names

    @cached_property
    def labels(self) -> tuple[BasisLabel, ...]:
        out = []
        for combo in itertools.product(*(levels for _, levels in self.factors)):
            out.append(BasisLabel(**dict(zip(self.names, combo))))
        return tuple(out)

    @cached_property
    def _index(self) -> dict[BasisLabel, int]:
        return {label: i for i, label in enumerate(self.labels)}

    def index(self, label: BasisLabel) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise StructuralError(f"label {label} not in space {self.names}") from None

    def without(self, factor: str) -> "Space":
        self.levels(factor)
        return Space(tuple(f for f in self.factors if f[0] != factor))

    def only(self, factor: str) -> "Space":
        return Space(((factor, self.levels(factor)),))


@dataclass(frozen=True, eq=False)
class PureState:
    """Complex amplitude vector over the basis of ``space``.

    The amplitude array is stored read-only.  ``normalized`` records whether
    the state was built (or checked) as a unit vector.
    """

    space: Space
    amplitudes: np.ndarray = field(repr=False)
    normalized: bool = False

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.space.dim:
            raise StructuralError(
                f"amplitude vector of length {amps.size} does not match space dim {self.space.dim}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(self.norm() - 1.0) > ATOL:
            raise StructuralError(f"state flagged normalized has norm {self.norm()!r}")

    @classmethod
    def from_dict(cls, space: Space, amps: Mapping[BasisLabel | tuple, complex],
                  normalize: bool = False) -> "PureState":
        vec = np.zeros(space.dim, dtype=complex)
        for label, value in amps.items():
            if not isinstance(label, BasisLabel):
                # plain tuples list the levels of the space's own factors in order
                label = BasisLabel(**dict(zip(space.names, label)))
            vec[space.index(label)] += value
        state = cls(space, vec)
        return state.normalize() if normalize else state

    @classmethod
    def basis(cls, space: Space, **levels: str) -> "PureState":
        return cls.from_dict(space, {BasisLabel(**levels): 1.0}).normalize()

    @classmethod
    def zero(cls, space: Space) -> "PureState":
        return cls(space, np.zeros(space.dim, dtype=complex))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "PureState":
        n = self.norm()
        if n == 0.0:
            raise StructuralError("cannot normalize the zero state")
        return PureState(self.space, self.amplitudes / n, normalized=True)

    def amplitude(self, label: BasisLabel | tuple) -> complex:
        return complex(self.amplitudes[self.space.index(BasisLabel(*label))])

    def as_dict(self, atol: float = 0.0) -> dict[BasisLabel, complex]:
        return {label: complex(a) for label, a in zip(self.space.labels, self.amplitudes)
                if abs(a) > atol}

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.shape)

    def __add__(self, other: "PureState") -> "PureState":
        _same_space(self, other)
        return PureState(self.space, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "PureState") -> "PureState":
        _same_space(self, other)
        return PureState(self.space, self.amplitudes - other.amplitudes)

    def __mul__(self, scalar: complex) -> "PureState":
        return PureState(self.space, self.amplitudes * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "PureState":
        return PureState(self.space, self.amplitudes / scalar)

    def allclose(self, other: "PureState", atol: float = ATOL) -> bool:
        _same_space(self, other)
        return bool(np.allclose(self.amplitudes, other.amplitudes, rtol=0.0, atol=atol))

    def __str__(self) -> str:
        terms = [f"({a.real:+.6g}{a.imag:+.6g}j)|{label}>" for label, a in self.as_dict(1e-15).items()]
        return " ".join(terms) if terms else "0"


def _same_space(a: PureState, b: PureState) -> None:
    if a.space != b.space:
        raise StructuralError(f"space mismatch: {a.space.names} vs {b.space.names}")


def inner_product(bra: PureState, ket: PureState) -> complex:
    """Return <bra|ket>, conjugate-linear in ``bra``."""
    _same_space(bra, ket)
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def _factor_matrix(levels: tuple[str, ...], spec) -> np.ndarray:
    n = len(levels)
    if spec is None:
        return np.eye(n, dtype=complex)
    if isinstance(spec, frozenset):
        unknown = spec - set(levels)
        if unknown:
            raise StructuralError(f"unknown levels {sorted(unknown)}; expected one of {levels}")
        return np.diag([1.0 + 0j if lv in spec else 0.0j for lv in levels])
    vec = np.asarray(spec, dtype=complex)
    if vec.shape != (n,):
        raise StructuralError(f"projector vector has shape {vec.shape}, expected ({n},)")
    return np.outer(vec, vec.conj())


@dataclass(frozen=True)
class LocalProjector:
    """Tensor product of per-factor projectors; unlisted factors get the identity.

    Each factor's part is either a set of basis levels (a diagonal projector)
    or a unit vector over the factor's levels (a rank-1 projector).

    >>> LocalProjector.on(path="B").label
    'P[path=B]'
    """

    support: tuple[tuple[str, object], ...] = ()
    name: str | None = None

    @classmethod
    def on(cls, name: str | None = None, **parts) -> "LocalProjector":
        support = []
        for factor in FACTOR_ORDER:
            if factor not in parts:
                continue
            spec = parts.pop(factor)
            if isinstance(spec, str):
                spec = frozenset([spec])
            elif isinstance(spec, (set, frozenset)):
                spec = frozenset(spec)
            else:
                vec = np.asarray(spec, dtype=complex).reshape(-1)
                if abs(np.linalg.norm(vec) - 1.0) > ATOL:
                    raise StructuralError(f"rank-1 projector vector for {factor!r} is not unit norm")
                spec = tuple(complex(v) for v in vec)
            support.append((factor, spec))
        if parts:
            raise StructuralError(f"unknown factors {sorted(parts)}")
        return cls(tuple(support), name)

    @classmethod
    def identity(cls) -> "LocalProjector":
        return cls((), "1")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if not self.support:
            return "1"
        bits = []
        for factor, spec in self.support:
            if isinstance(spec, frozenset):
                bits.append(f"{factor}={'|'.join(sorted(spec))}")
            else:
                bits.append(f"{factor}=vec({', '.join(f'{v:.4g}' for v in spec)})")
        return "P[" + ";".join(bits) + "]"

    def matrix(self, space: Space) -> np.ndarray:
        return _projector_matrix(self, space)

    def __mul__(self, other: "LocalProjector") -> "LocalProjector":
        # Product of projectors on disjoint factors.
        mine = dict(self.support)
        theirs = dict(other.support)
        if set(mine) & set(theirs):
            raise StructuralError("product of projectors acting on the same factor is not supported")
        mine.update(theirs)
        ordered = tuple((f, mine[f]) for f in FACTOR_ORDER if f in mine)
        name = f"{self.label}{other.label}" if (self.name or other.name) else None
        return LocalProjector(ordered, name)


@lru_cache(maxsize=512)
def _projector_matrix(op: LocalProjector, space: Space) -> np.ndarray:
    parts = dict(op.support)
    for factor in parts:
        space.levels(factor)
    mat = np.ones((1, 1), dtype=complex)
    for name, levels in space.factors:
        mat = np.kron(mat, _factor_matrix(levels, parts.get(name)))
    mat.setflags(write=False)
    return mat


def apply(op: LocalProjector, state: PureState) -> PureState:
    """Apply ``op`` to ``state``; the result is not renormalized."""
    return PureState(state.space, op.matrix(state.space) @ state.amplitudes)


def tensor(*states: PureState) -> PureState:
    """Tensor product of states on disjoint factors, reordered canonically."""
    if not states:
        raise StructuralError("tensor of no states")
    factors: list[tuple[str, tuple[str, ...]]] = []
    arr = np.ones((), dtype=complex)
    for s in states:
        overlap = set(s.space.names) & {name for name, _ in factors}
        if overlap:
            raise StructuralError(f"overlapping factors in tensor product: {sorted(overlap)}")
        factors.extend(s.space.factors)
        arr = np.multiply.outer(arr, s.tensor_view())
    order = sorted(range(len(factors)), key=lambda i: FACTOR_ORDER.index(factors[i][0]))
    arr = np.transpose(arr, order)
    space = Space(tuple(factors[i] for i in order))
    normalized = all(s.normalized for s in states)
    return PureState(space, arr.reshape(-1), normalized=normalized)


def factor_state(factor: str, spec: str | Iterable[complex],
                 levels: tuple[str, ...] | None = None) -> PureState:
    """State of a single factor given by a level name or an amplitude vector."""
    if levels is None:
        levels = {"polarization": POLARIZATION_LEVELS, "ancilla": ANCILLA_LEVELS}.get(factor)
        if levels is None:
            raise StructuralError(f"levels must be given for factor {factor!r}")
    sub = Space(((factor, tuple(levels)),))
    if isinstance(spec, str):
        return PureState.basis(sub, **{factor: spec})
    return PureState(sub, np.asarray(list(spec), dtype=complex)).normalize()
