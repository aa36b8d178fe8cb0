"""Exact von Neumann coupling of Gaussian pointers to a particle in a circuit.

Pointer wavefunctions are sums of equal-width Gaussians

    phi_a(x) = (pi * width**2) ** -0.25 * exp(-(x - a)**2 / (2 * width**2))

so the density of a single term is ``exp(-(x-a)**2 / width**2)`` up to
normalization and two terms overlap as ``exp(-(a-b)**2 / (4*width**2))``.

A coupling at a marked point is an impulsive shift: every branch of the
particle that occupies the point's mode at the point's boundary translates
that pointer by ``shift = epsilon * width``.  Nothing is expanded in epsilon.
Branches are bookkept by how many times each pointer was shifted, so the
joint state is a map from integer shift counts to particle amplitude vectors.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from .circuit import Circuit, Selection, forward_propagate, seed_state
from .errors import StructuralError
from .state import PureState
from .tsvf import WeakValue

__all__ = [
    "PointerConfig",
    "GaussianSum",
    "PointerState",
    "JointState",
    "Readout",
    "gaussian_overlap",
    "couple",
    "postselect",
    "pointer_expectation",
    "first_order_shift",
    "leak_ratio",
    "projective_readout",
]


@dataclass(frozen=True)
class PointerConfig:
    """Pointer width and coupling strength; the shift is ``epsilon * width``."""

    width: float = 1.0
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError(f"pointer width must be positive and finite, got {self.width!r}")
        if not math.isfinite(self.epsilon):
            raise ValueError(f"coupling strength must be finite, got {self.epsilon!r}")

    @property
    def shift(self) -> float:
        return self.epsilon * self.width


def gaussian_overlap(a, b, width):
    """<phi_a|phi_b> for unit-norm Gaussians of equal width."""
    d = np.subtract(a, b)
    return np.exp(-d * d / (4.0 * width * width))


def _pair_terms(weights: np.ndarray, centers: np.ndarray, widths: np.ndarray, k: int):
    """Coefficients and centers of the marginal density of pointer ``k``.

    The marginal density is sum_ij c_ij g(x - m_ij) with g a normal density
    of standard deviation width/sqrt(2) and m_ij = (a_ik + a_jk)/2.
    """
    w = weights
    c = np.conj(w)[:, None] * w[None, :]
    for j in range(centers.shape[1]):
        c = c * gaussian_overlap(centers[:, None, j], centers[None, :, j], widths[j])
    m = 0.5 * (centers[:, None, k] + centers[None, :, k])
    return c, m


@dataclass(frozen=True, eq=False)
class PointerState:
    """Unnormalized wavefunction of K pointers as a sum of Gaussian products.

    Row t of ``centers`` holds the K centers of term t; ``weights[t]`` its
    complex amplitude.  Rows with identical centers are merged.
    """

    widths: np.ndarray
    weights: np.ndarray
    centers: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        widths = np.atleast_1d(np.asarray(self.widths, dtype=float))
        centers = np.asarray(self.centers, dtype=float).reshape(-1, widths.size)
        weights = np.asarray(self.weights, dtype=complex).reshape(-1)
        if weights.size != centers.shape[0]:
            raise StructuralError("weights and centers disagree on the number of terms")
        merged: dict[tuple, complex] = {}
        for row, w in zip(map(tuple, centers), weights):
            merged[row] = merged.get(row, 0j) + w
        keys = sorted(merged)
        centers = np.array(keys, dtype=float).reshape(-1, widths.size)
        weights = np.array([merged[k] for k in keys], dtype=complex)
        for arr in (widths, centers, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)
        if not self.names:
            object.__setattr__(self, "names", tuple(str(i) for i in range(widths.size)))

    @property
    def n_pointers(self) -> int:
        return self.widths.size

    def index(self, pointer: int | str) -> int:
        if isinstance(pointer, str):
            try:
                return self.names.index(pointer)
            except ValueError:
                raise StructuralError(f"no pointer named {pointer!r}; have {self.names}") from None
        return pointer

    def norm2(self) -> float:
        if self.weights.size == 0:
            return 0.0
        c, _ = _pair_terms(self.weights, self.centers, self.widths, 0)
        return float(c.sum().real)

    def _moments(self, k: int):
        c, m = _pair_terms(self.weights, self.centers, self.widths, k)
        total = c.sum().real
        if not total > 0:
            raise ZeroDivisionError("pointer state has zero norm")
        return c, m, total

    def mean(self, pointer: int | str = 0) -> float:
        """Exact <x> of one pointer, all other pointers traced out."""
        k = self.index(pointer)
        c, m, total = self._moments(k)
        return float((c * m).sum().real / total)

    def variance(self, pointer: int | str = 0) -> float:
        k = self.index(pointer)
        c, m, total = self._moments(k)
        mean = (c * m).sum().real / total
        second = (c * (m * m + 0.5 * self.widths[k] ** 2)).sum().real / total
        return float(second - mean * mean)

    def momentum_mean(self, pointer: int | str = 0) -> float:
        """Exact <p> of one pointer (hbar = 1).

        Uses <phi_a|p|phi_b> = 1j * (a - b) / (2 width**2) * <phi_a|phi_b>.
        """
        k = self.index(pointer)
        c, _, total = self._moments(k)
        a = self.centers[:, k]
        dp = 1j * (a[:, None] - a[None, :]) / (2.0 * self.widths[k] ** 2)
        return float((c * dp).sum().real / total)

    def density(self, x, pointer: int | str = 0, normalized: bool = True) -> np.ndarray:
        """Marginal probability density of one pointer at positions ``x``."""
        k = self.index(pointer)
        c, m = _pair_terms(self.weights, self.centers, self.widths, k)
        sigma = self.widths[k] / math.sqrt(2.0)
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - m.reshape(-1)) / sigma
        g = np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
        out = (g @ c.reshape(-1)).real
        if normalized:
            out = out / c.sum().real
        return out

    def cdf(self, x, pointer: int | str = 0) -> np.ndarray:
        """Closed-form marginal CDF of one pointer."""
        k = self.index(pointer)
        c, m = _pair_terms(self.weights, self.centers, self.widths, k)
        sigma = self.widths[k] / math.sqrt(2.0)
        x = np.asarray(x, dtype=float)
        out = (ndtr((x[..., None] - m.reshape(-1)) / sigma) @ c.reshape(-1)).real
        return out / c.sum().real

    def gaussian_sum(self) -> "GaussianSum":
        if self.n_pointers != 1:
            raise StructuralError("only a single-pointer state is a GaussianSum")
        return GaussianSum(float(self.widths[0]), self.weights, self.centers[:, 0])

    def marginal_support(self, pointer: int | str = 0) -> tuple[float, float]:
        k = self.index(pointer)
        return float(self.centers[:, k].min()), float(self.centers[:, k].max())


@dataclass(frozen=True, eq=False)
class GaussianSum:
    """Single-pointer wavefunction sum_i w_i phi_{a_i}(x)."""

    width: float
    weights: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")
        w = np.asarray(self.weights, dtype=complex).reshape(-1)
        a = np.asarray(self.centers, dtype=float).reshape(-1)
        if w.size != a.size:
            raise StructuralError("weights and centers must have the same length")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "centers", a)

    @classmethod
    def single(cls, center: float = 0.0, width: float = 1.0) -> "GaussianSum":
        return cls(width, [1.0], [center])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        norm = (math.pi * self.width**2) ** -0.25
        g = norm * np.exp(-((x[..., None] - self.centers) ** 2) / (2 * self.width**2))
        return g @ self.weights

    def gram(self) -> np.ndarray:
        return gaussian_overlap(self.centers[:, None], self.centers[None, :], self.width)

    def norm2(self) -> float:
        w = self.weights
        return float((np.conj(w) @ self.gram() @ w).real)

    def as_pointer_state(self) -> PointerState:
        return PointerState([self.width], self.weights, self.centers[:, None])


def pointer_expectation(pointer: GaussianSum | PointerState, which: int | str = 0) -> float:
    """Exact mean position of a Gaussian-sum pointer.

    <x> = sum_ij conj(w_i) w_j (a_i + a_j)/2 S_ij / sum_ij conj(w_i) w_j S_ij,
    with S_ij = exp(-(a_i - a_j)**2 / (4 width**2)).
    """
    if isinstance(pointer, PointerState):
        return pointer.mean(which)
    w = pointer.weights
    a = pointer.centers
    cw = np.conj(w)[:, None] * w[None, :] * pointer.gram()
    den = cw.sum().real
    if not den > 0:
        raise ZeroDivisionError("pointer state has zero norm")
    return float((cw * 0.5 * (a[:, None] + a[None, :])).sum().real / den)


def first_order_shift(wv: WeakValue | complex, cfg: PointerConfig) -> float:
    """Linear-response pointer shift, ``shift * Re(wv)``."""
    return cfg.shift * complex(wv).real


def leak_ratio(epsilon: float) -> tuple[float, float]:
    """Flux leaking through a dark port spoiled by one weak coupling.

    Returns ``(exact, asymptotic)`` with exact = (1 - exp(-eps**2/4)) / 2 and
    asymptotic = eps**2 / 8, relative to the flux of the undisturbed arm.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    x = epsilon * epsilon / 4.0
    return -math.expm1(-x) / 2.0, epsilon * epsilon / 8.0


@dataclass(frozen=True, eq=False)
class JointState:
    """Particle-pointer state at one boundary of a circuit.

    ``branches`` maps a tuple of shift counts (one per coupling) to the particle
    amplitude vector of that branch; the pointer part of a branch is the product
    of Gaussians centred at ``count * shift``.
    """

    circuit: Circuit
    couplings: tuple[tuple[str, PointerConfig], ...]
    branches: Mapping[tuple[int, ...], np.ndarray] = field(repr=False)
    boundary: int = 0

    @property
    def points(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.couplings)

    @property
    def widths(self) -> np.ndarray:
        return np.array([cfg.width for _, cfg in self.couplings], dtype=float)

    @property
    def shifts(self) -> np.ndarray:
        return np.array([cfg.shift for _, cfg in self.couplings], dtype=float)

    def pointer_index(self, point: str) -> int:
        try:
            return self.points.index(point)
        except ValueError:
            raise StructuralError(f"point {point!r} is not coupled; coupled: {self.points}") from None

    def _gram(self, keys: Sequence[tuple[int, ...]]) -> np.ndarray:
        counts = np.array(keys, dtype=float).reshape(len(keys), -1)
        g = np.ones((len(keys), len(keys)))
        for k, (shift, width) in enumerate(zip(self.shifts, self.widths)):
            a = counts[:, k] * shift
            g = g * gaussian_overlap(a[:, None], a[None, :], width)
        return g

    def probability(self) -> float:
        """Squared norm of the joint state."""
        keys = list(self.branches)
        if not keys:
            return 0.0
        vecs = np.array([self.branches[k] for k in keys])
        return float(np.einsum("ij,ik,jk->", self._gram(keys), vecs.conj(), vecs).real)

    def mode_probability(self, mode: str) -> float:
        """Probability of finding the particle in ``mode`` at this boundary."""
        space = self.circuit.space
        mask = np.array([lbl.path == mode for lbl in space.labels])
        return self.restrict(mask).probability()

    def restrict(self, mask: np.ndarray) -> "JointState":
        return JointState(self.circuit, self.couplings,
                          {k: np.where(mask, v, 0) for k, v in self.branches.items()}, self.boundary)

    def conditioned(self, post: Selection) -> "JointState":
        """Project the particle onto a post-selected outcome (unnormalized)."""
        if self.boundary != self.circuit.final_boundary:
            raise StructuralError("post-selection applies at the final boundary")
        f = seed_state(self.circuit, post).amplitudes
        return JointState(self.circuit, self.couplings,
                          {k: f * np.vdot(f, v) for k, v in self.branches.items()}, self.boundary)

    def pointer_state(self, post: Selection) -> PointerState:
        f = seed_state(self.circuit, post).amplitudes
        keys = sorted(self.branches)
        centers = np.array(keys, dtype=float).reshape(len(keys), -1) * self.shifts
        weights = np.array([np.vdot(f, self.branches[k]) for k in keys])
        return PointerState(self.widths, weights, centers, names=self.points)


def couple(circuit: Circuit, pre: Selection | PureState,
           couplings: Iterable[tuple[str, PointerConfig]], boundary: int | None = None) -> JointState:
    """Evolve particle and pointers through the circuit up to ``boundary``.

    Each pointer starts as a single Gaussian at 0.  When the particle's state
    reaches the boundary of a coupled point, the part of every branch in the
    point's mode moves to the branch with that pointer shifted once more.
    """
    couplings = tuple((p, cfg) for p, cfg in couplings)
    names = [p for p, _ in couplings]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate coupling points: {names}")
    state = pre.state if isinstance(pre, Selection) else pre
    boundary = circuit.final_boundary if boundary is None else boundary
    forward_propagate(circuit, state, 0)  # validates space and circuit
    space = circuit.space
    at: dict[int, list[tuple[int, np.ndarray]]] = defaultdict(list)
    for k, (p, _) in enumerate(couplings):
        pt = circuit.point(p)
        mask = np.array([lbl.path == pt.mode for lbl in space.labels])
        at[pt.boundary].append((k, mask))

    branches: dict[tuple[int, ...], np.ndarray] = {(0,) * len(couplings): state.amplitudes.copy()}
    unitaries = circuit.stage_unitaries
    for b in range(boundary + 1):
        for k, mask in at.get(b, ()):
            moved: dict[tuple[int, ...], np.ndarray] = {}
            for key, vec in branches.items():
                here = np.where(mask, vec, 0)
                stay = vec - here
                shifted = key[:k] + (key[k] + 1,) + key[k + 1:]
                moved[key] = moved.get(key, 0) + stay
                moved[shifted] = moved.get(shifted, 0) + here
            branches = {key: v for key, v in moved.items() if np.any(v != 0)}
        if b < boundary:
            branches = {key: unitaries[b] @ v for key, v in branches.items()}
    return JointState(circuit, couplings, branches, boundary)


def postselect(joint: JointState, post: Selection) -> tuple[PointerState, float]:
    """Pointer wavefunction conditioned on ``post`` and the probability of ``post``."""
    ps = joint.pointer_state(post)
    return ps, max(ps.norm2(), 0.0)


@dataclass(frozen=True, eq=False)
class Readout:
    """Outcome of a projective test of whether a pointer is still in its initial state.

    Probabilities are joint with the post-selection if one was applied.
    """

    found_initial: float
    found_orthogonal: float
    initial: JointState
    orthogonal: JointState


def projective_readout(joint: JointState, point: str, post: Selection | None = None) -> Readout:
    """Project pointer ``point`` onto its initial Gaussian and onto the complement."""
    k = joint.pointer_index(point)
    if post is not None:
        joint = joint.conditioned(post)
    shift, width = joint.shifts[k], joint.widths[k]
    init: dict[tuple[int, ...], np.ndarray] = {}
    orth: dict[tuple[int, ...], np.ndarray] = {}
    for key, vec in joint.branches.items():
        home = key[:k] + (0,) + key[k + 1:]
        s = float(gaussian_overlap(key[k] * shift, 0.0, width))
        init[home] = init.get(home, 0) + s * vec
        orth[key] = orth.get(key, 0) + vec
        orth[home] = orth.get(home, 0) - s * vec
    j_init = JointState(joint.circuit, joint.couplings, init, joint.boundary)
    j_orth = JointState(joint.circuit, joint.couplings, orth, joint.boundary)
    return Readout(j_init.probability(), max(j_orth.probability(), 0.0), j_init, j_orth)
