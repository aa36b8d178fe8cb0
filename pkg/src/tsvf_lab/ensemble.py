"""Monte Carlo ensembles of pre- and post-selected runs with weakly coupled pointers.

Every trial samples a detector outcome from the exact outcome probabilities
and, when the outcome is the post-selected one, a reading of every pointer
from its exact conditional density.  Random numbers come from a counter-based
generator: trial ``i`` reads the Philox4x64-10 stream keyed by the master seed
starting at block ``i * blocks_per_trial``.  A trial's draws therefore do not
depend on how the trials are split across threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import scenarios
from .errors import ImpossiblePostSelection, StructuralError
from .pointer import PointerConfig, PointerState, couple, first_order_shift, postselect
from .tsvf import IMPOSSIBLE_THRESHOLD, point_projector, two_state_at, weak_value

__all__ = [
    "RNG_ALGORITHM",
    "GRID_POINTS",
    "GRID_PADDING",
    "EnsembleConfig",
    "PointEstimate",
    "EnsembleResult",
    "run_ensemble",
    "detectability",
    "trial_uniforms",
    "InverseCDFSampler",
]

RNG_ALGORITHM = "numpy.random.Philox (Philox4x64-10); key = master seed; trial i starts at block i*blocks_per_trial"
GRID_POINTS = 4096
GRID_PADDING = 6.0  # in pointer widths beyond the extreme centers
CHUNK = 8192
_U53 = 2.0 ** -53

CSV_HEADER = ("point", "weak_value_re", "weak_value_im", "predicted_shift", "estimated_shift",
              "stderr", "n_postselected", "z")


@dataclass(frozen=True)
class EnsembleConfig:
    scenario: str
    post: str
    couplings: tuple[tuple[str, float], ...]
    width: float = 1.0
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple((str(p), float(e)) for p, e in self.couplings))
        if int(self.trials) < 1:
            raise ValueError("trials must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError("width must be positive")
        for p, e in self.couplings:
            if not math.isfinite(e):
                raise ValueError(f"coupling strength at {p!r} is not finite")
        names = [p for p, _ in self.couplings]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate coupling points: {names}")

    @classmethod
    def all_points(cls, scenario: str, post: str, epsilon: float, points: Sequence[str] | None = None,
                   **kw) -> "EnsembleConfig":
        """Couple every marked point of the preset with the same strength."""
        if points is None:
            points = scenarios.load(scenario).points
        return cls(scenario, post, tuple((p, epsilon) for p in points), **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["couplings"] = [{"point": p, "epsilon": e} for p, e in self.couplings]
        return d


@dataclass(frozen=True)
class PointEstimate:
    point: str
    estimated_shift: float
    stderr: float
    n_postselected: int
    exact_shift: float
    weak_value: complex | None
    predicted_shift: float
    z: float
    predicted_z: float
    exact_momentum: float = float("nan")

    @property
    def stderr_defined(self) -> bool:
        return self.n_postselected >= 2 and math.isfinite(self.stderr)

    def csv_row(self) -> tuple:
        wv = self.weak_value
        return (self.point, wv.real if wv is not None else math.nan, wv.imag if wv is not None else math.nan,
                self.predicted_shift, self.estimated_shift, self.stderr, self.n_postselected, self.z)

    def to_dict(self) -> dict:
        wv = self.weak_value
        return {
            "point": self.point,
            "weak_value": None if wv is None else [wv.real, wv.imag],
            "predicted_shift": self.predicted_shift,
            "exact_shift": self.exact_shift,
            "exact_momentum_shift": self.exact_momentum,
            "estimated_shift": self.estimated_shift,
            "stderr": self.stderr,
            "stderr_defined": self.stderr_defined,
            "n_postselected": self.n_postselected,
            "z": self.z,
            "predicted_z": self.predicted_z,
        }


@dataclass(frozen=True)
class EnsembleResult:
    config: EnsembleConfig
    points: tuple[PointEstimate, ...]
    counts: dict[str, int]
    exact_probabilities: dict[str, float]
    postselection_rate: float
    rng: str = RNG_ALGORITHM
    extra: dict = field(default_factory=dict)

    def point(self, name: str) -> PointEstimate:
        for p in self.points:
            if p.point == name:
                return p
        raise KeyError(name)

    def csv_rows(self) -> list[tuple]:
        return [p.csv_row() for p in self.points]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "rng": self.rng,
            "grid": {"points": GRID_POINTS, "padding_widths": GRID_PADDING},
            "counts": dict(self.counts),
            "exact_probabilities": dict(self.exact_probabilities),
            "postselection_rate": self.postselection_rate,
            "points": [p.to_dict() for p in self.points],
        }


def trial_uniforms(seed: int, start: int, stop: int, per_trial: int) -> np.ndarray:
    """Uniform [0, 1) draws for trials ``start..stop-1``, shape (stop-start, per_trial).

    Row ``i - start`` depends only on ``seed`` and ``i``.
    """
    blocks = -(-per_trial // 4)
    gen = np.random.Philox(key=int(seed))
    gen.advance(start * blocks)
    n = stop - start
    raw = gen.random_raw(n * blocks * 4).reshape(n, blocks * 4)[:, :per_trial]
    return (raw >> np.uint64(11)).astype(np.float64) * _U53


class InverseCDFSampler:
    """Inverse-CDF sampling of one pointer's marginal density on a uniform grid.

    The density is tabulated on ``GRID_POINTS`` points spanning the extreme
    term centers padded by ``GRID_PADDING`` widths; the CDF is the cumulative
    trapezoid sum and is inverted by linear interpolation.
    """

    def __init__(self, state: PointerState, pointer: int | str = 0,
                 n_grid: int = GRID_POINTS, padding: float = GRID_PADDING):
        k = state.index(pointer)
        lo, hi = state.marginal_support(k)
        width = float(state.widths[k])
        self.grid = np.linspace(lo - padding * width, hi + padding * width, n_grid)
        dens = np.clip(state.density(self.grid, k), 0.0, None)
        steps = 0.5 * (dens[1:] + dens[:-1]) * np.diff(self.grid)
        cdf = np.concatenate([[0.0], np.cumsum(steps)])
        self.cdf = cdf / cdf[-1]

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.interp(u, self.cdf, self.grid)


def _thread_count(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("TSVF_LAB_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _safe_weak_value(preset, post, point) -> complex | None:
    try:
        tsv = two_state_at(preset.circuit, preset.pre, post, point)
    except ImpossiblePostSelection:
        return None
    return weak_value(tsv, point_projector(preset.circuit, point)).value


def run_ensemble(cfg: EnsembleConfig, threads: int | None = None) -> EnsembleResult:
    """Simulate ``cfg.trials`` runs and estimate the pointer shifts under post-selection.

    ``threads`` (default: ``TSVF_LAB_THREADS`` or the CPU count) only changes
    the wall time, never the result.
    """
    preset = scenarios.load(cfg.scenario)
    target = preset.post(cfg.post)
    for p, _ in cfg.couplings:
        preset.circuit.point(p)
    couplings = [(p, PointerConfig(cfg.width, e)) for p, e in cfg.couplings]
    joint = couple(preset.circuit, preset.pre, couplings)

    outcome_names = list(preset.posts)
    states, probs = [], []
    for name in outcome_names:
        ps, prob = postselect(joint, preset.posts[name])
        states.append(ps)
        probs.append(prob)
    probs = np.array(probs)
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise StructuralError(
            f"post-selections of {cfg.scenario} are not a complete set of outcomes (sum p = {total!r})"
        )
    cum = np.cumsum(probs / total)
    cum[-1] = 1.0
    t_idx = outcome_names.index(cfg.post)
    t_state = states[t_idx]
    n_ptr = len(couplings)

    # below the squared two-state threshold the target counts as impossible
    reachable = probs[t_idx] >= IMPOSSIBLE_THRESHOLD**2
    samplers = []
    if reachable:
        samplers = [InverseCDFSampler(t_state, k) for k in range(n_ptr)]

    def work(bounds):
        start, stop = bounds
        u = trial_uniforms(cfg.seed, start, stop, 1 + n_ptr)
        outcome = np.searchsorted(cum, u[:, 0], side="right")
        sel = outcome == t_idx
        pos = np.empty((int(sel.sum()), n_ptr))
        for k, sampler in enumerate(samplers):
            pos[:, k] = sampler(u[sel, 1 + k])
        return outcome, pos

    chunks = [(s, min(s + CHUNK, cfg.trials)) for s in range(0, cfg.trials, CHUNK)]
    n_threads = min(_thread_count(threads), len(chunks))
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    outcomes = np.concatenate([o for o, _ in parts])
    positions = np.concatenate([p for _, p in parts]) if parts else np.empty((0, n_ptr))

    counts_arr = np.bincount(outcomes, minlength=len(outcome_names))
    counts = {name: int(c) for name, c in zip(outcome_names, counts_arr)}
    n_sel = counts[cfg.post]
    rate = n_sel / cfg.trials
    p_target = float(probs[t_idx])

    estimates = []
    for k, (point, pcfg) in enumerate(couplings):
        x = positions[:, k]
        mean = math.fsum(x) / n_sel if n_sel else math.nan
        if n_sel >= 2:
            var = math.fsum((x - mean) ** 2) / (n_sel - 1)
            stderr = math.sqrt(var / n_sel)
        else:
            stderr = math.nan
        z = abs(mean) / stderr if (n_sel >= 2 and stderr > 0) else math.nan
        wv = _safe_weak_value(preset, target, point)
        predicted = first_order_shift(wv, pcfg) if wv is not None else math.nan
        if reachable:
            exact = t_state.mean(k)
            sigma = math.sqrt(t_state.variance(k))
            momentum = t_state.momentum_mean(k)
            predicted_z = abs(predicted) * math.sqrt(cfg.trials * p_target) / sigma
        else:
            exact = sigma = momentum = predicted_z = math.nan
        estimates.append(PointEstimate(point, mean, stderr, n_sel, exact, wv, predicted, z,
                                       predicted_z, momentum))

    return EnsembleResult(
        config=cfg,
        points=tuple(estimates),
        counts=counts,
        exact_probabilities={n: float(p) for n, p in zip(outcome_names, probs)},
        postselection_rate=rate,
    )


@dataclass(frozen=True)
class Detectability:
    point: str
    z: float | None
    predicted_z: float
    stderr_defined: bool


def detectability(cfg: EnsembleConfig, result: EnsembleResult | None = None,
                  threads: int | None = None) -> dict[str, Detectability]:
    """Observed |shift|/stderr per point next to its analytic prediction.

    The prediction is |shift * Re(wv)| * sqrt(N * p) / sigma, where p is the
    exact post-selection probability and sigma the exact conditional pointer
    spread (width/sqrt(2) to leading order).
    """
    if result is None:
        result = run_ensemble(cfg, threads=threads)
    out = {}
    for est in result.points:
        z = est.z if est.stderr_defined else None
        out[est.point] = Detectability(est.point, z, est.predicted_z, est.stderr_defined)
    return out
