"""Ground-truth utilities and simulated feedback for closed-loop evaluation.

A synthetic oracle owns a true utility function plus its own noise levels
(independent of the levels the learner assumes) and answers every query the
engine would otherwise pose to a human: preferences and coactive
comparisons flip with the link probability of the true utility gap, and
ordinal labels are drawn from the true category distribution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .actions import Action, ActionSpace
from .feedback import CoactiveRecord, Link, OrdinalRecord, PreferenceRecord, link_eval

# Standard Hartmann coefficients (negated at evaluation so larger = better).
_HARTMANN3_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN3_A = np.array([
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
])
_HARTMANN3_P = 1e-4 * np.array([
    [3689.0, 1170.0, 2673.0],
    [4699.0, 4387.0, 7470.0],
    [1091.0, 8732.0, 5547.0],
    [381.0, 5743.0, 8828.0],
])
_HARTMANN6_ALPHA = _HARTMANN3_ALPHA
_HARTMANN6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
_HARTMANN6_P = 1e-4 * np.array([
    [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
    [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
    [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
    [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
])


def _hartmann(x: np.ndarray, alpha: np.ndarray, A: np.ndarray, P: np.ndarray) -> float:
    inner = np.sum(A * (x[None, :] - P) ** 2, axis=1)
    return float(-np.sum(alpha * np.exp(-inner)))


@dataclass(frozen=True)
class BenchmarkFunction:
    """A true utility: Hartmann benchmark, explicit grid table, or callable."""

    kind: str = "hartmann3"
    table: tuple[float, ...] | None = None
    fn: Callable[[np.ndarray], float] | None = None

    KINDS = ("hartmann3", "hartmann6", "grid_table", "custom")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"benchmark kind must be one of {self.KINDS}, got {self.kind!r}")
        if self.kind == "grid_table" and self.table is None:
            raise ValueError("grid_table benchmark needs explicit values")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom benchmark needs a callable")


def load_grid_table(path: str) -> tuple[list[dict], BenchmarkFunction]:
    """Load {"dims": [...], "values": [row-major utilities]} from JSON."""
    with open(path) as fh:
        doc = json.load(fh)
    values = tuple(float(v) for v in doc["values"])
    return doc["dims"], BenchmarkFunction(kind="grid_table", table=values)


def eval_benchmark(fn: BenchmarkFunction, coords: Sequence[float],
                   index: int | None = None) -> float:
    """Utility of a point: negated Hartmann value or table lookup."""
    x = np.asarray(coords, dtype=float)
    if fn.kind in ("hartmann3", "hartmann6"):
        d = 3 if fn.kind == "hartmann3" else 6
        if x.shape != (d,):
            raise ValueError(f"{fn.kind} expects {d} coordinates, got shape {x.shape}")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError(f"{fn.kind} is defined on [0,1]^{d}, got {x.tolist()}")
        if fn.kind == "hartmann3":
            return -_hartmann(x, _HARTMANN3_ALPHA, _HARTMANN3_A, _HARTMANN3_P)
        return -_hartmann(x, _HARTMANN6_ALPHA, _HARTMANN6_A, _HARTMANN6_P)
    if fn.kind == "grid_table":
        if index is None:
            raise ValueError("grid_table lookup needs the flat action index")
        return fn.table[index]
    return float(fn.fn(x))


@dataclass
class SyntheticOracle:
    """True utility plus simulated-noise parameters for feedback generation.

    Coactive suggestions come from Euclidean balls (radius eps1 while the
    true utility is at most f_eps1, radius eps2 up to f_eps2, none above);
    ball membership is measured in per-dimension normalized coordinates so
    the radii are comparable across heterogeneous parameter units.
    """

    truth: BenchmarkFunction
    c_p: float = 0.01
    c_c: float = 0.01
    c_o: float = 0.1
    ordinal_thresholds: tuple[float, ...] = ()
    eps1: float = 0.1
    eps2: float = 0.2
    f_eps1: float = 0.0
    f_eps2: float = 0.0
    link: Link = Link.SIGMOID
    rng_seed: int = 0
    _values: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        for name in ("c_p", "c_c", "c_o"):
            if getattr(self, name) <= 0:
                raise ValueError(f"oracle noise {name} must be > 0")
        if self.eps1 > self.eps2:
            raise ValueError(f"eps1 ({self.eps1}) must not exceed eps2 ({self.eps2})")
        if self.f_eps1 > self.f_eps2:
            raise ValueError(f"f_eps1 ({self.f_eps1}) must not exceed f_eps2 ({self.f_eps2})")
        ths = tuple(float(t) for t in self.ordinal_thresholds)
        if any(b <= a for a, b in zip(ths, ths[1:])):
            raise ValueError("oracle ordinal thresholds must be strictly increasing")
        object.__setattr__(self, "ordinal_thresholds", ths)

    @property
    def num_categories(self) -> int:
        return len(self.ordinal_thresholds) + 1

    def utility(self, action: Action) -> float:
        return eval_benchmark(self.truth, action.coords, action.index)

    def utilities(self, space: ActionSpace) -> np.ndarray:
        """True utility of every action in the space, cached per space."""
        key = id(space)
        if key not in self._values:
            vals = np.array([
                eval_benchmark(self.truth, space.coords_matrix()[i], i)
                for i in range(space.cardinality)
            ])
            self._values[key] = vals
        return self._values[key]

    def best_action(self, space: ActionSpace) -> int:
        return int(np.argmax(self.utilities(space)))

    def true_label(self, action: Action) -> int:
        """Noise-free ordinal bin of the true utility."""
        ths = np.asarray(self.ordinal_thresholds)
        return int(np.searchsorted(ths, self.utility(action), side="right")) + 1


def synth_preference(oracle: SyntheticOracle, a1: Action, a2: Action,
                     rng: np.random.Generator) -> PreferenceRecord:
    """a1 wins with probability g((r(a1) - r(a2)) / c_p)."""
    p = link_eval(oracle.link, (oracle.utility(a1) - oracle.utility(a2)) / oracle.c_p)
    if rng.random() < p:
        return PreferenceRecord(winner=a1.index, loser=a2.index)
    return PreferenceRecord(winner=a2.index, loser=a1.index)


def synth_coactive(oracle: SyntheticOracle, a: Action, space: ActionSpace,
                   rng: np.random.Generator) -> CoactiveRecord | None:
    """Best in-ball action as a (possibly flipped) implicit preference.

    Returns None when the action is already good enough (true utility above
    f_eps2) or when no strictly better action exists inside the ball.
    """
    u_a = oracle.utility(a)
    if u_a <= oracle.f_eps1:
        radius = oracle.eps1
    elif u_a <= oracle.f_eps2:
        radius = oracle.eps2
    else:
        return None

    normed = space.normalized_coords_matrix()
    center = normed[a.index]
    dist = np.linalg.norm(normed - center, axis=1)
    in_ball = np.flatnonzero(dist <= radius + 1e-12)
    values = oracle.utilities(space)[in_ball]
    suggested = int(in_ball[np.argmax(values)])
    if suggested == a.index or values.max() <= u_a:
        return None

    p_keep = link_eval(oracle.link, (values.max() - u_a) / oracle.c_c)
    if rng.random() < p_keep:
        return CoactiveRecord(suggested=suggested, original=a.index)
    return CoactiveRecord(suggested=a.index, original=suggested)


def synth_ordinal(oracle: SyntheticOracle, a: Action,
                  rng: np.random.Generator) -> OrdinalRecord:
    """Label drawn from the true ordinal category distribution."""
    u = oracle.utility(a)
    ths = np.asarray(oracle.ordinal_thresholds, dtype=float)
    if ths.size == 0:
        return OrdinalRecord(action=a.index, label=1)
    cdf = np.asarray([link_eval(oracle.link, (b - u) / oracle.c_o) for b in ths])
    probs = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    label = int(rng.choice(len(probs), p=probs)) + 1
    return OrdinalRecord(action=a.index, label=label)


def hartmann_space(kind: str, points_per_dim: int) -> ActionSpace:
    """Uniform grid over [0,1]^d for a Hartmann benchmark."""
    from .actions import DimensionSpec, build_space

    d = 3 if kind == "hartmann3" else 6
    step = 1.0 / (points_per_dim - 1)
    return build_space([DimensionSpec(0.0, 1.0, step, name=f"x{i + 1}") for i in range(d)])
