"""Qualitative feedback: data model and likelihoods.

Three feedback channels share one latent-utility model.  A pairwise
preference between actions is Bernoulli with success probability
``g((u_winner - u_loser) / c_p)``; a coactive suggestion is the same
comparison with noise ``c_c``; an ordinal label o has probability
``g((b_o - u) / c_o) - g((b_{o-1} - u) / c_o)`` for strictly increasing
thresholds b (b_0 = -inf, b_r = +inf implicit).

The link g is either the logistic sigmoid or the standard normal CDF.
Outputs feeding logarithms are clamped into (1e-15, 1 - 1e-15) so extreme
utility gaps never produce infinite objectives.  The derivative ratios
``g'/g`` and ``g''/g`` needed by the MAP solver are computed in log space
where required, so they stay finite far into the tails.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import special

PROB_EPS = 1e-15
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Link(enum.Enum):
    """Monotone map R -> (0,1) converting utility gaps to probabilities."""

    SIGMOID = "sigmoid"
    GAUSSIAN_CDF = "gaussian-cdf"

    @classmethod
    def parse(cls, name: str) -> "Link":
        for link in cls:
            if link.value == name:
                return link
        raise ValueError(f"unknown link function {name!r}; expected one of "
                         f"{[l.value for l in cls]}")


def _clamp(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def _check_finite(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("link argument must be finite")
    return x


def link_eval(link: Link, x):
    """g(x), clamped into (1e-15, 1 - 1e-15). Accepts scalars or arrays."""
    x = _check_finite(x)
    if link is Link.SIGMOID:
        g = special.expit(x)
    else:
        g = special.ndtr(x)
    out = _clamp(g)
    return float(out) if out.ndim == 0 else out


def link_d1(link: Link, x):
    """First derivative of g."""
    x = _check_finite(x)
    if link is Link.SIGMOID:
        g = special.expit(x)
        out = g * (1.0 - g)
    else:
        out = np.exp(-0.5 * x * x - _LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def link_d2(link: Link, x):
    """Second derivative of g."""
    x = _check_finite(x)
    if link is Link.SIGMOID:
        g = special.expit(x)
        out = g * (1.0 - g) * (1.0 - 2.0 * g)
    else:
        out = -x * np.exp(-0.5 * x * x - _LOG_SQRT_2PI)
    return float(out) if out.ndim == 0 else out


def _log_g(link: Link, z: np.ndarray) -> np.ndarray:
    """ln g(z), stable in the lower tail (no clamp saturation until ~1e-15)."""
    if link is Link.SIGMOID:
        # ln sigmoid(z) = -softplus(-z)
        out = -np.logaddexp(0.0, -z)
    else:
        out = special.log_ndtr(z)
    return np.maximum(out, math.log(PROB_EPS))


def _ratio_d1(link: Link, z: np.ndarray) -> np.ndarray:
    """g'(z) / g(z), computed without underflow for any finite z."""
    if link is Link.SIGMOID:
        return special.expit(-z)
    log_pdf = -0.5 * z * z - _LOG_SQRT_2PI
    return np.exp(log_pdf - special.log_ndtr(z))


def _ratio_d2(link: Link, z: np.ndarray) -> np.ndarray:
    """g''(z) / g(z)."""
    if link is Link.SIGMOID:
        return special.expit(-z) * (special.expit(-z) - special.expit(z))
    return -z * _ratio_d1(link, z)


def _g_with_derivs(link: Link, z: np.ndarray):
    """(g, g', g'') with the limits g(+-inf) = 1/0 and zero derivatives."""
    z = np.asarray(z, dtype=float)
    finite = np.isfinite(z)
    zf = np.where(finite, z, 0.0)
    if link is Link.SIGMOID:
        g = special.expit(zf)
        d1 = g * (1.0 - g)
        d2 = d1 * (1.0 - 2.0 * g)
    else:
        g = special.ndtr(zf)
        d1 = np.exp(-0.5 * zf * zf - _LOG_SQRT_2PI)
        d2 = -zf * d1
    g = np.where(finite, g, np.where(z > 0, 1.0, 0.0))
    d1 = np.where(finite, d1, 0.0)
    d2 = np.where(finite, d2, 0.0)
    return g, d1, d2


@dataclass(frozen=True)
class NoiseParams:
    """Per-channel noise magnitudes. Larger values flatten the likelihood.

    The recommended ordering is c_o > c_c > c_p (ordinal labels are the
    noisiest channel, preferences the most reliable).  Violating it is
    allowed but reported by :meth:`warnings`.  c_c has no published default;
    10 * c_p keeps the recommended ordering and is meant to be tuned.
    """

    c_p: float = 0.0015
    c_c: float = 0.015
    c_o: float = 0.1

    def __post_init__(self) -> None:
        for name in ("c_p", "c_c", "c_o"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"NoiseParams.{name} must be a positive real, got {v}")

    def warnings(self) -> list[str]:
        out = []
        if not (self.c_o > self.c_c > self.c_p):
            out.append(
                f"noise ordering c_o > c_c > c_p is recommended; got "
                f"c_o={self.c_o}, c_c={self.c_c}, c_p={self.c_p}"
            )
        return out


@dataclass(frozen=True)
class OrdinalScale:
    """r ordered categories separated by strictly increasing thresholds.

    ``thresholds`` holds b_1 .. b_{r-1}; b_0 = -inf and b_r = +inf are
    implicit.  Optional display names are carried for UI clients only.
    """

    num_categories: int
    thresholds: tuple[float, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        r = self.num_categories
        if r < 2:
            raise ValueError(f"need at least 2 ordinal categories, got {r}")
        ths = tuple(float(t) for t in self.thresholds)
        if len(ths) != r - 1:
            raise ValueError(f"expected {r - 1} thresholds for {r} categories, got {len(ths)}")
        if any(not math.isfinite(t) for t in ths):
            raise ValueError("ordinal thresholds must be finite")
        if any(b <= a for a, b in zip(ths, ths[1:])):
            raise ValueError(f"ordinal thresholds must be strictly increasing, got {ths}")
        object.__setattr__(self, "thresholds", ths)
        if self.names and len(self.names) != r:
            raise ValueError(f"expected {r} category names, got {len(self.names)}")
        object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def from_prior(cls, num_categories: int, prior_std: float = 1.0,
                   names: Sequence[str] = ()) -> "OrdinalScale":
        """Equal-prior-mass thresholds: b_i = prior_std * Phi^{-1}(i / r)."""
        r = num_categories
        qs = special.ndtri(np.arange(1, r) / r) * prior_std
        return cls(r, tuple(qs), tuple(names))

    def upper(self, label: int) -> float:
        """b_label (+inf for the top category)."""
        return self.thresholds[label - 1] if label < self.num_categories else math.inf

    def lower(self, label: int) -> float:
        """b_{label-1} (-inf for the bottom category)."""
        return self.thresholds[label - 2] if label > 1 else -math.inf

    def bin_of(self, u: float) -> int:
        """Noise-free category of a utility value (b_{o-1} <= u < b_o)."""
        return int(np.searchsorted(np.asarray(self.thresholds), u, side="right")) + 1


@dataclass(frozen=True)
class PreferenceRecord:
    winner: int
    loser: int

    def __post_init__(self) -> None:
        if self.winner == self.loser:
            raise ValueError("preference winner and loser must differ")


@dataclass(frozen=True)
class CoactiveRecord:
    """User-suggested improvement: implicit preference suggested > original."""

    suggested: int
    original: int

    def __post_init__(self) -> None:
        if self.suggested == self.original:
            raise ValueError("coactive suggestion must differ from the original action")


@dataclass(frozen=True)
class OrdinalRecord:
    action: int
    label: int


@dataclass
class FeedbackDataset:
    """The three append-only feedback collections of one session."""

    preferences: list[PreferenceRecord] = field(default_factory=list)
    coactive: list[CoactiveRecord] = field(default_factory=list)
    ordinal: list[OrdinalRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.preferences) + len(self.coactive) + len(self.ordinal)

    def referenced_actions(self) -> set[int]:
        acts: set[int] = set()
        for p in self.preferences:
            acts.update((p.winner, p.loser))
        for c in self.coactive:
            acts.update((c.suggested, c.original))
        for o in self.ordinal:
            acts.add(o.action)
        return acts


def pref_log_likelihood(u_winner: float, u_loser: float, c: float, link: Link) -> float:
    """ln g((u_winner - u_loser) / c), clamped."""
    if c <= 0:
        raise ValueError(f"noise parameter must be > 0, got {c}")
    z = (u_winner - u_loser) / c
    return float(_log_g(link, np.asarray(z)))


def _ordinal_category_prob(u, label: int, scale: OrdinalScale, c_o: float,
                           link: Link):
    """P(label | u): interval probability, computed from the better tail."""
    hi = scale.upper(label)
    lo = scale.lower(label)
    u = np.asarray(u, dtype=float)
    if label == 1:
        z = (hi - u) / c_o
        return link_eval(link, z) if np.isfinite(hi) else np.ones_like(u)
    if label == scale.num_categories:
        z = (lo - u) / c_o
        return link_eval(link, -z)  # 1 - g(z), without cancellation
    z1 = (hi - u) / c_o
    z2 = (lo - u) / c_o
    direct = link_eval(link, z1) - link_eval(link, z2)
    compl = link_eval(link, -z2) - link_eval(link, -z1)
    return np.where(z1 + z2 <= 0, direct, compl)


def ordinal_log_likelihood(u: float, label: int, scale: OrdinalScale, c_o: float,
                           link: Link) -> float:
    """ln of the ordinal category probability; boundary categories are exact."""
    if c_o <= 0:
        raise ValueError(f"noise parameter must be > 0, got {c_o}")
    if not (1 <= label <= scale.num_categories):
        raise ValueError(f"ordinal label {label} out of range [1, {scale.num_categories}]")
    p = _ordinal_category_prob(u, label, scale, c_o, link)
    return float(np.log(np.maximum(p, PROB_EPS)))


def dataset_log_likelihood(data: FeedbackDataset, utilities: np.ndarray,
                           index_map: Mapping[int, int], noise: NoiseParams,
                           scale: OrdinalScale, link: Link) -> float:
    """Joint log-likelihood of all feedback given utilities over a subset.

    ``index_map`` maps flat action indices to positions in ``utilities``;
    every action referenced by the data must be present (the likelihood is
    only defined over the subset the posterior is restricted to).
    """
    u = np.asarray(utilities, dtype=float)
    missing = data.referenced_actions() - set(index_map)
    if missing:
        raise KeyError(f"feedback references actions outside the subset: {sorted(missing)}")
    total = 0.0
    for rec in data.preferences:
        total += pref_log_likelihood(u[index_map[rec.winner]], u[index_map[rec.loser]],
                                     noise.c_p, link)
    for rec in data.coactive:
        total += pref_log_likelihood(u[index_map[rec.suggested]], u[index_map[rec.original]],
                                     noise.c_c, link)
    for rec in data.ordinal:
        total += ordinal_log_likelihood(u[index_map[rec.action]], rec.label, scale,
                                        noise.c_o, link)
    return total
