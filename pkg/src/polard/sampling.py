"""Action-selection strategies and posterior-subset construction.

Regret minimization draws utility vectors from the posterior and executes
each draw's argmax (Thompson sampling) over a subset built from a random
line through the believed optimum plus all visited actions.  Active
learning scores candidates inside a region of interest by the mutual
information between the latent utility and the next feedback outcome,
over a subset of R random actions plus visited ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .actions import Action, ActionSet, ActionSpace, snap_to_grid
from .feedback import Link, NoiseParams, OrdinalScale, _g_with_derivs, link_eval
from .posterior import PosteriorModel, Subset

MODES = ("regret_min", "active_learning", "random")


@dataclass
class SamplerConfig:
    """Knobs for all sampling strategies; fields map 1:1 to config keys."""

    mode: str = "regret_min"
    n: int = 1
    b: int = 1
    R: int = 500
    roi_lambda: float = 0.45
    b_roi: float = 0.0
    use_subset: bool = True
    mc_samples: int = 1000
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n < 1:
            raise ValueError(f"n (samples per iteration) must be >= 1, got {self.n}")
        if self.b < 0:
            raise ValueError(f"b (buffer size) must be >= 0, got {self.b}")
        if self.R < 1:
            raise ValueError(f"R (random-subset size) must be >= 1, got {self.R}")
        if self.mc_samples < 1:
            raise ValueError(f"mc_samples must be >= 1, got {self.mc_samples}")
        if self.mode == "active_learning" and self.n != 1:
            warnings.warn("active_learning is designed for one sample per iteration (n = 1); "
                          f"n = {self.n} uses greedy repeated selection", stacklevel=2)


@dataclass
class Buffer:
    """The most recent <= capacity executed actions, most recent last."""

    capacity: int
    actions: list[int] = field(default_factory=list)

    def push(self, new_actions) -> None:
        self.actions.extend(int(a) for a in new_actions)
        if self.capacity >= 0:
            del self.actions[: max(0, len(self.actions) - self.capacity)]


def _sqrt_factor(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular factor of a symmetrized covariance, with escalating
    diagonal jitter; near-singular Laplace covariances are routine."""
    sym = 0.5 * (cov + cov.T)
    if not np.any(sym):  # exactly deterministic posterior
        return np.zeros_like(sym)
    scale = max(float(np.max(np.diag(sym))), 1.0)
    jitter = 0.0
    while True:
        try:
            mat = sym if jitter == 0.0 else sym + jitter * np.eye(sym.shape[0])
            return np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * scale if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-4 * scale:
                raise


def draw_utilities(post: PosteriorModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` draws from N(mean, covariance), shape (count, |S|)."""
    L = _sqrt_factor(post.covariance)
    z = rng.standard_normal((count, len(post.subset)))
    return post.mean + z @ L.T


def thompson_sample(post: PosteriorModel, n: int, rng: np.random.Generator) -> list[int]:
    """n independent draws; each returns the argmax action of its own draw.

    Ties break toward the smallest flat index (subset positions are stored
    ascending); duplicates across the n draws are allowed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    draws = draw_utilities(post, n, rng)
    picks = np.argmax(draws, axis=1)
    indices = post.subset.actions.indices
    return [indices[p] for p in picks]


def random_sample(space: ActionSpace, n: int, rng: np.random.Generator) -> list[int]:
    """n uniform i.i.d. draws over the whole space (with replacement)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return [int(i) for i in rng.integers(0, space.cardinality, size=n)]


def estimate_optimum(post: PosteriorModel, within: ActionSet | None = None) -> int:
    """Action maximizing the posterior mean, optionally restricted to a set.

    Ties break toward the smallest flat index.
    """
    indices = post.subset.actions.indices
    mean = post.mean
    if within is not None:
        members = set(within.indices)
        keep = [i for i, a in enumerate(indices) if a in members]
        if not keep:
            raise ValueError("no posterior action lies inside the restriction set")
        keep = np.asarray(keep, dtype=int)
        best = keep[np.argmax(mean[keep])]
    else:
        if len(indices) == 0:
            raise ValueError("posterior subset is empty")
        best = int(np.argmax(mean))
    return indices[best]


def line_through(space: ActionSpace, anchor: Action, direction: np.ndarray) -> ActionSet:
    """Grid actions hit by walking the line anchor + t * direction.

    The walk step is half the smallest grid step; every point is snapped to
    the grid and the results deduplicated, yielding a connected on-grid
    polyline that always contains the anchor.
    """
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        return ActionSet.of([anchor.index])
    direction = direction / norm
    h = 0.5 * min(d.step for d in space.dims)
    origin = np.asarray(anchor.coords, dtype=float)

    # Parameter range until the ray exits the bounding box in each direction.
    t_hi, t_lo = np.inf, -np.inf
    for j, d in enumerate(space.dims):
        if direction[j] == 0:
            continue
        t_a = (d.lower - origin[j]) / direction[j]
        t_b = (d.upper - origin[j]) / direction[j]
        t_hi = min(t_hi, max(t_a, t_b))
        t_lo = max(t_lo, min(t_a, t_b))
    if not np.isfinite(t_hi):
        return ActionSet.of([anchor.index])

    steps_neg = int(np.floor(max(-t_lo, 0.0) / h))
    steps_pos = int(np.floor(max(t_hi, 0.0) / h))
    ts = [k * h for k in range(-steps_neg, steps_pos + 1)] + [t_lo, t_hi]
    hits = {snap_to_grid(space, origin + t * direction).index for t in ts}
    hits.add(anchor.index)
    return ActionSet.of(hits)


def construct_regret_subset(space: ActionSpace, visited: ActionSet, anchor: Action,
                            rng: np.random.Generator) -> Subset:
    """Union of a random line through the anchor with the visited actions."""
    direction = rng.standard_normal(space.ndim)
    while np.linalg.norm(direction) == 0:  # pragma: no cover - probability zero
        direction = rng.standard_normal(space.ndim)
    line = line_through(space, anchor, direction)
    return Subset(line.union(visited).union([anchor.index]))


def construct_active_subset(space: ActionSpace, visited: ActionSet, R: int,
                            rng: np.random.Generator) -> Subset:
    """R actions drawn uniformly without replacement, unioned with visited."""
    if R < 1:
        raise ValueError("R must be >= 1")
    k = min(R, space.cardinality)
    rand = rng.choice(space.cardinality, size=k, replace=False)
    return Subset(ActionSet.of(rand).union(visited))


def roi_filter(post: PosteriorModel, roi_lambda: float, b_roi: float,
               use_std: bool = True) -> ActionSet:
    """Actions of S whose optimistic utility bound exceeds b_roi.

    The bound is mean + lambda * std by default; ``use_std=False`` switches
    to the raw posterior variance for the optimism term instead.
    """
    spread = post.std() if use_std else np.clip(np.diag(post.covariance), 0.0, None)
    score = post.mean + roi_lambda * spread
    keep = [a for a, s in zip(post.subset.actions.indices, score) if s > b_roi]
    return ActionSet.of(keep)


def information_gain_scores(post: PosteriorModel, candidates: ActionSet,
                            buffer_actions: list[int], noise: NoiseParams,
                            scale: OrdinalScale, link: Link, mc_samples: int,
                            rng: np.random.Generator,
                            use_ordinal: bool = True,
                            use_preferences: bool = True,
                            draws: np.ndarray | None = None) -> np.ndarray:
    """Monte-Carlo mutual information between utility and next feedback.

    The outcome for a candidate a is the joint of its ordinal label with the
    pairwise preferences between a and every buffer action, enumerated
    exactly (r * 2^b outcomes).  I = H(mean outcome distribution) minus the
    mean over utility draws of the conditional outcome entropy; entropies in
    nats.  ``draws`` may inject a precomputed (T, |S|) utility sample.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if draws is None:
        draws = draw_utilities(post, mc_samples, rng)
    if np.all(draws == draws[0]):  # deterministic posterior: I is exactly 0
        return np.zeros(len(candidates))
    T = draws.shape[0]
    subset = post.subset
    buf_pos = np.asarray([subset.position(a) for a in buffer_actions], dtype=int)
    nb = buf_pos.size if use_preferences else 0
    r = scale.num_categories

    thresholds = np.asarray(scale.thresholds, dtype=float)
    scores = np.empty(len(candidates))
    for ci, a in enumerate(candidates.indices):
        u = draws[:, subset.position(a)]  # (T,)
        parts = []
        if use_ordinal:
            z = (thresholds[None, :] - u[:, None]) / noise.c_o  # (T, r-1)
            cdf, _, _ = _g_with_derivs(link, z)
            ones = np.ones((T, 1))
            cat = np.concatenate([cdf, ones], axis=1) - np.concatenate(
                [np.zeros((T, 1)), cdf], axis=1)  # (T, r)
            parts.append(np.clip(cat, 0.0, 1.0))
        if nb:
            zp = (u[:, None] - draws[:, buf_pos]) / noise.c_p  # (T, b)
            p_win = link_eval(link, zp)
            for j in range(nb):
                pj = np.stack([p_win[:, j], 1.0 - p_win[:, j]], axis=1)  # (T, 2)
                parts.append(pj)
        if not parts:
            scores[ci] = 0.0
            continue
        joint = parts[0]
        for p in parts[1:]:
            joint = joint[:, :, None] * p[:, None, :]
            joint = joint.reshape(T, -1)
        marginal = joint.mean(axis=0)
        h_marginal = -np.sum(np.where(marginal > 0, marginal * np.log(
            np.maximum(marginal, 1e-300)), 0.0))
        h_cond = -np.sum(np.where(joint > 0, joint * np.log(
            np.maximum(joint, 1e-300)), 0.0), axis=1)
        scores[ci] = h_marginal - float(np.mean(h_cond))
    return scores


def info_gain_sample(post: PosteriorModel, candidates: ActionSet, buffer: Buffer,
                     noise: NoiseParams, scale: OrdinalScale, link: Link,
                     mc_samples: int, rng: np.random.Generator,
                     use_ordinal: bool = True, use_preferences: bool = True) -> int:
    """Candidate maximizing the information-gain score; ties break toward the
    smallest flat index (candidates are stored ascending)."""
    if len(candidates) == 0:
        raise ValueError("candidate set must be nonempty")
    scores = information_gain_scores(post, candidates, buffer.actions, noise, scale,
                                     link, mc_samples, rng,
                                     use_ordinal=use_ordinal,
                                     use_preferences=use_preferences)
    return candidates.indices[int(np.argmax(scores))]
