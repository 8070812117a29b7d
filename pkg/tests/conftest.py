"""Shared instance generators for solver and likelihood tests."""

from __future__ import annotations

import numpy as np
import pytest

from polard.actions import ActionSet, DimensionSpec, build_space
from polard.feedback import (
    CoactiveRecord,
    FeedbackDataset,
    Link,
    NoiseParams,
    OrdinalRecord,
    OrdinalScale,
    PreferenceRecord,
)
from polard.posterior import KernelConfig, MapProblem, Subset


def make_instance(rng: np.random.Generator, max_subset: int = 6, max_r: int = 4,
                  max_records: int = 5, link: Link | None = None,
                  space_side: int = 6) -> MapProblem:
    """Random small MAP instance: subset, mixed feedback, moderate noise.

    Noise magnitudes stay in [0.3, 1.5] so likelihood terms are smooth at
    the utility scales the finite-difference oracles probe.
    """
    space = build_space([
        DimensionSpec(0.0, 1.0, 1.0 / (space_side - 1), name="x"),
        DimensionSpec(0.0, 1.0, 1.0 / (space_side - 1), name="y"),
    ])
    m = int(rng.integers(2, max_subset + 1))
    subset = Subset(ActionSet.of(rng.choice(space.cardinality, size=m, replace=False)))
    idx = list(subset.actions.indices)

    def pick_pair() -> tuple[int, int]:
        i, j = rng.choice(len(idx), size=2, replace=False)
        return idx[int(i)], idx[int(j)]

    data = FeedbackDataset()
    r = int(rng.integers(2, max_r + 1))
    for _ in range(int(rng.integers(0, max_records + 1))):
        w, l = pick_pair()
        data.preferences.append(PreferenceRecord(w, l))
    for _ in range(int(rng.integers(0, max_records + 1))):
        s, o = pick_pair()
        data.coactive.append(CoactiveRecord(s, o))
    for _ in range(int(rng.integers(0, max_records + 1))):
        a = idx[int(rng.integers(0, len(idx)))]
        data.ordinal.append(OrdinalRecord(a, int(rng.integers(1, r + 1))))

    kernel = KernelConfig(signal_variance=1.0,
                          lengthscales=(float(rng.uniform(0.5, 2.0)),
                                        float(rng.uniform(0.5, 2.0))),
                          jitter=1e-5)
    noise = NoiseParams(c_p=float(rng.uniform(0.3, 1.0)),
                        c_c=float(rng.uniform(0.4, 1.2)),
                        c_o=float(rng.uniform(0.5, 1.5)))
    scale = OrdinalScale.from_prior(r, prior_std=1.0)
    if link is None:
        link = Link.SIGMOID if rng.random() < 0.5 else Link.GAUSSIAN_CDF
    return MapProblem(subset, space, data, kernel, noise, scale, link)


def fd_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function."""
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_jacobian(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of a vector function."""
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=1)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
