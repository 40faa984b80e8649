"""Shared builders for small tracking instances."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from msglmb import (
    BirthSite,
    DynamicModel,
    Label,
    MeasurementModel,
    MultiObjectModel,
    UniformClutter,
)


def model_1d(
    births,
    p_s=0.9,
    p_d=0.8,
    lambda_c=0.05,
    region=(-25.0, 25.0),
    f=1.0,
    q=0.5,
    r=0.4,
) -> MultiObjectModel:
    """1-D state model with explicit birth entries (scan, index, prob, mean, var)."""
    sites = tuple(
        BirthSite(Label(scan, index), prob, [mean], [[var]])
        for scan, index, prob, mean, var in births
    )
    dyn = DynamicModel([[f]], [[q]], survival_prob=p_s, births=sites)
    clutter = UniformClutter(lambda_c, [list(region)])
    meas = MeasurementModel([[1.0]], [[r]], detection_prob=p_d, clutter=clutter)
    return MultiObjectModel(dyn, meas)


def birth_map(model: MultiObjectModel, k: int) -> dict:
    return {j: [s.label for s in model.dynamic.births_at(j)] for j in range(1, k + 1)}


def as_measurements(*scans) -> list[np.ndarray]:
    return [
        np.asarray(z, dtype=float).reshape(-1, 1) if len(z) else np.empty((0, 1))
        for z in scans
    ]


@pytest.fixture
def tiny_two_scan():
    """Two scans, one birth label per scan, one measurement per scan."""
    model = model_1d(
        births=[(1, 1, 0.3, 0.0, 1.0), (2, 1, 0.3, 0.5, 1.0)],
        p_s=0.9,
        p_d=0.8,
        lambda_c=0.05,
        q=0.5,
        r=0.4,
    )
    Z = as_measurements([0.3], [0.6])
    return model, Z


@pytest.fixture
def paper_rates_model():
    """Birth, survival and detection rates matching the survey preset."""
    return model_1d(
        births=[(1, 1, 0.04, 0.0, 1.0)],
        p_s=0.99,
        p_d=0.77,
        lambda_c=0.05,
    )


def random_toy_instance(rng: np.random.Generator):
    """A random enumerable instance: 2-3 scans, small birth spaces, 1-D state.

    Sized so exhaustive history enumeration stays in the low thousands.
    """
    k = int(rng.integers(2, 4))
    births = []
    n_first = int(rng.integers(1, 3))
    for i in range(n_first):
        births.append((1, i + 1, float(rng.uniform(0.1, 0.5)), float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 1.5))))
    for scan in range(2, k + 1):
        if rng.random() < 0.5:
            births.append((scan, 1, float(rng.uniform(0.1, 0.5)), float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 1.5))))
    model = model_1d(
        births,
        p_s=float(rng.uniform(0.7, 0.98)),
        p_d=float(rng.uniform(0.5, 0.9)),
        lambda_c=float(rng.uniform(0.02, 0.1)),
        f=float(rng.uniform(0.8, 1.1)),
        q=float(rng.uniform(0.4, 1.2)),
        r=float(rng.uniform(0.3, 1.0)),
    )
    max_meas = 2 if (n_first < 2 or k < 3) else 1
    Z = [
        np.asarray(rng.uniform(-4, 4, size=int(rng.integers(0, max_meas + 1))), dtype=float).reshape(-1, 1)
        for _ in range(k)
    ]
    return model, Z
