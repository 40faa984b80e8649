"""Scenario generation: ground-truth trajectories and measurement sets
from the standard multi-object model, plus the built-in presets."""

from __future__ import annotations

import numpy as np

from .errors import ModelError
from .labels import Label, LabeledState, MultiObjectStateSequence
from .models import (
    BirthSite,
    DynamicModel,
    MeasurementModel,
    MultiObjectModel,
    Scenario,
    ScriptedTarget,
    UniformClutter,
)
from .validation import as_rng


def constant_velocity_model(dt: float, sigma_process: float, axes: int = 2):
    """White-noise-acceleration discretization of constant-velocity motion.

    State layout per axis is (position, velocity); axes are stacked, so a
    planar model has state [px, vx, py, vy].
    """
    f1 = np.array([[1.0, dt], [0.0, 1.0]])
    q1 = sigma_process**2 * np.array(
        [[dt**4 / 4.0, dt**3 / 2.0], [dt**3 / 2.0, dt**2]]
    )
    F = np.kron(np.eye(axes), f1)
    Q = np.kron(np.eye(axes), q1)
    return F, Q


def position_observation(axes: int = 2, sigma: float = 10.0):
    """Observe positions only, with isotropic Gaussian noise."""
    H = np.zeros((axes, 2 * axes))
    for a in range(axes):
        H[a, 2 * a] = 1.0
    R = sigma**2 * np.eye(axes)
    return H, R


def _recurring_births(scans, sites):
    """Expand per-scan birth sites: each (index, prob, mean, cov) spawns a
    labeled site at every scan."""
    births = []
    for scan in range(1, scans + 1):
        for index, prob, mean, cov in sites:
            births.append(BirthSite(Label(scan, index), prob, mean, cov))
    return tuple(births)


def survey_scenario() -> Scenario:
    """100-scan planar survey: three recurring birth sites, 66 expected
    clutter returns per scan, detection probability 0.77."""
    scans = 100
    F, Q = constant_velocity_model(dt=1.0, sigma_process=5.0)
    H, R = position_observation(sigma=10.0)
    P_b = np.diag([10.0, 10.0, 10.0, 10.0]) ** 2
    sites = [
        (1, 0.04, np.array([0.0, 0.0, 100.0, 0.0]), P_b),
        (2, 0.04, np.array([-100.0, 0.0, -100.0, 0.0]), P_b),
        (3, 0.04, np.array([100.0, 0.0, -100.0, 0.0]), P_b),
    ]
    dyn = DynamicModel(F, Q, survival_prob=0.99, births=_recurring_births(scans, sites))
    clutter = UniformClutter(1.65e-5, np.array([[-1000.0, 1000.0], [-1000.0, 1000.0]]))
    meas = MeasurementModel(H, R, detection_prob=0.77, clutter=clutter)
    return Scenario(MultiObjectModel(dyn, meas), scans=scans, dt=1.0, name="v-v-2018")


def desk_scenario() -> Scenario:
    """Reduced 20-scan scenario sized for minutes-long experiments.

    One recurring birth site, about 10 clutter returns per scan, and a
    pinned two-target ground truth so repeated runs exercise births,
    deaths, misdetections and crossings deterministically.
    """
    scans = 20
    F, Q = constant_velocity_model(dt=1.0, sigma_process=5.0)
    H, R = position_observation(sigma=10.0)
    P_b = np.diag([25.0, 10.0, 25.0, 10.0]) ** 2
    sites = [(1, 0.1, np.zeros(4), P_b)]
    dyn = DynamicModel(F, Q, survival_prob=0.99, births=_recurring_births(scans, sites))
    clutter = UniformClutter(1.0e-5, np.array([[-500.0, 500.0], [-500.0, 500.0]]))
    meas = MeasurementModel(H, R, detection_prob=0.77, clutter=clutter)
    script = (
        ScriptedTarget(1, 1, np.array([-15.0, 6.0, 10.0, -4.0]), last_scan=scans),
        ScriptedTarget(5, 1, np.array([25.0, -6.0, -20.0, 5.0]), last_scan=17),
    )
    return Scenario(
        MultiObjectModel(dyn, meas), scans=scans, dt=1.0, name="desk", truth_script=script
    )


PRESETS = {"desk": desk_scenario, "v-v-2018": survey_scenario}


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Square root of a PSD matrix; tolerates exact rank deficiency."""
    vals, vecs = np.linalg.eigh(M)
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


def preset_scenario(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ModelError(f"unknown preset '{name}'; choose from {sorted(PRESETS)}") from None


def generate_truth(scenario: Scenario, rng=None) -> MultiObjectStateSequence:
    """Sample ground truth from the birth/survival/motion model.

    A non-empty truth script overrides the random birth and death draws:
    exactly the scripted targets appear, at their scripted scans.  Motion
    remains stochastic either way.  Scan 0 is empty by convention.
    """
    rng = as_rng(rng)
    dyn = scenario.model.dynamic
    sqrt_q = {}
    scripted = {t.label: t for t in scenario.truth_script}
    use_script = bool(scripted)
    alive: dict[Label, np.ndarray] = {}
    deaths: dict[Label, int] = {}
    scans: list[list[LabeledState]] = [[]]
    for scan in range(1, scenario.scans + 1):
        F, Q = dyn.transition_at(scan)
        key = id(Q)
        if key not in sqrt_q:
            sqrt_q[key] = _psd_sqrt(Q)
        L = sqrt_q[key]
        survivors: dict[Label, np.ndarray] = {}
        for label in sorted(alive):
            if deaths.get(label) == scan - 1:
                continue
            if not use_script and rng.random() > dyn.survival(label):
                continue
            survivors[label] = F @ alive[label] + L @ rng.standard_normal(dyn.d)
        for site in dyn.births_at(scan):
            if use_script:
                entry = scripted.get(site.label)
                if entry is None:
                    continue
                if entry.state is not None:
                    state = np.asarray(entry.state, dtype=float)
                else:
                    state = rng.multivariate_normal(site.mean, site.cov)
                if entry.last_scan is not None:
                    deaths[site.label] = entry.last_scan
            else:
                if rng.random() > site.prob:
                    continue
                state = rng.multivariate_normal(site.mean, site.cov)
            survivors[site.label] = state
        alive = survivors
        scans.append([LabeledState(vec, label) for label, vec in sorted(alive.items())])
    return MultiObjectStateSequence(0, scans)


def generate_measurements(
    truth: MultiObjectStateSequence, scenario: Scenario, rng=None
) -> list[np.ndarray]:
    """Sample detections and clutter per scan from the measurement model.

    Each alive object is detected independently; clutter is Poisson with
    uniform spatial law on the region; the returned order is shuffled.
    """
    rng = as_rng(rng)
    meas = scenario.model.measurement
    clutter = meas.clutter
    region = clutter.region
    out = []
    for scan in range(1, scenario.scans + 1):
        H, R = meas.observation_at(scan)
        sqrt_r = _psd_sqrt(R)
        rows = []
        for state in truth.states_at(scan):
            if rng.random() <= meas.detection(state.label):
                rows.append(H @ state.kinematic + sqrt_r @ rng.standard_normal(meas.z_dim))
        n_clutter = rng.poisson(clutter.rate)
        for _ in range(n_clutter):
            rows.append(region[:, 0] + rng.random(meas.z_dim) * (region[:, 1] - region[:, 0]))
        Z = np.array(rows) if rows else np.empty((0, meas.z_dim))
        if Z.shape[0] > 1:
            Z = Z[rng.permutation(Z.shape[0])]
        out.append(Z)
    return out
