"""Standard multi-object system model: births, survival, linear-Gaussian
dynamics, detection with uniform Poisson clutter, and the multi-object
transition density."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, ModelError
from .gaussian import log_mvn_pdf
from .labels import Label, LabeledState
from .validation import (
    check_covariance,
    check_matrix,
    check_probability,
    check_vector,
)


@dataclass(frozen=True)
class BirthSite:
    """One candidate birth: label, birth probability, initial Gaussian."""

    label: Label
    prob: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "label", Label(*self.label))
        object.__setattr__(self, "prob", check_probability(self.prob, "birth probability"))
        mean = check_vector(self.mean, None, "birth mean")
        cov = check_covariance(self.cov, mean.shape[0], "birth covariance")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class UniformClutter:
    """Poisson clutter with constant intensity on a rectangular region."""

    intensity: float
    region: np.ndarray  # (z_dim, 2) lower/upper bounds

    def __post_init__(self):
        if self.intensity < 0:
            raise ModelError("clutter intensity must be non-negative")
        region = check_matrix(self.region, (None, 2), "clutter region")
        if np.any(region[:, 1] <= region[:, 0]):
            raise ModelError("clutter region must have positive extent")
        region.setflags(write=False)
        object.__setattr__(self, "region", region)
        object.__setattr__(self, "intensity", float(self.intensity))

    @property
    def z_dim(self) -> int:
        return self.region.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.region[:, 1] - self.region[:, 0]))

    @property
    def rate(self) -> float:
        """Expected number of clutter points per scan."""
        return self.intensity * self.volume

    def contains(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.region[:, 0]) and np.all(z <= self.region[:, 1]))

    def log_intensity(self, z) -> float:
        if self.intensity > 0.0 and self.contains(z):
            return float(np.log(self.intensity))
        return float("-inf")


@dataclass(frozen=True)
class DynamicModel:
    """Survival, linear-Gaussian motion, and the per-scan birth spaces.

    F and Q are time-invariant by default; ``overrides`` maps a scan index
    to a replacement (F, Q) pair.
    """

    transition: np.ndarray
    process_noise: np.ndarray
    survival_prob: float
    births: tuple[BirthSite, ...] = ()
    overrides: Mapping[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        F = check_matrix(self.transition, (None, None), "transition matrix")
        Q = check_covariance(self.process_noise, F.shape[0], "process noise")
        if F.shape[0] != F.shape[1]:
            raise ModelError("transition matrix must be square")
        F.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "transition", F)
        object.__setattr__(self, "process_noise", Q)
        object.__setattr__(
            self, "survival_prob", check_probability(self.survival_prob, "survival probability")
        )
        births = tuple(self.births)
        for site in births:
            if site.mean.shape[0] != F.shape[0]:
                raise ModelError(f"birth site {site.label} has wrong state dimension")
        object.__setattr__(self, "births", births)

    @property
    def d(self) -> int:
        return self.transition.shape[0]

    @cached_property
    def _births_by_scan(self) -> dict[int, tuple[BirthSite, ...]]:
        by_scan: dict[int, list[BirthSite]] = {}
        for site in self.births:
            by_scan.setdefault(site.label.birth_time, []).append(site)
        return {scan: tuple(sorted(sites, key=lambda s: s.label)) for scan, sites in by_scan.items()}

    @cached_property
    def _births_by_label(self) -> dict[Label, BirthSite]:
        out = {site.label: site for site in self.births}
        if len(out) != len(self.births):
            raise ModelError("duplicate birth labels")
        return out

    def births_at(self, scan: int) -> tuple[BirthSite, ...]:
        return self._births_by_scan.get(scan, ())

    def birth_for(self, label: Label) -> BirthSite | None:
        return self._births_by_label.get(label)

    def transition_at(self, scan: int) -> tuple[np.ndarray, np.ndarray]:
        if scan in self.overrides:
            F, Q = self.overrides[scan]
            return np.asarray(F, dtype=float), np.asarray(Q, dtype=float)
        return self.transition, self.process_noise

    def survival(self, label: Label) -> float:
        return self.survival_prob


@dataclass(frozen=True)
class MeasurementModel:
    """Linear-Gaussian detections with constant detection probability."""

    observation: np.ndarray
    noise: np.ndarray
    detection_prob: float
    clutter: UniformClutter
    overrides: Mapping[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        H = check_matrix(self.observation, (None, None), "observation matrix")
        R = check_covariance(self.noise, H.shape[0], "measurement noise")
        if H.shape[0] != self.clutter.z_dim:
            raise ModelError("observation matrix and clutter region dimensions differ")
        H.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(self, "observation", H)
        object.__setattr__(self, "noise", R)
        object.__setattr__(
            self, "detection_prob", check_probability(self.detection_prob, "detection probability")
        )

    @property
    def z_dim(self) -> int:
        return self.observation.shape[0]

    @property
    def d(self) -> int:
        return self.observation.shape[1]

    def observation_at(self, scan: int) -> tuple[np.ndarray, np.ndarray]:
        if scan in self.overrides:
            H, R = self.overrides[scan]
            return np.asarray(H, dtype=float), np.asarray(R, dtype=float)
        return self.observation, self.noise

    def detection(self, label: Label) -> float:
        return self.detection_prob


@dataclass(frozen=True)
class MultiObjectModel:
    """Dynamic and measurement models sharing one state space."""

    dynamic: DynamicModel
    measurement: MeasurementModel

    def __post_init__(self):
        if self.dynamic.d != self.measurement.d:
            raise ModelError(
                f"state dimensions disagree: dynamics {self.dynamic.d}, "
                f"measurement {self.measurement.d}"
            )

    @property
    def d(self) -> int:
        return self.dynamic.d

    @property
    def z_dim(self) -> int:
        return self.measurement.z_dim


def psi(measurement: MeasurementModel, measurements, j: int, x, label=None, scan: int = 0) -> float:
    """Per-object likelihood ratio of association value j at one scan.

    ``j > 0`` pairs the object with measurement z_j and normalizes by the
    clutter intensity there; ``j = 0`` is the misdetection probability.
    """
    if j == 0:
        return 1.0 - measurement.detection(label)
    Z = np.atleast_2d(np.asarray(measurements, dtype=float))
    if not 1 <= j <= Z.shape[0]:
        raise ModelError(f"association value {j} exceeds measurement count {Z.shape[0]}")
    z = Z[j - 1]
    log_kappa = measurement.clutter.log_intensity(z)
    if not np.isfinite(log_kappa):
        raise ModelError("clutter density zero at measurement")
    H, R = measurement.observation_at(scan)
    x = np.asarray(x, dtype=float)
    log_g = log_mvn_pdf(z, H @ x, R)
    return measurement.detection(label) * float(np.exp(log_g - log_kappa))


def _as_label_dict(states) -> dict[Label, np.ndarray] | None:
    """Normalize a labeled set; None signals duplicate labels (distinctness fails)."""
    if isinstance(states, Mapping):
        return {Label(*lab): np.asarray(vec, dtype=float) for lab, vec in states.items()}
    out: dict[Label, np.ndarray] = {}
    for st in states:
        if isinstance(st, LabeledState):
            lab, vec = st.label, st.kinematic
        else:
            vec, lab = st
            lab = Label(*lab)
        if lab in out:
            return None
        out[lab] = np.asarray(vec, dtype=float)
    return out


def transition_density(x_prev, x_next, scan: int, dynamic: DynamicModel) -> float:
    """Multi-object transition density from the labeled set at scan-1 to scan.

    Factorizes over labels: births contribute P_B times the birth density,
    survivors P_S times the motion density, deaths Q_S, and unborn birth
    labels Q_B.  Any label outside the allowed space gives 0.
    """
    prev = _as_label_dict(x_prev)
    nxt = _as_label_dict(x_next)
    if prev is None or nxt is None:
        return 0.0
    birth_labels = {site.label: site for site in dynamic.births_at(scan)}
    if not set(nxt) <= set(prev) | set(birth_labels):
        return 0.0
    F, Q = dynamic.transition_at(scan)
    log_value = 0.0
    for label, site in birth_labels.items():
        if label in nxt:
            log_value += np.log(site.prob) + log_mvn_pdf(nxt[label], site.mean, site.cov)
        else:
            q_b = 1.0 - site.prob
            if q_b == 0.0:
                return 0.0
            log_value += np.log(q_b)
    for label, x0 in prev.items():
        p_s = dynamic.survival(label)
        if label in nxt:
            if p_s == 0.0:
                return 0.0
            log_value += np.log(p_s) + log_mvn_pdf(nxt[label], F @ x0, Q)
        else:
            if p_s == 1.0:
                return 0.0
            log_value += np.log(1.0 - p_s)
    return float(np.exp(log_value))


@dataclass(frozen=True)
class ScriptedTarget:
    """Deterministic birth entry for reproducing a fixed ground truth."""

    birth_scan: int
    index: int
    state: np.ndarray | None = None
    last_scan: int | None = None

    def __post_init__(self):
        if self.state is not None:
            state = check_vector(self.state, None, "scripted state")
            state.setflags(write=False)
            object.__setattr__(self, "state", state)

    @property
    def label(self) -> Label:
        return Label(self.birth_scan, self.index)


@dataclass(frozen=True)
class Scenario:
    """A complete experiment description: model, scan count, sampling period."""

    model: MultiObjectModel
    scans: int
    dt: float = 1.0
    name: str = ""
    truth_script: tuple[ScriptedTarget, ...] = ()

    def __post_init__(self):
        if self.scans < 1:
            raise ModelError("scenario must have at least one scan")
        object.__setattr__(self, "truth_script", tuple(self.truth_script))

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def z_dim(self) -> int:
        return self.model.z_dim

    @property
    def region(self) -> np.ndarray:
        return self.model.measurement.clutter.region


_REQUIRED_SCENARIO_FIELDS = (
    "dt",
    "d",
    "F",
    "Q",
    "H",
    "R",
    "p_s",
    "p_d",
    "lambda_c",
    "region",
    "births",
    "scans",
)


def scenario_to_dict(scenario: Scenario) -> dict:
    dyn = scenario.model.dynamic
    meas = scenario.model.measurement
    out = {
        "dt": scenario.dt,
        "d": scenario.d,
        "F": dyn.transition.tolist(),
        "Q": dyn.process_noise.tolist(),
        "H": meas.observation.tolist(),
        "R": meas.noise.tolist(),
        "p_s": dyn.survival_prob,
        "p_d": meas.detection_prob,
        "lambda_c": meas.clutter.intensity,
        "region": meas.clutter.region.tolist(),
        "births": [
            {
                "label": [site.label.birth_time, site.label.index],
                "r_b": site.prob,
                "m_b": site.mean.tolist(),
                "P_b": site.cov.tolist(),
            }
            for site in dyn.births
        ],
        "scans": scenario.scans,
    }
    if scenario.name:
        out["name"] = scenario.name
    if scenario.truth_script:
        out["truth_script"] = [
            {
                "birth_scan": t.birth_scan,
                "index": t.index,
                "state": None if t.state is None else t.state.tolist(),
                "last_scan": t.last_scan,
            }
            for t in scenario.truth_script
        ]
    return out


def scenario_from_dict(data: Mapping) -> Scenario:
    for name in _REQUIRED_SCENARIO_FIELDS:
        if name not in data:
            raise ConfigError(f"scenario is missing required field '{name}'")
    try:
        births = tuple(
            BirthSite(
                label=Label(int(b["label"][0]), int(b["label"][1])),
                prob=b["r_b"],
                mean=b["m_b"],
                cov=b["P_b"],
            )
            for b in data["births"]
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"malformed birth entry in scenario: {exc}") from exc
    dyn = DynamicModel(
        transition=data["F"],
        process_noise=data["Q"],
        survival_prob=data["p_s"],
        births=births,
    )
    meas = MeasurementModel(
        observation=data["H"],
        noise=data["R"],
        detection_prob=data["p_d"],
        clutter=UniformClutter(intensity=data["lambda_c"], region=data["region"]),
    )
    if dyn.d != int(data["d"]):
        raise ConfigError(f"scenario field 'd'={data['d']} disagrees with F of size {dyn.d}")
    script = tuple(
        ScriptedTarget(
            birth_scan=int(t["birth_scan"]),
            index=int(t["index"]),
            state=t.get("state"),
            last_scan=t.get("last_scan"),
        )
        for t in data.get("truth_script", ())
    )
    return Scenario(
        model=MultiObjectModel(dyn, meas),
        scans=int(data["scans"]),
        dt=float(data["dt"]),
        name=str(data.get("name", "")),
        truth_script=script,
    )
