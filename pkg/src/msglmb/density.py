"""Weighted mixtures over association histories: storage, normalization,
best-K truncation, summary statistics, and trajectory estimators."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy.special import logsumexp

from .association import AssociationHistory
from .errors import DegenerateDensityError, ModelError
from .gaussian import GaussianTrajectoryDensity
from .labels import Label, TrajectorySegment

ESTIMATE_MODES = ("best-component", "map-cardinality", "existence-based")


@dataclass(frozen=True)
class MultiScanGlmbComponent:
    """One hypothesis: an association history, its (log) weight, and one
    trajectory density per label that was ever alive under the history."""

    history: AssociationHistory
    log_weight: float
    trajectories: Mapping[Label, GaussianTrajectoryDensity]

    def __post_init__(self):
        trajectories = dict(self.trajectories)
        ever = self.history.ever_live()
        if set(trajectories) != set(ever):
            raise ModelError(
                "component must carry exactly one trajectory density per ever-live label"
            )
        for label, traj in trajectories.items():
            span = self.history.life_span(label)
            if (traj.start, traj.end) != span:
                raise ModelError(
                    f"density for {label} spans {traj.start}..{traj.end}, history says {span}"
                )
        object.__setattr__(self, "trajectories", MappingProxyType(trajectories))
        object.__setattr__(self, "log_weight", float(self.log_weight))

    @property
    def labels(self) -> tuple[Label, ...]:
        return tuple(sorted(self.trajectories))

    @property
    def cardinality(self) -> int:
        return len(self.trajectories)

    def label_sets(self) -> tuple[frozenset[Label], ...]:
        """Per-scan live label sets (I_0..I_k); scan 0 is always empty."""
        return tuple(self.history.live_at(j) for j in range(0, self.history.k + 1))

    def reweighted(self, log_weight: float) -> "MultiScanGlmbComponent":
        return MultiScanGlmbComponent(self.history, log_weight, self.trajectories)


class MultiScanGlmbDensity:
    """A weighted collection of components keyed by association history.

    Components are kept sorted by descending weight with ties broken by the
    canonical history key, which makes truncation deterministic.  Weights
    are stored in log domain and unnormalized; ``normalize`` returns a
    rescaled copy and sets the ``normalized`` flag.
    """

    def __init__(self, scans: int, components: Iterable[MultiScanGlmbComponent], normalized=False):
        components = tuple(components)
        keys = set()
        for comp in components:
            if comp.history.k != scans:
                raise ModelError(
                    f"component covers {comp.history.k} scans, density covers {scans}"
                )
            if comp.history.key in keys:
                raise ModelError("duplicate component key")
            keys.add(comp.history.key)
        self.scans = int(scans)
        self.components = tuple(
            sorted(components, key=lambda c: (-c.log_weight, c.history.key))
        )
        self.normalized = bool(normalized)

    def __len__(self) -> int:
        return len(self.components)

    @cached_property
    def log_total(self) -> float:
        """log of the summed (unnormalized) weights."""
        if not self.components:
            return float("-inf")
        return float(logsumexp([c.log_weight for c in self.components]))

    def weights(self) -> np.ndarray:
        """Linear-domain weights, normalized to sum to one."""
        logs = np.array([c.log_weight for c in self.components])
        total = self.log_total
        if not np.isfinite(total):
            raise DegenerateDensityError("all component weights vanished")
        return np.exp(logs - total)

    def normalize(self) -> "MultiScanGlmbDensity":
        total = self.log_total
        if not np.isfinite(total):
            raise DegenerateDensityError("all component weights vanished")
        comps = [c.reweighted(c.log_weight - total) for c in self.components]
        return MultiScanGlmbDensity(self.scans, comps, normalized=True)

    def truncate(self, max_components: int) -> tuple["MultiScanGlmbDensity", float]:
        """Keep the highest-weight components; optimal in L1 among equal-size
        truncations.  Returns the truncated density and the discarded weight
        sum in linear domain."""
        if max_components < 1:
            raise DegenerateDensityError("component budget must be at least 1")
        kept = self.components[:max_components]
        dropped = self.components[max_components:]
        if dropped:
            error = float(np.exp(logsumexp([c.log_weight for c in dropped])))
        else:
            error = 0.0
        return MultiScanGlmbDensity(self.scans, kept, normalized=False), error

    def _require_normalized(self):
        if not self.normalized:
            raise ModelError("density must be normalized first")

    def cardinality_distribution(self) -> np.ndarray:
        """P(number of trajectories = n) for n = 0..max over components."""
        self._require_normalized()
        w = self.weights()
        cards = [c.cardinality for c in self.components]
        out = np.zeros(max(cards, default=0) + 1)
        for card, weight in zip(cards, w):
            out[card] += weight
        return out

    def existence_probability(self, labels) -> float:
        """Probability that every label of the given set has a trajectory."""
        self._require_normalized()
        if isinstance(labels, Label) or (
            isinstance(labels, tuple) and len(labels) == 2 and all(isinstance(v, int) for v in labels)
        ):
            labels = [labels]
        wanted = frozenset(Label(*lab) for lab in labels)
        w = self.weights()
        total = 0.0
        for comp, weight in zip(self.components, w):
            if wanted <= frozenset(comp.trajectories):
                total += weight
        return float(total)

    def length_distribution(self, label: Label | None = None) -> np.ndarray:
        """P(trajectory length = m); index m of the returned vector.

        Without a label this is the population law: each component splits its
        weight evenly over its labels; components with no labels contribute
        nothing and the law is renormalized over the rest.  With a label the
        law is conditional on that label existing.
        """
        self._require_normalized()
        w = self.weights()
        max_len = self.scans + 1
        out = np.zeros(max_len + 1)
        mass = 0.0
        if label is None:
            for comp, weight in zip(self.components, w):
                if comp.cardinality == 0:
                    continue
                share = weight / comp.cardinality
                for traj in comp.trajectories.values():
                    out[traj.n_scans] += share
                mass += weight
        else:
            label = Label(*label)
            for comp, weight in zip(self.components, w):
                traj = comp.trajectories.get(label)
                if traj is not None:
                    out[traj.n_scans] += weight
                    mass += weight
        if mass <= 0.0:
            raise DegenerateDensityError("no component carries the requested trajectory length law")
        return out / mass

    def expectation_of_labels(self, f: Callable[[tuple[frozenset[Label], ...]], float]) -> float:
        """Weighted mean of a label-history function over the components."""
        self._require_normalized()
        w = self.weights()
        return float(sum(f(c.label_sets()) * wi for c, wi in zip(self.components, w)))

    def map_cardinality(self) -> int:
        return int(np.argmax(self.cardinality_distribution()))

    def estimate(self, mode: str = "best-component") -> tuple[TrajectorySegment, ...]:
        """Extract a trajectory-set estimate from the posterior.

        ``best-component`` reads the highest-weight component; the mean of
        each label's trajectory density is its estimate.  ``map-cardinality``
        restricts the choice to components whose trajectory count maximizes
        the cardinality distribution.  ``existence-based`` picks the MAP
        number of labels by marginal existence probability, then per label
        the most probable length, and averages the matching components'
        trajectory densities.
        """
        self._require_normalized()
        if mode not in ESTIMATE_MODES:
            raise ModelError(f"unknown estimate mode '{mode}'; choose from {ESTIMATE_MODES}")
        if not self.components:
            raise DegenerateDensityError("cannot estimate from an empty density")
        if mode == "best-component":
            return _component_estimate(self.components[0])
        if mode == "map-cardinality":
            n_star = self.map_cardinality()
            for comp in self.components:
                if comp.cardinality == n_star:
                    return _component_estimate(comp)
            raise DegenerateDensityError("no component with the MAP cardinality")
        return self._existence_estimate()

    def _existence_estimate(self) -> tuple[TrajectorySegment, ...]:
        n_star = self.map_cardinality()
        if n_star == 0:
            return ()
        all_labels = sorted({lab for c in self.components for lab in c.trajectories})
        ranked = sorted(
            all_labels, key=lambda lab: (-self.existence_probability([lab]), lab)
        )
        chosen = ranked[:n_star]
        w = self.weights()
        segments = []
        for label in chosen:
            lengths = self.length_distribution(label)
            m_star = int(np.argmax(lengths))
            mix_mass = 0.0
            mix_mean = None
            for comp, weight in zip(self.components, w):
                traj = comp.trajectories.get(label)
                if traj is None or traj.n_scans != m_star:
                    continue
                if traj.filtered:
                    raise ModelError("existence-based estimates need stacked densities")
                mean = traj.gaussian.mean
                mix_mean = mean * weight if mix_mean is None else mix_mean + mean * weight
                mix_mass += weight
            states = (mix_mean / mix_mass).reshape(m_star, -1)
            segments.append(TrajectorySegment(label, max(0, label.birth_time), states))
        return tuple(segments)


def _component_estimate(comp: MultiScanGlmbComponent) -> tuple[TrajectorySegment, ...]:
    segments = []
    for label in comp.labels:
        traj = comp.trajectories[label]
        if traj.filtered:
            raise ModelError("trajectory estimates need stacked densities")
        segments.append(TrajectorySegment(label, traj.start, traj.mean_path()))
    return tuple(segments)


def density_to_dict(density: MultiScanGlmbDensity) -> dict:
    """JSON-ready dump: serialized history, weights, per-label Gaussians."""
    comps = []
    for comp in density.components:
        entry = {
            "history": comp.history.serialize(),
            "log_weight": comp.log_weight,
            "weight": float(np.exp(comp.log_weight - density.log_total))
            if np.isfinite(density.log_total)
            else 0.0,
            "labels": {
                str(lab): {
                    "start": traj.start,
                    "end": traj.end,
                    "filtered": traj.filtered,
                    "mean": traj.gaussian.mean.tolist(),
                    "cov": traj.gaussian.cov.tolist(),
                }
                for lab, traj in sorted(comp.trajectories.items())
            },
        }
        comps.append(entry)
    return {
        "scans": density.scans,
        "normalized": density.normalized,
        "log_total": density.log_total,
        "components": comps,
    }
