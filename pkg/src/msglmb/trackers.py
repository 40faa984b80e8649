"""Posterior drivers and the estimator API.

Three drivers bind the pieces together: a recursive posterior update that
extends every retained component's history by one scan of Gibbs-proposed
associations, a batch driver that samples whole histories with the full
Gibbs sampler, and the single-scan filter obtained from the recursive
driver by keeping only each label's latest Gaussian block.  The weight
increments of the filter and the multi-scan updates are identical; the
modes differ only in what the per-label densities retain.

The user-facing classes follow the scikit-learn estimator protocol:
hyper-parameters in the constructor, ``fit`` over a measurement sequence,
fitted attributes with trailing underscores, and ``get_params`` /
``set_params`` for composition with the wider ecosystem.
"""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator

from .association import AssociationHistory, AssociationMap, domain_order
from .density import MultiScanGlmbComponent, MultiScanGlmbDensity
from .errors import DegenerateDensityError, ModelError
from .gaussian import scan_update
from .gibbs import (
    HistoryState,
    Instance,
    SamplerConfig,
    TrackKernel,
    _factor_chain,
    _factor_scan_chain,
    _full_gibbs_core,
    NEG_INF,
)
from .labels import Label, TrajectorySegment
from .models import MultiObjectModel, Scenario
from .validation import as_rng

logger = logging.getLogger(__name__)

TRACKER_MODES = ("filter", "smooth-recursive", "smooth-batch")


def empty_posterior() -> MultiScanGlmbDensity:
    """The posterior before any measurement scan: one empty component."""
    comp = MultiScanGlmbComponent(AssociationHistory(()), 0.0, {})
    return MultiScanGlmbDensity(0, [comp])


def _allocate_sweeps(log_weights: np.ndarray, total: int) -> np.ndarray:
    """Spread a sweep budget over components proportionally to weight,
    giving every component at least one sweep."""
    shifted = log_weights - log_weights.max()
    w = np.exp(shifted)
    w = w / w.sum()
    return np.maximum(1, np.rint(total * w).astype(int))


def _extend_components(
    components,
    scan: int,
    inst: Instance,
    kernel: TrackKernel,
    config: SamplerConfig,
    budget: int,
    rng,
    stacked: bool,
):
    """One scan of the joint prediction-update for every retained component.

    Each component's history is extended by candidate association maps
    proposed by a per-component Gibbs chain at this scan; children carry
    updated weights and per-label densities.  The merged children are
    truncated to the component budget and the discarded weight recorded.
    """
    model = inst.model
    Z_scan = inst.Z[scan - 1]
    births = inst.birth_labels.get(scan, ())
    log_ws = np.array([c.log_weight for c in components])
    sweeps = _allocate_sweeps(log_ws, max(config.sweeps, 1))
    children = []
    for comp, n_sweeps in zip(components, sweeps):
        live = comp.history.live_at(scan - 1)
        domain = domain_order(live, births)
        if not domain:
            history = AssociationHistory(comp.history.maps + (AssociationMap(scan, {}),))
            children.append(MultiScanGlmbComponent(history, comp.log_weight, comp.trajectories))
            continue
        priors = {}
        for label in live:
            last = comp.trajectories[label].last_block()
            priors[label] = (last.mean, last.cov)
        proposals = set()

        def collect(vals, _tables, _seen=proposals):
            _seen.add(vals)

        _factor_scan_chain(
            kernel, scan, domain, priors, int(n_sweeps) + 1, config.factor_init, rng, collect
        )
        for vals in proposals:
            log_w = comp.log_weight
            trajs = dict(comp.trajectories)
            for label, value in zip(domain, vals):
                prev = trajs.get(label)
                inc, updated = scan_update(
                    prev, label, value, scan, model, Z_scan, filtered=not stacked
                )
                log_w += inc
                if updated is not None:
                    trajs[label] = updated
            if log_w == NEG_INF:
                continue
            history = AssociationHistory(
                comp.history.maps + (AssociationMap(scan, zip(domain, vals)),)
            )
            children.append(MultiScanGlmbComponent(history, log_w, trajs))
    if not children:
        raise DegenerateDensityError(
            f"scan {scan}: every proposed component extension has zero weight"
        )
    merged = MultiScanGlmbDensity(scan, children)
    return merged.truncate(budget)


def smooth_update(
    posterior: MultiScanGlmbDensity,
    measurements_k,
    model: MultiObjectModel,
    config: SamplerConfig,
    budget: int = 1000,
    rng=None,
) -> tuple[MultiScanGlmbDensity, float]:
    """Recursive multi-scan posterior update by one scan of measurements.

    The posterior for scans 0..k-1 becomes the posterior for 0..k; the new
    scan's associations are proposed per retained component by the Gibbs
    machinery.  Returns the new density and the recorded truncation error.
    """
    scan = posterior.scans + 1
    z_dim = model.z_dim
    full = [np.empty((0, z_dim))] * (scan - 1) + [np.asarray(measurements_k, dtype=float)]
    inst = Instance(model, full)
    kernel = TrackKernel(inst)
    rng = as_rng(config.seed if rng is None else rng)
    return _extend_components(
        posterior.components, scan, inst, kernel, config, budget, rng, stacked=True
    )


def glmb_filter_update(
    posterior: MultiScanGlmbDensity,
    measurements_k,
    model: MultiObjectModel,
    config: SamplerConfig,
    budget: int = 1000,
    rng=None,
) -> tuple[MultiScanGlmbDensity, float]:
    """Single-scan filter update: identical weights, last-block densities."""
    scan = posterior.scans + 1
    z_dim = model.z_dim
    full = [np.empty((0, z_dim))] * (scan - 1) + [np.asarray(measurements_k, dtype=float)]
    inst = Instance(model, full)
    kernel = TrackKernel(inst)
    rng = as_rng(config.seed if rng is None else rng)
    return _extend_components(
        posterior.components, scan, inst, kernel, config, budget, rng, stacked=False
    )


def _materialize_component(
    inst: Instance, history: AssociationHistory, log_weight: float
) -> MultiScanGlmbComponent:
    """Build the stacked per-label densities a history induces."""
    model = inst.model
    trajs = {}
    for label in sorted(history.ever_live()):
        span = history.life_span(label)
        traj = None
        for scan in range(label.birth_time, min(span[1] + 1, inst.k) + 1):
            value = history.value(label, scan)
            if traj is not None and scan > span[1]:
                _, traj = scan_update(traj, label, -1, scan, model, inst.Z[scan - 1])
                break
            _, traj = scan_update(traj, label, value, scan, model, inst.Z[scan - 1])
        trajs[label] = traj
    return MultiScanGlmbComponent(history, log_weight, trajs)


def batch_smooth(
    model: MultiObjectModel,
    measurements,
    config: SamplerConfig,
    budget: int = 1000,
    rng=None,
    trace: list | None = None,
    chains: int = 4,
) -> tuple[MultiScanGlmbDensity, float]:
    """Batch posterior construction over all scans at once.

    Whole association histories are sampled by the full Gibbs sampler,
    each chain initialized by an independent factor-wise draw; chains are
    merged by history key, weighted exactly, and truncated to the
    component budget.  Independent chains diversify the birth/death
    configurations explored, which single-site sweeps revise only slowly.
    """
    inst = Instance(model, measurements)
    kernel = TrackKernel(inst)
    rng = as_rng(config.seed if rng is None else rng)
    if inst.k == 0:
        return MultiScanGlmbDensity(0, [MultiScanGlmbComponent(AssociationHistory(()), 0.0, {})]), 0.0
    counted: dict[bytes, list] = {}
    offset = 0
    for _ in range(max(1, chains)):
        chain_trace: list | None = [] if trace is not None else None
        init = _factor_chain(inst, kernel, config, rng)
        state = HistoryState.from_history(inst, init)
        part = _full_gibbs_core(inst, kernel, state, config.sweeps, config.burn_in, rng, chain_trace)
        for key, (count, values) in part.items():
            entry = counted.get(key)
            if entry is None:
                counted[key] = [count, values]
            else:
                entry[0] += count
        if trace is not None:
            trace.extend((offset + it, w, d) for it, w, d in chain_trace)
            offset += len(chain_trace)
    scored = []
    for count, values in counted.values():
        snap = HistoryState(inst, values)
        log_w = snap.log_weight(kernel)
        if log_w == NEG_INF:
            continue
        scored.append((log_w, snap))
    if not scored:
        raise DegenerateDensityError("every sampled history has zero weight")
    scored.sort(key=lambda item: -item[0])
    kept = scored[:budget]
    if len(scored) > budget:
        dropped = np.array([w for w, _ in scored[budget:]])
        error = float(np.exp(dropped - dropped.max()).sum() * np.exp(dropped.max()))
    else:
        error = 0.0
    comps = [_materialize_component(inst, snap.to_history(), log_w) for log_w, snap in kept]
    return MultiScanGlmbDensity(inst.k, comps), error


def exhaustive_posterior(model: MultiObjectModel, measurements) -> MultiScanGlmbDensity:
    """Exact posterior from every valid history (guarded; tiny instances only)."""
    from .association import enumerate_valid_histories

    inst = Instance(model, measurements)
    kernel = TrackKernel(inst)
    births = [inst.birth_labels.get(j, ()) for j in range(1, inst.k + 1)]
    comps = []
    for history in enumerate_valid_histories(births, inst.M):
        state = HistoryState.from_history(inst, history)
        log_w = state.log_weight(kernel)
        if log_w == NEG_INF:
            continue
        comps.append(_materialize_component(inst, history, log_w))
    return MultiScanGlmbDensity(inst.k, comps)


# ---------------------------------------------------------------------------
# Estimators.
# ---------------------------------------------------------------------------


class _TrackerBase(BaseEstimator):
    """Shared scaffolding: parameter handling, validation, prediction."""

    def __init__(
        self,
        scenario=None,
        n_components=1000,
        gibbs_sweeps=100,
        factor_sweeps=10,
        burn_in=0,
        estimate_mode="best-component",
        random_state=None,
    ):
        self.scenario = scenario
        self.n_components = n_components
        self.gibbs_sweeps = gibbs_sweeps
        self.factor_sweeps = factor_sweeps
        self.burn_in = burn_in
        self.estimate_mode = estimate_mode
        self.random_state = random_state

    def _setup(self):
        if self.scenario is None:
            raise ModelError("a scenario (or MultiObjectModel) is required before fitting")
        if isinstance(self.scenario, Scenario):
            model = self.scenario.model
        elif isinstance(self.scenario, MultiObjectModel):
            model = self.scenario
        else:
            raise ModelError(f"unsupported scenario object {type(self.scenario).__name__}")
        if self.n_components < 1:
            raise ModelError("n_components must be at least 1")
        config = SamplerConfig(
            sweeps=int(self.gibbs_sweeps),
            factor_sweeps=int(self.factor_sweeps),
            burn_in=int(self.burn_in),
        )
        return model, config, as_rng(self.random_state)

    def _check_fitted(self):
        if not hasattr(self, "tracks_"):
            raise ModelError("this tracker is not fitted yet; call fit(measurements) first")

    def predict(self, X=None):
        """Trajectory estimates of the fitted posterior.

        With ``X`` given, fits on it first (transductive use).
        """
        if X is not None:
            self.fit(X)
        self._check_fitted()
        return self.tracks_

    def fit_predict(self, X, y=None):
        return self.fit(X).tracks_


class MultiScanGlmbSmoother(_TrackerBase):
    """Trajectory posterior over all scans (smoothing while filtering).

    ``mode='batch'`` samples whole histories with the full Gibbs sampler;
    ``mode='recursive'`` propagates the posterior scan by scan, extending
    each retained component.  Estimated trajectories are contiguous per
    label by construction.
    """

    def __init__(
        self,
        scenario=None,
        mode="batch",
        n_components=1000,
        gibbs_sweeps=100,
        factor_sweeps=10,
        burn_in=0,
        n_chains=4,
        estimate_mode="best-component",
        random_state=None,
    ):
        super().__init__(
            scenario=scenario,
            n_components=n_components,
            gibbs_sweeps=gibbs_sweeps,
            factor_sweeps=factor_sweeps,
            burn_in=burn_in,
            estimate_mode=estimate_mode,
            random_state=random_state,
        )
        self.mode = mode
        self.n_chains = n_chains

    def fit(self, X, y=None):
        model, config, rng = self._setup()
        if self.mode not in ("batch", "recursive"):
            raise ModelError("mode must be 'batch' or 'recursive'")
        trace: list = []
        if self.mode == "batch":
            density, error = batch_smooth(
                model,
                X,
                config,
                budget=int(self.n_components),
                rng=rng,
                trace=trace,
                chains=int(self.n_chains),
            )
            self.truncation_errors_ = [error]
        else:
            inst = Instance(model, X)
            density = empty_posterior()
            self.truncation_errors_ = []
            kernel = TrackKernel(inst)
            for scan in range(1, inst.k + 1):
                density, error = _extend_components(
                    density.components,
                    scan,
                    inst,
                    kernel,
                    config,
                    int(self.n_components),
                    rng,
                    stacked=True,
                )
                self.truncation_errors_.append(error)
                trace.append((scan, density.components[0].log_weight, len(density)))
        self.posterior_ = density.normalize()
        self.tracks_ = self.posterior_.estimate(self.estimate_mode)
        self.diagnostics_ = trace
        self.n_scans_ = self.posterior_.scans
        return self


class GlmbFilter(_TrackerBase):
    """Single-scan filtering baseline sharing the multi-scan update kernels.

    Components keep only each label's latest Gaussian block.  Track output
    stitches the per-scan estimates together, so a label may disappear and
    reappear (track fragmentation) as the best hypothesis changes.
    """

    def fit(self, X, y=None):
        model, config, rng = self._setup()
        if self.estimate_mode not in ("best-component", "map-cardinality"):
            raise ModelError("filter extraction supports best-component or map-cardinality")
        inst = Instance(model, X)
        kernel = TrackKernel(inst)
        density = empty_posterior()
        self.truncation_errors_ = []
        rows: list[tuple[Label, int, np.ndarray]] = []
        trace = []
        for scan in range(1, inst.k + 1):
            density, error = _extend_components(
                density.components,
                scan,
                inst,
                kernel,
                config,
                int(self.n_components),
                rng,
                stacked=False,
            )
            self.truncation_errors_.append(error)
            trace.append((scan, density.components[0].log_weight, len(density)))
            rows.extend(self._extract_scan(density, scan))
        self.posterior_ = density.normalize()
        self.scan_rows_ = rows
        self.tracks_ = _rows_to_segments(rows)
        self.diagnostics_ = trace
        self.n_scans_ = inst.k
        return self

    def _extract_scan(self, density: MultiScanGlmbDensity, scan: int):
        comps = density.components
        if self.estimate_mode == "map-cardinality":
            normalized = density.normalize()
            n_star = normalized.map_cardinality()
            chosen = next(c for c in normalized.components if c.cardinality == n_star)
        else:
            chosen = comps[0]
        rows = []
        for label in chosen.labels:
            traj = chosen.trajectories[label]
            if traj.end == scan:
                rows.append((label, scan, traj.last_block().mean))
        return rows


def _rows_to_segments(rows) -> tuple[TrajectorySegment, ...]:
    """Group per-scan estimate rows into contiguous trajectory fragments.

    A label whose scans are not contiguous yields one segment per run.
    """
    by_label: dict[Label, dict[int, np.ndarray]] = {}
    for label, scan, state in rows:
        by_label.setdefault(label, {})[scan] = state
    segments = []
    for label in sorted(by_label):
        scans = sorted(by_label[label])
        run_start = scans[0]
        prev = scans[0]
        for scan in scans[1:] + [None]:
            if scan is not None and scan == prev + 1:
                prev = scan
                continue
            states = np.stack([by_label[label][s] for s in range(run_start, prev + 1)])
            segments.append(TrajectorySegment(label, run_start, states))
            if scan is not None:
                run_start = prev = scan
    return tuple(segments)
