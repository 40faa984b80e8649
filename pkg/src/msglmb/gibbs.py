"""Gibbs samplers over association histories.

Two samplers find high-weight association histories without enumerating
them: a factor-wise sampler that draws each scan's map conditioned on the
earlier scans, and a full sampler whose chain resamples every (scan,
label) site of the whole history and whose stationary law is the exact
posterior over histories.  A simulated-annealing wrapper turns the full
sampler into a MAP search.

The per-label weight factors need only the final-block marginal of the
label's trajectory density, so all conditional tables are computed with a
plain d-dimensional Kalman recursion and memoized per label and value
vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import linalg as sla

from .association import (
    AssociationHistory,
    AssociationMap,
    domain_order,
    is_valid_history,
)
from .errors import ModelError, NumericalError
from .gaussian import _cholesky, _symmetrize, log_gaussian_at
from .labels import Label
from .models import MultiObjectModel
from .validation import as_rng, check_measurement_sequence

logger = logging.getLogger(__name__)

NEG_INF = float("-inf")


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for the association-history samplers.

    ``sweeps`` is the full-sampler iteration count; ``factor_sweeps`` the
    per-scan chain length of the factor-wise sampler; ``annealing`` an
    optional temperature sequence for MAP search (defaults to a geometric
    schedule from 1 to 0.01 over ``sweeps`` steps when annealing is used).
    """

    sweeps: int = 100
    factor_sweeps: int = 10
    burn_in: int = 0
    seed: int | None = None
    annealing: tuple[float, ...] | None = None
    factor_init: str = "zeros"  # initial state of each per-scan chain: zeros | negative

    def __post_init__(self):
        if self.sweeps < 1:
            raise ModelError("sampler needs at least one sweep")
        if self.factor_sweeps < 1:
            raise ModelError("factor sampler needs at least one sweep")
        if self.burn_in < 0:
            raise ModelError("burn-in cannot be negative")
        if self.factor_init not in ("zeros", "negative"):
            raise ModelError("factor_init must be 'zeros' or 'negative'")

    def temperature_schedule(self) -> np.ndarray:
        if self.annealing is not None:
            return np.asarray(self.annealing, dtype=float)
        n = self.sweeps
        if n == 1:
            return np.array([0.01])
        return np.exp(np.linspace(0.0, np.log(0.01), n))


@dataclass(frozen=True)
class ConditionalTable:
    """Unnormalized sampling weights for one label's association value,
    indexed by value + 1 (entry 0 is value -1)."""

    n: int
    label: Label
    values: np.ndarray

    def probabilities(self) -> np.ndarray:
        total = self.values.sum()
        if total <= 0:
            raise NumericalError("all-zero conditional table")
        return self.values / total


class Instance:
    """A tracking problem: model plus per-scan measurements, precomputed.

    Measurements outside the clutter region are rejected at ingestion;
    the likelihood ratio is undefined there.
    """

    def __init__(self, model: MultiObjectModel, measurements):
        self.model = model
        dyn = model.dynamic
        meas = model.measurement
        self.d = dyn.d
        self.z_dim = meas.z_dim
        raw = check_measurement_sequence(measurements, meas.z_dim)
        self.k = len(raw)
        clutter = meas.clutter
        self.Z: list[np.ndarray] = []
        dropped = 0
        for Z in raw:
            if Z.shape[0]:
                keep = np.array([clutter.contains(z) for z in Z])
                dropped += int((~keep).sum())
                Z = Z[keep]
            self.Z.append(Z)
        if dropped:
            logger.debug("rejected %d measurements outside the clutter region", dropped)
        self.M = [Z.shape[0] for Z in self.Z]
        if clutter.intensity <= 0.0 and any(self.M):
            raise ModelError("clutter density zero at measurement")
        self.log_kappa = float(np.log(clutter.intensity)) if clutter.intensity > 0 else NEG_INF
        self.F = [dyn.transition_at(j)[0] for j in range(1, self.k + 1)]
        self.Q = [dyn.transition_at(j)[1] for j in range(1, self.k + 1)]
        self.H = [meas.observation_at(j)[0] for j in range(1, self.k + 1)]
        self.R = [meas.observation_at(j)[1] for j in range(1, self.k + 1)]
        self.log_ps = _safe_log(dyn.survival_prob)
        self.log_qs = _safe_log(1.0 - dyn.survival_prob)
        self.log_pd = _safe_log(meas.detection_prob)
        self.log_qd = _safe_log(1.0 - meas.detection_prob)
        self.births = {j: dyn.births_at(j) for j in range(1, self.k + 1)}
        self.birth_labels = {j: tuple(s.label for s in sites) for j, sites in self.births.items()}
        self.all_birth_labels = tuple(
            sorted(lab for j in range(1, self.k + 1) for lab in self.birth_labels[j])
        )

    def birth_site(self, label: Label):
        return self.model.dynamic.birth_for(label)

    def meas_counts(self) -> list[int]:
        return list(self.M)


def _safe_log(x: float) -> float:
    return float(np.log(x)) if x > 0.0 else NEG_INF


def _sample_index(rng: np.random.Generator, log_weights: np.ndarray) -> int:
    top = log_weights.max()
    if top == NEG_INF:
        raise NumericalError("all-zero conditional table")
    w = np.exp(log_weights - top)
    cum = np.cumsum(w)
    return int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))


class TrackKernel:
    """Per-label weight factors and conditional tables, with memoization.

    A label's value vector (its association value at every scan) fully
    determines its weight contribution and its filtered Gaussian states,
    so both are cached keyed by (label, value bytes).
    """

    def __init__(self, instance: Instance):
        self.inst = instance
        self._weights: dict[tuple[Label, bytes], float] = {}
        self._prefixes: dict[tuple[Label, bytes], tuple[np.ndarray, np.ndarray]] = {}
        self._scan_tables: dict[tuple, tuple] = {}

    # -- single-value filtered step -------------------------------------

    def _step(self, prior, label: Label, scan: int, value: int):
        """Advance one scan: returns (log increment, mean, cov) or
        (log increment, None, None) for unborn/death."""
        inst = self.inst
        if prior is None:
            site = inst.birth_site(label)
            if site is None or label.birth_time != scan:
                raise ModelError(f"label {label} cannot be born at scan {scan}")
            if value < 0:
                return _safe_log(1.0 - site.prob), None, None
            m, P = site.mean, site.cov
            base = _safe_log(site.prob)
        else:
            m, P = prior
            if value < 0:
                return inst.log_qs, None, None
            j = scan - 1
            F, Q = inst.F[j], inst.Q[j]
            m = F @ m
            P = _symmetrize(F @ P @ F.T + Q)
            base = inst.log_ps
        if value == 0:
            return base + inst.log_qd, m, P
        j = scan - 1
        H, R = inst.H[j], inst.R[j]
        z = inst.Z[j][value - 1]
        zhat = H @ m
        S = _symmetrize(R + H @ P @ H.T)
        cho = _cholesky(S, "innovation covariance")
        log_q = float(log_gaussian_at(cho, z.shape[0], zhat, z)[0])
        C = P @ H.T
        K = sla.cho_solve(cho, C.T).T
        m2 = m + K @ (z - zhat)
        P2 = _symmetrize(P - K @ C.T)
        return base + inst.log_pd + log_q - inst.log_kappa, m2, P2

    # -- per-label weight of a full value vector -------------------------

    def label_log_weight(self, label: Label, values: np.ndarray) -> float:
        """Weight contribution of one label given its values at scans 1..k.

        Covers the unborn case, the alive factors over the label's life,
        and the death factor one scan after its life ends (when within the
        window).  Values are assumed contiguous-alive, as produced by the
        samplers and validated histories.
        """
        b = label.birth_time
        key = (label, values[b - 1 :].tobytes())
        cached = self._weights.get(key)
        if cached is not None:
            return cached
        inst = self.inst
        if values[b - 1] < 0:
            site = inst.birth_site(label)
            out = _safe_log(1.0 - site.prob)
        else:
            out = 0.0
            state = None
            scan = b
            while scan <= inst.k and values[scan - 1] >= 0:
                inc, m, P = self._step(state if scan > b else None, label, scan, int(values[scan - 1]))
                out += inc
                state = (m, P)
                scan += 1
            if scan <= inst.k:
                out += inst.log_qs
        self._weights[key] = out
        return out

    def prefix_state(self, label: Label, values: np.ndarray, scan: int):
        """Filtered (mean, cov) of a label after scans birth..scan-1."""
        b = label.birth_time
        key = (label, values[b - 1 : scan - 1].tobytes())
        cached = self._prefixes.get(key)
        if cached is not None:
            return cached
        state = None
        for i in range(b, scan):
            _, m, P = self._step(state if i > b else None, label, i, int(values[i - 1]))
            state = (m, P)
        self._prefixes[key] = state
        return state

    # -- one-scan candidate table (factor sampler, filter extension) -----

    def scan_table(self, scan: int, label: Label, prior):
        """Log weights over candidate values -1..M at one scan, plus the
        posterior branch states.

        Returns (log_w, branch_means, cov_miss, cov_hit): ``branch_means``
        stacks the posterior mean for value 0 (row 0) and for each
        measurement (rows 1..M); value 0 keeps covariance ``cov_miss`` and
        every detection shares ``cov_hit``.
        """
        inst = self.inst
        j = scan - 1
        M = inst.M[j]
        if prior is None:
            site = inst.birth_site(label)
            m, P = site.mean, site.cov
            base = _safe_log(site.prob)
            log_dead = _safe_log(1.0 - site.prob)
        else:
            m, P = prior
            F, Q = inst.F[j], inst.Q[j]
            m = F @ m
            P = _symmetrize(F @ P @ F.T + Q)
            base = inst.log_ps
            log_dead = inst.log_qs
        log_w = np.empty(M + 2)
        log_w[0] = log_dead
        log_w[1] = base + inst.log_qd
        means = np.empty((M + 1, m.shape[0]))
        means[0] = m
        cov_hit = None
        if M:
            H, R = inst.H[j], inst.R[j]
            Z = inst.Z[j]
            zhat = H @ m
            S = _symmetrize(R + H @ P @ H.T)
            cho = _cholesky(S, "innovation covariance")
            log_q = log_gaussian_at(cho, Z.shape[1], zhat, Z)
            log_w[2:] = base + inst.log_pd + log_q - inst.log_kappa
            C = P @ H.T
            K = sla.cho_solve(cho, C.T).T
            means[1:] = m + (Z - zhat) @ K.T
            cov_hit = _symmetrize(P - K @ C.T)
        return log_w, means, P, cov_hit

    def scan_table_cached(self, scan: int, label: Label, prior):
        if prior is None:
            key = (scan, label)
        else:
            key = (scan, label, prior[0].tobytes(), prior[1].tobytes())
        cached = self._scan_tables.get(key)
        if cached is None:
            cached = self.scan_table(scan, label, prior)
            self._scan_tables[key] = cached
        return cached

    # -- full-history candidate table (Proposition-style conditional) ----

    def candidate_table(self, scan: int, label: Label, values: np.ndarray) -> np.ndarray:
        """Log conditional weights over values -1..M for one site of the full
        sampler, before the positive one-to-one occupancy mask.

        For value -1 the label must already be dead at the next scan; for
        non-negative values the product runs over this scan and every later
        scan of the label's stored life, re-deriving the measurement
        likelihoods under each candidate because the conditioning density
        changes with the candidate.
        """
        inst = self.inst
        k = inst.k
        b = label.birth_time
        prior = None if b == scan else self.prefix_state(label, values, scan)
        log_w, means, cov_miss, cov_hit = self.scan_table(scan, label, prior)
        log_w = log_w.copy()
        if scan < k and values[scan] >= 0:
            log_w[0] = NEG_INF  # death forbidden while the label lives at scan+1
        if scan == k:
            return log_w
        if values[scan] < 0:
            log_w[1:] += inst.log_qs  # label dies right after this scan
            return log_w
        M = inst.M[scan - 1]
        n_branch = M + 1
        means = means.copy()
        covs = [cov_miss.copy()] + ([cov_hit.copy()] if M else [])
        extra = np.zeros(n_branch)
        i = scan + 1
        while i <= k and values[i - 1] >= 0:
            jj = i - 1
            F, Q = inst.F[jj], inst.Q[jj]
            means = means @ F.T
            covs = [_symmetrize(F @ P @ F.T + Q) for P in covs]
            beta = int(values[i - 1])
            if beta == 0:
                extra += inst.log_ps + inst.log_qd
            else:
                H, R = inst.H[jj], inst.R[jj]
                z = inst.Z[jj][beta - 1]
                new_covs = []
                for ci, P in enumerate(covs):
                    zhat_rows = means @ H.T
                    S = _symmetrize(R + H @ P @ H.T)
                    cho = _cholesky(S, "innovation covariance")
                    rows = [0] if ci == 0 else list(range(1, n_branch))
                    resid = z - zhat_rows[rows]
                    log_q = log_gaussian_at(cho, z.shape[0], 0.0, resid)
                    extra[rows] += inst.log_ps + inst.log_pd + log_q - inst.log_kappa
                    C = P @ H.T
                    K = sla.cho_solve(cho, C.T).T
                    means[rows] = means[rows] + resid @ K.T
                    new_covs.append(_symmetrize(P - K @ C.T))
                covs = new_covs
            i += 1
        if i <= k:
            extra += inst.log_qs  # death factor after the stored life ends
        log_w[1:] += extra
        return log_w


class HistoryState:
    """Mutable full-sampler state: per-label value arrays over scans 1..k
    plus per-scan ownership of positive measurement indices."""

    def __init__(self, instance: Instance, values: dict[Label, np.ndarray]):
        self.inst = instance
        self.values = values
        self.owners: list[dict[int, Label]] = [dict() for _ in range(instance.k)]
        for label, vals in values.items():
            for j, v in enumerate(vals):
                if v > 0:
                    if int(v) in self.owners[j]:
                        raise ModelError("positive one-to-one violated in initial state")
                    self.owners[j][int(v)] = label

    @classmethod
    def all_negative(cls, instance: Instance) -> "HistoryState":
        return cls(
            instance,
            {lab: np.full(instance.k, -1, dtype=np.int64) for lab in instance.all_birth_labels},
        )

    @classmethod
    def from_history(cls, instance: Instance, history: AssociationHistory) -> "HistoryState":
        state = cls.all_negative(instance)
        for j in range(1, min(history.k, instance.k) + 1):
            for label, value in history.map_at(j).items:
                if value >= 0:
                    state.set(label, j, value)
        return state

    def live_at(self, scan: int) -> list[Label]:
        if scan < 1:
            return []
        j = scan - 1
        return [lab for lab, vals in self.values.items() if vals[j] >= 0]

    def domain(self, scan: int) -> tuple[Label, ...]:
        return domain_order(self.live_at(scan - 1), self.inst.birth_labels.get(scan, ()))

    def set(self, label: Label, scan: int, value: int):
        j = scan - 1
        old = int(self.values[label][j])
        if old > 0 and self.owners[j].get(old) is label:
            del self.owners[j][old]
        self.values[label][j] = value
        if value > 0:
            self.owners[j][value] = label

    def snapshot(self) -> dict[Label, np.ndarray]:
        return {lab: vals.copy() for lab, vals in self.values.items()}

    def key(self) -> bytes:
        return b"".join(self.values[lab].tobytes() for lab in self.inst.all_birth_labels)

    def log_weight(self, kernel: TrackKernel) -> float:
        return sum(
            kernel.label_log_weight(lab, self.values[lab]) for lab in self.inst.all_birth_labels
        )

    def to_history(self) -> AssociationHistory:
        maps = []
        prev_live: list[Label] = []
        for scan in range(1, self.inst.k + 1):
            domain = domain_order(prev_live, self.inst.birth_labels.get(scan, ()))
            entries = {lab: int(self.values[lab][scan - 1]) for lab in domain}
            maps.append(AssociationMap(scan, entries))
            prev_live = [lab for lab, v in entries.items() if v >= 0]
        return AssociationHistory(maps)


def values_from_history(instance: Instance, history: AssociationHistory) -> dict[Label, np.ndarray]:
    return HistoryState.from_history(instance, history).values


def history_log_weight(model: MultiObjectModel, measurements, history: AssociationHistory) -> float:
    """Exact unnormalized log weight of an association history.

    Invalid histories have weight zero (-inf in log domain).
    """
    inst = Instance(model, measurements)
    if history.k != inst.k:
        raise ModelError(f"history covers {history.k} scans, measurements {inst.k}")
    births = [inst.birth_labels.get(j, ()) for j in range(1, inst.k + 1)]
    if not is_valid_history(history, births, inst.M):
        return NEG_INF
    kernel = TrackKernel(inst)
    state = HistoryState.from_history(inst, history)
    return state.log_weight(kernel)


# ---------------------------------------------------------------------------
# Factor-wise sampler.
# ---------------------------------------------------------------------------


def _mask_taken(log_w: np.ndarray, vals: np.ndarray, n: int):
    """Zero candidate weights for positive values held by another label."""
    for i, v in enumerate(vals):
        if v > 0 and i != n:
            log_w[v + 1] = NEG_INF


def _factor_scan_chain(kernel, scan, domain, priors, sweeps, init, rng, collect=None):
    """Gibbs chain over one scan's map given finalized earlier scans.

    Returns the final value per domain label; ``collect`` receives every
    iterate (as tuples) when provided.
    """
    P = len(domain)
    tables = [kernel.scan_table_cached(scan, lab, priors.get(lab)) for lab in domain]
    M = kernel.inst.M[scan - 1]
    if init == "zeros":
        vals = np.zeros(P, dtype=np.int64)
    else:
        vals = np.full(P, -1, dtype=np.int64)
    if collect is not None:
        collect(tuple(vals), tables)
    for _ in range(sweeps - 1):
        for n in range(P):
            log_w = tables[n][0].copy()
            _mask_taken(log_w, vals, n)
            vals[n] = _sample_index(rng, log_w) - 1
        if collect is not None:
            collect(tuple(vals), tables)
    return vals, tables


def sample_factor_chain(
    model: MultiObjectModel, measurements, config: SamplerConfig, rng=None
) -> AssociationHistory:
    """Draw one association history scan by scan (factor-wise sampler).

    Each scan's map comes from a short Gibbs chain targeting the posterior
    of that scan's associations given the earlier scans; the result is
    always a valid history.
    """
    inst = Instance(model, measurements)
    kernel = TrackKernel(inst)
    rng = as_rng(config.seed if rng is None else rng)
    return _factor_chain(inst, kernel, config, rng)


def _factor_chain(inst, kernel, config, rng) -> AssociationHistory:
    priors: dict[Label, tuple] = {}
    prev_live: list[Label] = []
    maps = []
    for scan in range(1, inst.k + 1):
        domain = domain_order(prev_live, inst.birth_labels.get(scan, ()))
        if not domain:
            maps.append(AssociationMap(scan, {}))
            prev_live = []
            continue
        vals, tables = _factor_scan_chain(
            kernel, scan, domain, priors, config.factor_sweeps, config.factor_init, rng
        )
        maps.append(AssociationMap(scan, zip(domain, (int(v) for v in vals))))
        new_priors: dict[Label, tuple] = {}
        alive = []
        for n, lab in enumerate(domain):
            v = int(vals[n])
            if v < 0:
                continue
            _, means, cov_miss, cov_hit = tables[n]
            new_priors[lab] = (means[v] if v else means[0], cov_miss if v == 0 else cov_hit)
            alive.append(lab)
        priors = new_priors
        prev_live = alive
    return AssociationHistory(maps)


def factor_conditional(
    model: MultiObjectModel,
    measurements,
    prefix: AssociationHistory,
    scan_values: Mapping[Label, int],
    n: int,
) -> ConditionalTable:
    """The factor sampler's conditional for the n-th domain label of scan
    ``prefix.k + 1``, given the current values of the other labels."""
    inst = Instance(model, measurements)
    kernel = TrackKernel(inst)
    scan = prefix.k + 1
    values = values_from_history(inst, prefix)
    domain = domain_order(prefix.live_at(scan - 1), inst.birth_labels.get(scan, ()))
    label = domain[n]
    prior = (
        None
        if label.birth_time == scan
        else kernel.prefix_state(label, values[label], scan)
    )
    log_w = kernel.scan_table(scan, label, prior)[0].copy()
    for other, value in scan_values.items():
        if other != label and value > 0:
            log_w[value + 1] = NEG_INF
    return _as_table(n, label, log_w)


def full_conditional(
    model: MultiObjectModel, measurements, history: AssociationHistory, scan: int, n: int
) -> ConditionalTable:
    """The full sampler's conditional at one (scan, label) site of a valid
    history, per the closed-form dead/misdetected/detected cases."""
    inst = Instance(model, measurements)
    kernel = TrackKernel(inst)
    state = HistoryState.from_history(inst, history)
    domain = state.domain(scan)
    label = domain[n]
    log_w = kernel.candidate_table(scan, label, state.values[label])
    for value, owner in state.owners[scan - 1].items():
        if owner != label:
            log_w[value + 1] = NEG_INF
    return _as_table(n, label, log_w)


def _as_table(n: int, label: Label, log_w: np.ndarray) -> ConditionalTable:
    top = log_w.max()
    if top == NEG_INF:
        raise NumericalError("all-zero conditional table")
    return ConditionalTable(n, label, np.exp(log_w - top))


# ---------------------------------------------------------------------------
# Full Gibbs sampler.
# ---------------------------------------------------------------------------


def _full_sweep(state: HistoryState, kernel: TrackKernel, rng, temperature: float = 1.0):
    inst = state.inst
    for scan in range(1, inst.k + 1):
        owners = state.owners[scan - 1]
        for label in state.domain(scan):
            log_w = kernel.candidate_table(scan, label, state.values[label])
            for value, owner in owners.items():
                if owner != label:
                    log_w[value + 1] = NEG_INF
            if temperature != 1.0:
                log_w = log_w / temperature
            new = _sample_index(rng, log_w) - 1
            if new != state.values[label][scan - 1]:
                state.set(label, scan, new)


def _full_gibbs_core(
    inst: Instance,
    kernel: TrackKernel,
    state: HistoryState,
    sweeps: int,
    burn_in: int,
    rng,
    trace: list | None = None,
) -> dict[bytes, list]:
    """Sweep ``sweeps`` iterates and merge duplicates by history key."""
    counted: dict[bytes, list] = {}

    def record(iteration: int):
        if iteration > burn_in:
            key = state.key()
            entry = counted.get(key)
            if entry is None:
                counted[key] = [1, state.snapshot()]
            else:
                entry[0] += 1
        if trace is not None:
            trace.append((iteration, state.log_weight(kernel), len(counted)))

    record(1)
    for t in range(2, sweeps + 1):
        _full_sweep(state, kernel, rng)
        record(t)
    return counted


def run_full_gibbs(
    model: MultiObjectModel,
    measurements,
    init: AssociationHistory,
    config: SamplerConfig,
    rng=None,
    trace: list | None = None,
) -> list[tuple[AssociationHistory, int]]:
    """Run the full Gibbs sampler and merge duplicate iterates.

    Returns distinct histories with visit counts, in first-visit order; the
    initial state counts as the first iterate.  ``trace`` (when given)
    receives one (iteration, log weight, distinct so far) row per iterate.
    """
    inst = Instance(model, measurements)
    kernel = TrackKernel(inst)
    rng = as_rng(config.seed if rng is None else rng)
    state = HistoryState.from_history(inst, init)
    counted = _full_gibbs_core(inst, kernel, state, config.sweeps, config.burn_in, rng, trace)
    out = []
    for count, values in counted.values():
        snap = HistoryState(inst, values)
        out.append((snap.to_history(), count))
    return out


def anneal_best_history(
    model: MultiObjectModel, measurements, config: SamplerConfig, rng=None
) -> AssociationHistory:
    """Simulated-annealing MAP search over association histories.

    Runs the full sampler with sharpening conditionals and returns the
    highest-weight history visited (never worse than the initial one).
    """
    inst = Instance(model, measurements)
    kernel = TrackKernel(inst)
    rng = as_rng(config.seed if rng is None else rng)
    init = _factor_chain(inst, kernel, config, rng)
    state = HistoryState.from_history(inst, init)
    best_w = state.log_weight(kernel)
    best = state.snapshot()
    for temperature in config.temperature_schedule():
        _full_sweep(state, kernel, rng, temperature=float(temperature))
        w = state.log_weight(kernel)
        if w > best_w:
            best_w = w
            best = state.snapshot()
    return HistoryState(inst, best).to_history()
