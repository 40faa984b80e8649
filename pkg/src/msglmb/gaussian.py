"""Gaussian algebra for trajectory densities.

Trajectory densities are joint Gaussians over a label's stacked kinematic
states.  Conditioning on a measurement, extension under linear dynamics,
and marginalization all touch only the final d-dimensional block, so the
kernels below work on the stacked joint and on a filtered (last block
only) representation through the same code path.  All weights and
likelihood values are carried in log domain.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import numpy as np
from scipy import linalg as sla

from .errors import ModelError, NumericalError
from .labels import Label
from .validation import check_covariance

LOG_2PI = float(np.log(2.0 * np.pi))


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def _cholesky(S: np.ndarray, what: str):
    try:
        return sla.cho_factor(_symmetrize(S), lower=True)
    except sla.LinAlgError as exc:
        raise NumericalError(f"singular {what}") from exc


def log_mvn_pdf(x, mean, cov) -> float | np.ndarray:
    """log N(x; mean, cov); vectorized over rows when x is 2-D."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cho = _cholesky(np.atleast_2d(np.asarray(cov, dtype=float)), "covariance")
    logdet = 2.0 * np.log(np.diag(cho[0])).sum()
    resid = np.atleast_2d(x) - mean
    maha = np.einsum("ij,ij->i", resid, sla.cho_solve(cho, resid.T).T)
    out = -0.5 * (mean.size * LOG_2PI + logdet + maha)
    return float(out[0]) if x.ndim == 1 else out


@dataclass(frozen=True)
class Gaussian:
    """Mean vector and symmetric positive-semidefinite covariance."""

    mean: np.ndarray
    cov: np.ndarray
    validate: InitVar[bool] = True

    def __post_init__(self, validate: bool):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if validate:
            cov = check_covariance(self.cov, mean.shape[0], "covariance")
        else:
            cov = _symmetrize(np.asarray(self.cov, dtype=float))
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def marginal(self, idx) -> "Gaussian":
        idx = np.asarray(idx, dtype=int)
        return Gaussian(self.mean[idx], self.cov[np.ix_(idx, idx)], validate=False)

    def logpdf(self, x) -> float | np.ndarray:
        return log_mvn_pdf(x, self.mean, self.cov)


@dataclass(frozen=True)
class GaussianTrajectoryDensity:
    """Joint Gaussian over a label's states from its start scan to its end scan.

    With ``filtered=True`` only the final block is kept, which recovers the
    single-scan filter from the same update kernels.
    """

    label: Label
    start: int
    end: int
    block_dim: int
    gaussian: Gaussian
    filtered: bool = False

    def __post_init__(self):
        expected = self.block_dim if self.filtered else self.block_dim * self.n_scans
        if self.end < self.start:
            raise ModelError(f"trajectory for {self.label} ends before it starts")
        if self.gaussian.dim != expected:
            raise ModelError(
                f"trajectory for {self.label} spans scans {self.start}..{self.end} "
                f"but its Gaussian has dimension {self.gaussian.dim}, expected {expected}"
            )

    @property
    def n_scans(self) -> int:
        return self.end - self.start + 1

    def last_block(self) -> Gaussian:
        d = self.block_dim
        if self.gaussian.dim == d:
            return self.gaussian
        return self.gaussian.marginal(np.arange(self.gaussian.dim - d, self.gaussian.dim))

    def block_at(self, scan: int) -> Gaussian:
        if not self.start <= scan <= self.end:
            raise KeyError(f"label {self.label} has no state at scan {scan}")
        if self.filtered:
            if scan != self.end:
                raise ModelError("filtered densities keep only the final scan")
            return self.gaussian
        d = self.block_dim
        lo = (scan - self.start) * d
        return self.gaussian.marginal(np.arange(lo, lo + d))

    def mean_path(self) -> np.ndarray:
        """Per-scan means as an (n_scans, d) array (stacked densities only)."""
        if self.filtered:
            raise ModelError("filtered densities carry only the final scan")
        return self.gaussian.mean.reshape(self.n_scans, self.block_dim)


# ---------------------------------------------------------------------------
# Low-level kernels on raw (mean, covariance) arrays.  The covariance is
# re-symmetrized after every operation to control numerical drift.
# ---------------------------------------------------------------------------


def predict_last(m, P, F, Q, d):
    """Kalman prediction of the final block: (F m_k, F P_k F^T + Q)."""
    mk = m[-d:]
    Pk = P[-d:, -d:]
    return F @ mk, _symmetrize(F @ Pk @ F.T + Q)


def extend_stacked(m, P, F, Q, d):
    """Append the predicted next block to a stacked joint Gaussian."""
    n = m.shape[0]
    mk, Pnew = predict_last(m, P, F, Q, d)
    B = P[:, n - d :] @ F.T
    m2 = np.concatenate([m, mk])
    P2 = np.empty((n + d, n + d))
    P2[:n, :n] = P
    P2[:n, n:] = B
    P2[n:, :n] = B.T
    P2[n:, n:] = Pnew
    return m2, _symmetrize(P2)


def innovation_terms(m, P, H, R, d):
    """Predicted measurement, innovation covariance and its Cholesky factor."""
    mk = m[-d:]
    Pk = P[-d:, -d:]
    zhat = H @ mk
    S = _symmetrize(R + H @ Pk @ H.T)
    return zhat, S, _cholesky(S, "innovation covariance")


def log_gaussian_at(cho, logdet_terms_dim, zhat, Z):
    """log N(z; zhat, S) for each row of Z given the Cholesky factor of S."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    logdet = 2.0 * np.log(np.diag(cho[0])).sum()
    resid = Z - zhat
    maha = np.einsum("ij,ij->i", resid, sla.cho_solve(cho, resid.T).T)
    return -0.5 * (logdet_terms_dim * LOG_2PI + logdet + maha)


def condition_last(m, P, H, R, z, d):
    """Condition the final block on one measurement.

    Returns (log marginal likelihood, posterior mean, posterior covariance);
    the posterior keeps the full stacked dimension of the input.
    """
    n = m.shape[0]
    zhat, S, cho = innovation_terms(m, P, H, R, d)
    z = np.asarray(z, dtype=float)
    log_q = float(log_gaussian_at(cho, z.shape[0], zhat, z)[0])
    C = P[:, n - d :] @ H.T
    K = sla.cho_solve(cho, C.T).T
    m2 = m + K @ (z - zhat)
    P2 = _symmetrize(P - K @ C.T)
    return log_q, m2, P2


# ---------------------------------------------------------------------------
# Public operations.
# ---------------------------------------------------------------------------


def condition_on_measurement(H, R, prior: Gaussian, z):
    """Bayes update of a Gaussian prior through a linear-Gaussian measurement.

    Returns the marginal likelihood value N(z; H m, R + H P H^T) and the
    posterior Gaussian.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    z = np.asarray(z, dtype=float).reshape(-1)
    log_q, m2, P2 = condition_last(prior.mean, prior.cov, H, R, z, prior.dim)
    return float(np.exp(log_q)), Gaussian(m2, P2, validate=False)


def joint_extend(F, Q, traj: GaussianTrajectoryDensity) -> GaussianTrajectoryDensity:
    """Extend a trajectory density one scan forward under linear dynamics."""
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    g = traj.gaussian
    d = traj.block_dim
    if traj.filtered:
        m2, P2 = predict_last(g.mean, g.cov, F, Q, d)
    else:
        m2, P2 = extend_stacked(g.mean, g.cov, F, Q, d)
    return GaussianTrajectoryDensity(
        traj.label, traj.start, traj.end + 1, d, Gaussian(m2, P2, validate=False), traj.filtered
    )


def marginal_last_block(traj: GaussianTrajectoryDensity) -> Gaussian:
    """Marginal of the final d-dimensional block."""
    return traj.last_block()


def scan_update(traj, label, value, scan, model, measurements, *, filtered=False):
    """One scan of the per-label posterior recursion.

    Cases, selected by the association value and by whether the label already
    carries a density:

    * no density, value -1: label unborn, weight Q_B, no density;
    * no density, value 0: birth misdetected, weight P_B * Q_D;
    * no density, value m: birth detected, weight P_B * P_D * q / kappa(z_m);
    * density ending at scan-1, value -1: death, weight Q_S, density unchanged;
    * density ending at scan-1, value 0: survival misdetected, weight
      P_S * Q_D, density extended;
    * density ending at scan-1, value m: survival detected, weight
      P_S * P_D * q / kappa(z_m), density extended then conditioned.

    Returns (log weight increment, density or None).  The weight increments
    are identical in stacked and filtered modes.
    """
    dyn = model.dynamic
    meas = model.measurement
    value = int(value)
    Z = np.atleast_2d(np.asarray(measurements, dtype=float)) if len(measurements) else None
    if value > 0:
        if Z is None or value > Z.shape[0]:
            raise ModelError(f"association value {value} exceeds measurement count")
        z = Z[value - 1]
        log_kappa = meas.clutter.log_intensity(z)
        if not np.isfinite(log_kappa):
            raise ModelError("clutter density zero at measurement")
    H, R = meas.observation_at(scan)
    d = dyn.d

    if traj is None:
        site = dyn.birth_for(label)
        if site is None or label.birth_time != scan:
            raise ModelError(f"label {label} has no birth site at scan {scan}")
        if value == -1:
            return _log(1.0 - site.prob), None
        m, P = site.mean, site.cov
        log_w = _log(site.prob)
        if value == 0:
            log_w += _log(1.0 - meas.detection(label))
        else:
            log_q, m, P = condition_last(m, P, H, R, z, d)
            log_w += _log(meas.detection(label)) + log_q - log_kappa
        density = GaussianTrajectoryDensity(
            label, scan, scan, d, Gaussian(m, P, validate=False), filtered
        )
        return log_w, density

    if traj.end == scan - 1:
        if value == -1:
            return _log(1.0 - dyn.survival(label)), traj
        F, Q = dyn.transition_at(scan)
        extended = joint_extend(F, Q, traj)
        log_w = _log(dyn.survival(label))
        if value == 0:
            return log_w + _log(1.0 - meas.detection(label)), extended
        g = extended.gaussian
        log_q, m, P = condition_last(g.mean, g.cov, H, R, z, d)
        log_w += _log(meas.detection(label)) + log_q - log_kappa
        density = GaussianTrajectoryDensity(
            label, extended.start, extended.end, d, Gaussian(m, P, validate=False), traj.filtered
        )
        return log_w, density

    raise ModelError(
        f"label {label} ended at scan {traj.end}; cannot update it at scan {scan}"
    )


def _log(x: float) -> float:
    return float(np.log(x)) if x > 0.0 else float("-inf")
