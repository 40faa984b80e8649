"""Independent reference computations the tests check the library against.

Everything here deliberately avoids the library's Gaussian-algebra update
path: posterior weights come from grid quadrature, smoothed marginals from
a textbook forward-backward pass, and assignments from brute force.
"""

from __future__ import annotations

import itertools

import numpy as np

from msglmb import Label


class GridPosteriorOracle:
    """Per-history posterior weights for 1-D models by grid quadrature.

    Each label's weight factor is a chain of integrals over its kinematic
    states: birth density times detection ratios, propagated through the
    motion kernel scan by scan, closed with a death factor when the label
    dies inside the window.  The trapezoid rule on a wide uniform grid is
    exact to machine precision for these fast-decaying integrands.
    """

    def __init__(self, model, measurements, lo=-40.0, hi=40.0, n=1601):
        self.model = model
        self.Z = [np.atleast_2d(np.asarray(z, dtype=float)) for z in measurements]
        self.k = len(self.Z)
        self.grid = np.linspace(lo, hi, n)
        self.step = self.grid[1] - self.grid[0]
        dyn = model.dynamic
        meas = model.measurement
        F = dyn.transition[0, 0]
        Q = dyn.process_noise[0, 0]
        self.kernel = np.exp(
            -((self.grid[:, None] - F * self.grid[None, :]) ** 2) / (2.0 * Q)
        ) / np.sqrt(2.0 * np.pi * Q)
        self.H = meas.observation[0, 0]
        self.R = meas.noise[0, 0]
        self.kappa = meas.clutter.intensity
        self.p_d = meas.detection_prob
        self.p_s = dyn.survival_prob

    def _psi(self, value, scan):
        if value == 0:
            return np.full(self.grid.shape, 1.0 - self.p_d)
        z = self.Z[scan - 1][value - 1, 0]
        g = np.exp(-((z - self.H * self.grid) ** 2) / (2.0 * self.R)) / np.sqrt(
            2.0 * np.pi * self.R
        )
        return self.p_d * g / self.kappa

    def label_log_weight(self, history, label: Label) -> float:
        dyn = self.model.dynamic
        site = dyn.birth_for(label)
        b = label.birth_time
        first = history.value(label, b)
        if first < 0:
            return float(np.log(1.0 - site.prob))
        f_b = np.exp(-((self.grid - site.mean[0]) ** 2) / (2.0 * site.cov[0, 0])) / np.sqrt(
            2.0 * np.pi * site.cov[0, 0]
        )
        v = site.prob * f_b * self._psi(first, b)
        scan = b + 1
        while scan <= self.k and history.value(label, scan) >= 0:
            v = self.p_s * self._psi(history.value(label, scan), scan) * (
                self.kernel @ v * self.step
            )
            scan += 1
        w = float(v.sum() * self.step)
        if scan <= self.k:
            w *= 1.0 - self.p_s
        return float(np.log(w))

    def history_log_weight(self, history) -> float:
        dyn = self.model.dynamic
        total = 0.0
        for scan in range(1, self.k + 1):
            for site in dyn.births_at(scan):
                total += self.label_log_weight(history, site.label)
        return total

    def posterior(self, histories) -> dict:
        logs = np.array([self.history_log_weight(h) for h in histories])
        logs -= logs.max()
        w = np.exp(logs)
        w /= w.sum()
        return {h.key: float(x) for h, x in zip(histories, w)}


def kalman_forward(F, Q, H, R, m0, P0, zs):
    """Filtered and one-step-predicted moments; the first measurement
    updates the prior directly (birth convention)."""
    F, Q = np.atleast_2d(F), np.atleast_2d(Q)
    H, R = np.atleast_2d(H), np.atleast_2d(R)
    m_pred, P_pred = [np.asarray(m0, dtype=float)], [np.atleast_2d(P0).astype(float)]
    m_filt, P_filt = [], []
    for i, z in enumerate(zs):
        if i > 0:
            m_pred.append(F @ m_filt[-1])
            P_pred.append(F @ P_filt[-1] @ F.T + Q)
        mp, Pp = m_pred[-1], P_pred[-1]
        S = R + H @ Pp @ H.T
        K = Pp @ H.T @ np.linalg.inv(S)
        m_filt.append(mp + K @ (np.asarray(z, dtype=float) - H @ mp))
        P_filt.append(Pp - K @ H @ Pp)
    return m_filt, P_filt, m_pred, P_pred


def rts_backward(F, m_filt, P_filt, m_pred, P_pred):
    """Standard fixed-interval smoother over the filtered sequence."""
    F = np.atleast_2d(F)
    n = len(m_filt)
    m_s = [None] * n
    P_s = [None] * n
    m_s[-1], P_s[-1] = m_filt[-1], P_filt[-1]
    for i in range(n - 2, -1, -1):
        G = P_filt[i] @ F.T @ np.linalg.inv(P_pred[i + 1])
        m_s[i] = m_filt[i] + G @ (m_s[i + 1] - m_pred[i + 1])
        P_s[i] = P_filt[i] + G @ (P_s[i + 1] - P_pred[i + 1]) @ G.T
    return m_s, P_s


def ospa_bruteforce(X, Y, c, p):
    """OSPA by explicit minimization over assignments (tiny sets only)."""
    X = np.atleast_2d(np.asarray(X, dtype=float)) if np.size(X) else np.empty((0, 1))
    Y = np.atleast_2d(np.asarray(Y, dtype=float)) if np.size(Y) else np.empty((0, 1))
    n, m = X.shape[0], Y.shape[0]
    if n == 0 and m == 0:
        return 0.0
    if n > m:
        X, Y = Y, X
        n, m = m, n
    best = np.inf
    for perm in itertools.permutations(range(m), n):
        cost = sum(
            min(c, float(np.linalg.norm(X[i] - Y[j]))) ** p for i, j in enumerate(perm)
        )
        best = min(best, cost)
    return float(((best + c**p * (m - n)) / m) ** (1.0 / p))


def quad_gauss_product_1d(h_val, r_val, m_val, p_val, z, lo=-60.0, hi=60.0, n=24001):
    """Numerically integrate N(z; h x, r) N(x; m, p) over x, returning the
    normalizer and the posterior mean/variance of x."""
    x = np.linspace(lo, hi, n)
    step = x[1] - x[0]
    lik = np.exp(-((z - h_val * x) ** 2) / (2.0 * r_val)) / np.sqrt(2.0 * np.pi * r_val)
    pri = np.exp(-((x - m_val) ** 2) / (2.0 * p_val)) / np.sqrt(2.0 * np.pi * p_val)
    joint = lik * pri
    norm = joint.sum() * step
    mean = (x * joint).sum() * step / norm
    var = ((x - mean) ** 2 * joint).sum() * step / norm
    return norm, mean, var
