"""Gaussian trajectory algebra: conditioning, extension, marginals, and the
per-scan weight increments."""

import math

import numpy as np
import pytest

from msglmb import (
    Gaussian,
    GaussianTrajectoryDensity,
    Label,
    ModelError,
    NumericalError,
    condition_on_measurement,
    joint_extend,
    marginal_last_block,
    scan_update,
)
from conftest import as_measurements, model_1d
from oracles import quad_gauss_product_1d


class TestGaussianType:
    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(ModelError, match="symmetric"):
            Gaussian([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(ModelError, match="eigenvalue"):
            Gaussian([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_marginal(self):
        g = Gaussian([1.0, 2.0], [[2.0, 0.3], [0.3, 1.0]])
        m = g.marginal([1])
        assert m.mean[0] == 2.0 and m.cov[0, 0] == 1.0


class TestConditionOnMeasurement:
    def test_one_dimensional_example_against_quadrature(self):
        q, post = condition_on_measurement([[1.0]], [[1.0]], Gaussian([0.0], [[1.0]]), [0.0])
        norm, mean, var = quad_gauss_product_1d(1.0, 1.0, 0.0, 1.0, 0.0)
        assert q == pytest.approx(0.2820948, abs=1e-7)
        assert q == pytest.approx(norm, rel=1e-9)
        assert post.mean[0] == pytest.approx(mean, abs=1e-9)
        assert post.cov[0, 0] == pytest.approx(0.5, rel=1e-12)
        assert post.cov[0, 0] == pytest.approx(var, rel=1e-7)

    def test_zero_innovation_keeps_prior_mean(self):
        prior = Gaussian([1.5, -0.5], [[2.0, 0.1], [0.1, 1.0]])
        H = [[1.0, 0.0]]
        z = [1.5]
        _, post = condition_on_measurement(H, [[0.7]], prior, z)
        assert np.allclose(post.mean, prior.mean)

    def test_uninformative_measurement_limit(self):
        prior = Gaussian([1.0], [[2.0]])
        q, post = condition_on_measurement([[1.0]], [[1e12]], prior, [123.0])
        assert np.allclose(post.mean, prior.mean, rtol=1e-6)
        assert np.allclose(post.cov, prior.cov, rtol=1e-6)
        expected = math.exp(-0.5 * (123.0 - 1.0) ** 2 / (1e12 + 2.0)) / math.sqrt(
            2 * math.pi * (1e12 + 2.0)
        )
        assert q == pytest.approx(expected, rel=1e-6)

    def test_singular_innovation_raises(self):
        with pytest.raises(NumericalError, match="innovation"):
            condition_on_measurement([[1.0]], [[0.0]], Gaussian([0.0], [[0.0]]), [0.0])

    def test_marginal_likelihood_normalizes(self):
        # integrating q(z) over z recovers 1 (checked by quadrature)
        zs = np.linspace(-40, 40, 8001)
        qs = np.array(
            [
                condition_on_measurement([[1.0]], [[0.8]], Gaussian([0.4], [[1.3]]), [z])[0]
                for z in zs
            ]
        )
        assert np.trapezoid(qs, zs) == pytest.approx(1.0, rel=1e-9)


def single_block(label=Label(1, 1), mean=(0.0,), cov=((1.0,),), start=1):
    g = Gaussian(list(mean), [list(r) for r in cov])
    return GaussianTrajectoryDensity(label, start, start, len(mean), g)


class TestJointExtend:
    def test_identity_dynamics_zero_noise(self):
        traj = single_block(mean=(1.0,), cov=((2.0,),))
        out = joint_extend([[1.0]], [[0.0]], traj)
        assert out.n_scans == 2
        cov = out.gaussian.cov
        # both blocks perfectly correlated with the input
        assert np.allclose(cov, 2.0 * np.ones((2, 2)))
        last = marginal_last_block(out)
        assert last.mean[0] == pytest.approx(1.0)
        assert last.cov[0, 0] == pytest.approx(2.0)

    def test_last_block_mean_is_linear_image(self):
        traj = single_block(mean=(0.7,), cov=((1.0,),))
        out = joint_extend([[1.3]], [[0.2]], traj)
        assert marginal_last_block(out).mean[0] == pytest.approx(1.3 * 0.7)

    def test_against_direct_block_assembly(self):
        rng = np.random.default_rng(1)
        F = rng.normal(size=(2, 2))
        Q = np.eye(2) * 0.3
        P = np.array([[1.0, 0.2], [0.2, 0.8]])
        m = np.array([0.5, -1.0])
        traj = GaussianTrajectoryDensity(Label(1, 1), 1, 1, 2, Gaussian(m, P))
        out = joint_extend(F, Q, traj)
        expected_cov = np.block([[P, P @ F.T], [F @ P, Q + F @ P @ F.T]])
        expected_mean = np.concatenate([m, F @ m])
        assert np.allclose(out.gaussian.cov, expected_cov, atol=1e-12)
        assert np.allclose(out.gaussian.mean, expected_mean, atol=1e-12)

    def test_top_left_block_preserved_exactly(self):
        traj = single_block(mean=(1.0,), cov=((1.7,),))
        out = joint_extend([[0.9]], [[0.4]], traj)
        assert out.gaussian.cov[0, 0] == traj.gaussian.cov[0, 0]
        evals = np.linalg.eigvalsh(out.gaussian.cov)
        assert evals.min() > -1e-12


class TestMarginalLastBlock:
    def test_single_block_is_itself(self):
        traj = single_block(mean=(0.3,), cov=((1.1,),))
        out = marginal_last_block(traj)
        assert np.allclose(out.mean, traj.gaussian.mean)
        assert np.allclose(out.cov, traj.gaussian.cov)

    def test_zero_noise_identity_extension_keeps_marginal(self):
        traj = single_block(mean=(0.3,), cov=((1.1,),))
        out = marginal_last_block(joint_extend([[1.0]], [[0.0]], traj))
        assert out.mean[0] == pytest.approx(0.3)
        assert out.cov[0, 0] == pytest.approx(1.1)

    def test_against_grid_integration(self):
        traj = single_block(mean=(0.4,), cov=((0.9,),))
        out = joint_extend([[1.1]], [[0.6]], traj)
        # integrate the 2-D joint over the leading coordinate on a grid
        xs = np.linspace(-12, 12, 601)
        X0, X1 = np.meshgrid(xs, xs, indexing="ij")
        pts = np.stack([X0.ravel(), X1.ravel()], axis=1)
        pdf = np.exp(out.gaussian.logpdf(pts)).reshape(X0.shape)
        marg = pdf.sum(axis=0) * (xs[1] - xs[0])
        mean = (xs * marg).sum() / marg.sum()
        var = ((xs - mean) ** 2 * marg).sum() / marg.sum()
        last = marginal_last_block(out)
        assert mean == pytest.approx(last.mean[0], abs=1e-6)
        assert var == pytest.approx(last.cov[0, 0], rel=1e-6)


class TestScanUpdate:
    def make_model(self, p_b=0.04, p_d=0.77, p_s=0.99):
        return model_1d(
            births=[(1, 1, p_b, 0.0, 1.0), (2, 1, p_b, 0.0, 1.0)],
            p_s=p_s,
            p_d=p_d,
            lambda_c=0.05,
            q=0.5,
            r=0.4,
        )

    def test_birth_misdetected_weight(self):
        model = self.make_model()
        Z = np.empty((0, 1))
        log_w, traj = scan_update(None, Label(1, 1), 0, 1, model, Z)
        assert math.exp(log_w) == pytest.approx(0.04 * 0.23, rel=1e-12)
        assert traj.start == traj.end == 1

    def test_unborn_weight(self):
        model = self.make_model()
        log_w, traj = scan_update(None, Label(1, 1), -1, 1, model, np.empty((0, 1)))
        assert math.exp(log_w) == pytest.approx(0.96, rel=1e-12)
        assert traj is None

    def test_dead_label_density_unchanged(self):
        model = self.make_model()
        _, traj = scan_update(None, Label(1, 1), 0, 1, model, np.empty((0, 1)))
        log_w, after = scan_update(traj, Label(1, 1), -1, 2, model, np.empty((0, 1)))
        assert after is traj  # bit-identical, not merely equal
        assert math.exp(log_w) == pytest.approx(0.01, rel=1e-10)

    def test_birth_detected_weight_matches_quadrature(self):
        model = self.make_model()
        Z = as_measurements([0.7])[0]
        log_w, traj = scan_update(None, Label(1, 1), 1, 1, model, Z)
        norm, mean, var = quad_gauss_product_1d(1.0, 0.4, 0.0, 1.0, 0.7)
        expected = 0.04 * 0.77 * norm / 0.05
        assert math.exp(log_w) == pytest.approx(expected, rel=1e-7)
        assert traj.gaussian.mean[0] == pytest.approx(mean, rel=1e-7)

    def test_detected_survival_against_2d_quadrature(self):
        model = self.make_model()
        Z1 = as_measurements([0.2])[0]
        _, traj = scan_update(None, Label(1, 1), 1, 1, model, Z1)
        z2 = 0.9
        log_w, out = scan_update(traj, Label(1, 1), 1, 2, model, as_measurements([z2])[0])
        # chain quadrature: propagate the scan-1 posterior through the
        # motion kernel, weight by the detection ratio at scan 2
        xs = np.linspace(-30, 30, 4001)
        step = xs[1] - xs[0]
        post1 = np.exp(traj.gaussian.logpdf(xs.reshape(-1, 1)))
        K = np.exp(-((xs[:, None] - xs[None, :]) ** 2) / (2 * 0.5)) / math.sqrt(2 * math.pi * 0.5)
        pred = K @ post1 * step
        lik = np.exp(-((z2 - xs) ** 2) / (2 * 0.4)) / math.sqrt(2 * math.pi * 0.4)
        omega = 0.99 * 0.77 / 0.05 * (lik * pred).sum() * step
        assert math.exp(log_w) == pytest.approx(omega, rel=1e-6)
        assert out.n_scans == 2

    def test_clutter_free_measurement_rejected(self):
        model = self.make_model()
        with pytest.raises(ModelError, match="clutter density zero"):
            scan_update(None, Label(1, 1), 1, 1, model, as_measurements([100.0])[0])

    def test_filtered_and_stacked_increments_identical(self):
        model = self.make_model()
        z_by_scan = as_measurements([0.2], [0.9, -0.4], [0.1])
        for values in [(1, 2, 0), (1, 0, 1), (0, 1, -1), (1, -1), (-1,)]:
            stacked = filtered = None
            for scan, value in enumerate(values, start=1):
                ws, stacked_new = scan_update(
                    stacked, Label(1, 1), value, scan, model, z_by_scan[scan - 1]
                )
                wf, filtered_new = scan_update(
                    filtered, Label(1, 1), value, scan, model, z_by_scan[scan - 1], filtered=True
                )
                assert ws == pytest.approx(wf, abs=1e-12)
                if value < 0:
                    break  # unborn or dead: no factors at later scans
                stacked, filtered = stacked_new, filtered_new
                last_s = marginal_last_block(stacked)
                last_f = marginal_last_block(filtered)
                assert np.allclose(last_s.mean, last_f.mean, atol=1e-12)
                assert np.allclose(last_s.cov, last_f.cov, atol=1e-12)

    def test_update_after_gap_rejected(self):
        model = self.make_model()
        _, traj = scan_update(None, Label(1, 1), 0, 1, model, np.empty((0, 1)))
        with pytest.raises(ModelError, match="ended at scan"):
            scan_update(traj, Label(1, 1), 0, 3, model, np.empty((0, 1)))
