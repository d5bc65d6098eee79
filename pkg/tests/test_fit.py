import math

import numpy as np
import pytest

from twinbeam import (
    DetectorModel,
    Histogram2D,
    JointDistribution,
    SimConfig,
    TwinBeamParams,
    ValidationError,
    declination,
    default_cutoffs,
    joint_photon_distribution,
    photocount_distribution,
    reconstruct,
    response_table,
    simulate_histogram,
)

CLEAN_PARAMS = TwinBeamParams(10.0, 0.3, 2.0, 0.2, 1.5, 0.25)
DET_S = DetectorModel(efficiency=0.31, pixels=10**5, dark_rate=0.0)
DET_I = DetectorModel(efficiency=0.27, pixels=10**5, dark_rate=0.0)


def unit_dark():
    return Histogram2D(np.array([[1.0]]), 1.0)


def model_histogram(params, d_s, d_i, m_max=40):
    cut = default_cutoffs(params)
    jd = joint_photon_distribution(params, cut)
    t_s = response_table(d_s, m_max, cut[0])
    t_i = response_table(d_i, m_max, cut[1])
    pc = photocount_distribution(jd, t_s, t_i)
    counts = pc.probs / pc.probs.sum()
    return Histogram2D(counts, 1.0)


class TestDeclination:
    def test_identical_tables_give_zero(self):
        probs = np.array([[0.5, 0.25], [0.125, 0.125]])
        jd = JointDistribution(probs, 0.0)
        f = Histogram2D(probs, 1.0)
        assert declination(jd, f) == 0.0

    def test_disjoint_point_masses(self):
        jd = JointDistribution(np.array([[1.0, 0.0], [0.0, 0.0]]), 0.0)
        f = Histogram2D(np.array([[0.0, 0.0], [0.0, 1.0]]), 1.0)
        assert declination(jd, f) == pytest.approx(math.sqrt(2.0), rel=1e-14)

    def test_unnormalized_histogram_rejected(self):
        jd = JointDistribution(np.array([[1.0]]), 0.0)
        with pytest.raises(ValidationError):
            declination(jd, Histogram2D(np.array([[7.0]]), 7.0))

    def test_shape_union_includes_unmodelled_cells(self):
        # histogram support wider than the model: those cells contribute f^2
        jd = JointDistribution(np.array([[1.0]]), 0.0)
        f = Histogram2D(np.array([[0.5, 0.0], [0.0, 0.5]]), 1.0)
        want = math.sqrt(0.5**2 + 0.5**2)
        assert declination(jd, f) == pytest.approx(want, rel=1e-14)

    def test_sampling_noise_scale(self):
        # histogram drawn from the model itself: the declination should be
        # of the order of the multinomial sampling noise sqrt(sum f(1-f)/N)
        frames = 10**5
        cfg = SimConfig(CLEAN_PARAMS,
                        DetectorModel(0.31, 2000, 1e-4),
                        DetectorModel(0.27, 2000, 1e-4),
                        frames=frames, seed=20)
        f, _ = simulate_histogram(cfg)
        cut = default_cutoffs(CLEAN_PARAMS)
        jd = joint_photon_distribution(CLEAN_PARAMS, cut)
        t_s = response_table(cfg.detector_s, f.counts.shape[0] + 5, cut[0])
        t_i = response_table(cfg.detector_i, f.counts.shape[1] + 5, cut[1])
        pc = photocount_distribution(jd, t_s, t_i)
        d = declination(pc, f.normalized())
        noise_scale = math.sqrt(float((pc.probs * (1 - pc.probs)).sum()) / frames)
        assert 0.3 * noise_scale < d < 3.0 * noise_scale

    def test_is_a_metric_on_tables(self, rng):
        def rand_pair():
            p = rng.random((5, 5))
            p /= p.sum()
            return JointDistribution(p, 0.0), Histogram2D(p, 1.0)

        (a_jd, a_h), (b_jd, b_h), (_, c_h) = rand_pair(), rand_pair(), rand_pair()
        # symmetry
        assert declination(a_jd, b_h) == pytest.approx(declination(b_jd, a_h), rel=1e-12)
        # triangle inequality
        ab = declination(a_jd, b_h)
        ac = declination(a_jd, c_h)
        cb = declination(b_jd, c_h)
        assert ab <= ac + cb + 1e-12


class TestReconstruct:
    def test_noiseless_model_match(self):
        f = model_histogram(CLEAN_PARAMS, DET_S, DET_I)
        result = reconstruct(f, unit_dark(), DET_S, DET_I, scan_points=80)
        true_var_p = CLEAN_PARAMS.m_pairs * CLEAN_PARAMS.b_pairs**2
        assert result.var_p_opt == pytest.approx(true_var_p, rel=5e-3)
        assert result.declination < 2e-4
        assert result.params.m_pairs == pytest.approx(CLEAN_PARAMS.m_pairs, rel=0.05)
        assert result.params.b_pairs == pytest.approx(CLEAN_PARAMS.b_pairs, rel=0.05)

    def test_deterministic(self):
        f = model_histogram(CLEAN_PARAMS, DET_S, DET_I)
        r1 = reconstruct(f, unit_dark(), DET_S, DET_I, scan_points=40)
        r2 = reconstruct(f, unit_dark(), DET_S, DET_I, scan_points=40)
        assert r1.var_p_opt == r2.var_p_opt
        assert r1.scan == r2.scan

    def test_scan_matches_reevaluation(self):
        f = model_histogram(CLEAN_PARAMS, DET_S, DET_I)
        result = reconstruct(f, unit_dark(), DET_S, DET_I, scan_points=30)
        redo = reconstruct(f, unit_dark(), DET_S, DET_I, scan_points=30)
        assert result.scan == redo.scan
        assert all(d >= 0 or math.isinf(d) for _, d in result.scan)

    def test_boundary_optimum_flagged_for_reference_data(self):
        # data simulated at the reference state: the declination decreases
        # into the infeasibility edge, so the optimum sits on the boundary
        params = TwinBeamParams(179.0, 0.055, 8e-6, 320.0, 8e-3, 12.0)
        cfg = SimConfig(params,
                        DetectorModel(0.243, 10**4, 1e-4),
                        DetectorModel(0.235, 10**4, 1e-4),
                        frames=3 * 10**5, seed=1)
        f, dark = simulate_histogram(cfg)
        result = reconstruct(f, dark, cfg.detector_s, cfg.detector_i, scan_points=60)
        assert result.at_boundary

    def test_monotone_data_refinement(self):
        # doubling the simulated frames must not increase the median
        # recovery error of the paired variance
        truth = CLEAN_PARAMS.m_pairs * CLEAN_PARAMS.b_pairs**2
        d_s = DetectorModel(0.31, 2000, 1e-4)
        d_i = DetectorModel(0.27, 2000, 1e-4)
        errors = {30_000: [], 60_000: []}
        for k in range(10):
            for frames in errors:
                cfg = SimConfig(CLEAN_PARAMS, d_s, d_i, frames=frames, seed=1000 + k)
                f, dark = simulate_histogram(cfg)
                r = reconstruct(f, dark, d_s, d_i, scan_points=30)
                errors[frames].append(abs(r.var_p_opt - truth) / truth)
        assert np.median(errors[60_000]) <= np.median(errors[30_000]) * 1.2

    def test_scan_is_sorted_and_contains_grid(self):
        f = model_histogram(CLEAN_PARAMS, DET_S, DET_I)
        result = reconstruct(f, unit_dark(), DET_S, DET_I, scan_points=25)
        vps = [v for v, _ in result.scan]
        assert vps == sorted(vps)
        assert len(result.scan) >= 25
