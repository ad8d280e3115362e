import numpy as np
import pytest

from suda.errors import ConfigError
from suda.simulate import (
    DomainConfig,
    SurrogateConfig,
    TrajectorySpec,
    benchmark_domain_pair,
    gen_trajectory,
    load_pair_config,
    make_domain_pair,
    save_pair_config,
    sensor_response,
    simulate,
    simulate_from_angles,
    validate_surrogate,
)


class TestTrajectories:
    def test_zero_amplitude_sinusoid_is_constant(self):
        spec = TrajectorySpec(kind="sinusoid-mix", freqs_hz=(0.5,), amplitudes_deg=(0.0,))
        out = gen_trajectory(spec, 200)
        assert np.all(out == 100.0)  # midpoint of [40, 160]

    def test_ramp_cycle_exact_extremes(self):
        spec = TrajectorySpec(kind="ramp-cycle", angle_range=(40.0, 160.0),
                              period_frames=100, dwell_frames=0)
        out = gen_trajectory(spec, 101)
        assert out[0] == 40.0
        assert out[50] == 160.0
        assert out[100] == 40.0

    def test_random_walk_bounded_and_deterministic(self):
        spec = TrajectorySpec(kind="random-walk", seed=42)
        a = gen_trajectory(spec, 1000)
        b = gen_trajectory(spec, 1000)
        assert np.array_equal(a, b)
        assert a.min() >= 40.0 and a.max() <= 160.0

    def test_composite_covers_range_and_repeats(self):
        spec = TrajectorySpec(kind="composite", seed=7)
        a = gen_trajectory(spec, 5000)
        assert np.array_equal(a, gen_trajectory(spec, 5000))
        assert a.min() <= 41.0 and a.max() >= 159.0
        # the opening sweep covers the whole range within the first segment
        assert a[:260].min() <= 41.0 and a[:260].max() >= 159.0

    def test_all_values_clipped(self):
        spec = TrajectorySpec(kind="sinusoid-mix", freqs_hz=(0.3,), amplitudes_deg=(500.0,))
        out = gen_trajectory(spec, 500)
        assert out.min() >= 40.0 and out.max() <= 160.0

    def test_invalid_range(self):
        with pytest.raises(ConfigError):
            TrajectorySpec(angle_range=(160.0, 40.0))

    def test_frames_validated(self):
        with pytest.raises(ConfigError):
            gen_trajectory(TrajectorySpec(), 0)


class TestSensorResponse:
    def test_offset_only(self):
        cfg = SurrogateConfig(gain=(5.0, 4.0), offset=(100.0, 120.0), quad=(0, 0),
                              noise_sd=0.0, lag=0.0, digitize=False)
        r, _ = sensor_response(0.0, cfg)
        assert np.allclose(r, [100.0, 120.0])

    def test_affine_evaluation(self):
        cfg = SurrogateConfig(gain=(5.0, 4.0), offset=(100.0, 120.0), quad=(0, 0),
                              noise_sd=0.0, lag=0.0, digitize=False)
        r, _ = sensor_response(100.0, cfg)
        assert np.allclose(r, [600.0, 520.0])

    def test_lag_converges_geometrically(self):
        # closed form with zero-initialized lag state: u_k = (1 - lag^k) * s
        cfg = SurrogateConfig(gain=(1.0, 1.0), offset=(0.0, 0.0), quad=(0, 0),
                              noise_sd=0.0, lag=0.5, digitize=False)
        state = None
        vals = []
        for k in range(1, 21):
            r, state = sensor_response(40.0, cfg, state)
            expected = (1.0 - 0.5 ** k) * 40.0
            assert r[0] == pytest.approx(expected, abs=1e-12)
            vals.append(r[0])
        assert abs(vals[-1] - 40.0) < 1e-4

    def test_digitize_rounds_and_clamps(self):
        cfg = SurrogateConfig(gain=(5.0, 4.0), offset=(100.3, 120.0), digitize=True)
        r, _ = sensor_response(10.0, cfg)
        assert r[0] == np.rint(5.0 * 10.0 + 100.3)
        assert float(r[0]).is_integer()

    def test_monotonicity_validation(self):
        # strongly negative curvature flips the slope inside the range
        cfg = SurrogateConfig(gain=(5.0, 4.0), offset=(10.0, 10.0), quad=(-0.004, 0.0),
                              digitize=False)
        with pytest.raises(ConfigError, match="increasing"):
            validate_surrogate(cfg, (40.0, 160.0))

    def test_digitizer_range_validation(self):
        cfg = SurrogateConfig(gain=(8.0, 4.0), offset=(100.0, 120.0), digitize=True)
        with pytest.raises(ConfigError, match="1023"):
            validate_surrogate(cfg, (40.0, 160.0))  # 8*160+100 > 1023

    def test_strictly_increasing_readings(self):
        cfg = SurrogateConfig(gain=(4.2, 3.6), offset=(90.0, 120.0), quad=(4e-4, -3e-4),
                              noise_sd=0.0, digitize=False)
        grid = np.arange(40.0, 161.0, 1.0)
        resp = cfg.noiseless(grid)
        assert np.all(np.diff(resp[:, 0]) > 0)
        assert np.all(np.diff(resp[:, 1]) > 0)


class TestSimulate:
    CFG = SurrogateConfig(gain=(5.0, 4.0), offset=(100.0, 120.0), quad=(0.0, 0.0),
                          noise_sd=0.0, lag=0.0, digitize=False)

    def test_size_and_determinism(self):
        spec = TrajectorySpec(kind="composite", seed=5)
        ds = simulate(spec, self.CFG, 30000, seed=1)
        assert len(ds) == 30000
        ds2 = simulate(spec, self.CFG, 30000, seed=1)
        assert np.array_equal(ds.readings, ds2.readings)
        assert np.array_equal(ds.angles, ds2.angles)

    def test_noiseless_cloud_is_a_segment(self):
        spec = TrajectorySpec(kind="composite", seed=5)
        ds = simulate(spec, self.CFG, 2000, seed=1)
        pts = ds.readings
        d = pts[np.argmax(np.linalg.norm(pts - pts[0], axis=1))] - pts[0]
        d = d / np.linalg.norm(d)
        rel = pts - pts[0]
        perp = rel - np.outer(rel @ d, d)
        assert np.max(np.abs(perp)) < 1e-9

    def test_offset_shift_keeps_labels(self):
        spec = TrajectorySpec(kind="composite", seed=5)
        other = SurrogateConfig(gain=self.CFG.gain, offset=(150.0, 90.0), quad=(0, 0),
                                noise_sd=0.0, lag=0.0, digitize=False)
        a = simulate(spec, self.CFG, 1000, seed=1)
        b = simulate(spec, other, 1000, seed=1)
        assert np.array_equal(a.angles, b.angles)
        assert np.allclose(b.readings - a.readings, [50.0, -30.0])

    def test_from_angles_pairing(self):
        angles = np.linspace(40, 160, 300)
        ds = simulate_from_angles(angles, self.CFG, seed=0)
        assert ds.labeled and np.array_equal(ds.angles, angles)
        assert np.allclose(ds.readings[:, 0], 5.0 * angles + 100.0)

    def test_provenance_records_config(self):
        spec = TrajectorySpec(kind="composite", seed=5)
        ds = simulate(spec, self.CFG, 100, seed=9)
        assert "seed=9" in ds.meta.provenance
        assert "gain=(5.0, 4.0)" in ds.meta.provenance


class TestDomainPair:
    def test_identical_configs_identical_readings(self):
        spec = TrajectorySpec(kind="composite", seed=5)
        cfg = TestSimulate.CFG
        dom = DomainConfig(spec, cfg)
        d_s, d_t, d_t_eval = make_domain_pair(dom, dom, 500, 500, 3, 3)
        assert np.array_equal(d_s.readings, d_t.readings)
        assert not d_t.labeled and d_t_eval.labeled
        assert np.array_equal(d_t.readings, d_t_eval.readings)

    def test_scaled_gains_scale_cloud(self):
        spec = TrajectorySpec(kind="composite", seed=5)
        base = TestSimulate.CFG
        scaled = SurrogateConfig(gain=(base.gain[0] * 1.3, base.gain[1] * 1.3),
                                 offset=base.offset, quad=(0, 0), noise_sd=0.0,
                                 lag=0.0, digitize=False)
        d_s, _, d_t_eval = make_domain_pair(DomainConfig(spec, base),
                                            DomainConfig(spec, scaled), 400, 400, 3, 3)
        np.testing.assert_allclose(
            d_t_eval.readings - np.array(base.offset),
            1.3 * (d_s.readings - np.array(base.offset)), rtol=1e-12)
        assert np.array_equal(d_s.angles, d_t_eval.angles)

    def test_benchmark_pair_valid_and_shifted(self):
        src, tgt = benchmark_domain_pair()
        assert tgt.sensor.gain[0] == pytest.approx(src.sensor.gain[0] * 0.85)
        assert tgt.sensor.gain[1] == pytest.approx(src.sensor.gain[1] * 1.15)
        assert tgt.trajectory.kind != src.trajectory.kind
        # offsets moved by 20% of the channel span
        span = src.sensor.noiseless(160.0) - src.sensor.noiseless(40.0)
        assert tgt.sensor.offset[0] - src.sensor.offset[0] == pytest.approx(0.2 * span[0])


class TestConfigFile:
    def test_roundtrip(self, tmp_path):
        src, tgt = benchmark_domain_pair()
        p = tmp_path / "pair.cfg"
        save_pair_config(src, tgt, p)
        src2, tgt2 = load_pair_config(p)
        assert src2 == src
        assert tgt2 == tgt

    def test_missing_section(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[source.trajectory]\nkind = composite\n")
        with pytest.raises(ConfigError, match="missing section"):
            load_pair_config(p)
