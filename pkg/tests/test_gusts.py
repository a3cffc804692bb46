import numpy as np
import pytest
from scipy.integrate import quad

from gla_workbench.errors import ConfigError
from gla_workbench.gusts import (
    DiscreteGust,
    GustSignal,
    ShapingFilter,
    TurbulenceConfig,
    discrete_gust,
    filter_psd,
    read_gust_csv,
    vonkarman_psd,
    vonkarman_realization,
    write_gust_csv,
)

U = 59.0


class TestDiscreteGust:
    def test_onset_and_peak(self):
        g = DiscreteGust(w0=3.0, H_g=20.0, U_inf=U, start_time=0.5)
        assert g(0.5) == 0.0
        assert g(0.5 + 20.0 / U) == pytest.approx(3.0, abs=1e-12)
        assert g(g.end_time) == pytest.approx(0.0, abs=1e-12)
        assert g(0.49) == 0.0 and g(g.end_time + 1e-9) == 0.0

    def test_long_gust_duration_and_peak(self):
        # 4 s gust at 59 m/s, peak 14 % of the freestream
        g = DiscreteGust(w0=0.14 * U, H_g=118.0, U_inf=U)
        assert g.duration == pytest.approx(4.0)
        assert g.w0 == pytest.approx(8.26)
        integral, _ = quad(g, 0.0, g.duration, epsabs=1e-12, points=[g.duration / 2])
        assert integral == pytest.approx(g.w0 * g.H_g / g.U_inf, rel=1e-10)

    def test_dense_peak_and_continuity(self):
        g = DiscreteGust(w0=8.26, H_g=20.0, U_inf=U, start_time=0.5)
        # odd sample count over the window puts one sample on the midpoint
        t = np.concatenate([[0.0], g.start_time + np.linspace(0.0, g.duration, 400_001), [2.0]])
        w = g(t)
        assert abs(w.max() - g.w0) < 1e-12 * g.w0 + 1e-12
        # no jumps: increments bounded by the maximum slope times the step
        slope = np.pi * U * g.w0 / (2.0 * g.H_g)
        assert np.abs(np.diff(w)).max() <= slope * (t[1] - t[0]) * (1 + 1e-9)

    def test_function_form(self):
        g = DiscreteGust(w0=2.0, H_g=10.0, U_inf=U)
        t = np.array([0.05, 0.1])
        assert np.allclose(discrete_gust(g, t), 1.0 - np.cos(np.pi * U * t / 10.0))

    @pytest.mark.parametrize("kw", [{"H_g": 0.0}, {"U_inf": -1.0}, {"w0": np.nan}])
    def test_validation(self, kw):
        args = {"w0": 1.0, "H_g": 10.0, "U_inf": U, **kw}
        with pytest.raises(ConfigError):
            DiscreteGust(**args)


class TestSpectra:
    def test_vonkarman_variance(self):
        val, _ = quad(lambda w: vonkarman_psd(w, 2.0, 750.0, U), 0.0, np.inf, limit=500)
        # 1.339 is the rounded form of the exact constant (about 1.33875)
        assert val == pytest.approx(4.0, rel=1e-4)

    def test_filter_matches_spectrum(self):
        L = 750.0
        w = np.logspace(-1, 1, 200) * U / L
        ratio = filter_psd(w, 1.0, L, U) / vonkarman_psd(w, 1.0, L, U)
        assert np.abs(ratio - 1.0).max() < 0.1

    def test_filter_poles_stable(self):
        for tau in (1e-3, 0.1, 12.7, 1e3):
            assert ShapingFilter().poles(tau).real.max() < 0

    def test_filter_validation(self):
        with pytest.raises(ConfigError):
            ShapingFilter(den=(1.0, -1.0, 1.0, 1.0))
        with pytest.raises(ConfigError):
            ShapingFilter(num=(1.0, 2.0))


class TestRealization:
    def _cfg(self, **kw):
        args = {"sigma_w": 0.08 * U, "L_w": 750.0, "U_inf": U, "seed": 3, "duration": 60.0, "sample_rate": 100.0}
        args.update(kw)
        return TurbulenceConfig(**args)

    def test_zero_intensity(self):
        g = vonkarman_realization(self._cfg(sigma_w=0.0))
        assert not np.any(g.w)

    def test_bitwise_deterministic(self):
        a = vonkarman_realization(self._cfg())
        b = vonkarman_realization(self._cfg())
        assert np.array_equal(a.w, b.w) and np.array_equal(a.t, b.t)

    def test_seeds_differ(self):
        assert not np.array_equal(vonkarman_realization(self._cfg()).w, vonkarman_realization(self._cfg(seed=4)).w)

    def test_sample_grid(self):
        g = vonkarman_realization(self._cfg(duration=2.0, sample_rate=50.0))
        assert g.t.size == 101 and g.t[-1] == pytest.approx(2.0)

    def test_sample_rate_must_resolve_knee(self):
        with pytest.raises(ConfigError, match="sample_rate"):
            self._cfg(L_w=2.0, sample_rate=100.0)

    @pytest.mark.parametrize("kw", [{"sigma_w": -1.0}, {"L_w": 0.0}, {"duration": 0.0}, {"seed": -1}, {"seed": 1.5}])
    def test_config_validation(self, kw):
        with pytest.raises(ConfigError):
            self._cfg(**kw)

    @pytest.mark.slow
    def test_stationary(self):
        g = vonkarman_realization(self._cfg(duration=3600.0, seed=0))
        half = g.w.size // 2
        first, second = np.std(g.w[:half]), np.std(g.w[half:])
        assert abs(second - first) <= 0.1 * first

    def test_interpolation_and_zero_outside(self):
        g = GustSignal(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
        assert g(0.5) == 1.0 and g(-1.0) == 0.0 and g(3.0) == 0.0
        assert g.end_time == 2.0

    def test_signal_validation(self):
        with pytest.raises(ConfigError):
            GustSignal(np.array([0.0, 0.0]), np.array([1.0, 2.0]))
        with pytest.raises(ConfigError):
            GustSignal(np.array([0.0, 1.0]), np.array([1.0, np.inf]))


class TestCsv:
    def test_round_trip(self, tmp_path):
        g = vonkarman_realization(TurbulenceConfig(sigma_w=1.0, L_w=750.0, U_inf=U, duration=5.0))
        write_gust_csv(g, tmp_path / "g.csv")
        back = read_gust_csv(tmp_path / "g.csv")
        assert np.array_equal(back.t, g.t) and np.array_equal(back.w, g.w)

    def test_headerless(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("0,0\n0.5,1.5\n1.0,0\n")
        assert read_gust_csv(p)(0.5) == 1.5

    def test_bad_rows(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("t,w\n0,0\n1,x\n")
        with pytest.raises(ConfigError, match="line 3"):
            read_gust_csv(p)
        p.write_text("0,0,0\n")
        with pytest.raises(ConfigError, match="2 columns"):
            read_gust_csv(p)
