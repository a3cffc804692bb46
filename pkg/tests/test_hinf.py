from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg as sla

from gla_workbench import pipeline
from gla_workbench.errors import ConfigError, DimensionError, RiccatiError, UnstableSystemError
from gla_workbench.hinf import (
    Controller,
    close_loop,
    gamma_feasible,
    hinf_norm,
    load_controller,
    open_loop_norm,
    performance_channel,
    riccati_residual,
    save_controller,
    solve_care,
    solve_ric,
    synthesize,
)
from gla_workbench.plant import augment, build_generalized_plant
from gla_workbench.statespace import StateSpace

from helpers import random_stable


def _sweep_peak(sys, n=100_000):
    lam = np.abs(np.linalg.eigvals(sys.A))
    w = np.concatenate([[0.0], np.logspace(np.log10(lam.min()) - 3, np.log10(lam.max()) + 3, n)])
    return np.linalg.svd(sys.freqresp(w), compute_uv=False)[:, 0].max()


class TestCare:
    def test_scalar_stable(self):
        assert solve_care(-1.0, 1.0, 1.0, 1.0)[0, 0] == pytest.approx(np.sqrt(2) - 1, rel=1e-12)

    def test_scalar_integrator(self):
        assert solve_care(0.0, 1.0, 1.0, 1.0)[0, 0] == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_six_state(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((6, 6))
        B = rng.standard_normal((6, 2))
        Q = np.eye(6)
        R = np.eye(2)
        X = solve_care(A, B, Q, R)
        res = A.T @ X + X @ A + Q - X @ B @ B.T @ X
        assert np.linalg.norm(res, 2) / max(1.0, np.linalg.norm(X, 2)) < 1e-8
        assert np.linalg.eigvals(A - B @ B.T @ X).real.max() < 0
        assert np.allclose(X, sla.solve_continuous_are(A, B, Q, R), rtol=1e-8, atol=1e-10)

    def test_imaginary_axis_hamiltonian(self):
        # undamped oscillator, unobservable and uncontrollable: Hamiltonian keeps +-1j
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        with pytest.raises(RiccatiError):
            solve_ric(A, np.zeros((2, 2)), np.zeros((2, 2)))

    def test_dimension_checks(self):
        with pytest.raises(DimensionError, match="Q"):
            solve_care(np.eye(2), np.ones((2, 1)), np.eye(3), np.eye(1))
        with pytest.raises(ConfigError, match="R"):
            solve_care(np.eye(2), np.ones((2, 1)), np.eye(2), -np.eye(1))

    def test_residual_helper(self):
        A = np.array([[-1.0]])
        X = np.array([[np.sqrt(2) - 1]])
        assert riccati_residual(A, np.eye(1), np.eye(1), X) < 1e-15


class TestNorm:
    def test_first_order_lag(self):
        norm, w = hinf_norm(StateSpace([[-1.0]], [[1.0]], [[1.0]]))
        assert norm == pytest.approx(1.0, rel=1e-6) and w == 0.0

    def test_second_order_resonance(self):
        zeta, wn = 0.1, 3.0
        sys = StateSpace([[0.0, 1.0], [-wn * wn, -2 * zeta * wn]], [[0.0], [wn * wn]], [[1.0, 0.0]])
        norm, w = hinf_norm(sys)
        assert norm == pytest.approx(1 / (2 * zeta * np.sqrt(1 - zeta**2)), rel=1e-6)
        assert norm == pytest.approx(5.0252, abs=1e-4)
        assert w == pytest.approx(wn * np.sqrt(1 - 2 * zeta**2), rel=1e-3)
        assert _sweep_peak(sys) == pytest.approx(norm, rel=1e-4)

    def test_feedthrough_dominates(self):
        sys = StateSpace([[-1.0]], [[1.0]], [[-1.0]], [[2.0]])  # G = 2 - 1/(s+1)
        norm, w = hinf_norm(sys)
        assert norm == pytest.approx(2.0, rel=1e-9) and np.isinf(w)

    def test_unstable(self):
        with pytest.raises(UnstableSystemError):
            hinf_norm(StateSpace([[0.5]], [[1.0]], [[1.0]]))

    def test_static_gain(self):
        assert hinf_norm(StateSpace(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((1, 0)), [[3.0, 4.0]]))[0] == 5.0

    @pytest.mark.parametrize("seed", range(10))
    def test_sweep_oracle_mimo(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(2, 7))
        sys = StateSpace(random_stable(rng, n), rng.standard_normal((n, 2)), rng.standard_normal((3, n)),
                         0.1 * rng.standard_normal((3, 2)))
        assert hinf_norm(sys)[0] == pytest.approx(_sweep_peak(sys), rel=1e-4)


class TestSynthesis:
    def test_controller_order_and_stability(self, design):
        K, P = design
        assert K.order == P.n
        cl = close_loop(P, K)
        assert np.linalg.eigvals(cl.A).real.max() < 0

    def test_closed_loop_norm_bound(self, design):
        K, P = design
        cl = performance_channel(P, K)
        norm = hinf_norm(cl)[0]
        assert norm <= K.gamma_star * (1 + 1e-6)
        assert norm < open_loop_norm(P)
        assert _sweep_peak(cl) == pytest.approx(norm, rel=1e-4)

    def test_backoff_recorded(self, design, bench):
        K, _ = design
        assert K.gamma_star == pytest.approx((1 + bench.synthesis.backoff) * K.metadata["gamma_opt"])

    def test_bisection_boundary(self, reduction, bench):
        P = pipeline.generalized_plant(reduction.rom, bench)
        tol = 1e-3
        K = synthesize(P, gamma_tolerance=tol, backoff=0.0)
        assert gamma_feasible(P, K.gamma_star)
        assert not gamma_feasible(P, K.gamma_star * (1 - tol))

    def test_gamma_monotone(self, reduction, bench):
        P = pipeline.generalized_plant(reduction.rom, bench)
        g_opt = synthesize(P, backoff=0.0).gamma_star
        levels = g_opt * np.array([0.5, 0.9, 0.99, 1.0, 1.01, 1.1, 2.0, 10.0, 1e3])
        flags = [gamma_feasible(P, g) for g in levels]
        first = flags.index(True)
        assert all(flags[first:]) and not any(flags[:first])

    def test_nothing_to_regulate(self, reduction):
        aug = augment(reduction.rom)
        aug = replace(aug, C_z=np.zeros_like(aug.C_z))
        K = synthesize(build_generalized_plant(aug))
        assert K.gamma_star == 0.0
        assert not np.any(K.C_k) and not np.any(K.D_k)

    def test_kc_trade_off_in_norm(self, reduction, bench):
        # heavier control weighting can only raise the achievable bound
        gam = [pipeline.design(reduction.rom, bench, K_c=kc)[0].metadata["gamma_opt"] for kc in (0.3, 1.0, 3.0, 10.0)]
        assert all(b > a for a, b in zip(gam, gam[1:]))

    def test_rejects_non_plant(self):
        with pytest.raises(ConfigError):
            synthesize(StateSpace([[-1.0]], [[1.0]], [[1.0]]))


class TestCloseLoop:
    def test_zero_controller_is_open_loop(self, design):
        _, P = design
        cl = close_loop(P, Controller.zero(order=2))
        w = np.array([0.3, 4.0, 30.0])
        g_cl = cl.subsystem(outputs=np.arange(P.C1.shape[0])).freqresp(w)
        g_ol = np.array([P.C1 @ np.linalg.solve(1j * x * np.eye(P.n) - P.A, P.B1) + P.D11 for x in w])
        assert np.allclose(g_cl, g_ol, rtol=1e-12, atol=1e-15)

    def test_output_names(self, design):
        K, P = design
        names = close_loop(P, K).output_names
        assert names[-1] == "u" and "delta" in names and "tip_displacement" in names

    def test_dimension_mismatch(self, design):
        _, P = design
        bad = Controller(-np.eye(1), np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 2)), 1.0)
        with pytest.raises(DimensionError):
            close_loop(P, bad)


def test_controller_round_trip(design, tmp_path):
    K, _ = design
    save_controller(K, tmp_path / "k.json")
    back = load_controller(tmp_path / "k.json")
    for name in ("A_k", "B_k", "C_k", "D_k"):
        assert np.array_equal(getattr(back, name), getattr(K, name))
    assert back.gamma_star == K.gamma_star
    assert back.metadata["measurement"] == "tip_displacement"
