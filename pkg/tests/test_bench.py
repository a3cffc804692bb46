from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg as sla

from gla_workbench.bench import (
    OUTPUT_NAMES,
    FlowConfig,
    RigidBodyConfig,
    WingConfig,
    build_model,
    solve_static,
    structural_matrices,
)
from gla_workbench.errors import ConfigError, StaticDivergenceError
from gla_workbench.pipeline import mesh_study
from gla_workbench.sim import SimConfig, simulate_open
from gla_workbench.statespace import TrimState, compute_jacobian, solve_trim


class TestConfigValidation:
    @pytest.mark.parametrize("field,value", [
        ("flap_span", 0.0), ("flap_span", 1.2), ("elements", 1), ("EI", 0.0), ("GJ", -1.0),
        ("mass_per_length", 0.0), ("flap_hinge", 0.2), ("structural_damping", -1e-3),
    ])
    def test_wing_rejects(self, field, value):
        with pytest.raises(ConfigError, match=field):
            WingConfig(**{field: value})

    @pytest.mark.parametrize("field,value", [("U_inf", 0.0), ("rho", -1.0), ("gravity", -9.81)])
    def test_flow_rejects(self, field, value):
        with pytest.raises(ConfigError, match=field):
            FlowConfig(**{field: value})

    def test_rigid_body_rejects(self):
        with pytest.raises(ConfigError):
            RigidBodyConfig(mass=0.0)

    def test_build_model_type_check(self):
        with pytest.raises(ConfigError):
            build_model({"elements": 4}, FlowConfig())


class TestModel:
    @pytest.mark.parametrize("elements", [2, 4, 10])
    def test_state_count(self, elements):
        # 2 Wagner states per strip, 3 shared Kussner states, (w, w', theta)
        # displacement and rate per free node
        m = build_model(WingConfig(elements=elements), FlowConfig())
        assert m.n == 8 * elements + 3
        assert m.state_partition["aero"] == (0, 2 * elements + 3)

    def test_output_names(self, model):
        assert model.output_names == OUTPUT_NAMES

    def test_zero_nonlinearity_is_affine(self):
        m = build_model(WingConfig(elements=4, nonlinearity_coefficient=0.0), FlowConfig())
        A = compute_jacobian(m, TrimState(np.zeros(m.n), 0.0, 0.0)).A
        rng = np.random.default_rng(1)
        zero = np.zeros(3)
        r0 = m.residual(np.zeros(m.n), zero, 0.0, m.parameters)
        for _ in range(5):
            w = rng.standard_normal(m.n)
            r = m.residual(w, zero, 0.0, m.parameters)
            assert np.abs(r - r0 - A @ w).max() <= 1e-6 * np.abs(A).max() * np.abs(w).max()

    def test_nonlinearity_is_cubic(self, small_model):
        # odd part of R about the trimmed origin-free state grows like eps^3 once
        # the linear part is removed
        m = small_model
        tr = solve_trim(m)
        A = compute_jacobian(m, tr).A
        lay = m.metadata["layout"]
        v = np.zeros(m.n)
        v[lay["q"][0] + m.metadata["assembly"].tip_w] = 1.0
        zero = np.zeros(3)

        def odd(eps):
            rp = m.residual(tr.w0 + eps * v, zero, 0.0, m.parameters)
            rm = m.residual(tr.w0 - eps * v, zero, 0.0, m.parameters)
            return np.linalg.norm(0.5 * (rp - rm) - eps * (A @ v))

        ratio = odd(0.4) / odd(0.2)
        assert ratio == pytest.approx(8.0, rel=0.02)

    def test_flap_sign_convention(self, small_model):
        base = solve_trim(small_model)
        flapped = solve_trim(small_model, u_c=(np.deg2rad(2.0), 0.0, 0.0))
        tip = lambda tr: small_model.outputs(tr.w0)[0]  # noqa: E731
        assert tip(flapped) > tip(base)

    def test_positive_gust_lifts_wing(self, small_model):
        base = solve_trim(small_model)
        up = solve_trim(small_model, u_d=1.0)
        assert small_model.outputs(up.w0)[0] > small_model.outputs(base.w0)[0]

    def test_rigid_body_layout(self):
        m = build_model(WingConfig(elements=4), FlowConfig(), rigid_body=RigidBodyConfig())
        assert m.state_partition["rigid_body"] == (m.n - 3, m.n)
        assert "tail_incidence" in m.parameters


class TestStaticSolver:
    def test_no_load_no_deflection(self):
        m = build_model(WingConfig(elements=4), FlowConfig(gravity=0.0, alpha0=0.0))
        sol = solve_static(m)
        assert sol.tip_displacement == 0.0 and np.all(sol.q == 0.0)

    def test_uniform_load_cantilever(self):
        # very stiff in torsion: the strip lift is a uniform load q_l = q c 2 pi alpha0
        wing = WingConfig(elements=40, GJ=1e13, nonlinearity_coefficient=0.0)
        flow = FlowConfig(alpha0=0.01, gravity=0.0)
        sol = solve_static(build_model(wing, flow))
        q_l = flow.dynamic_pressure * wing.chord * 2.0 * np.pi * flow.alpha0
        expected = q_l * wing.semispan**4 / (8.0 * wing.EI)
        assert sol.tip_displacement == pytest.approx(expected, rel=0.02)

    def test_divergence_detected(self):
        flow = FlowConfig(U_inf=300.0, rho=1.225)
        with pytest.raises(StaticDivergenceError, match="divergence"):
            solve_static(build_model(WingConfig(elements=4), FlowConfig()), flow=flow)

    @pytest.mark.slow
    def test_mesh_convergence_monotone(self, bench):
        rows = mesh_study(bench, (10, 20, 40, 80))
        tips = [r["tip_displacement"] for r in rows]
        diffs = np.diff(tips)
        assert np.all(diffs > 0) or np.all(diffs < 0)
        changes = [r["change_pct"] for r in rows[1:]]
        assert all(b < a for a, b in zip(changes, changes[1:]))
        assert changes[-1] < 1.0


class TestStructure:
    def test_matrices_symmetric_positive(self):
        M, K = structural_matrices(WingConfig(elements=6))
        assert np.allclose(M, M.T) and np.allclose(K, K.T)
        assert np.linalg.eigvalsh(M).min() > 0 and np.linalg.eigvalsh(K).min() > 0

    def test_first_bending_frequency(self):
        wing = WingConfig(elements=40, mass_axis=0.35)  # uncoupled bending
        M, K = structural_matrices(wing)
        w1 = np.sqrt(sla.eigh(K, M, eigvals_only=True)[0])
        analytic = 3.516 * np.sqrt(wing.EI / (wing.mass_per_length * wing.semispan**4))
        assert w1 == pytest.approx(analytic, rel=1e-3)

    def test_energy_conserved_in_free_vibration(self):
        wing = WingConfig(elements=4, nonlinearity_coefficient=0.0, structural_damping=0.0)
        flow = FlowConfig(gravity=0.0, alpha0=0.0)
        m = build_model(wing, flow, aerodynamics=False)
        M, K = structural_matrices(wing)
        lam, V = sla.eigh(K, M)
        lay = m.metadata["layout"]
        iq, iqd = slice(*lay["q"]), slice(*lay["qdot"])
        w0 = np.zeros(m.n)
        w0[iq] = 0.1 * V[:, 0] / np.abs(V[:, 0]).max() + 0.01 * V[:, 1] / np.abs(V[:, 1]).max()
        period = 2 * np.pi / np.sqrt(lam[0])
        cfg = SimConfig(dt=0.5 / np.sqrt(lam[-1]), t_final=10 * period)
        res = simulate_open(m, TrimState(w0, 0.0, 0.0), lambda t: 0.0 * t, cfg)
        Q, Qd = res.states[:, iq], res.states[:, iqd]
        E = 0.5 * np.einsum("ti,ij,tj->t", Qd, M, Qd) + 0.5 * np.einsum("ti,ij,tj->t", Q, K, Q)
        assert np.abs(E - E[0]).max() <= 1e-3 * E[0]
