"""Randomized invariants (hypothesis)."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gla_workbench.gusts import DiscreteGust, ShapingFilter
from gla_workbench.hinf import hinf_norm, riccati_residual, solve_care
from gla_workbench.indicial import IndicialApprox, kussner_value, lag_realization, wagner_value
from gla_workbench.statespace import StateSpace, TrimState, compute_jacobian, eig_biorthonormal

from helpers import linsys, random_stable, full_rom, toy_model

seeds = st.integers(0, 2**32 - 1)
FAST = settings(max_examples=40, deadline=None)


@FAST
@given(tau=st.floats(1e-3, 1e3))
def test_shaping_filter_poles_stable_and_scale(tau):
    f = ShapingFilter()
    p = f.poles(tau)
    assert np.all(p.real < 0)
    assert np.allclose(np.sort_complex(p * tau), np.sort_complex(f.poles(1.0)), rtol=1e-9)
    A, _, _ = f.state_space(tau)
    assert np.allclose(np.sort_complex(np.linalg.eigvals(A)), np.sort_complex(p), rtol=1e-6)


@FAST
@given(w0=st.floats(-30.0, 30.0), H_g=st.floats(1.0, 200.0), U=st.floats(10.0, 300.0), t0=st.floats(0.0, 5.0),
       frac=st.floats(0.0, 1.0))
def test_discrete_gust_bounds_and_symmetry(w0, H_g, U, t0, frac):
    g = DiscreteGust(w0=w0, H_g=H_g, U_inf=U, start_time=t0)
    t = t0 + frac * g.duration
    v = g(t)
    lo, hi = sorted((0.0, w0))
    assert lo - 1e-12 <= v <= hi + 1e-12
    assert v == pytest.approx(g(g.end_time - frac * g.duration), abs=1e-9 * max(1.0, abs(w0)))
    assert g(g.start_time + 0.5 * g.duration) == pytest.approx(w0, abs=1e-12 * max(1.0, abs(w0)))
    assert g(t0 - 1e-3) == 0.0 and g(g.end_time + 1e-3) == 0.0


@st.composite
def indicial_terms(draw):
    k = draw(st.integers(1, 4))
    a = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)))
    a = a / a.sum() * draw(st.floats(0.1, 1.0))
    e = draw(st.lists(st.floats(0.01, 5.0), min_size=k, max_size=k))
    return tuple(zip(a, e))


@FAST
@given(terms=indicial_terms(), s=st.floats(0.0, 50.0))
def test_indicial_monotone_and_realized(terms, s):
    direct = 1.0 - sum(a for a, _ in terms)
    approx = IndicialApprox(wagner_terms=terms, wagner_initial=direct)
    v = wagner_value(s, approx)
    assert direct - 1e-12 <= v <= 1.0 + 1e-12
    assert wagner_value(s + 0.1, approx) >= v - 1e-12
    # step response of the lag realization: D + C A^-1 (e^{As} - I) B
    A, B, C, D = lag_realization(terms, direct)
    e = -np.diag(A)
    step = D[0, 0] + (C * (np.exp(-e * s) - 1.0) / -e) @ B[:, 0]
    assert step[0] == pytest.approx(v, abs=1e-12)


@FAST
@given(s=st.floats(0.0, 100.0))
def test_default_kussner_bounded(s):
    assert 0.0 <= kussner_value(s) <= 1.0


@FAST
@given(seed=seeds, n=st.integers(2, 6))
def test_jacobian_directional_consistency(seed, n):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    c = rng.standard_normal(n)
    model = toy_model(lambda w: M @ w + c * np.sin(w).sum() + 0.1 * w**3, n)
    w0 = rng.standard_normal(n)
    J = compute_jacobian(model, TrimState(w0, 0.0, 0.0)).A
    v = rng.standard_normal(n)
    h = 1e-4
    R = model.residual
    fd = (R(w0 + h * v, 0, 0, None) - R(w0 - h * v, 0, 0, None)) / (2 * h)
    assert np.allclose(J @ v, fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())


@FAST
@given(seed=seeds, n=st.integers(2, 7))
def test_biorthonormal_decomposition(seed, n):
    A = random_stable(np.random.default_rng(seed), n)
    dec = eig_biorthonormal(A)
    assert dec.biorthonormality_error() < 1e-8
    assert np.allclose(dec.Phi @ np.diag(dec.eigenvalues) @ dec.Psi.conj().T, A, atol=1e-8 * np.abs(A).max())


@FAST
@given(seed=seeds, n=st.integers(2, 6), w=st.floats(0.0, 50.0))
def test_full_rom_matches_full_model(seed, n, w):
    rng = np.random.default_rng(seed)
    lin = linsys(random_stable(rng, n), rng.standard_normal(n), rng.standard_normal(n))
    rom = full_rom(lin)
    g_full = lin.frequency_response(np.array([w]))
    assert np.allclose(rom.frequency_response(np.array([w])), g_full, rtol=1e-7, atol=1e-12)
    R = rom.real_realization()
    ss = StateSpace(R.A, R.B[:, :1], R.C[:1], np.zeros((1, 1)))
    assert np.allclose(ss.freqresp(np.array([w]))[0, 0, 0], g_full[0], rtol=1e-7, atol=1e-12)


@FAST
@given(seed=seeds, n=st.integers(1, 5), m=st.integers(1, 3), p=st.integers(1, 3), w=st.floats(0.0, 100.0),
       k=st.floats(0.1, 10.0))
def test_hinf_norm_bounds_gain(seed, n, m, p, w, k):
    rng = np.random.default_rng(seed)
    sys = StateSpace(random_stable(rng, n), rng.standard_normal((n, m)), rng.standard_normal((p, n)),
                     rng.standard_normal((p, m)))
    g, _ = hinf_norm(sys)
    G = sys.freqresp(np.array([w]))[0]
    assert np.linalg.norm(G, 2) <= g * (1 + 1e-6)
    assert np.linalg.norm(sys.D, 2) <= g * (1 + 1e-6)
    g2, _ = hinf_norm(StateSpace(sys.A, k * sys.B, sys.C, k * sys.D))
    assert g2 == pytest.approx(k * g, rel=1e-5)


@FAST
@given(seed=seeds, n=st.integers(1, 6), m=st.integers(1, 3))
def test_care_residual_and_stability(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    L = rng.standard_normal((n, n))
    Q = L @ L.T + 0.1 * np.eye(n)
    R = np.eye(m)
    X = solve_care(A, B, Q, R)
    assert np.allclose(X, X.T, atol=1e-10 * max(1.0, np.abs(X).max()))
    assert np.all(np.linalg.eigvalsh(0.5 * (X + X.T)) > 0)
    assert riccati_residual(A, B @ B.T, Q, X) < 1e-8
    assert np.all(np.linalg.eigvals(A - B @ B.T @ X).real < 0)
