"""H-infinity machinery: Riccati solver, norm computation and synthesis.

The synthesis is the two-Riccati central controller for the normalized
problem (``D12' [C1 D12] = [0 I]``, ``[B1; D21] D21' = [0; I]``,
``D11 = D22 = 0``)::

    X = Ric([[A, B1 B1'/g^2 - B2 B2'], [-C1' C1, -A']])
    Y = Ric([[A', C1' C1/g^2 - C2' C2], [-B1 B1', -A]])

feasible when ``X >= 0``, ``Y >= 0`` and ``rho(X Y) < g^2``, with::

    F = -B2' X,  L = -Y C2',  Z = (I - Y X / g^2)^-1
    A_k = A + B1 B1' X / g^2 + B2 F + Z L C2,  B_k = -Z L,  C_k = F
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConfigError,
    DimensionError,
    RiccatiError,
    SynthesisError,
    UnstableSystemError,
    WellPosednessError,
)
from .plant import GeneralizedPlant
from .statespace import StateSpace

CARE_TOL = 1e-8
AXIS_GUARD = 1e-10


def _sym(X):
    return 0.5 * (X + X.T)


def riccati_residual(A, G, Q, X):
    """Relative residual of ``A'X + XA - XGX + Q = 0``."""
    R = A.T @ X + X @ A - X @ G @ X + Q
    return np.linalg.norm(R, 2) / max(1.0, np.linalg.norm(X, 2))


def solve_ric(A, G, Q, tol=CARE_TOL, refine=3):
    """Stabilizing solution of ``A'X + XA - XGX + Q = 0`` (``G``, ``Q`` symmetric).

    The stable invariant subspace of the Hamiltonian ``[[A, -G], [-Q, -A']]``
    comes from an ordered real Schur decomposition.  Up to ``refine`` Newton
    (Kleinman) corrections polish the result when the residual is not yet
    at roundoff level; badly scaled problems otherwise sit right at ``tol``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    H = np.block([[A, -G], [-Q, -A.T]])
    if not np.all(np.isfinite(H)):
        raise RiccatiError("Hamiltonian has non-finite entries")
    T, U, sdim = sla.schur(H, output="real", sort="lhp")
    ev = np.linalg.eigvals(T)
    if np.abs(ev.real).min() <= AXIS_GUARD:
        raise RiccatiError("Hamiltonian has eigenvalues on the imaginary axis; no stabilizing solution")
    if sdim != n:
        raise RiccatiError(f"stable subspace has dimension {sdim}, expected {n}")
    U11 = U[:n, :n]
    U21 = U[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise RiccatiError("stable subspace is not a graph (U11 singular); no stabilizing solution")
    X = _sym(np.linalg.solve(U11.T, U21.T).T)
    res = riccati_residual(A, G, Q, X)
    for _ in range(refine):
        if res < 1e-3 * tol:
            break
        Ac = A - G @ X
        R = A.T @ X + X @ A - X @ G @ X + Q
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", RuntimeWarning)
                dX = sla.solve_continuous_lyapunov(Ac.T, -R)
        except (np.linalg.LinAlgError, ValueError, RuntimeWarning):
            break
        trial = _sym(X + dX)
        trial_res = riccati_residual(A, G, Q, trial)
        if not trial_res < res:
            break
        X, res = trial, trial_res
    if not res < tol:
        raise RiccatiError(f"Riccati residual {res:.2e} exceeds {tol:.0e}")
    return X


def solve_care(A, B, Q, R):
    """Stabilizing solution of ``A'X + XA + Q - X B R^-1 B' X = 0``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n, m = B.shape
    if Q.shape != (n, n):
        raise DimensionError("Q", (n, n), Q.shape)
    if R.shape != (m, m):
        raise DimensionError("R", (m, m), R.shape)
    if not np.allclose(R, R.T) or np.linalg.eigvalsh(_sym(R)).min() <= 0:
        raise ConfigError("R: must be symmetric positive definite")
    G = _sym(B @ np.linalg.solve(R, B.T))
    X = solve_ric(A, G, _sym(Q))
    if np.linalg.eigvals(A - G @ X).real.max() >= 0:
        raise RiccatiError("closed loop A - B R^-1 B' X is not Hurwitz")
    return X


# --------------------------------------------------------------------------
# norm


def _sigma_max(sys, omega):
    G = sys.freqresp(omega)
    return np.linalg.svd(G, compute_uv=False)[:, 0]


def _crossings(sys, gamma, tol):
    """Frequencies where some singular value of ``G(j w)`` equals ``gamma``."""
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    R = gamma * gamma * np.eye(D.shape[1]) - D.T @ D
    S = gamma * gamma * np.eye(D.shape[0]) - D @ D.T
    Ri = np.linalg.inv(R)
    Ah = A + B @ Ri @ D.T @ C
    H = np.block([[Ah, gamma * B @ Ri @ B.T], [-gamma * C.T @ np.linalg.solve(S, C), -Ah.T]])
    ev = np.linalg.eigvals(H)
    scale = max(1.0, np.linalg.norm(H, 1))
    im = ev[np.abs(ev.real) <= tol * scale]
    return np.unique(np.round(np.abs(im.imag), 12))


def hinf_norm(sys, tol=1e-6, max_iter=200):
    """Peak gain ``sup_w sigma_max(G(j w))`` and the frequency where it occurs.

    Level-set bisection: at a trial level the Hamiltonian's imaginary-axis
    eigenvalues locate the crossings, and ``sigma_max`` evaluated at and
    between them either certifies a higher lower bound or shows the level is
    above the peak.  Stops when the bracket is within ``tol`` relative.
    The frequency is ``inf`` when the supremum is ``||D||``, approached only
    as w grows.
    """
    if not isinstance(sys, StateSpace):
        sys = StateSpace(*sys)
    if sys.n and np.linalg.eigvals(sys.A).real.max() >= 0:
        raise UnstableSystemError("hinf_norm: A is not Hurwitz; the norm is infinite")
    if sys.n == 0 or not np.any(sys.B) or not np.any(sys.C):
        return float(np.linalg.norm(sys.D, 2)), 0.0
    lam = np.linalg.eigvals(sys.A)
    probe = np.unique(np.concatenate([[0.0], np.abs(lam.imag), np.abs(lam)]))
    sig = _sigma_max(sys, probe)
    k = int(np.argmax(sig))
    lo, w_peak = float(sig[k]), float(probe[k])
    d_norm = float(np.linalg.norm(sys.D, 2))
    if d_norm > lo:
        # supremum approached as w -> inf (D dominates)
        lo, w_peak = d_norm, np.inf
    if lo == 0.0:
        return 0.0, 0.0
    hi = 2.0 * lo
    for _ in range(60):
        above, val, w = _improve(sys, hi, 1e-8)
        if not above:
            break
        lo, w_peak = val, w
        hi = 2.0 * val
    else:
        raise UnstableSystemError("hinf_norm: no upper bound found")
    for _ in range(max_iter):
        if hi - lo <= tol * lo:
            break
        mid = 0.5 * (lo + hi)
        above, val, w = _improve(sys, mid, 1e-8)
        if above:
            lo, w_peak = val, w
            if lo >= hi:
                hi = lo * (1.0 + tol)
        else:
            hi = mid
    return lo, w_peak


def _improve(sys, level, tol):
    """Check whether ``sigma_max`` exceeds ``level`` somewhere; return the best sample."""
    w = _crossings(sys, level, tol)
    if w.size == 0:
        return False, 0.0, 0.0
    # a level below ||D|| has an odd number of crossings and sigma stays above
    # the level past the last one, so sample there too
    pts = np.concatenate([w, 0.5 * (w[1:] + w[:-1]), [0.0, 2.0 * w[-1] + 1.0]])
    sig = _sigma_max(sys, pts)
    k = int(np.argmax(sig))
    return bool(sig[k] >= level), float(sig[k]), float(pts[k])


# --------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class Controller:
    """Dynamic output feedback ``u = K(s) y`` in physical units."""

    A_k: np.ndarray
    B_k: np.ndarray
    C_k: np.ndarray
    D_k: np.ndarray
    gamma_star: float
    metadata: dict = field(default_factory=dict)

    @property
    def order(self):
        return self.A_k.shape[0]

    def as_statespace(self):
        return StateSpace(self.A_k, self.B_k, self.C_k, self.D_k)

    @classmethod
    def zero(cls, order=1, ny=1, nu=1):
        return cls(-np.eye(order), np.zeros((order, ny)), np.zeros((nu, order)), np.zeros((nu, ny)), 0.0)


@dataclass(frozen=True)
class _Normalized:
    """Synthesis data with unit ``D12``/``D21`` and balanced states."""

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    T: np.ndarray
    su: float
    sy: float
    u_ref: float = 1.0


def _normalize(P, balance=True):
    """Scale ``u`` and ``y`` so ``D12'D12 = I`` and ``D21 D21' = I``; balance the states."""
    if np.any(P.D11):
        raise SynthesisError("assumption violated: D11 must be zero for the central controller")
    if P.B2.shape[1] != 1 or P.C2.shape[0] != 1:
        raise SynthesisError("assumption violated: single control input and single measurement expected")
    su = float(np.linalg.norm(P.D12))
    sy = float(np.linalg.norm(P.D21))
    if su == 0:
        raise SynthesisError("assumption violated: D12 must have full column rank")
    if sy == 0:
        raise SynthesisError("assumption violated: D21 must have full row rank")
    if np.abs(P.D12.T @ P.C1).max() > 1e-12 * max(1.0, np.abs(P.C1).max()):
        raise SynthesisError("assumption violated: D12' C1 must be zero")
    if np.abs(P.B1 @ P.D21.T).max() > 1e-12 * max(1.0, np.abs(P.B1).max()):
        raise SynthesisError("assumption violated: B1 D21' must be zero")
    n = P.n
    if balance:
        B = np.hstack([P.B1, P.B2 / su])
        C = np.vstack([P.C1, P.C2 / sy])
        k = n + max(B.shape[1], C.shape[0])
        S = np.zeros((k, k))
        S[:n, :n] = P.A
        S[:n, n : n + B.shape[1]] = B
        S[n : n + C.shape[0], :n] = C
        _, (scale, _) = sla.matrix_balance(S, permute=False, separate=True)
        t = scale[:n]
    else:
        t = np.ones(n)
    T = np.diag(t)
    Ti = np.diag(1.0 / t)
    return _Normalized(
        A=Ti @ P.A @ T,
        B1=Ti @ P.B1,
        B2=Ti @ P.B2 / su,
        C1=P.C1 @ T,
        C2=P.C2 @ T / sy,
        T=T,
        su=su,
        sy=sy,
        u_ref=P.u_ref,
    )


def _feasible(N, gamma):
    """Central-controller solution at level ``gamma`` or ``None`` if infeasible."""
    g2 = gamma * gamma
    try:
        X = solve_ric(N.A, N.B2 @ N.B2.T - N.B1 @ N.B1.T / g2, N.C1.T @ N.C1)
        Y = solve_ric(N.A.T, N.C2.T @ N.C2 - N.C1.T @ N.C1 / g2, N.B1 @ N.B1.T)
    except RiccatiError:
        return None
    tolX = 1e-10 * max(1.0, np.abs(X).max())
    tolY = 1e-10 * max(1.0, np.abs(Y).max())
    if np.linalg.eigvalsh(X).min() < -tolX or np.linalg.eigvalsh(Y).min() < -tolY:
        return None
    rho = np.abs(np.linalg.eigvals(X @ Y)).max()
    if not rho < g2:
        return None
    return X, Y


def _central(N, gamma, X, Y):
    g2 = gamma * gamma
    n = N.A.shape[0]
    F = -N.B2.T @ X
    L = -Y @ N.C2.T
    Z = np.linalg.inv(np.eye(n) - Y @ X / g2)
    A_k = N.A + N.B1 @ N.B1.T @ X / g2 + N.B2 @ F + Z @ L @ N.C2
    B_k = -Z @ L
    C_k = F
    # back to physical plant coordinates and units
    T = N.T
    Ti = np.diag(1.0 / np.diag(T))
    return (
        T @ A_k @ Ti,
        T @ B_k / N.sy,
        C_k @ Ti * (N.u_ref / N.su),
        np.zeros((C_k.shape[0], B_k.shape[1])),
    )


def open_loop_norm(P):
    """Gust-to-performance peak gain of the uncontrolled plant.

    For an augmented design plant the actuator integrators are excluded
    (they are neither excited by the gust nor stable on their own).
    """
    if P.source is not None:
        m = P.source.m_r
        sys = StateSpace(P.A[:m, :m], P.B1[:m, [0]], P.C1[:, :m])
    else:
        sys = StateSpace(P.A, P.B1, P.C1, P.D11)
    return hinf_norm(sys)[0]


def synthesize(P, gamma_tolerance=1e-3, balance=True, max_doublings=10, backoff=0.0):
    """Bisection on ``gamma`` for the central H-infinity controller.

    ``gamma_hi`` starts at ``1e3`` times the open-loop norm and is doubled
    on infeasibility; ``gamma_lo`` is the ``D11`` bound.  The controller at
    the smallest feasible level is returned with ``gamma_star`` equal to it.

    Near the optimum ``I - Y X / gamma^2`` is close to singular and the
    central controller acquires very fast poles.  ``backoff > 0`` forms the
    controller at ``(1 + backoff)`` times the bisection result instead;
    ``gamma_star`` is then that level and the bisection result is kept as
    ``metadata["gamma_opt"]``.  The returned controller is in physical
    units: measurement in the plant's output units, flap acceleration in
    rad/s^2.
    """
    if not backoff >= 0:
        raise ConfigError("backoff must be >= 0")
    if not isinstance(P, GeneralizedPlant):
        raise ConfigError("synthesize: expected a GeneralizedPlant")
    N = _normalize(P, balance)
    ol = open_loop_norm(P)
    lo = float(np.linalg.norm(P.D11, 2))
    if ol == 0.0:
        n = P.n
        return Controller(
            -np.eye(n), np.zeros((n, 1)), np.zeros((1, n)), np.zeros((1, 1)), 0.0,
            metadata={"open_loop_norm": 0.0, "note": "nothing to regulate"},
        )
    hi = 1e3 * ol
    sol = _feasible(N, hi)
    doublings = 0
    while sol is None:
        if doublings >= max_doublings:
            raise SynthesisError(f"infeasible for every gamma tested in [{1e3 * ol:.3e}, {hi:.3e}]")
        hi *= 2.0
        doublings += 1
        sol = _feasible(N, hi)
    history = [(hi, True)]
    while hi - lo > gamma_tolerance * hi:
        mid = 0.5 * (lo + hi)
        trial = _feasible(N, mid)
        history.append((mid, trial is not None))
        if trial is None:
            lo = mid
        else:
            hi, sol = mid, trial
    gamma_opt = hi
    if backoff > 0:
        hi = (1.0 + backoff) * gamma_opt
        sol = _feasible(N, hi)
        if sol is None:
            raise SynthesisError(f"feasibility lost at backed-off level {hi:.6e}")
    A_k, B_k, C_k, D_k = _central(N, hi, *sol)
    return Controller(
        A_k, B_k, C_k, D_k, float(hi),
        metadata={
            "gamma_opt": float(gamma_opt),
            "backoff": float(backoff),
            "z_ref": P.z_ref,
            "u_ref": P.u_ref,
            "open_loop_norm": float(ol),
            "gamma_lower": float(lo),
            "gamma_tolerance": gamma_tolerance,
            "iterations": len(history),
            "K_c": float(P.D12[-1, 0]),
            "regularization": dict(P.regularization),
        },
    )


def gamma_feasible(P, gamma, balance=True):
    """Whether the central controller exists at level ``gamma``."""
    return _feasible(_normalize(P, balance), gamma) is not None


def close_loop(P, K):
    """Lower LFT of ``P`` with ``K``.

    Inputs are the plant's ``w`` channels; outputs are ``z`` followed, for
    an augmented design plant, by every physical output and the control
    ``u``.
    """
    if isinstance(P, StateSpace) or not isinstance(P, GeneralizedPlant):
        raise ConfigError("close_loop: expected a GeneralizedPlant")
    if K.B_k.shape[1] != P.C2.shape[0] or K.C_k.shape[0] != P.B2.shape[1]:
        raise DimensionError("controller", (P.B2.shape[1], P.C2.shape[0]), K.D_k.shape)
    if np.any(P.D22 @ K.D_k):
        raise WellPosednessError("D22 D_k != 0: the interconnection has an algebraic loop")
    # the controller speaks physical units; fold u_ref into the plant side
    A, B1, C1, C2 = P.A, P.B1, P.C1, P.C2
    B2 = P.B2 / P.u_ref
    D12 = P.D12 / P.u_ref
    Ak, Bk, Ck, Dk = K.A_k, K.B_k, K.C_k, K.D_k
    A_cl = np.block([[A + B2 @ Dk @ C2, B2 @ Ck], [Bk @ C2, Ak]])
    B_cl = np.vstack([B1 + B2 @ Dk @ P.D21, Bk @ P.D21])
    C_rows = [np.hstack([C1 + D12 @ Dk @ C2, D12 @ Ck])]
    D_rows = [P.D11 + D12 @ Dk @ P.D21]
    names = [f"z{i}" for i in range(C1.shape[0])]
    if P.source is not None:
        Cp = P.source.C_phys
        C_rows.append(np.hstack([Cp, np.zeros((Cp.shape[0], K.order))]))
        D_rows.append(np.zeros((Cp.shape[0], B1.shape[1])))
        names += list(P.source.phys_names)
    C_rows.append(np.hstack([Dk @ C2, Ck]))
    D_rows.append(Dk @ P.D21)
    names.append("u")
    return StateSpace(
        A_cl, B_cl, np.vstack(C_rows), np.vstack(D_rows),
        input_names=("gust", "sensor_noise", "actuator_disturbance")[: B1.shape[1]],
        output_names=tuple(names),
    )


def performance_channel(P, K=None):
    """Gust/regularization-to-``z`` system (closed loop if ``K`` given)."""
    nz = P.C1.shape[0]
    if K is None:
        return StateSpace(P.A, P.B1, P.C1, P.D11)
    return close_loop(P, K).subsystem(outputs=np.arange(nz))


# --------------------------------------------------------------------------
# persistence

CONTROLLER_SCHEMA = "gla-controller/1"


def controller_to_dict(K):
    return {
        "schema": CONTROLLER_SCHEMA,
        "order": K.order,
        "gamma_star": K.gamma_star,
        "A_k": K.A_k.tolist(),
        "B_k": K.B_k.tolist(),
        "C_k": K.C_k.tolist(),
        "D_k": K.D_k.tolist(),
        "metadata": K.metadata,
    }


def controller_from_dict(d):
    if d.get("schema") != CONTROLLER_SCHEMA:
        raise ConfigError(f"unsupported controller schema {d.get('schema')!r}")
    arr = lambda k: np.atleast_2d(np.asarray(d[k], dtype=float))  # noqa: E731
    A_k = arr("A_k")
    n = A_k.shape[0]
    return Controller(
        A_k,
        arr("B_k").reshape(n, -1),
        arr("C_k").reshape(-1, n),
        arr("D_k"),
        float(d["gamma_star"]),
        metadata=d.get("metadata", {}),
    )


def save_controller(K, path):
    with open(path, "w") as fh:
        json.dump(controller_to_dict(K), fh, indent=1)


def load_controller(path):
    with open(path) as fh:
        return controller_from_dict(json.load(fh))
