"""Containers and numerical services for nonlinear first-order systems.

A :class:`FullOrderModel` wraps a residual ``dw/dt = R(w, u_c, u_d)`` where
``u_c = (delta, delta_dot, delta_ddot)`` is the flap control triple and
``u_d`` the scalar gust velocity.  Everything downstream (trim, Jacobian,
eigen-analysis) only talks to the residual.
"""

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConvergenceError,
    DefectiveMatrixError,
    DimensionError,
    NonFiniteError,
    SingularMatrixError,
)

ZERO_CONTROL = (0.0, 0.0, 0.0)
PARTITION_LABELS = ("aero", "structural", "rigid_body")


@dataclass(frozen=True)
class FullOrderModel:
    """Nonlinear system ``dw/dt = residual(w, u_c, u_d, params)``.

    ``state_partition`` maps labels from ``PARTITION_LABELS`` to half-open
    ``(start, stop)`` index ranges.  ``parameters`` holds named scalar
    inputs (``alpha0`` and friends) that trim may treat as unknowns.
    """

    n: int
    residual: Callable
    state_partition: dict
    output_map: Callable
    output_names: tuple = ()
    parameters: dict = field(default_factory=dict)
    residual_scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        spans = sorted(self.state_partition.items(), key=lambda kv: kv[1][0])
        pos = 0
        for label, (start, stop) in spans:
            if label not in PARTITION_LABELS:
                raise ValueError(f"state_partition: unknown label {label!r}")
            if start != pos or stop < start:
                raise ValueError("state_partition: ranges must be disjoint and contiguous")
            pos = stop
        if pos != self.n:
            raise ValueError(f"state_partition: ranges cover [0, {pos}) but n = {self.n}")

    def partition_slice(self, label):
        start, stop = self.state_partition.get(label, (0, 0))
        return slice(start, stop)

    def with_parameters(self, **updates):
        params = dict(self.parameters)
        unknown = set(updates) - set(params)
        if unknown:
            raise KeyError(f"unknown model parameters: {sorted(unknown)}")
        params.update(updates)
        return replace(self, parameters=params)

    def outputs(self, w):
        return np.asarray(self.output_map(np.asarray(w, dtype=float)), dtype=float)


@dataclass(frozen=True)
class TrimState:
    w0: np.ndarray
    alpha0: float
    residual_norm: float
    iterations: int = 0
    parameters: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LinearizedSystem:
    """Jacobian and input columns about a trim point.

    ``B_c``, ``B_c1`` and ``B_c2`` are the flap rotation, rate and
    acceleration columns; ``B_g`` is the gust column (per m/s).  ``C``
    holds one row per model output.
    """

    A: np.ndarray
    B_c: np.ndarray
    B_c1: np.ndarray
    B_c2: np.ndarray
    B_g: np.ndarray
    C: np.ndarray
    output_names: tuple = ()

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError("A", (n, n), self.A.shape)
        for name in ("B_c", "B_c1", "B_c2", "B_g"):
            col = getattr(self, name)
            if col.shape != (n, 1):
                raise DimensionError(name, (n, 1), col.shape)
        if self.C.ndim != 2 or self.C.shape[1] != n:
            raise DimensionError("C", ("p", n), self.C.shape)

    @property
    def n(self):
        return self.A.shape[0]

    def output_row(self, name):
        return self.C[list(self.output_names).index(name)][None, :]

    def frequency_response(self, omega, input_name="B_g", output="tip_displacement"):
        """Complex response of ``output`` to the named input column at ``omega``."""
        b = getattr(self, input_name)
        c = self.output_row(output)
        omega = np.atleast_1d(omega)
        eye = np.eye(self.n)
        return np.array(
            [(c @ np.linalg.solve(1j * w * eye - self.A, b))[0, 0] for w in omega]
        )


@dataclass(frozen=True)
class StateSpace:
    """Real LTI quadruple ``x' = A x + B u, y = C x + D u``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = None
    input_names: tuple = ()
    output_names: tuple = ()

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError("A", "square", A.shape)
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        # 1-D and scalar inputs are single-input columns / single-output rows
        B = B.reshape(n, -1) if B.ndim < 2 else B
        C = C.reshape(-1, n) if C.ndim < 2 else C
        if B.shape[0] != n:
            raise DimensionError("B", (n, "m"), B.shape)
        if C.shape[1] != n:
            raise DimensionError("C", ("p", n), C.shape)
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else np.asarray(self.D, dtype=float)
        D = D.reshape(C.shape[0], B.shape[1])
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def shape(self):
        """``(outputs, inputs)``."""
        return self.D.shape

    def is_stable(self):
        return self.n == 0 or np.linalg.eigvals(self.A).real.max() < 0

    def subsystem(self, outputs=None, inputs=None):
        o = slice(None) if outputs is None else np.atleast_1d(outputs)
        i = slice(None) if inputs is None else np.atleast_1d(inputs)
        return StateSpace(self.A, self.B[:, i], self.C[o, :], self.D[o][:, i])

    def freqresp(self, omega):
        """``G(j omega)`` stacked along the first axis, shape ``(len(omega), p, m)``.

        Uses a modal factorization when the eigenvectors are well conditioned
        and falls back to one linear solve per frequency otherwise.
        """
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        if self.n == 0:
            return np.broadcast_to(self.D.astype(complex), (omega.size,) + self.D.shape).copy()
        lam, V = np.linalg.eig(self.A)
        if np.linalg.cond(V) < 1e8:
            CV = self.C @ V
            VB = np.linalg.solve(V, self.B)
            inv = 1.0 / (1j * omega[:, None] - lam[None, :])
            return np.einsum("pk,wk,km->wpm", CV, inv, VB) + self.D
        eye = np.eye(self.n)
        return np.array([self.C @ np.linalg.solve(1j * w * eye - self.A, self.B) + self.D for w in omega])


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectrum with biorthonormal right (``Phi``) and left (``Psi``) vectors.

    ``partner[k]`` is the index of the complex conjugate of mode ``k``
    (``k`` itself for real modes).
    """

    eigenvalues: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray
    partner: np.ndarray

    @property
    def m(self):
        return len(self.eigenvalues)

    def is_real(self, k):
        return self.partner[k] == k

    def biorthonormality_error(self):
        return np.abs(self.Psi.conj().T @ self.Phi - np.eye(self.m)).max()


def _check_vector(field_name, value, n):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise DimensionError(field_name, (n,), arr.shape)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{field_name}: contains non-finite entries")
    return arr


def evaluate_residual(model, w, u_c=ZERO_CONTROL, u_d=0.0, parameters=None):
    """Return ``dw/dt`` for state ``w`` under control triple ``u_c`` and gust ``u_d``."""
    w = _check_vector("w", w, model.n)
    u_c = _check_vector("u_c", u_c, 3)
    u_d = float(u_d)
    if not np.isfinite(u_d):
        raise NonFiniteError("u_d: non-finite gust velocity")
    params = model.parameters if parameters is None else {**model.parameters, **parameters}
    return np.asarray(model.residual(w, u_c, u_d, params), dtype=float)


def _fd_step(x):
    return np.maximum(1e-6, 1e-6 * np.abs(x))


def solve_trim(
    model,
    guess=None,
    free_variables=None,
    free_parameters=(),
    u_c=ZERO_CONTROL,
    u_d=0.0,
    tol=1e-10,
    max_iter=50,
):
    """Damped Newton solve of ``R(w) = 0`` over the free states and parameters.

    The Newton matrix is formed by central differences restricted to the
    free unknowns; rectangular systems are solved in the least-squares
    sense.  Convergence means ``||R|| <= tol * model.residual_scale``.  An
    iterate already below ``sqrt(tol) * residual_scale`` whose full Newton
    step fails to halve the residual is also accepted: it sits on the
    round-off floor of the residual evaluation.
    """
    n = model.n
    w = np.zeros(n) if guess is None else _check_vector("guess", guess, n).copy()
    free = np.arange(n) if free_variables is None else np.asarray(free_variables, dtype=int)
    if free.size == 0 and not free_parameters:
        raise ValueError("free_variables: at least one unknown is required")
    params = dict(model.parameters)
    for name in free_parameters:
        if name not in params:
            raise KeyError(f"free_parameters: model has no parameter {name!r}")
    u_c = np.asarray(u_c, dtype=float)
    threshold = tol * model.residual_scale

    def resid(w_, p_):
        return np.asarray(model.residual(w_, u_c, u_d, p_), dtype=float)

    def unknowns(w_, p_):
        return np.concatenate([w_[free], [p_[k] for k in free_parameters]])

    def assign(x):
        w_ = w.copy()
        w_[free] = x[: free.size]
        p_ = dict(params)
        for i, k in enumerate(free_parameters):
            p_[k] = x[free.size + i]
        return w_, p_

    x = unknowns(w, params)
    r = resid(w, params)
    norm = np.linalg.norm(r)
    it = 0
    while norm > threshold:
        if it >= max_iter:
            raise ConvergenceError(
                f"trim did not converge in {max_iter} iterations (|R| = {norm:.3e})",
                last_residual=norm,
                iterations=it,
            )
        h = _fd_step(x)
        J = np.empty((n, x.size))
        for j in range(x.size):
            xp = x.copy()
            xm = x.copy()
            xp[j] += h[j]
            xm[j] -= h[j]
            J[:, j] = (resid(*assign(xp)) - resid(*assign(xm))) / (2 * h[j])
        if not np.all(np.isfinite(J)):
            raise NonFiniteError("trim Newton matrix has non-finite entries")
        if J.shape[0] == J.shape[1]:
            try:
                step = -np.linalg.solve(J, r)
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError(
                    "singular Newton matrix in trim; regularize the model or "
                    "fix additional variables"
                ) from exc
        else:
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        if np.linalg.cond(J) > 1e14:
            raise SingularMatrixError(
                "near-singular Newton matrix in trim; regularize the model or "
                "fix additional variables"
            )
        lam = 1.0
        while True:
            trial = x + lam * step
            r_new = resid(*assign(trial))
            n_new = np.linalg.norm(r_new)
            if np.isfinite(n_new) and (n_new < norm or lam < 1e-4):
                break
            lam *= 0.5
        stalled = n_new > 0.5 * norm and min(n_new, norm) <= np.sqrt(tol) * model.residual_scale
        if n_new < norm:
            x, r, norm = trial, r_new, n_new
        it += 1
        if stalled:
            break
    w_final, p_final = assign(x)
    return TrimState(
        w0=w_final,
        alpha0=float(p_final.get("alpha0", np.nan)),
        residual_norm=float(norm),
        iterations=it,
        parameters=p_final,
    )


def compute_jacobian(model, trim, u_c=ZERO_CONTROL, u_d=0.0):
    """Central finite-difference linearization about ``trim``.

    State step ``h_i = max(1e-6, 1e-6 |w0_i|)``; the input columns use the
    same rule on the (zero) input values.
    """
    w0 = np.asarray(trim.w0, dtype=float)
    params = trim.parameters or model.parameters
    u0 = np.asarray(u_c, dtype=float)
    n = model.n

    def R(w, uc, ud):
        return np.asarray(model.residual(w, uc, ud, params), dtype=float)

    A = np.empty((n, n))
    hs = _fd_step(w0)
    for i in range(n):
        wp = w0.copy()
        wm = w0.copy()
        wp[i] += hs[i]
        wm[i] -= hs[i]
        col = (R(wp, u0, u_d) - R(wm, u0, u_d)) / (2 * hs[i])
        if not np.all(np.isfinite(col)):
            raise NonFiniteError(f"non-finite residual while perturbing state index {i}")
        A[:, i] = col

    cols = []
    for k, name in enumerate(("delta", "delta_dot", "delta_ddot")):
        h = _fd_step(u0[k])
        up = u0.copy()
        um = u0.copy()
        up[k] += h
        um[k] -= h
        col = (R(w0, up, u_d) - R(w0, um, u_d)) / (2 * h)
        if not np.all(np.isfinite(col)):
            raise NonFiniteError(f"non-finite residual while perturbing control {name}")
        cols.append(col[:, None])
    h = _fd_step(u_d)
    B_g = (R(w0, u0, u_d + h) - R(w0, u0, u_d - h)) / (2 * h)
    if not np.all(np.isfinite(B_g)):
        raise NonFiniteError("non-finite residual while perturbing the gust input")

    y0 = model.outputs(w0)
    C = np.empty((y0.size, n))
    for i in range(n):
        wp = w0.copy()
        wm = w0.copy()
        wp[i] += hs[i]
        wm[i] -= hs[i]
        C[:, i] = (model.outputs(wp) - model.outputs(wm)) / (2 * hs[i])

    return LinearizedSystem(
        A=A,
        B_c=cols[0],
        B_c1=cols[1],
        B_c2=cols[2],
        B_g=B_g[:, None],
        C=C,
        output_names=tuple(model.output_names),
    )


def _pair_conjugates(lam, tol):
    """Return an ordering with conjugate pairs adjacent (+Im first) and the partner map."""
    n = lam.size
    is_cplx = np.abs(lam.imag) > tol * np.maximum(1.0, np.abs(lam))
    used = np.zeros(n, dtype=bool)
    order, partner = [], []
    # ascending magnitude, then ascending index
    for k in sorted(range(n), key=lambda i: (round(abs(lam[i]), 12), -lam[i].imag, i)):
        if used[k]:
            continue
        if not is_cplx[k]:
            used[k] = True
            partner.append(len(order))
            order.append(k)
            continue
        cand = [j for j in range(n) if not used[j] and j != k and is_cplx[j]]
        if not cand:
            raise DefectiveMatrixError("unpaired complex eigenvalue; matrix is not real")
        j = min(cand, key=lambda i: abs(lam[i] - np.conj(lam[k])))
        pos, neg = (k, j) if lam[k].imag > 0 else (j, k)
        used[k] = used[j] = True
        base = len(order)
        order += [pos, neg]
        partner += [base + 1, base]
    return np.array(order), np.array(partner)


def eig_biorthonormal(A, cond_limit=1e12):
    """Full eigendecomposition with ``Psi^H Phi = I``.

    Right vectors have unit 2-norm; left vectors are the rows of
    ``Phi^{-1}`` (conjugate-transposed), which enforces biorthonormality
    even inside clusters of repeated eigenvalues.  Conjugate pairs are
    stored adjacently with the positive-imaginary member first and exactly
    conjugate vectors; real modes have real vectors.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("A", "square", A.shape)
    lam, V = sla.eig(A)
    order, partner = _pair_conjugates(lam, 1e-10)
    lam = lam[order]
    V = V[:, order]
    Phi = np.empty(V.shape, dtype=complex)
    for k in range(lam.size):
        p = partner[k]
        if p == k:
            v = V[:, k]
            phase = v[np.argmax(np.abs(v))]
            v = (v / phase).real.astype(complex)
            lam[k] = lam[k].real
        elif p > k:
            v = V[:, k]
            phase = v[np.argmax(np.abs(v))]
            v = v / (phase / abs(phase))
        else:
            v = np.conj(Phi[:, p])
            lam[k] = np.conj(lam[p])
        Phi[:, k] = v / np.linalg.norm(v)
    cond = np.linalg.cond(Phi)
    if not np.isfinite(cond) or cond > cond_limit:
        raise DefectiveMatrixError(
            f"eigenvector matrix condition {cond:.2e} exceeds {cond_limit:.0e}; "
            "matrix is defective or nearly so -- change the modal set"
        )
    Psi = np.linalg.inv(Phi).conj().T
    return EigenDecomposition(eigenvalues=lam, Phi=Phi, Psi=Psi, partner=partner)
