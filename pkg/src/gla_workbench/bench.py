"""Desk-scale nonlinear aeroelastic wing.

Structure: cantilever beam, Hermite-cubic bending (w, w') and linear
torsion (theta) elements, three DOFs per node, root clamped.  A cubic
stiffening force ``kappa (w_tip/L)^2 K_bend q`` supplies the nonlinearity.

Aerodynamics: one strip per element evaluated at the element midpoint.
Circulatory lift goes through two Wagner lag states per strip; the gust
goes through three Kussner lag states.  Chord and gust are uniform along
the span, so every strip sees the same gust penetration history and a
single set of Kussner states serves the whole wing.  Non-circulatory
(apparent mass) terms and the flap follow Theodorsen's thin-aerofoil
expressions, with ``delta``, ``delta_dot`` and ``delta_ddot`` all
producing loads.

State layout::

    [Wagner (2 per strip) | Kussner (3) | q_flex | q_flex_dot | pitch, h_dot, pitch_dot]

the last block only when a rigid body is attached.  The plunge position
``h`` is cyclic (no load depends on it) and is not carried as a state;
keeping it would add an integrator on top of the steady-climb mode and
make the Jacobian defective.  Sign conventions:
``w`` and ``h`` positive up, ``theta`` and pitch positive nose up, flap
positive trailing edge down.

The residual is evaluated as an exact expansion about the static
equilibrium (affine part plus cubic remainder).  This changes nothing
mathematically but keeps finite differences near trim free of the
cancellation between large stiffness terms.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ConvergenceError, NumericalError, StaticDivergenceError
from .indicial import IndicialApprox, theodorsen_flap_constants
from .statespace import FullOrderModel

OUTPUT_NAMES = ("tip_displacement", "root_bending_moment", "tip_twist", "tip_slope")


@dataclass(frozen=True)
class WingConfig:
    """Wing geometry, stiffness and inertia.

    ``elastic_axis``, ``mass_axis`` and ``flap_hinge`` are chord fractions
    measured from the leading edge.  ``flap_effectiveness`` scales every
    flap load term (1.0 is ideal thin-aerofoil theory).
    """

    semispan: float = 16.0
    chord: float = 4.0
    elements: int = 8
    EI: float = 4.2e6
    GJ: float = 1.3e6
    mass_per_length: float = 8.0
    inertia_per_length: float = 8.0
    elastic_axis: float = 0.35
    mass_axis: float = 0.40
    flap_span: float = 0.3
    flap_hinge: float = 0.8
    flap_effectiveness: float = 1.0
    nonlinearity_coefficient: float = 10.0
    structural_damping: float = 1.0e-4

    def __post_init__(self):
        positive = ("semispan", "chord", "EI", "GJ", "mass_per_length", "inertia_per_length")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be strictly positive")
        if int(self.elements) != self.elements or self.elements < 2:
            raise ConfigError("elements: integer >= 2 required")
        if not 0.0 < self.flap_span <= 1.0:
            raise ConfigError("flap_span: must lie in (0, 1]")
        for name in ("elastic_axis", "mass_axis", "flap_hinge"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name}: chord fraction must lie in (0, 1)")
        if self.flap_hinge <= self.elastic_axis:
            raise ConfigError("flap_hinge: must be aft of the elastic axis")
        if self.flap_effectiveness <= 0:
            raise ConfigError("flap_effectiveness: must be strictly positive")
        if self.nonlinearity_coefficient < 0 or self.structural_damping < 0:
            raise ConfigError("nonlinearity_coefficient/structural_damping: must be >= 0")
        x = self.cg_offset
        if self.inertia_per_length <= self.mass_per_length * x * x:
            raise ConfigError("inertia_per_length: must exceed m * x_cg^2 for a physical section")

    @property
    def b(self):
        return 0.5 * self.chord

    @property
    def a(self):
        """Elastic-axis position in semichords aft of midchord."""
        return 2.0 * self.elastic_axis - 1.0

    @property
    def hinge(self):
        """Flap hinge position in semichords aft of midchord."""
        return 2.0 * self.flap_hinge - 1.0

    @property
    def cg_offset(self):
        """Distance (m) of the section mass centre aft of the elastic axis."""
        return (self.mass_axis - self.elastic_axis) * self.chord

    @property
    def element_length(self):
        return self.semispan / self.elements

    def flap_derivatives(self):
        """Quasi-steady section derivatives (dCl/ddelta, dCm_ea/ddelta) per rad.

        The moment coefficient is about the elastic axis, normalized by
        ``q c^2``.
        """
        T = theodorsen_flap_constants(self.hinge)
        eta = self.flap_effectiveness
        cl = 2.0 * T["T10"] * eta
        cm = 0.25 * eta * (-(T["T4"] + T["T10"]) + 2.0 * (self.a + 0.5) * T["T10"])
        return cl, cm


@dataclass(frozen=True)
class FlowConfig:
    U_inf: float = 59.0
    rho: float = 0.0789
    alpha0: float = np.deg2rad(4.0)
    gravity: float = 9.81

    def __post_init__(self):
        if not self.U_inf > 0:
            raise ConfigError("U_inf: must be strictly positive")
        if not self.rho > 0:
            raise ConfigError("rho: must be strictly positive")
        if self.gravity < 0:
            raise ConfigError("gravity: must be >= 0")

    @property
    def dynamic_pressure(self):
        return 0.5 * self.rho * self.U_inf**2


@dataclass(frozen=True)
class RigidBodyConfig:
    """Half-aircraft body carried at the wing root (plunge and pitch).

    The tail sits ``tail_arm`` metres aft of the root elastic axis and
    produces quasi-steady lift ``q * tail_lift_factor * alpha_tail``.
    """

    mass: float = 150.0
    pitch_inertia: float = 400.0
    tail_arm: float = 6.0
    tail_lift_factor: float = 3.0

    def __post_init__(self):
        for name in ("mass", "pitch_inertia", "tail_arm", "tail_lift_factor"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be strictly positive")


@dataclass(frozen=True)
class StaticSolution:
    y: np.ndarray
    w: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    tip_displacement: float
    tip_twist: float
    iterations: int


# --------------------------------------------------------------------------
# finite elements

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


def _hermite(xi, L):
    return np.array(
        [1 - 3 * xi**2 + 2 * xi**3, L * (xi - 2 * xi**2 + xi**3), 3 * xi**2 - 2 * xi**3, L * (-(xi**2) + xi**3)]
    )


def _element_matrices(wing):
    """Element mass and stiffness in DOF order [w1, w1', th1, w2, w2', th2]."""
    L = wing.element_length
    m = wing.mass_per_length
    S = m * wing.cg_offset
    I = wing.inertia_per_length
    iw = [0, 1, 3, 4]
    it = [2, 5]
    Me = np.zeros((6, 6))
    for xg, wg in zip(_GAUSS_X, _GAUSS_W):
        xi = 0.5 * (xg + 1.0)
        Nw = np.zeros(6)
        Nt = np.zeros(6)
        Nw[iw] = _hermite(xi, L)
        Nt[it] = [1 - xi, xi]
        jac = 0.5 * wg * L
        Me += jac * (m * np.outer(Nw, Nw) - S * (np.outer(Nw, Nt) + np.outer(Nt, Nw)) + I * np.outer(Nt, Nt))
    Kb = wing.EI / L**3 * np.array(
        [[12, 6 * L, -12, 6 * L], [6 * L, 4 * L * L, -6 * L, 2 * L * L], [-12, -6 * L, 12, -6 * L], [6 * L, 2 * L * L, -6 * L, 4 * L * L]]
    )
    Kbe = np.zeros((6, 6))
    Kbe[np.ix_(iw, iw)] = Kb
    Kte = np.zeros((6, 6))
    Kte[np.ix_(it, it)] = wing.GJ / L * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return Me, Kbe, Kte


class _Assembly:
    """Nodal matrices and strip interpolation/distribution operators."""

    def __init__(self, wing, rigid):
        N = int(wing.elements)
        L = wing.element_length
        nf = 3 * (N + 1)
        Me, Kbe, Kte = _element_matrices(wing)
        M = np.zeros((nf, nf))
        Kb = np.zeros((nf, nf))
        Kt = np.zeros((nf, nf))
        Jw = np.zeros((N, nf))
        Jt = np.zeros((N, nf))
        Gw = np.zeros((nf, N))
        Gt = np.zeros((nf, N))
        for e in range(N):
            d = slice(3 * e, 3 * e + 6)
            M[d, d] += Me
            Kb[d, d] += Kbe
            Kt[d, d] += Kte
            Jw[e, d] = [0.5, L / 8, 0.0, 0.5, -L / 8, 0.0]
            Jt[e, d] = [0.0, 0.0, 0.5, 0.0, 0.0, 0.5]
            Gw[d, e] = L * np.array([0.5, L / 12, 0.0, 0.5, -L / 12, 0.0])
            Gt[d, e] = L * np.array([0.0, 0.0, 0.5, 0.0, 0.0, 0.5])
        self.N = N
        self.nflex = 3 * N
        self.nq = self.nflex + (2 if rigid else 0)
        T = np.zeros((nf, self.nq))
        T[3:, : self.nflex] = np.eye(self.nflex)
        if rigid:
            T[0::3, self.nflex] = 1.0
            T[2::3, self.nflex + 1] = 1.0
        self.T = T
        self.M_nodal = M
        self.K = T.T @ (Kb + Kt) @ T
        self.K_bend = T.T @ Kb @ T
        self.M_struct = T.T @ M @ T
        self.Jw = Jw @ T
        self.Jt = Jt @ T
        self.Gw = T.T @ Gw
        self.Gt = T.T @ Gt
        self.y_nodes = np.linspace(0.0, wing.semispan, N + 1)
        edges = self.y_nodes
        start = (1.0 - wing.flap_span) * wing.semispan
        self.flap_weight = np.clip((edges[1:] - start) / L, 0.0, 1.0)
        self.tip_w = self.nflex - 3
        self.tip_theta = self.nflex - 1
        self.root_moment_row = np.zeros(self.nq)
        # EI w''(0) from the first element with the root clamped
        self.root_moment_row[0] = wing.EI * 6.0 / L**2
        self.root_moment_row[1] = -wing.EI * 2.0 / L

    def nodal_fields(self, q_flex):
        full = np.zeros(3 * (self.N + 1))
        full[3:] = q_flex
        return full[0::3], full[2::3]


def structural_matrices(wing):
    """Mass and stiffness of the clamped beam in free DOFs (no aerodynamics)."""
    asm = _Assembly(wing, rigid=False)
    return asm.M_struct, asm.K


# --------------------------------------------------------------------------
# model


def build_model(wing, flow, indicial=None, rigid_body=None, aerodynamics=True):
    """Assemble the coupled aeroelastic system as a :class:`FullOrderModel`.

    ``rigid_body`` is either ``None`` (clamped wing) or a
    :class:`RigidBodyConfig`.  With ``aerodynamics=False`` all aerodynamic
    loads vanish and the lag states evolve but do not feed back (used for
    structural checks).
    """
    if not isinstance(wing, WingConfig) or not isinstance(flow, FlowConfig):
        raise ConfigError("build_model: wing must be WingConfig and flow must be FlowConfig")
    indicial = indicial or IndicialApprox()
    rigid = rigid_body is not None
    asm = _Assembly(wing, rigid)
    N, nq, nflex = asm.N, asm.nq, asm.nflex

    b, a = wing.b, wing.a
    U, rho, g = flow.U_inf, flow.rho, flow.gravity
    ch = wing.hinge
    T = theodorsen_flap_constants(ch)
    aero_on = 1.0 if aerodynamics else 0.0

    kW = indicial.wagner_exponents * U / b
    AkW = indicial.wagner_coefficients * kW
    phi0 = indicial.wagner_initial
    kK = indicial.kussner_exponents * U / b
    CkK = indicial.kussner_coefficients * kK

    fl = wing.flap_effectiveness * asm.flap_weight
    circ_gain = aero_on * 2.0 * np.pi * rho * U * b
    nc = aero_on * rho * b * b
    # flap coefficient vectors (per strip) multiplying delta, delta_dot, delta_ddot
    q_d = fl * U * T["T10"] / np.pi
    q_dd = fl * b * T["T11"] / (2.0 * np.pi)
    l_dd = -nc * U * T["T4"] * fl
    l_ddd = -nc * T["T1"] * b * fl
    m_d = -nc * (T["T4"] + T["T10"]) * U * U * fl
    m_dd = -nc * (T["T1"] - T["T8"] - (ch - a) * T["T4"] + 0.5 * T["T11"]) * U * b * fl
    m_ddd = nc * (T["T7"] + (ch - a) * T["T1"]) * b * b * fl
    lever = b * (a + 0.5)

    m = wing.mass_per_length
    S = m * wing.cg_offset
    Ma_strip = aero_on * np.pi * rho * b * b * np.array([[1.0, b * a], [b * a, b * b * (0.125 + a * a)]])
    Ma = (
        asm.Gw @ (Ma_strip[0, 0] * asm.Jw + Ma_strip[0, 1] * asm.Jt)
        + asm.Gt @ (Ma_strip[1, 0] * asm.Jw + Ma_strip[1, 1] * asm.Jt)
    )
    Mq = asm.M_struct + Ma
    if rigid:
        Mq[nflex, nflex] += rigid_body.mass
        Mq[nflex + 1, nflex + 1] += rigid_body.pitch_inertia
    Minv = np.linalg.inv(Mq)
    K = asm.K
    Kb = asm.K_bend
    C_damp = wing.structural_damping * K
    kappa = wing.nonlinearity_coefficient
    span = wing.semispan
    tip = asm.tip_w
    Jw, Jt, Gw, Gt = asm.Jw, asm.Jt, asm.Gw, asm.Gt
    grav_lift = -m * g * np.ones(N)
    grav_tor = S * g * np.ones(N)
    thd_lift = nc * np.pi * U
    thd_mom = -nc * np.pi * (0.5 - a) * U * b
    q_thd = b * (0.5 - a)

    nW = 2 * N
    iK = slice(nW, nW + 3)
    s_aero = nW + 3
    iq = slice(s_aero, s_aero + nflex)
    iqd = slice(s_aero + nflex, s_aero + 2 * nflex)
    n = s_aero + 2 * nflex + (3 if rigid else 0)
    ir = s_aero + 2 * nflex
    qdyn = flow.dynamic_pressure

    def physics_residual(w, u_c, u_d, params, nonlinear=True):
        alpha0 = params["alpha0"]
        delta, delta_d, delta_dd = u_c[0], u_c[1], u_c[2]
        xW = w[:nW].reshape(N, 2)
        y = w[iK]
        if rigid:
            q = np.concatenate([w[iq], [0.0, w[ir]]])
            qd = np.concatenate([w[iqd], w[ir + 1 : ir + 3]])
        else:
            q = w[iq]
            qd = w[iqd]
        thm = Jt @ q
        wmd = Jw @ qd
        thmd = Jt @ qd
        Q = U * (alpha0 + thm) - wmd + q_thd * thmd + q_d * delta + q_dd * delta_d
        xWdot = Q[:, None] - kW * xW
        Qeff = phi0 * Q + xW @ AkW
        ydot = u_d - kK * y
        circ = circ_gain * (Qeff + CkK @ y)
        lift = circ + thd_lift * thmd + l_dd * delta_d + l_ddd * delta_dd + grav_lift
        torque = lever * circ + thd_mom * thmd + m_d * delta + m_dd * delta_d + m_ddd * delta_dd + grav_tor
        F = Gw @ lift + Gt @ torque - K @ q
        if kappa and nonlinear:
            F -= kappa * (q[tip] / span) ** 2 * (Kb @ q)
        if C_damp.any():
            F -= C_damp @ qd
        if rigid:
            h_d, th_d = qd[nflex], qd[nflex + 1]
            alpha_t = alpha0 + q[nflex + 1] + params["tail_incidence"] + (u_d - h_d + rigid_body.tail_arm * th_d) / U
            Lt = aero_on * qdyn * rigid_body.tail_lift_factor * alpha_t
            F[nflex] += Lt - rigid_body.mass * g
            F[nflex + 1] -= rigid_body.tail_arm * Lt
        qdd = Minv @ F
        out = np.empty(n)
        out[:nW] = xWdot.ravel()
        out[iK] = ydot
        out[iq] = qd[:nflex]
        out[iqd] = qdd[:nflex]
        if rigid:
            out[ir] = qd[nflex + 1]
            out[ir + 1 : ir + 3] = qdd[nflex:]
        return out

    # Everything except the cubic stiffening is affine in (w, u_c, u_d, params),
    # so the affine part is captured once by probing the physics residual.
    base = dict(alpha0=0.0, tail_incidence=0.0) if rigid else dict(alpha0=0.0)
    zero3 = np.zeros(3)
    r_const = physics_residual(np.zeros(n), zero3, 0.0, base, nonlinear=False)
    A_lin = np.empty((n, n))
    e = np.zeros(n)
    for i in range(n):
        e[i] = 1.0
        A_lin[:, i] = physics_residual(e, zero3, 0.0, base, nonlinear=False) - r_const
        e[i] = 0.0
    B_lin = np.empty((n, 4))
    for k in range(3):
        u = zero3.copy()
        u[k] = 1.0
        B_lin[:, k] = physics_residual(np.zeros(n), u, 0.0, base, nonlinear=False) - r_const
    B_lin[:, 3] = physics_residual(np.zeros(n), zero3, 1.0, base, nonlinear=False) - r_const
    p_names = tuple(base)
    P_lin = np.empty((n, len(p_names)))
    for k, name in enumerate(p_names):
        pk = dict(base)
        pk[name] = 1.0
        P_lin[:, k] = physics_residual(np.zeros(n), zero3, 0.0, pk, nonlinear=False) - r_const
    acc_rows = np.r_[np.arange(iqd.start, iqd.stop), np.arange(ir + 1, n)] if rigid else np.arange(iqd.start, iqd.stop)
    pos_idx = np.r_[np.arange(iq.start, iq.stop), [ir]] if rigid else np.arange(iq.start, iq.stop)
    nl_gain = kappa * (Minv @ Kb) / span**2
    if rigid:
        # drop the (identically zero) plunge-position column
        nl_gain = np.delete(nl_gain, nflex, axis=1)
    tip_state = iq.start + tip

    def make_residual(w_ref, p_ref):
        # Affine part and cubic term expanded about w_ref (an exact rewrite) so
        # that evaluations near the reference avoid cancelling O(|A| |w|) terms.
        p_ref = np.array([p_ref[k] for k in p_names])
        g_ref = nl_gain @ w_ref[pos_idx]
        t_ref = w_ref[tip_state]
        R_ref = A_lin @ w_ref + r_const + P_lin @ p_ref
        if kappa:
            R_ref[acc_rows] -= t_ref**2 * g_ref

        def residual(w, u_c, u_d, params):
            d = w - w_ref
            out = R_ref + A_lin @ d + B_lin[:, :3] @ u_c + B_lin[:, 3] * u_d
            out += P_lin @ (np.array([params[k] for k in p_names]) - p_ref)
            if kappa:
                t = w[tip_state]
                out[acc_rows] -= t * t * (nl_gain @ d[pos_idx]) + d[tip_state] * (t + t_ref) * g_ref
            return out

        return residual

    root_row = asm.root_moment_row[:nflex]

    def output_map(w):
        qf = w[iq]
        return np.array([qf[tip], root_row @ qf, qf[asm.tip_theta], qf[tip + 1]])

    partition = {"aero": (0, s_aero), "structural": (s_aero, s_aero + 2 * nflex)}
    if rigid:
        partition["rigid_body"] = (ir, n)
    params = {"alpha0": float(flow.alpha0)}
    if rigid:
        params["tail_incidence"] = 0.0

    model = FullOrderModel(
        n=n,
        residual=make_residual(np.zeros(n), params),
        state_partition=partition,
        output_map=output_map,
        output_names=OUTPUT_NAMES,
        parameters=params,
        metadata={
            "wing": wing,
            "flow": flow,
            "indicial": indicial,
            "rigid_body": rigid_body,
            "assembly": asm,
            "mass_matrix": Mq,
            "layout": {"wagner": (0, nW), "kussner": (nW, nW + 3), "q": (iq.start, iq.stop), "qdot": (iqd.start, iqd.stop)},
            "physics_residual": physics_residual,
        },
    )
    scale = np.linalg.norm(model.residual(np.zeros(n), np.zeros(3), 0.0, params))
    model = replace(model, residual_scale=float(max(1.0, scale)))
    if not rigid and aerodynamics:
        try:
            w_ref = static_state(model, solve_static(model))
        except NumericalError:
            w_ref = None
        if w_ref is not None:
            model = replace(model, residual=make_residual(w_ref, params))
    return model


# --------------------------------------------------------------------------
# static aeroelastic solution


def solve_static(model, flow=None, tol=1e-10, max_iter=50):
    """Nonlinear static deflection with the aerodynamics at their steady state.

    Works directly on the assembled stiffness and strip operators (not on
    the time-domain residual), so it is an independent route to the trim
    deflection.  Rigid-body DOFs, if any, are held at zero.
    """
    wing = model.metadata["wing"]
    flow = flow or model.metadata["flow"]
    asm = _Assembly(wing, rigid=False)
    U, rho, g = flow.U_inf, flow.rho, flow.gravity
    b, a = wing.b, wing.a
    K = asm.K
    Kb = asm.K_bend
    kappa = wing.nonlinearity_coefficient
    span = wing.semispan
    tip = asm.tip_w
    circ = 2.0 * np.pi * rho * U * U * b
    lever = b * (a + 0.5)
    # steady lift per strip = circ * (alpha0 + theta_mid)
    K_aero = circ * (asm.Gw + lever * asm.Gt) @ asm.Jt
    f0 = circ * flow.alpha0 * (asm.Gw + lever * asm.Gt).sum(axis=1)
    f0 += asm.Gw @ (-wing.mass_per_length * g * np.ones(asm.N))
    f0 += asm.Gt @ (wing.mass_per_length * wing.cg_offset * g * np.ones(asm.N))

    ratios = np.linalg.eigvals(np.linalg.solve(K, K_aero))
    real = ratios[np.abs(ratios.imag) < 1e-9 * np.maximum(1.0, np.abs(ratios))].real
    if real.size and real.max() >= 1.0:
        q_div = flow.dynamic_pressure / real.max()
        raise StaticDivergenceError(
            f"static divergence: dynamic pressure {flow.dynamic_pressure:.1f} Pa exceeds "
            f"divergence pressure {q_div:.1f} Pa"
        )

    q = np.linalg.solve(K - K_aero, f0)
    scale = max(1.0, np.linalg.norm(f0))
    for it in range(1, max_iter + 1):
        s = q[tip] / span
        r = K @ q + kappa * s * s * (Kb @ q) - K_aero @ q - f0
        if np.linalg.norm(r) <= tol * scale:
            break
        J = K - K_aero + kappa * s * s * Kb
        J[:, tip] += kappa * 2.0 * s / span * (Kb @ q)
        step = np.linalg.solve(J, r)
        q = q - step
        # fine meshes put the residual round-off floor above tol * scale;
        # after a Newton correction of relative size 1e-8 the error is O(1e-16)
        if np.linalg.norm(step) <= 1e-8 * max(1.0, np.linalg.norm(q)):
            break
    else:
        raise ConvergenceError("static solve did not converge", last_residual=np.linalg.norm(r), iterations=max_iter)
    w_nodes, th_nodes = asm.nodal_fields(q)
    return StaticSolution(
        y=asm.y_nodes,
        w=w_nodes,
        theta=th_nodes,
        q=q,
        tip_displacement=float(q[tip]),
        tip_twist=float(q[asm.tip_theta]),
        iterations=it,
    )


def static_state(model, sol):
    """Full state vector corresponding to a static solution (rates zero, lags settled)."""
    wing = model.metadata["wing"]
    flow = model.metadata["flow"]
    ind = model.metadata["indicial"]
    asm = model.metadata["assembly"]
    lay = model.metadata["layout"]
    w = np.zeros(model.n)
    q = np.zeros(asm.nq)
    q[: asm.nflex] = sol.q
    Q = flow.U_inf * (model.parameters["alpha0"] + asm.Jt @ q)
    kW = ind.wagner_exponents * flow.U_inf / wing.b
    w[: 2 * asm.N] = (Q[:, None] / kW).ravel()
    w[lay["q"][0] : lay["q"][1]] = sol.q
    return w
