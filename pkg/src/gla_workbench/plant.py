"""Design plant: reduced model plus flap actuator, and its two-port form.

The actuator is a double integrator driven by the commanded flap
acceleration ``u = delta_ddot``::

    [delta, delta_dot]' = [[0, 1], [0, 0]] [delta, delta_dot] + [0, 1] u

so the augmented state is ``x = (xi, delta, delta_dot)`` with ``xi`` the
real coordinates of the reduced model.  The performance output stacks the
selected structural response with the weighted control ``K_c u``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .statespace import StateSpace

ACTUATOR_NAMES = ("delta", "delta_dot")


@dataclass(frozen=True)
class ActuatorState:
    delta: float = 0.0
    delta_dot: float = 0.0

    def as_array(self):
        return np.array([self.delta, self.delta_dot])


@dataclass(frozen=True)
class AugmentedPlant:
    """Reduced model with the flap actuator appended.

    ``C_phys`` maps the augmented state to every physical output of the
    reduced model followed by ``delta`` and ``delta_dot``; names in
    ``phys_names``.
    """

    A_p: np.ndarray
    B_w: np.ndarray
    B_u: np.ndarray
    C_z: np.ndarray
    C_y: np.ndarray
    K_c: float = 1.0
    performance: tuple = ("tip_displacement",)
    measurement: str = "tip_displacement"
    C_phys: np.ndarray = None
    phys_names: tuple = ()

    def __post_init__(self):
        n = self.A_p.shape[0]
        if self.A_p.shape != (n, n) or n < 3:
            raise DimensionError("A_p", "(m_r + 2) square", self.A_p.shape)
        if self.B_w.shape != (n, 1):
            raise DimensionError("B_w", (n, 1), self.B_w.shape)
        if self.B_u.shape != (n, 1):
            raise DimensionError("B_u", (n, 1), self.B_u.shape)
        if not np.array_equal(self.A_p[-2:, -2:], [[0.0, 1.0], [0.0, 0.0]]) or np.any(self.A_p[-2:, :-2]):
            raise ConfigError("A_p: actuator block must be the decoupled double integrator")
        if not np.array_equal(self.B_u[-2:, 0], [0.0, 1.0]):
            raise ConfigError("B_u: actuator entries must be [0, 1]")
        if not self.K_c > 0:
            raise ConfigError("K_c: must be > 0 (zero control weight makes the synthesis problem singular)")

    @property
    def n(self):
        return self.A_p.shape[0]

    @property
    def m_r(self):
        return self.n - 2

    def gust_response(self, omega, output=None):
        """Gust-to-output frequency response (actuator at rest)."""
        C = self.C_z[[0]] if output is None else self.C_phys[[list(self.phys_names).index(output)]]
        return StateSpace(self.A_p, self.B_w, C).freqresp(omega)[:, 0, 0]


def augment(rom, performance=("tip_displacement",), measurement="tip_displacement", K_c=1.0):
    """Append the actuator to the real realization of ``rom``.

    The flap rotation and rate columns of the reduced model are fed from the
    actuator states; the acceleration column goes into ``B_u`` next to the
    integrator input.
    """
    for name in ("b_c", "b_c1", "b_c2", "b_g"):
        if getattr(rom, name, None) is None:
            raise ConfigError(f"augment: reduced model is missing control column {name}")
    if isinstance(performance, str):
        performance = (performance,)
    names = list(rom.output_names)
    for out in (*performance, measurement):
        if out not in names:
            raise ConfigError(f"augment: unknown output {out!r}; available {names}")
    real = rom.real_realization()
    m_r = real.A.shape[0]
    n = m_r + 2
    A_p = np.zeros((n, n))
    A_p[:m_r, :m_r] = real.A
    A_p[:m_r, m_r] = real.B[:, 0]
    A_p[:m_r, m_r + 1] = real.B[:, 1]
    A_p[m_r, m_r + 1] = 1.0
    B_u = np.zeros((n, 1))
    B_u[:m_r, 0] = real.B[:, 2]
    B_u[m_r + 1, 0] = 1.0
    B_w = np.zeros((n, 1))
    B_w[:m_r, 0] = real.B[:, 3]
    pad = np.zeros((real.C.shape[0], 2))
    C_full = np.hstack([real.C, pad])
    C_phys = np.vstack([C_full, np.eye(n)[m_r:]])
    return AugmentedPlant(
        A_p=A_p,
        B_w=B_w,
        B_u=B_u,
        C_z=C_full[[names.index(o) for o in performance]],
        C_y=C_full[[names.index(measurement)]],
        K_c=float(K_c),
        performance=tuple(performance),
        measurement=measurement,
        C_phys=C_phys,
        phys_names=tuple(names) + ACTUATOR_NAMES,
    )


@dataclass(frozen=True)
class GeneralizedPlant:
    """Two-port plant ``[z; y] = P [w; u]``.

    ``w = (gust, sensor noise, actuator disturbance)``; only the first
    channel is physical, the other two are the rank regularizations.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray
    D22: np.ndarray
    source: AugmentedPlant = None
    regularization: dict = field(default_factory=dict)
    z_ref: float = 1.0
    u_ref: float = 1.0

    def __post_init__(self):
        n = self.A.shape[0]
        nw, nu = self.B1.shape[1], self.B2.shape[1]
        nz, ny = self.C1.shape[0], self.C2.shape[0]
        expected = {
            "B1": (n, nw), "B2": (n, nu), "C1": (nz, n), "C2": (ny, n),
            "D11": (nz, nw), "D12": (nz, nu), "D21": (ny, nw), "D22": (ny, nu),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionError(name, shape, getattr(self, name).shape)
        if np.any(self.D22):
            raise ConfigError("D22: must be zero")
        if np.linalg.matrix_rank(self.D12) < nu:
            raise ConfigError("D12: must have full column rank")
        if np.linalg.matrix_rank(self.D21) < ny:
            raise ConfigError("D21: must have full row rank")
        if not (self.z_ref > 0 and self.u_ref > 0):
            raise ConfigError("z_ref and u_ref must be > 0")

    @property
    def n(self):
        return self.A.shape[0]

    def as_statespace(self):
        B = np.hstack([self.B1, self.B2])
        C = np.vstack([self.C1, self.C2])
        D = np.block([[self.D11, self.D12], [self.D21, self.D22]])
        return StateSpace(self.A, B, C, D)


def output_scale(plant):
    """Peak magnitude of the gust-to-measurement response of the reduced model."""
    m_r = plant.m_r
    sys = StateSpace(plant.A_p[:m_r, :m_r], plant.B_w[:m_r], plant.C_y[:, :m_r])
    lam = np.linalg.eigvals(sys.A)
    omega = np.concatenate([[0.0], np.abs(lam.imag), np.logspace(-2, 3, 200)])
    return float(np.abs(sys.freqresp(omega)).max())


def reduced_scales(semichord, U_inf):
    """Reference length and flap acceleration of reduced (nondimensional) time.

    With ``tau = t U / b`` the tip displacement in semichords and the flap
    acceleration ``d2 delta / d tau2`` are both of order one, which makes
    ``K_c`` a dimensionless weight.
    """
    if not (semichord > 0 and U_inf > 0):
        raise ConfigError("reduced_scales: semichord and U_inf must be > 0")
    return {"z_ref": float(semichord), "u_ref": float((U_inf / semichord) ** 2)}


def build_generalized_plant(plant, eps_n=1e-4, eps_a=1e-4, z_ref=1.0, u_ref=1.0):
    """Standard two-port form with the ``K_c``-weighted control penalty.

    The performance output is ``[C_z x / z_ref; K_c u]`` with the design
    control ``u`` in units of ``u_ref`` (see :func:`reduced_scales`); the
    defaults keep SI units.  ``eps_n`` is the sensor-noise level relative to the peak gust-to-
    measurement gain (makes ``D21`` full row rank).  ``eps_a`` injects a
    disturbance of the same form as ``u`` into the actuator; without it the
    actuator integrators are uncontrollable from ``w`` and the filter
    Riccati equation has no stabilizing solution.
    """
    if not plant.K_c > 0:
        raise ConfigError("K_c: must be > 0 (zero control weight makes the synthesis problem singular)")
    if not (eps_n > 0 and eps_a >= 0):
        raise ConfigError("eps_n must be > 0 and eps_a >= 0")
    if not (z_ref > 0 and u_ref > 0):
        raise ConfigError("z_ref and u_ref must be > 0")
    n = plant.n
    nz = plant.C_z.shape[0]
    s_y = output_scale(plant)
    noise = eps_n * max(s_y, np.finfo(float).tiny)
    B2 = plant.B_u * u_ref
    B1 = np.hstack([plant.B_w, np.zeros((n, 1)), eps_a * B2])
    C1 = np.vstack([plant.C_z / z_ref, np.zeros((1, n))])
    D12 = np.zeros((nz + 1, 1))
    D12[-1, 0] = plant.K_c
    D21 = np.array([[0.0, noise, 0.0]])
    return GeneralizedPlant(
        A=plant.A_p.copy(),
        B1=B1,
        B2=B2,
        C1=C1,
        D11=np.zeros((nz + 1, 3)),
        D12=D12,
        C2=plant.C_y.copy(),
        D21=D21,
        D22=np.zeros((1, 1)),
        source=plant,
        regularization={"eps_n": eps_n, "eps_a": eps_a, "noise_level": noise},
        z_ref=float(z_ref),
        u_ref=float(u_ref),
    )
