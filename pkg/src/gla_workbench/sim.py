"""Time marching of the full nonlinear model, open and closed loop.

Closed loop, the march state is ``[w, delta, delta_dot, x_k]``: the
aeroelastic state, the flap actuator (double integrator driven by
``u = delta_ddot``) and the controller.  All of it goes through one
classical RK4 step, so the controller sees the measurement at every
stage.  With ``controller_rate`` set the controller is instead sampled
and its output held (zero-order hold) between samples.

Output histories are deviations from the trim outputs.
"""

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, DimensionError, SimulationError
from .gusts import DiscreteGust, GustSignal

FLAP_NAMES = ("delta", "delta_dot")


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step integration settings.

    ``record_stride`` keeps every k-th step in the histories.
    ``flap_limit_report`` holds deflection (rad) and rate (rad/s)
    thresholds that are reported, never enforced.
    """

    dt: float = 2.0e-4
    t_final: float = 6.0
    integrator: str = "rk4"
    record: tuple = ("tip_displacement", "root_bending_moment")
    flap_limit_report: tuple = (np.deg2rad(25.0), np.deg2rad(300.0))
    record_stride: int = 1
    controller_rate: float = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt: must be > 0")
        if not self.t_final > 0:
            raise ConfigError("t_final: must be > 0")
        if self.integrator != "rk4":
            raise ConfigError(f"integrator: only 'rk4' is available, got {self.integrator!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError("record_stride: positive integer required")
        if self.controller_rate is not None:
            ratio = 1.0 / (self.controller_rate * self.dt)
            if not self.controller_rate > 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigError("controller_rate: sample period must be a whole number of steps")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    def check_resolution(self, f_max):
        """Enforce ``dt <= 1 / (10 f_max)`` for the largest retained frequency (Hz)."""
        if f_max > 0 and self.dt > 1.0 / (10.0 * f_max):
            raise ConfigError(f"dt = {self.dt:g} s too coarse for f_max = {f_max:g} Hz (need <= {0.1 / f_max:g} s)")


@dataclass(frozen=True)
class MetricsReport:
    peak_open: float
    peak_closed: float
    peak_reduction_pct: float
    rms_open: float
    rms_closed: float
    rms_reduction_pct: float
    max_flap_deflection: float
    max_flap_rate: float
    window: tuple = (0.0, 0.0)
    flap_limits_exceeded: dict = field(default_factory=dict)

    def as_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d


@dataclass
class SimResult:
    t: np.ndarray
    states: np.ndarray
    outputs: dict
    gust: np.ndarray
    y_trim: dict
    gust_window: tuple
    closed_loop: bool = False
    metrics: MetricsReport = None

    def __post_init__(self):
        k = self.t.size
        if self.states.shape[0] != k or self.gust.shape != (k,):
            raise DimensionError("histories", k, (self.states.shape[0], self.gust.shape))
        for name, y in self.outputs.items():
            if y.shape != (k,):
                raise DimensionError(name, (k,), y.shape)

    def columns(self):
        names = [n for n in self.outputs if n not in FLAP_NAMES]
        return ["t", *names, *FLAP_NAMES, "w_g"]


def _window(gust, t_final):
    if isinstance(gust, DiscreteGust):
        return (gust.start_time, gust.end_time)
    if isinstance(gust, GustSignal):
        return (float(gust.t[0]), min(gust.end_time, t_final))
    return (0.0, t_final)


def _check_gust(gust, cfg):
    if isinstance(gust, GustSignal) and gust.end_time < cfg.t_final - 1e-12:
        raise ConfigError(f"gust signal ends at {gust.end_time:g} s before t_final = {cfg.t_final:g} s")
    if not callable(gust):
        raise ConfigError("gust: expected a DiscreteGust, GustSignal or callable of time")


def _rk4(f, x0, cfg, on_step=None):
    n_steps = cfg.n_steps
    dt = cfg.dt
    stride = cfg.record_stride
    n_rec = n_steps // stride + 1
    X = np.empty((n_rec, x0.size))
    X[0] = x0
    x = x0.copy()
    t = 0.0
    for k in range(n_steps):
        if on_step is not None:
            on_step(k, t, x)
        k1 = f(t, x)
        k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (k + 1) * dt
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at t = {t:.6g} s", time=t)
        if (k + 1) % stride == 0:
            X[(k + 1) // stride] = x
    times = np.arange(n_rec) * dt * stride
    return times, X


def _params(model, trim):
    return {**model.parameters, **(trim.parameters or {})}


def _outputs(model, W, y0, names):
    Y = np.array([model.outputs(w) for w in W]) - y0
    idx = [list(model.output_names).index(n) for n in names]
    return {n: Y[:, i] for n, i in zip(names, idx)}


def simulate_open(model, trim, gust, cfg):
    """RK4 from the trim state with the flap at rest."""
    _check_gust(gust, cfg)
    params = _params(model, trim)
    residual = model.residual
    zero = np.zeros(3)

    def f(t, w):
        return residual(w, zero, gust(t), params)

    t, W = _rk4(f, np.asarray(trim.w0, dtype=float).copy(), cfg)
    y0 = model.outputs(trim.w0)
    names = tuple(model.output_names)
    outputs = _outputs(model, W, y0, names)
    outputs["delta"] = np.zeros(t.size)
    outputs["delta_dot"] = np.zeros(t.size)
    return SimResult(
        t=t,
        states=W,
        outputs=outputs,
        gust=np.asarray(gust(t), dtype=float),
        y_trim=dict(zip(names, y0)),
        gust_window=_window(gust, cfg.t_final),
    )


def simulate_closed(model, trim, controller, gust, cfg, measurement=None):
    """Co-simulation of the full model, flap actuator and controller.

    ``measurement`` defaults to the controller's design measurement
    (``metadata["measurement"]``, else tip displacement); the controller
    reads its deviation from trim and commands ``u = delta_ddot``.
    """
    _check_gust(gust, cfg)
    measurement = measurement or controller.metadata.get("measurement", "tip_displacement")
    names = tuple(model.output_names)
    if measurement not in names:
        raise ConfigError(f"controller measurement {measurement!r} is not a model output {names}")
    Ak, Bk, Ck, Dk = controller.A_k, controller.B_k, controller.C_k, controller.D_k
    if Bk.shape[1] != 1 or Ck.shape[0] != 1:
        raise DimensionError("controller", "single input, single output", (Ck.shape[0], Bk.shape[1]))
    n = model.n
    nk = controller.order
    params = _params(model, trim)
    residual = model.residual
    i_meas = names.index(measurement)
    y0 = model.outputs(trim.w0)
    y_ref = y0[i_meas]
    output_map = model.output_map
    bk = Bk[:, 0]
    ck = Ck[0]
    dk = float(Dk[0, 0])
    iw = slice(0, n)
    ik = slice(n + 2, n + 2 + nk)

    if cfg.controller_rate is None:

        def f(t, x):
            w = x[iw]
            xk = x[ik]
            y = output_map(w)[i_meas] - y_ref
            u = ck @ xk + dk * y
            out = np.empty_like(x)
            out[iw] = residual(w, np.array([x[n], x[n + 1], u]), gust(t), params)
            out[n] = x[n + 1]
            out[n + 1] = u
            out[ik] = Ak @ xk + bk * y
            return out

        on_step = None
    else:
        Ts = 1.0 / cfg.controller_rate
        every = int(round(Ts / cfg.dt))
        M = np.zeros((nk + 1, nk + 1))
        M[:nk, :nk] = Ak * Ts
        M[:nk, nk] = bk * Ts
        E = sla.expm(M)
        Ad, bd = E[:nk, :nk], E[:nk, nk]
        held = {"u": 0.0, "xk": np.zeros(nk)}

        def on_step(k, t, x):
            if k % every == 0:
                y = output_map(x[iw])[i_meas] - y_ref
                xk = held["xk"]
                held["u"] = float(ck @ xk + dk * y)
                held["xk"] = Ad @ xk + bd * y
                x[ik] = xk

        def f(t, x):
            u = held["u"]
            out = np.zeros_like(x)
            out[iw] = residual(x[iw], np.array([x[n], x[n + 1], u]), gust(t), params)
            out[n] = x[n + 1]
            out[n + 1] = u
            return out

    x0 = np.concatenate([np.asarray(trim.w0, dtype=float), np.zeros(2 + nk)])
    t, X = _rk4(f, x0, cfg, on_step)
    W = X[:, iw]
    outputs = _outputs(model, W, y0, names)
    outputs["delta"] = X[:, n].copy()
    outputs["delta_dot"] = X[:, n + 1].copy()
    return SimResult(
        t=t,
        states=X,
        outputs=outputs,
        gust=np.asarray(gust(t), dtype=float),
        y_trim=dict(zip(names, y0)),
        gust_window=_window(gust, cfg.t_final),
        closed_loop=True,
    )


def _reduction(open_value, closed_value):
    if open_value == 0:
        return 0.0
    return (1.0 - closed_value / open_value) * 100.0


def compute_metrics(open_result, closed_result, output="tip_displacement", settle=2.0, flap_limits=None):
    """Peak and windowed-RMS alleviation of ``output`` plus flap extrema (degrees).

    Peaks are maxima of ``|deviation from trim|`` over the whole record; the
    RMS window is the gust-active window extended by ``settle`` seconds.
    """
    if open_result.t.shape != closed_result.t.shape or np.any(open_result.t != closed_result.t):
        raise ConfigError("compute_metrics: open and closed results must share the time grid")
    t = open_result.t
    yo = open_result.outputs[output]
    yc = closed_result.outputs[output]
    t0, t1 = open_result.gust_window
    win = (t >= t0) & (t <= t1 + settle)
    if not win.any():
        win = np.ones(t.size, dtype=bool)
    peak_o = float(np.abs(yo).max())
    peak_c = float(np.abs(yc).max())
    rms_o = float(np.sqrt(np.mean(yo[win] ** 2)))
    rms_c = float(np.sqrt(np.mean(yc[win] ** 2)))
    delta = closed_result.outputs.get("delta", np.zeros(t.size))
    rate = closed_result.outputs.get("delta_dot", np.zeros(t.size))
    max_d = float(np.abs(delta).max())
    max_r = float(np.abs(rate).max())
    exceeded = {}
    if flap_limits is not None:
        exceeded = {"deflection": bool(max_d > flap_limits[0]), "rate": bool(max_r > flap_limits[1])}
    return MetricsReport(
        peak_open=peak_o,
        peak_closed=peak_c,
        peak_reduction_pct=_reduction(peak_o, peak_c),
        rms_open=rms_o,
        rms_closed=rms_c,
        rms_reduction_pct=_reduction(rms_o, rms_c),
        max_flap_deflection=float(np.degrees(max_d)),
        max_flap_rate=float(np.degrees(max_r)),
        window=(float(t0), float(min(t1 + settle, t[-1]))),
        flap_limits_exceeded=exceeded,
    )


def envelope(result, output="tip_displacement", after=None, width=1.0):
    """Max ``|deviation|`` over ``[after, after + width]`` (default: the last ``width`` seconds)."""
    y = np.abs(result.outputs[output])
    t = result.t
    if after is None:
        after = t[-1] - width
    sel = (t >= after) & (t <= after + width + 1e-12)
    return float(y[sel].max()) if sel.any() else 0.0


def write_result_csv(result, path):
    cols = result.columns()
    data = [result.t] + [result.outputs[c] for c in cols[1:-1]] + [result.gust]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(cols)
        for row in zip(*data):
            out.writerow([repr(float(v)) for v in row])


def read_result_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return {name: data[:, i] for i, name in enumerate(header)}


def write_metrics(report, path, extra=None):
    doc = {"metrics": report.as_dict()}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
