"""End-to-end stages shared by the command line and the acceptance tests.

Each stage is a plain function of a :class:`~gla_workbench.config.Benchmark`
and the products of the previous stage, so stages can be cached, swapped
or run in separate processes.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import hinf
from .bench import build_model, solve_static
from .errors import ConfigError
from .gusts import vonkarman_realization
from .nmor import identify_bilinear, project, select_modes, with_bilinear
from .plant import augment, build_generalized_plant, reduced_scales
from .sim import SimConfig, compute_metrics, simulate_closed, simulate_open
from .statespace import compute_jacobian, eig_biorthonormal, solve_trim


@dataclass(frozen=True)
class Reduction:
    linear: object
    decomposition: object
    selection: object
    rom: object


def make_model(bench, elements=None, aerodynamics=True):
    wing = bench.wing if elements is None else replace(bench.wing, elements=int(elements))
    return build_model(wing, bench.flow, rigid_body=bench.rigid_body, aerodynamics=aerodynamics)


def trim(model, bench):
    """Trim at the configured ``alpha0``.

    A free aircraft has a neutral climb direction: the plunge rate is held
    at zero and the tail incidence balances the pitching moment instead.
    """
    if bench.rigid_body is None:
        return solve_trim(model)
    ir = model.state_partition["rigid_body"][0]
    free = np.array([i for i in range(model.n) if i != ir + 1])
    return solve_trim(model, free_variables=free, free_parameters=("tail_incidence",))


def reduce(model, tr, bench, modes=None, bilinear=False):
    red = bench.reduction
    m = red.modes if modes is None else modes
    lin = compute_jacobian(model, tr)
    dec = eig_biorthonormal(lin.A)
    if m == "full":
        sel = select_modes(dec, lin, criterion="manual", indices=list(range(dec.m)))
    else:
        sel = select_modes(dec, lin, criterion=red.criterion, m=int(m),
                           band=(red.band_low, red.band_high), output=red.output)
    rom = project(lin, dec, sel)
    if bilinear:
        rom = with_bilinear(rom, identify_bilinear(model, tr, dec, sel))
    return Reduction(lin, dec, sel, rom)


def generalized_plant(rom, bench, K_c=None):
    s = bench.synthesis
    K_c = s.K_c if K_c is None else K_c
    if not K_c > 0:
        raise ConfigError("K_c: must be > 0")
    aug = augment(rom, performance=(s.performance,), measurement=s.measurement, K_c=K_c)
    scales = reduced_scales(bench.wing.b, bench.flow.U_inf) if s.scaling == "reduced" else {}
    return build_generalized_plant(aug, eps_n=s.eps_n, eps_a=s.eps_a, **scales)


def design(rom, bench, K_c=None):
    s = bench.synthesis
    P = generalized_plant(rom, bench, K_c)
    K = hinf.synthesize(P, gamma_tolerance=s.gamma_tolerance, backoff=s.backoff)
    meta = dict(K.metadata, K_c=float(P.D12[-1, 0]), eps_n=s.eps_n, eps_a=s.eps_a,
                measurement=s.measurement, scaling=s.scaling)
    return replace(K, metadata=meta), P


def sim_config(bench, t_final, rom=None):
    s = bench.simulation
    cfg = SimConfig(dt=s.dt, t_final=t_final, record_stride=s.record_stride,
                    controller_rate=s.controller_rate or None)
    if rom is not None:
        cfg.check_resolution(np.abs(rom.eigenvalues.imag).max() / (2.0 * np.pi))
    return cfg


def discrete_case(bench):
    g = bench.discrete_gust()
    t_final = bench.simulation.t_final or g.end_time + bench.simulation.settle_time
    return g, t_final


def turbulence_case(bench, seed):
    tc = bench.turbulence_config(seed)
    return vonkarman_realization(tc), tc.duration


def run_pair(model, tr, controller, gust, cfg, output="tip_displacement"):
    """Open and closed loop under the same gust; metrics attached to the closed result."""
    res_open = simulate_open(model, tr, gust, cfg)
    res_closed = simulate_closed(model, tr, controller, gust, cfg)
    res_closed.metrics = compute_metrics(res_open, res_closed, output=output, flap_limits=cfg.flap_limit_report)
    return res_open, res_closed


def mesh_study(bench, meshes=None):
    """Static tip deflection and twist against mesh size.

    ``change_pct`` is relative to the previous (coarser) row.
    """
    rows = []
    prev = None
    for ne in meshes or bench.study.meshes:
        model = make_model(bench, elements=ne)
        sol = solve_static(model)
        tip = sol.tip_displacement
        change = np.nan if prev is None else 100.0 * abs(tip - prev) / abs(tip)
        rows.append({"elements": int(ne), "tip_displacement": tip,
                     "tip_twist_deg": float(np.rad2deg(sol.tip_twist)), "change_pct": change})
        prev = tip
    return rows
