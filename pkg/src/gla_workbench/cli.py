"""Command-line driver: ``gla-workbench {trim,reduce,synthesize,simulate,sweep}``.

Every subcommand writes into ``--out``.  On failure a ``<subcommand>.failed``
file holding the error message is left next to whatever was written, and
the exit code is 1 for numerical failures and 2 for usage or
configuration errors.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import hinf, pipeline, plotting
from .bench import OUTPUT_NAMES, solve_static
from .config import load_config
from .errors import ConfigError, DimensionError, NumericalError
from .gusts import write_gust_csv
from .nmor import participation_scores, save_rom, load_rom
from .sim import simulate_open, write_metrics, write_result_csv

log = logging.getLogger("gla_workbench")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _write_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=_json_default)


def _write_rows(rows, path):
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, fieldnames=list(rows[0]))
        out.writeheader()
        for r in rows:
            out.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})


def _plots_wanted(args):
    if args.no_plots:
        return False
    if not plotting.available():
        log.warning("matplotlib not installed; skipping PNG figures (pip install .[plot])")
        return False
    return True


def _modes_arg(text):
    if text == "full":
        return text
    try:
        m = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'full', got {text!r}") from None
    if m < 1:
        raise argparse.ArgumentTypeError("--modes must be >= 1")
    return m


# --------------------------------------------------------------------------
# subcommands


def cmd_trim(args, bench, out):
    model = pipeline.make_model(bench)
    tr = pipeline.trim(model, bench)
    sol = solve_static(model)
    y = model.outputs(tr.w0)
    report = {
        "alpha0_deg": float(np.rad2deg(bench.flow.alpha0)),
        "elements": bench.wing.elements,
        "residual_norm": tr.residual_norm,
        "iterations": tr.iterations,
        "parameters": tr.parameters,
        "trim_outputs": dict(zip(OUTPUT_NAMES, y)),
        "static_tip_displacement": sol.tip_displacement,
        "static_tip_twist_deg": float(np.rad2deg(sol.tip_twist)),
    }
    _write_json(report, out / "trim.json")
    print(f"trim: tip deflection {y[0]:.6f} m, residual {tr.residual_norm:.3e} after {tr.iterations} iterations")

    rows = pipeline.mesh_study(bench, args.meshes)
    _write_rows(rows, out / "mesh_convergence.csv")
    print(f"{'elements':>8}  {'tip (m)':>12}  {'twist (deg)':>11}  {'change %':>9}")
    for r in rows:
        print(f"{r['elements']:>8d}  {r['tip_displacement']:12.6f}  {r['tip_twist_deg']:11.5f}  {r['change_pct']:9.4f}")
    if _plots_wanted(args):
        plotting.mesh_convergence(rows, out / "mesh_convergence.png")


def cmd_reduce(args, bench, out):
    model = pipeline.make_model(bench)
    tr = pipeline.trim(model, bench)
    red = pipeline.reduce(model, tr, bench, modes=args.modes, bilinear=True)
    rom, dec, lin = red.rom, red.decomposition, red.linear
    scores = participation_scores(dec, lin, bench.reduction.output)
    lam = rom.eigenvalues
    band = np.linspace(0.0, max(np.abs(lam.imag).max(), 1.0), 400)
    g_full = lin.frequency_response(band, output=bench.reduction.output)
    g_rom = rom.frequency_response(band, output=bench.reduction.output)
    err = float(np.max(np.abs(g_rom - g_full) / np.abs(g_full)))

    save_rom(rom, out / "rom.json", metadata={"modes": args.modes or bench.reduction.modes,
                                              "criterion": red.selection.criterion, "band_rel_error": err})
    rows = []
    for k, idx in enumerate(rom.retained_indices):
        lk = lam[k]
        rows.append({"index": int(idx), "real": lk.real, "imag": lk.imag,
                     "freq_hz": abs(lk.imag) / (2 * np.pi), "damping": -lk.real / abs(lk),
                     "participation": float(scores[idx])})
    _write_rows(rows, out / "modes.csv")
    _write_rows([{"omega": w, "full_abs": abs(a), "rom_abs": abs(b)} for w, a, b in zip(band, g_full, g_rom)],
                out / "frf.csv")
    print(f"reduce: {rom.m} of {dec.m} modes retained, gust-to-tip relative error over band {err:.3e}")
    for r in rows:
        print(f"  {r['real']:10.4f} {r['imag']:+10.4f}j  score {r['participation']:.3e}")
    if _plots_wanted(args):
        plotting.frequency_response(band[1:], g_full[1:], g_rom[1:], out / "frf.png")


def _reduced(args, bench):
    model = pipeline.make_model(bench)
    tr = pipeline.trim(model, bench)
    if getattr(args, "rom", None):
        return model, tr, load_rom(args.rom)
    return model, tr, pipeline.reduce(model, tr, bench, modes=args.modes).rom


def cmd_synthesize(args, bench, out):
    _, _, rom = _reduced(args, bench)
    K, P = pipeline.design(rom, bench, K_c=args.kc)
    cl = hinf.performance_channel(P, K)
    achieved, _ = hinf.hinf_norm(cl)
    hinf.save_controller(K, out / "controller.json")
    _write_json({"gamma_star": K.gamma_star, "closed_loop_norm": achieved, **K.metadata}, out / "synthesis.json")
    print(f"synthesize: K_c = {K.metadata['K_c']:g}, gamma* = {K.gamma_star:.6g}, "
          f"closed loop {achieved:.6g}, open loop {K.metadata['open_loop_norm']:.6g}, order {K.order}")


def _scenario(bench, scenario, seed):
    if scenario == "discrete":
        return pipeline.discrete_case(bench)
    return pipeline.turbulence_case(bench, seed)


def cmd_simulate(args, bench, out):
    if not args.open_only and not args.controller:
        raise ConfigError("simulate: closed loop needs --controller FILE (or pass --open-only)")
    controller = None if args.open_only else hinf.load_controller(args.controller)
    model = pipeline.make_model(bench)
    tr = pipeline.trim(model, bench)
    seed = bench.turbulence.seeds[0] if args.seed is None else args.seed
    gust, t_final = _scenario(bench, args.scenario, seed)
    cfg = pipeline.sim_config(bench, t_final)
    t0 = time.perf_counter()
    if controller is None:
        res_open = simulate_open(model, tr, gust, cfg)
        res_closed = None
    else:
        res_open, res_closed = pipeline.run_pair(model, tr, controller, gust, cfg)
    log.info("simulation wall time %.1f s", time.perf_counter() - t0)

    write_result_csv(res_open, out / "history_open.csv")
    if hasattr(gust, "t"):
        write_gust_csv(gust, out / "gust.csv")
    if res_closed is not None:
        write_result_csv(res_closed, out / "history_closed.csv")
        extra = {"scenario": args.scenario, "seed": seed if args.scenario == "vonkarman" else None,
                 "gamma_star": controller.gamma_star, "K_c": controller.metadata.get("K_c")}
        write_metrics(res_closed.metrics, out / "metrics.json", extra=extra)
        plotting.gnuplot_time_histories(out / "plot.gp", "history_open.csv", "history_closed.csv")
        m = res_closed.metrics
        print(f"simulate[{args.scenario}]: peak {m.peak_open:.4f} -> {m.peak_closed:.4f} m "
              f"({m.peak_reduction_pct:.2f}% reduction), RMS {m.rms_reduction_pct:.2f}% reduction, "
              f"max |delta| {m.max_flap_deflection:.2f} deg, max rate {m.max_flap_rate:.1f} deg/s")
        for name, hit in m.flap_limits_exceeded.items():
            if hit:
                print(f"  warning: flap {name} limit exceeded (reported, not enforced)")
    else:
        peak = float(np.abs(res_open.outputs["tip_displacement"]).max())
        print(f"simulate[{args.scenario}]: open-loop peak tip deviation {peak:.4f} m")
    if _plots_wanted(args):
        plotting.time_histories(res_open, res_closed, out / "time_histories.png")


def _sweep_point(config_path, K_c, scenario, seeds, out_dir, modes):
    """One ``K_c`` of a sweep; runs in a worker process."""
    bench = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = pipeline.make_model(bench)
    tr = pipeline.trim(model, bench)
    rom = pipeline.reduce(model, tr, bench, modes=modes).rom
    K, _ = pipeline.design(rom, bench, K_c=K_c)
    hinf.save_controller(K, out / "controller.json")
    reports = []
    for seed in seeds:
        gust, t_final = _scenario(bench, scenario, seed)
        _, closed = pipeline.run_pair(model, tr, K, gust, pipeline.sim_config(bench, t_final))
        name = "metrics.json" if scenario == "discrete" else f"metrics_seed{seed}.json"
        write_metrics(closed.metrics, out / name, extra={"K_c": K_c, "scenario": scenario})
        reports.append(closed.metrics)
    return {
        "K_c": float(K_c),
        "gamma_star": K.gamma_star,
        "peak_reduction_pct": float(np.mean([r.peak_reduction_pct for r in reports])),
        "rms_reduction_pct": float(np.mean([r.rms_reduction_pct for r in reports])),
        "max_flap_deflection": float(max(r.max_flap_deflection for r in reports)),
        "max_flap_rate": float(max(r.max_flap_rate for r in reports)),
    }


def cmd_sweep(args, bench, out):
    kcs = args.kc_list or bench.study.kc_sweep
    if args.scenario == "discrete":
        seeds = (0,)
    else:
        seeds = tuple(args.seeds) if args.seeds else ((args.seed,) if args.seed is not None else bench.turbulence.seeds)
    jobs = [(args.config, kc, args.scenario, seeds, str(out / f"kc_{kc:g}"), args.modes) for kc in kcs]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, *zip(*jobs)))
    else:
        rows = [_sweep_point(*j) for j in jobs]
    _write_rows(rows, out / "sweep.csv")
    print(f"{'K_c':>8}  {'gamma*':>10}  {'peak red %':>10}  {'RMS red %':>9}  {'max|delta|':>10}")
    for r in rows:
        print(f"{r['K_c']:8g}  {r['gamma_star']:10.4g}  {r['peak_reduction_pct']:10.2f}  "
              f"{r['rms_reduction_pct']:9.2f}  {r['max_flap_deflection']:10.2f}")
    if _plots_wanted(args):
        plotting.tradeoff(rows, out / "tradeoff.png")


COMMANDS = {
    "trim": cmd_trim,
    "reduce": cmd_reduce,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="benchmark configuration file (default: shipped benchmark.cfg)")
    common.add_argument("--out", default="gla_out", help="output directory (default: %(default)s)")
    common.add_argument("--no-plots", action="store_true", help="skip matplotlib PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gla-workbench", description="Gust load alleviation workbench.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trim", parents=[common], help="trim, static solution and mesh convergence table")
    p.add_argument("--meshes", type=int, nargs="+", help="element counts for the convergence study")

    p = sub.add_parser("reduce", parents=[common], help="build the reduced-order model and mode table")
    p.add_argument("--modes", type=_modes_arg, help="retained modes (integer or 'full')")

    p = sub.add_parser("synthesize", parents=[common], help="H-infinity controller for one K_c")
    p.add_argument("--kc", type=float, help="control weight K_c (default from config)")
    p.add_argument("--modes", type=_modes_arg)
    p.add_argument("--rom", help="reuse a ROM file written by 'reduce'")

    p = sub.add_parser("simulate", parents=[common], help="open and closed loop on the nonlinear model")
    p.add_argument("--scenario", choices=("discrete", "vonkarman"), default="discrete")
    p.add_argument("--seed", type=int, help="turbulence seed (default: first seed in config)")
    p.add_argument("--controller", help="controller file written by 'synthesize'")
    p.add_argument("--open-only", action="store_true")

    p = sub.add_parser("sweep", parents=[common], help="K_c trade-off study")
    p.add_argument("--kc", dest="kc_list", type=float, nargs="+", help="K_c values (default from config)")
    p.add_argument("--scenario", choices=("discrete", "vonkarman"), default="discrete")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--modes", type=_modes_arg)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    log.setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    out = Path(args.out)
    marker = out / f"{args.command}.failed"
    try:
        if args.config and not os.path.isfile(args.config):
            raise ConfigError(f"{args.config}: no such file")
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be >= 1")
        bench = load_config(args.config)
        if getattr(args, "kc", None) is not None and not args.kc > 0:
            raise ConfigError("--kc: K_c must be > 0")
        out.mkdir(parents=True, exist_ok=True)
        if marker.exists():
            marker.unlink()
        COMMANDS[args.command](args, bench, out)
    except (ConfigError, DimensionError, OSError) as exc:
        return _fail(marker, exc, EXIT_USAGE)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail(marker, exc, EXIT_NUMERICAL)
    except Exception as exc:  # internal error: still leave the marker
        log.debug("internal error", exc_info=True)
        return _fail(marker, exc, EXIT_NUMERICAL)
    return EXIT_OK


def _fail(marker, exc, code):
    msg = f"{type(exc).__name__}: {exc}"
    print(f"error: {msg}", file=sys.stderr)
    try:
        marker.parent.mkdir(parents=True, exist_ok=True)
        marker.write_text(msg + "\n")
    except OSError:
        pass
    return code


if __name__ == "__main__":
    sys.exit(main())
