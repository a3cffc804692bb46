"""Figures and gnuplot scripts for command-line reports.

matplotlib is optional (``pip install .[plot]``); :func:`available` tells
the caller whether PNG output is possible.  Gnuplot scripts only reference
the CSV files and need nothing from Python.
"""

import numpy as np


def available():
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        return False
    return True


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"font.size": 9, "axes.grid": True, "grid.alpha": 0.3, "savefig.dpi": 150})
    return plt


def time_histories(open_result, closed_result, path, output="tip_displacement"):
    """Two panels: structural response and flap deflection, open solid, closed dashed."""
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.0))
    ax1.plot(open_result.t, open_result.outputs[output], "k-", lw=1.0, label="open loop")
    if closed_result is not None:
        ax1.plot(closed_result.t, closed_result.outputs[output], "r--", lw=1.0, label="closed loop")
        ax2.plot(closed_result.t, np.rad2deg(closed_result.outputs["delta"]), "r--", lw=1.0)
    ax1.set_ylabel(output.replace("_", " ") + " (m)" if output == "tip_displacement" else output)
    ax1.legend(loc="upper right")
    ax2.set_ylabel("flap deflection (deg)")
    ax2.set_xlabel("time (s)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def tradeoff(rows, path):
    """Peak reduction and maximum flap deflection against ``K_c``."""
    plt = _pyplot()
    kc = [r["K_c"] for r in rows]
    fig, ax1 = plt.subplots(figsize=(5.6, 3.8))
    ax1.semilogx(kc, [r["peak_reduction_pct"] for r in rows], "ko-", label="peak reduction")
    ax1.set_xlabel("K_c")
    ax1.set_ylabel("reduction (%)")
    ax2 = ax1.twinx()
    ax2.semilogx(kc, [r["max_flap_deflection"] for r in rows], "rs--", label="max |delta|")
    ax2.set_ylabel("max flap deflection (deg)", color="r")
    ax2.grid(False)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def mesh_convergence(rows, path):
    plt = _pyplot()
    ne = [r["elements"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(ne, [r["tip_displacement"] for r in rows], "ko-")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("elements")
    ax.set_ylabel("static tip deflection (m)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def frequency_response(omega, full, reduced, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.6, 3.8))
    ax.loglog(omega, np.abs(full), "k-", lw=1.0, label="full linear")
    ax.loglog(omega, np.abs(reduced), "r--", lw=1.0, label="reduced")
    ax.set_xlabel("frequency (rad/s)")
    ax.set_ylabel("|tip / gust| (s)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def gnuplot_time_histories(path, open_csv, closed_csv, png="time_histories_gp.png",
                           output="tip_displacement"):
    """Gnuplot script mirroring :func:`time_histories` from the CSV files."""
    script = f"""# gnuplot {path.name if hasattr(path, 'name') else path}
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,700
set output '{png}'
set multiplot layout 2,1
set grid
set ylabel '{output}'
plot '{open_csv}' using 't':'{output}' with lines lc rgb 'black' title 'open loop', \\
     '{closed_csv}' using 't':'{output}' with lines dt 2 lc rgb 'red' title 'closed loop'
set xlabel 'time (s)'
set ylabel 'flap deflection (deg)'
plot '{closed_csv}' using 't':(column('delta')*180/pi) with lines dt 2 lc rgb 'red' title 'closed loop'
unset multiplot
"""
    with open(path, "w") as fh:
        fh.write(script)
