"""Run artifacts: CSV tables, x-y plot data, figures, and the run manifest.

Numeric CSV/dat output is formatted deterministically so a re-run with
the same seed produces byte-identical files.  Figures are rendered with
the Agg backend straight to PNG next to the delimited output.
"""

from __future__ import annotations

import datetime
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from . import bounds as bounds_mod

_FMT = "{:.12g}"

CURVE_COLUMNS = (
    "d", "rho_d", "rho_inf", "goodput_gain", "goodput_gain_norm",
    "throughput_gain", "bound_primary", "stderr", "n_samples",
)
BOUNDS_COLUMNS = (
    "d", "bound_prop1", "bound_prop2", "bound_noise_limited",
    "a", "b", "c", "kappa", "lambda",
    "bound_prop2_printed", "bound_noise_limited_printed",
)


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _FMT.format(float(value))


def write_csv(path, columns, rows):
    """Write rows (sequences matching ``columns``) as a headered CSV."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError("row length does not match the header")
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_curve_csv(path, curve):
    rows = [
        (
            p.d, p.rho_d, p.rho_inf, p.goodput_gain, p.goodput_gain_norm,
            p.throughput_gain, p.bound_primary, p.stderr, p.n_samples,
        )
        for p in curve.points
    ]
    write_csv(path, CURVE_COLUMNS, rows)


def write_bounds_csv(path, coeffs, delays):
    rows = []
    for d in delays:
        rows.append(
            (
                d,
                bounds_mod.two_cell_gain_bound(coeffs, d),
                bounds_mod.zf_gain_bound(coeffs, d),
                bounds_mod.noise_limited_gain_bound(coeffs, d),
                coeffs.a, coeffs.b, coeffs.c, coeffs.kappa, coeffs.lam,
                bounds_mod.zf_gain_bound_printed(coeffs, d),
                bounds_mod.noise_limited_gain_bound_printed(coeffs, d),
            )
        )
    write_csv(path, BOUNDS_COLUMNS, rows)


def write_xy(path, x, y):
    """Two-column ``x y`` plot data for external tools."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for xv, yv in zip(x, y):
            fh.write(f"{_fmt(xv)} {_fmt(yv)}\n")


def write_manifest(path, subcommand, sections, seed, outputs):
    """Record everything needed to reproduce a run byte-identically."""
    manifest = {
        "tool": "lfsim",
        "version": __version__,
        "subcommand": subcommand,
        "seed": int(seed),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": sections,
        "outputs": [os.path.basename(str(p)) for p in outputs],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def render_curve_figure(path, curve, title):
    """Normalized gain vs delay on a log axis, with the matching bound."""
    d = curve.delays
    norm = curve.column("goodput_gain_norm")
    bound = curve.column("bound_primary")
    gains = curve.column("goodput_gain")
    ref = gains[0] / norm[0] if norm[0] > 0 else 1.0

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    positive = norm > 0
    ax.semilogy(d[positive], norm[positive], "o-", label=f"{curve.metric} gain (normalized)")
    bref = bound[0] if bound[0] > 0 else 1.0
    ax.semilogy(d, bound / bref, "--", label="bound (normalized)")
    thr = curve.column("throughput_gain")
    if curve.metric == "goodput" and np.any(thr > 0):
        tpos = thr > 0
        ax.semilogy(d[tpos], thr[tpos] / ref, "s:", ms=4, label="throughput gain / gain(0)")
    ax.set_xlabel("feedback delay (samples)")
    ax.set_ylabel("normalized gain")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_autocorr_figure(path, lags, target, empirical):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(lags, target, "-", label="Clarke target J0")
    ax.plot(lags, empirical, ".", ms=4, label="empirical")
    ax.set_xlabel("lag (samples)")
    ax.set_ylabel("autocorrelation")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_chain_figure(path, chain, d_max=30):
    """Worst-state total deviation of P^d from pi, with its envelope."""
    from .markov import convergence_deviation

    devs = []
    for d in range(1, d_max + 1):
        devs.append(
            max(
                convergence_deviation(chain.matrix, d, l, pi=chain.pi)
                for l in range(1, chain.matrix.n_states + 1)
            )
        )
    envelope = [
        float(np.sqrt(chain.lam**d / chain.pi.min())) for d in range(1, d_max + 1)
    ]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(range(1, d_max + 1), devs, "o-", label="max total deviation")
    ax.semilogy(range(1, d_max + 1), envelope, "--", label="sqrt(lambda^d / min pi)")
    ax.set_xlabel("delay (samples)")
    ax.set_ylabel("sum_m |[P^d]_lm - pi_m|")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
