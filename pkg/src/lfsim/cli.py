"""Batch command-line front end.

Subcommands::

    gen-fading      dump a fading trace and its autocorrelation report
    estimate-chain  estimate the feedback chain: P, pi, lambda
    curve           goodput/throughput gain vs delay, with bounds
    zf-curve        same with the zero-forcing receiver
    sm-curve        same with precoded spatial multiplexing
    lte-example     the LTE design-point report
    validate        run the invariant suite over the shipped configs

Exit codes: 0 success, 2 usage/config error, 3 data error (missing or
malformed files), 4 invariant or acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, fading, markov, report
from .codebook import CodebookFormatError
from .config import ConfigError, apply_overrides, build_scenario, read_config
from .harness import SimulationContext, lte_design_example, simulate_curves

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INVARIANT = 4

SHIPPED_CONFIGS = (
    "two_cell_mrc_4x4.ini",
    "single_cell_4x4.ini",
    "zf_4x4.ini",
    "sm_4x4.ini",
)


class InvariantFailure(Exception):
    """One or more runtime invariants did not hold."""


def _config_dir():
    here = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    return os.path.join(here, "configs")


def _load(args):
    sections = read_config(args.config)
    sections = apply_overrides(sections, args.set)
    base = os.path.dirname(os.path.abspath(args.config))
    return build_scenario(sections, base_dir=base)


def _outdir(args, default_leaf):
    out = args.out or os.path.join("runs", default_leaf)
    os.makedirs(out, exist_ok=True)
    return out


def cmd_gen_fading(args):
    config, sections = _load(args)
    out = _outdir(args, "gen-fading")
    spec = fading.FadingSpec(
        n_rx=config.params.n_rx,
        n_tx=config.params.n_tx,
        fd_ts=config.fd_ts,
        length=config.n_samples,
        seed=config.seed,
    )
    trace = fading.generate_trace(spec)
    trace_path = os.path.join(out, "trace.txt")
    fading.write_trace(trace, trace_path)

    max_lag = min(100, config.n_samples // 10 - 1)
    lags = np.arange(0, max_lag + 1)
    target = np.array([fading.target_autocorrelation(l, config.fd_ts) for l in lags])
    empirical = np.array([fading.empirical_autocorrelation(trace, int(l)) for l in lags])
    rmse = float(np.sqrt(np.mean((target - empirical) ** 2)))

    csv_path = os.path.join(out, "autocorr.csv")
    report.write_csv(csv_path, ("lag", "target", "empirical"), list(zip(lags, target, empirical)))
    dat_path = os.path.join(out, "autocorr_empirical.dat")
    report.write_xy(dat_path, lags, empirical)
    outputs = [trace_path, csv_path, dat_path]
    if not args.no_figures:
        fig_path = os.path.join(out, "autocorr.png")
        report.render_autocorr_figure(fig_path, lags, target, empirical)
        outputs.append(fig_path)
    report.write_manifest(os.path.join(out, "manifest.json"), "gen-fading", sections, config.seed, outputs)
    print(f"gen-fading: {config.n_samples} samples, fd_ts={config.fd_ts}, autocorr RMSE {rmse:.4f} -> {out}")
    return EXIT_OK


def cmd_estimate_chain(args):
    config, sections = _load(args)
    out = _outdir(args, "estimate-chain")
    from .harness import _load_codebook_for, estimate_chain

    cb = _load_codebook_for(config)
    chain = estimate_chain(
        cb,
        fd_ts=config.fd_ts,
        n_transitions=config.chain_samples,
        seed=config.seed,
        n_rx=config.params.n_rx,
        mode=config.mode,
    )
    margin = markov.convergence_margin(chain.matrix, chain.pi, chain.lam, d_max=50)

    p_path = os.path.join(out, "transition_matrix.csv")
    markov.write_matrix_csv(chain.matrix, p_path)
    json_path = os.path.join(out, "chain.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "n_states": chain.matrix.n_states,
                "n_transitions": chain.n_transitions,
                "lambda": chain.lam,
                "pi": [float(v) for v in chain.pi],
                "convergence_margin": margin,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    outputs = [p_path, json_path]
    if not args.no_figures:
        fig_path = os.path.join(out, "chain.png")
        report.render_chain_figure(fig_path, chain)
        outputs.append(fig_path)
    report.write_manifest(os.path.join(out, "manifest.json"), "estimate-chain", sections, config.seed, outputs)
    print(
        f"estimate-chain: N={chain.matrix.n_states}, {chain.n_transitions} transitions, "
        f"lambda={chain.lam:.4f}, convergence margin {margin:.3e} -> {out}"
    )
    if margin > 1e-9:
        raise InvariantFailure(f"convergence inequality violated by {margin:.3e}")
    return EXIT_OK


def _run_curve(args, subcommand, force=None):
    sections = read_config(args.config)
    sections = apply_overrides(sections, args.set)
    if force:
        sections.setdefault("scenario", {}).update(force)
    base = os.path.dirname(os.path.abspath(args.config))
    config, sections = build_scenario(sections, base_dir=base)
    out = _outdir(args, subcommand)
    goodput_curve, throughput_curve = simulate_curves(config, threads=args.threads)
    curve = throughput_curve if args.metric == "throughput" else goodput_curve

    csv_path = os.path.join(out, "curve.csv")
    report.write_curve_csv(csv_path, curve)
    bounds_path = os.path.join(out, "bounds.csv")
    report.write_bounds_csv(bounds_path, curve.coeffs, curve.delays)
    gain_path = os.path.join(out, "gain.dat")
    report.write_xy(gain_path, curve.delays, curve.column("goodput_gain"))
    norm_path = os.path.join(out, "gain_norm.dat")
    report.write_xy(norm_path, curve.delays, curve.column("goodput_gain_norm"))
    bound_path = os.path.join(out, "bound.dat")
    report.write_xy(bound_path, curve.delays, curve.column("bound_primary"))
    outputs = [csv_path, bounds_path, gain_path, norm_path, bound_path]
    if not args.no_figures:
        fig_path = os.path.join(out, "curve.png")
        report.render_curve_figure(fig_path, curve, f"{subcommand}: {config.bound_mode} scenario")
        outputs.append(fig_path)
    report.write_manifest(os.path.join(out, "manifest.json"), subcommand, sections, config.seed, outputs)
    p0 = curve.points[0]
    print(
        f"{subcommand}: lambda={curve.lam:.4f}, gain({p0.d})={p0.goodput_gain:.4f} "
        f"bits (stderr {p0.stderr:.4f}) -> {out}"
    )
    return EXIT_OK


def cmd_curve(args):
    return _run_curve(args, "curve")


def cmd_zf_curve(args):
    return _run_curve(args, "zf-curve", force={"receiver": "zf", "interference": "on", "mode": "beam"})


def cmd_sm_curve(args):
    return _run_curve(args, "sm-curve", force={"mode": "precoded", "receiver": "mrc"})


def cmd_lte_example(args):
    out = _outdir(args, "lte-example")
    kwargs = {}
    if args.config:
        config, _ = _load(args)
        kwargs = {
            "seed": config.seed,
            "chain_samples": config.chain_samples,
            "curve_samples": config.n_samples,
            "codebook_path": config.codebook_path,
            "alpha1": config.params.alpha1,
            "alpha2": config.params.alpha2,
        }
    rep = lte_design_example(**kwargs)
    text = rep.as_text()
    print(text)
    txt_path = os.path.join(out, "lte_report.txt")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    csv_path = os.path.join(out, "curve.csv")
    report.write_curve_csv(csv_path, rep.curve)
    bounds_path = os.path.join(out, "bounds.csv")
    report.write_bounds_csv(bounds_path, rep.coeffs, rep.curve.delays)
    outputs = [txt_path, csv_path, bounds_path]
    if not args.no_figures:
        fig_path = os.path.join(out, "curve.png")
        report.render_curve_figure(fig_path, rep.curve, "LTE design example")
        outputs.append(fig_path)
    sections = {"experiment": {"seed": str(rep.curve.config.seed)}}
    if args.config:
        sections = read_config(args.config)
    report.write_manifest(os.path.join(out, "manifest.json"), "lte-example", sections, rep.curve.config.seed, outputs)
    return EXIT_OK


def _validate_one(name, config, failures):
    def check(label, ok, detail=""):
        status = "ok" if ok else "FAIL"
        print(f"[{status}] {name}: {label}" + (f" ({detail})" if detail else ""))
        if not ok:
            failures.append(f"{name}: {label} {detail}")

    ctx = SimulationContext(config)
    margin = markov.convergence_margin(ctx.chain.matrix, ctx.chain.pi, ctx.chain.lam, d_max=50)
    check("convergence inequality", margin <= 1e-9, f"margin {margin:.2e}")

    goodput_curve, throughput_curve = simulate_curves(config)
    gains = goodput_curve.column("goodput_gain")
    stderrs = goodput_curve.column("stderr")
    bounds_col = goodput_curve.column("bound_primary")
    check(
        "bound dominates measured gain",
        bool(np.all(gains <= bounds_col + 3 * stderrs)),
        f"worst slack {float(np.min(bounds_col + 3 * stderrs - gains)):.4f}",
    )
    check(
        "throughput dominates goodput per delay",
        bool(np.all(throughput_curve.column("rho_d") >= goodput_curve.column("rho_d") - 1e-12)),
    )
    norm = goodput_curve.column("goodput_gain_norm")
    g0 = gains[0] / norm[0] if norm[0] > 0 else 1.0
    eps = np.maximum(0.05, 4 * stderrs / g0)
    check("normalized gain within [-eps, 1+eps]", bool(np.all((norm >= -eps) & (norm <= 1 + eps))))
    check(
        "freshest feedback gives the largest gain",
        bool(np.all(gains[0] >= gains - 2 * (stderrs + stderrs[0]))),
    )

    spec = fading.FadingSpec(
        n_rx=config.params.n_rx, n_tx=config.params.n_tx,
        fd_ts=config.fd_ts, length=config.n_samples, seed=config.seed + 1,
    )
    trace = fading.generate_trace(spec)
    lags = np.arange(0, min(100, config.n_samples // 10 - 1) + 1)
    emp = np.array([fading.empirical_autocorrelation(trace, int(l)) for l in lags])
    tgt = np.array([fading.target_autocorrelation(int(l), config.fd_ts) for l in lags])
    rmse = float(np.sqrt(np.mean((emp - tgt) ** 2)))
    check("fading autocorrelation RMSE <= 0.02", rmse <= 0.02, f"rmse {rmse:.4f}")


def cmd_validate(args):
    if args.config:
        paths = [args.config]
    else:
        cfg_dir = _config_dir()
        paths = [os.path.join(cfg_dir, name) for name in SHIPPED_CONFIGS]
    failures = []
    for path in paths:
        sections = read_config(path)
        sections = apply_overrides(sections, args.set)
        # reduced size keeps the suite fast; thresholds are sized for it
        sections.setdefault("experiment", {})
        sections["experiment"].setdefault("n_samples", "60000")
        sections["experiment"]["n_samples"] = str(
            min(int(sections["experiment"].get("n_samples", "60000")), 60000)
        )
        sections["experiment"]["delays"] = "0..20:2"
        config, _ = build_scenario(sections, base_dir=os.path.dirname(os.path.abspath(path)))
        _validate_one(os.path.basename(path), config, failures)
    if failures:
        raise InvariantFailure(f"{len(failures)} invariant check(s) failed")
    print(f"validate: all checks passed over {len(paths)} config(s)")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lfsim",
        description="Limited-feedback MIMO goodput simulator (delay + other-cell interference)",
    )
    parser.add_argument("--version", action="version", version=f"lfsim {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, needs_config=True):
        p.add_argument(
            "--config",
            required=needs_config,
            help="INI config or a run-manifest JSON to reproduce",
        )
        p.add_argument("--out", help="output directory (default runs/<subcommand>)")
        p.add_argument(
            "--set",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.add_argument("--threads", type=int, default=1, help="worker threads for per-delay evaluation")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    common(sub.add_parser("gen-fading", help="dump a fading trace + autocorrelation report"))
    common(sub.add_parser("estimate-chain", help="estimate the feedback-state chain"))
    for name, helptext in (
        ("curve", "goodput/throughput gain vs delay"),
        ("zf-curve", "gain vs delay with the ZF receiver"),
        ("sm-curve", "gain vs delay with precoded spatial multiplexing"),
    ):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument(
            "--metric",
            choices=("goodput", "throughput"),
            default="goodput",
            help="primary metric of the emitted curve",
        )
    p = sub.add_parser("lte-example", help="LTE design-point report")
    common(p, needs_config=False)
    p = sub.add_parser("validate", help="run the invariant suite")
    common(p, needs_config=False)
    return parser


_HANDLERS = {
    "gen-fading": cmd_gen_fading,
    "estimate-chain": cmd_estimate_chain,
    "curve": cmd_curve,
    "zf-curve": cmd_zf_curve,
    "sm-curve": cmd_sm_curve,
    "lte-example": cmd_lte_example,
    "validate": cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.subcommand](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CodebookFormatError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
