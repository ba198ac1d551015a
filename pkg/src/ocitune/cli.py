"""Command-line front end.

Subcommands: collect | identify | montecarlo | stepresponse | audit.
Exit codes: 0 ok, 2 configuration problem, 3 stability problem,
4 optimization failure.  Every command writes a run manifest next to its
outputs; figures are rendered alongside the delimited files unless
--no-figures is given.  OCITUNE_THREADS caps Monte Carlo parallelism.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_sha256, load_config, load_config_dict
from .dataio import (
    RunManifest,
    controller_from_report,
    read_batch_csv,
    read_report,
    refmodel_from_report,
    write_batch_csv,
    write_boxplot_csv,
    write_report,
    write_runs_csv,
)
from .errors import (
    AllStartsFailed,
    ConfigError,
    NonFiniteCost,
    OcituneError,
    UnstableInitialLoop,
)
from .experiment import collect_closed_loop, monte_carlo, run_oci
from .optimize import audit_gradient, default_init
from .predictor import OCIProblem
from .statespace import feedback_maps, ss_simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STABILITY = 3
EXIT_OPTIMIZATION = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocitune",
        description="Tune fixed-structure MIMO controllers from input-output "
                    "data, co-identifying non-minimum-phase transmission zeros.",
    )
    parser.add_argument("--version", action="version", version=f"ocitune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("config", help="experiment configuration file (YAML)")
        p.add_argument("--out", required=out_required, help="output path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's data-generation seed")
        p.add_argument("--no-figures", action="store_true",
                       help="skip rendering figures next to the outputs")

    p = sub.add_parser("collect", help="simulate the data-collection experiment")
    common(p)

    p = sub.add_parser("identify", help="identify controller and reference model from data")
    common(p)
    p.add_argument("--data", required=True, help="batch CSV produced by collect")
    p.add_argument("--audit-gradient", action="store_true",
                   help="verify the analytic Jacobian against finite differences")
    p.add_argument("--transient-skip", type=int, default=None,
                   help="drop this many initial samples from the fit")

    p = sub.add_parser("montecarlo", help="repeat collection + identification")
    common(p)
    p.add_argument("--runs", type=int, default=None, help="number of runs")
    p.add_argument("--workers", type=int, default=None,
                   help="process count (default: OCITUNE_THREADS or CPU count)")

    p = sub.add_parser("stepresponse", help="step-response table for an identified controller")
    common(p)
    p.add_argument("--controller", required=True, help="report file from identify")

    p = sub.add_parser("audit", help="gradient audit at random points around the default start")
    common(p, out_required=False)
    p.add_argument("--data", default=None, help="batch CSV (collected fresh when omitted)")
    p.add_argument("--points", type=int, default=3, help="number of audit points")
    return parser


def _apply_overrides(config, args):
    if getattr(args, "seed", None) is not None:
        config.seed = int(args.seed)
    skip = getattr(args, "transient_skip", None)
    if skip is not None:
        config.transient_skip = int(skip)
    return config


def _manifest(args, command: str, config) -> RunManifest:
    return RunManifest(command=command, config_path=args.config,
                       config_hash=config_sha256(args.config),
                       config_snapshot=load_config_dict(args.config),
                       seed=config.seed, version=__version__)


def _cmd_collect(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    manifest = _manifest(args, "collect", config)
    batch = collect_closed_loop(config)
    out = Path(args.out)
    write_batch_csv(out, batch)
    manifest.add_artifact(out)
    if "snr_db" in batch.meta:
        snr = ", ".join(f"{v:.2f}" for v in batch.meta["snr_db"])
        print(f"collected {batch.length} samples, SNR [dB]: {snr}")
    else:
        print(f"collected {batch.length} samples (noise-free)")
    if not args.no_figures:
        from .plots import plot_batch
        fig_path = out.with_name(out.stem + "_overview.png")
        plot_batch(batch, fig_path)
        manifest.add_artifact(fig_path)
    manifest.write(out.parent / (out.name + ".manifest.json"))
    return EXIT_OK


def _cmd_identify(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    manifest = _manifest(args, "identify", config)
    batch = read_batch_csv(args.data)
    result = run_oci(config, batch)
    extra = {"tool": f"ocitune {__version__}", "label": config.label,
             "data": str(args.data), "config_sha256": config_sha256(args.config)}
    if args.audit_gradient:
        problem = OCIProblem(config.structure, config.refspec, batch.u, batch.y,
                             transient_skip=config.transient_skip)
        deviation = audit_gradient(problem, result.theta.vector())
        extra["gradient_audit"] = float(deviation)
        print(f"gradient audit: max relative deviation {deviation:.3e}")
    out = Path(args.out)
    write_report(out, result, config.structure, config.refspec, extra=extra)
    manifest.add_artifact(out)
    zhat = "none" if result.zhat is None else f"{result.zhat:.4f}"
    jmr = "n/a" if result.jmr is None else f"{result.jmr:.3e}"
    print(f"cost {result.cost:.6e}, zhat {zhat}, JMR {jmr}, "
          f"{result.optim.iterations} iterations ({result.optim.termination})")
    if not args.no_figures and config.plant is not None and result.jmr is not None \
            and np.isfinite(result.jmr):
        from .plots import plot_step_comparison
        ss_ry, _ = feedback_maps(config.plant, result.controller)
        r = config.protocol.reference(config.structure.n)
        y_cl = ss_simulate(ss_ry, r)
        y_rm = result.refmodel.simulate(r)
        fig_path = out.with_name(out.stem + "_response.png")
        plot_step_comparison(np.arange(1, r.shape[1] + 1), y_cl, y_rm, fig_path)
        manifest.add_artifact(fig_path)
    manifest.write(out.parent / (out.name + ".manifest.json"))
    return EXIT_OK


def _cmd_montecarlo(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if args.seed is not None:
        config = replace(config, mc=replace(config.mc, base_seed=int(args.seed)))
    manifest = _manifest(args, "montecarlo", config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = monte_carlo(config, runs=args.runs, max_workers=args.workers)
    box_path = out_dir / "boxplot.csv"
    runs_path = out_dir / "runs.csv"
    write_boxplot_csv(box_path, summary)
    write_runs_csv(runs_path, summary)
    manifest.add_artifact(box_path)
    manifest.add_artifact(runs_path)
    print(f"{summary.n_runs} runs: median JMR {summary.jmr.median:.3e}, "
          f"median zhat {summary.zhat.median:.4f}, "
          f"{summary.n_runs - summary.n_unstable - summary.n_failed} internally stable, "
          f"{summary.n_failed} failed")
    if not args.no_figures:
        from .plots import plot_boxplots
        fig_path = out_dir / "boxplots.png"
        plot_boxplots([rec["jmr"] for rec in summary.records if not rec["failed"]],
                      [rec["zhat"] for rec in summary.records if not rec["failed"]],
                      fig_path)
        manifest.add_artifact(fig_path)
    manifest.write(out_dir / "manifest.json")
    return EXIT_OK


def _cmd_stepresponse(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if config.plant is None:
        raise ConfigError("stepresponse needs a plant in the config")
    manifest = _manifest(args, "stepresponse", config)
    doc = read_report(args.controller)
    controller = controller_from_report(doc)
    refmodel = refmodel_from_report(doc)
    ss_ry, _ = feedback_maps(config.plant, controller)
    poles = ss_ry.poles()
    if np.any(np.abs(poles) >= 1.0):
        bad = poles[np.abs(poles) >= 1.0]
        print(f"candidate loop is unstable (poles {bad})", file=sys.stderr)
        return EXIT_STABILITY
    r = config.protocol.reference(config.structure.n)
    y_cl = ss_simulate(ss_ry, r)
    y_rm = refmodel.simulate(r)
    out = Path(args.out)
    with out.open("w") as fh:
        fh.write("t,channel,y_closedloop,y_refmodel\n")
        for ch in range(y_cl.shape[0]):
            for t in range(y_cl.shape[1]):
                fh.write(f"{t+1},{ch+1},{y_cl[ch, t]:.17g},{y_rm[ch, t]:.17g}\n")
    manifest.add_artifact(out)
    if not args.no_figures:
        from .plots import plot_step_comparison
        fig_path = out.with_suffix(".png")
        plot_step_comparison(np.arange(1, r.shape[1] + 1), y_cl, y_rm, fig_path)
        manifest.add_artifact(fig_path)
    manifest.write(out.parent / (out.name + ".manifest.json"))
    return EXIT_OK


def _cmd_audit(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if args.data is not None:
        batch = read_batch_csv(args.data)
    else:
        batch = collect_closed_loop(config)
    problem = OCIProblem(config.structure, config.refspec, batch.u, batch.y,
                         transient_skip=config.transient_skip)
    base = default_init(config.structure, config.refspec).vector()
    rng = np.random.default_rng(config.seed)
    worst = 0.0
    audited = 0
    while audited < args.points:
        x = base + rng.normal(scale=0.05, size=base.size)
        try:
            dev = audit_gradient(problem, x)
        except OcituneError:
            continue
        worst = max(worst, dev)
        audited += 1
        print(f"point {audited}: max relative deviation {dev:.3e}")
    print(f"gradient audit over {audited} points: {worst:.3e}")
    if args.out:
        out = Path(args.out)
        out.write_text(f"gradient_audit: {worst:.17g}\npoints: {audited}\n")
    return EXIT_OK


_COMMANDS = {
    "collect": _cmd_collect,
    "identify": _cmd_identify,
    "montecarlo": _cmd_montecarlo,
    "stepresponse": _cmd_stepresponse,
    "audit": _cmd_audit,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnstableInitialLoop as exc:
        print(f"stability error: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except (NonFiniteCost, AllStartsFailed) as exc:
        print(f"optimization failed: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZATION


if __name__ == "__main__":
    sys.exit(main())
