"""Command-line runner: scenario execution, CSV curves, figures, reports.

Subcommands:

    run <preset|config-file>   integrate and write curves + report
    list-presets               table of available scenario presets
    check <preset>             run and assert the preset's reference peaks

Every run writes `<name>_curves.csv` (delimited excitation curves),
`<name>_pe.png` (rendered figure, unless --no-plot) and `report.json` into
the output directory.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 reference-peak check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, config_summary, parse_config
from .engine import (
    EnsembleResult,
    MasterResult,
    SimulationConfig,
    compare_with_oracle,
    integrate_master,
    local_maxima,
    peak_stats,
    run_ensemble,
)
from .filters import DegenerateJumpError, IntegrationBlowupError
from .presets import PRESETS, ScenarioPreset, get_preset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPT = 4

_FMT = "%.12g"  # >= 10 significant digits in every CSV cell


def emit_csv(path, times, pe_master=None, pe_mean=None, pe_stderr=None, pe_traj=()):
    """Write the curve set as UTF-8 CSV, header row, ascending t.

    Columns: t, pe_master, pe_mean, pe_stderr, then one column per
    requested trajectory.  Unavailable curves are written as nan.
    """
    times = np.asarray(times)
    n = len(times)

    def col(x):
        return np.full(n, np.nan) if x is None else np.asarray(x)

    cols = [times, col(pe_master), col(pe_mean), col(pe_stderr)]
    header = ["t", "pe_master", "pe_mean", "pe_stderr"]
    for i, row in enumerate(pe_traj):
        cols.append(np.asarray(row))
        header.append(f"pe_traj_{i}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(n):
            fh.write(",".join(_FMT % c[k] for c in cols) + "\n")
    return str(path)


def _check_targets(preset: ScenarioPreset, master: MasterResult):
    """Evaluate the preset's reference peaks against the master curve."""
    flags = []
    maxima = local_maxima(master.times, master.pe)
    for tg in preset.targets:
        if tg.kind == "local":
            candidates = maxima or [peak_stats(master.times, master.pe)]
            if tg.t is not None:
                best = min(candidates, key=lambda m: abs(m[0] - tg.t))
            else:
                best = max(candidates, key=lambda m: m[1])
            t_star, p_star = best
        else:
            t_star, p_star = peak_stats(master.times, master.pe)
        ok = abs(p_star - tg.pe) <= tg.pe_tol
        if tg.t is not None:
            ok = ok and abs(t_star - tg.t) <= tg.t_tol
        flags.append(
            {
                "target_pe": tg.pe,
                "target_t": tg.t,
                "measured_pe": p_star,
                "measured_t": t_star,
                "pe_tol": tg.pe_tol,
                "t_tol": tg.t_tol,
                "kind": tg.kind,
                "pass": bool(ok),
            }
        )
    return flags


def run_scenario(
    cfg: SimulationConfig,
    outputs,
    name: str = "run",
    preset: ScenarioPreset | None = None,
    out_dir=".",
    csv_traj: int = 8,
    plot: bool = True,
    oracle_traj_index: int = 0,
):
    """Execute the requested outputs and write curves, figures, report.

    `outputs` is a subset of {'master', 'trajectories', 'ensemble',
    'oracle'}.  Returns the report dictionary (also written as
    report.json).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = set(outputs)
    report = {
        "metadata": {
            "version": __version__,
            "name": name,
            "preset": preset.name if preset else None,
            "qualitative": bool(preset.qualitative) if preset else None,
            "seed": cfg.seed,
            "dt": cfg.dt,
            "n_traj": cfg.n_traj,
        },
        "config": config_summary(cfg),
        "files": [],
        "peaks": {},
        "acceptance": None,
        "diagnostics": {},
    }

    master = None
    if "master" in outputs or preset is not None:
        master = integrate_master(cfg)
        t_star, p_star = peak_stats(master.times, master.pe)
        report["peaks"]["master_global"] = {"t": t_star, "pe": p_star}
        report["peaks"]["master_local"] = [
            {"t": t, "pe": v} for t, v in local_maxima(master.times, master.pe)
        ]
        report["diagnostics"]["master_trace_drift"] = float(
            np.max(np.abs(master.trace - 1.0))
        )

    ens: EnsembleResult | None = None
    want_traj = ("ensemble" in outputs or "trajectories" in outputs) and cfg.n_traj >= 1
    if want_traj:
        ens = run_ensemble(cfg)
        report["peaks"]["trajectory"] = [
            {"t": t, "pe": v} for t, v in ens.peaks
        ]
        report["diagnostics"]["ensemble"] = {
            "sup_gap_mean_vs_master": ens.sup_gap,
            "max_stderr": float(np.max(ens.pe_stderr)),
            "failed_trajectories": ens.failed,
            **ens.diagnostics,
        }

    comparison = None
    if "oracle" in outputs:
        comparison = compare_with_oracle(cfg, oracle_traj_index)
        report["diagnostics"]["oracle"] = {
            "sup_pe_gap": comparison.sup_pe_gap,
            "innovation_gap": comparison.innovation_gap,
            "n_clicks": comparison.n_clicks,
            "component_sup": comparison.component_sup,
        }

    if preset is not None and preset.targets and master is not None:
        flags = _check_targets(preset, master)
        report["acceptance"] = {"flags": flags, "pass": all(f["pass"] for f in flags)}

    times = master.times if master is not None else (ens.times if ens else None)
    if times is None and comparison is not None:
        times = comparison.times
    if times is not None:
        traj_rows = ()
        if ens is not None and csv_traj > 0:
            traj_rows = ens.pe_traj[: min(csv_traj, len(ens.pe_traj))]
        csv_path = emit_csv(
            out_dir / f"{name}_curves.csv",
            times,
            pe_master=master.pe if master is not None else None,
            pe_mean=ens.pe_mean if ens is not None else None,
            pe_stderr=ens.pe_stderr if ens is not None else None,
            pe_traj=traj_rows,
        )
        report["files"].append(csv_path)
        if plot:
            from .plotting import render_curves

            fig_path = render_curves(
                times,
                pe_master=master.pe if master is not None else None,
                pe_mean=ens.pe_mean if ens is not None else None,
                pe_stderr=ens.pe_stderr if ens is not None else None,
                pe_traj=ens.pe_traj if ens is not None else None,
                pe_oracle=comparison.pe_oracle if comparison is not None else None,
                title=name,
                path=str(out_dir / f"{name}_pe.png"),
            )
            report["files"].append(fig_path)

    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    report["files"].append(str(report_path))
    return report


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="twophoton",
        description="Two-level atom driven by two counter-propagating photons",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a preset or a config file")
    runp.add_argument("scenario", help="preset name or path to a config file")
    runp.add_argument("--dt", type=float, default=None, help="time step override")
    runp.add_argument("--traj", type=int, default=None, metavar="M",
                      help="number of trajectories (0 = master only)")
    runp.add_argument("--seed", type=int, default=None, help="RNG seed override")
    runp.add_argument("--out", default=".", metavar="DIR", help="output directory")
    runp.add_argument("--oracle", action="store_true",
                      help="also run the augmented-model cross-check")
    runp.add_argument("--scheme", choices=("hh", "hp"), default=None,
                      help="measurement scheme override")
    runp.add_argument("--csv-traj", type=int, default=8,
                      help="number of trajectory columns in the CSV")
    runp.add_argument("--no-plot", action="store_true", help="skip PNG rendering")

    sub.add_parser("list-presets", help="list available presets")

    chk = sub.add_parser("check", help="run a preset and assert its reference peaks")
    chk.add_argument("preset", help="preset name")
    chk.add_argument("--dt", type=float, default=1e-4,
                     help="time step used for the check (default 1e-4)")
    chk.add_argument("--out", default=".", metavar="DIR", help="output directory")
    chk.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    return ap


def _apply_overrides(cfg: SimulationConfig, args) -> SimulationConfig:
    kw = {}
    if args.dt is not None:
        kw["dt"] = args.dt
    if getattr(args, "traj", None) is not None:
        kw["n_traj"] = args.traj
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "scheme", None) is not None:
        from .filters import homodyne_photocount, two_homodyne

        kw["scheme"] = two_homodyne() if args.scheme == "hh" else homodyne_photocount()
    if getattr(args, "oracle", False):
        kw["oracle_compare"] = True
    return cfg.with_overrides(**kw) if kw else cfg


def _cmd_run(args) -> int:
    preset = PRESETS.get(args.scenario)
    try:
        cfg = preset.cfg if preset else parse_config(args.scenario)
        cfg = _apply_overrides(cfg, args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outputs = {"master"}
    if cfg.n_traj >= 1:
        outputs |= {"ensemble", "trajectories"}
    if cfg.oracle_compare:
        outputs.add("oracle")
    name = preset.name if preset else Path(args.scenario).stem
    try:
        report = run_scenario(
            cfg,
            outputs,
            name=name,
            preset=preset,
            out_dir=args.out,
            csv_traj=args.csv_traj,
            plot=not args.no_plot,
        )
    except (IntegrationBlowupError, DegenerateJumpError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    peak = report["peaks"].get("master_global")
    if peak:
        print(f"{name}: master peak Pe = {peak['pe']:.4f} at t = {peak['t']:.3f}")
    if report["acceptance"] is not None:
        status = "pass" if report["acceptance"]["pass"] else "FAIL"
        print(f"{name}: reference-peak check: {status}")
    for f in report["files"]:
        print(f"wrote {f}")
    return EXIT_OK


def _cmd_list(_args) -> int:
    width = max(len(n) for n in PRESETS)
    for name, p in PRESETS.items():
        marker = " (qualitative)" if p.qualitative else ""
        print(f"{name:<{width}}  {p.description}{marker}")
    return EXIT_OK


def _cmd_check(args) -> int:
    try:
        preset = get_preset(args.preset)
    except KeyError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = preset.cfg.with_overrides(dt=args.dt)
    try:
        report = run_scenario(
            cfg,
            {"master"},
            name=preset.name,
            preset=preset,
            out_dir=args.out,
            plot=not args.no_plot,
        )
    except (IntegrationBlowupError, DegenerateJumpError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    acc = report["acceptance"]
    if acc is None:
        print(f"{preset.name}: no reference peaks to check (qualitative preset)")
        return EXIT_OK
    for f in acc["flags"]:
        loc = f" at t = {f['measured_t']:.3f}" if f["target_t"] is not None else ""
        print(
            f"{preset.name}: peak Pe = {f['measured_pe']:.4f}{loc} "
            f"(target {f['target_pe']}"
            + (f" at t = {f['target_t']}" if f["target_t"] is not None else "")
            + f"): {'pass' if f['pass'] else 'FAIL'}"
        )
    return EXIT_OK if acc["pass"] else EXIT_ACCEPT


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "list-presets":
        return _cmd_list(args)
    return _cmd_check(args)


if __name__ == "__main__":
    sys.exit(main())
