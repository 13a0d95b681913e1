"""Benchmark harness CLI.

Subcommands:

* ``zivr run <config>`` -- execute an experiment config (TOML), writing one
  trace CSV per (solver, seed) plus a manifest.json that fully determines a
  rerun.  ``<config>`` may also be a previously written manifest.json.
* ``zivr compare <dir>`` -- tabulate final gaps, calls-to-threshold and
  wall time from a run directory.
* ``zivr verify`` -- run the verification battery; exit 0 iff all checks pass.
* ``zivr gen-data <kind>`` -- write synthetic datasets/problems.
* ``zivr datasets`` -- print the canonical download URLs for the public
  benchmark datasets (files are never downloaded automatically).

Exit codes: 0 success, 1 verification failure, 2 bad configuration or
missing input, 3 solver divergence.

The env var ``ZIVR_DATA_DIR`` prefixes relative dataset paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .baselines import BASELINE_KINDS, BaselineConfig, run_baseline
from .dataio import (
    gen_survival,
    load_libsvm,
    load_survival_csv,
    write_survival_csv,
)
from .errors import DivergenceError, ZivrError
from .problems import (
    make_cox_elastic_net,
    make_logistic_elastic_net,
    make_synthetic_quadratic,
)
from .sampling import SamplerConfig, VARIANTS, sigma_nu
from .solver import (
    BetaSchedule,
    RunConfig,
    Trace,
    format_trace_row,
    parse_trace_csv,
    run,
)
from .verification import battery, reference_minimize

KNOWN_DATASET_URLS = {
    "a9a": "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/a9a",
    "w8a": "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/w8a",
}


class ConfigError(ZivrError, ValueError):
    """Invalid experiment configuration; message names the offending field."""


def _req(table, key, types, where):
    if key not in table:
        raise ConfigError(f"missing required field {where}.{key}")
    val = table[key]
    if not isinstance(val, types):
        raise ConfigError(f"field {where}.{key} has the wrong type")
    return val


def _resolve_data_path(path_str: str) -> Path:
    p = Path(path_str)
    if p.exists():
        return p
    prefix = os.environ.get("ZIVR_DATA_DIR")
    if prefix and not p.is_absolute():
        q = Path(prefix) / p
        if q.exists():
            return q
    raise ConfigError(f"dataset file not found: {path_str} (ZIVR_DATA_DIR honored)")


def _build_problem(cfg_problem: dict):
    kind = _req(cfg_problem, "kind", str, "problem")
    mu = float(cfg_problem.get("mu", 0.0))
    lam = float(cfg_problem.get("lambda", 0.0))
    if kind == "logistic":
        path = _resolve_data_path(_req(cfg_problem, "dataset", str, "problem"))
        data = load_libsvm(path, min_dim=cfg_problem.get("min_dim"))
        return make_logistic_elastic_net(data, mu=mu, lam=lam)
    if kind == "cox":
        path = _resolve_data_path(_req(cfg_problem, "dataset", str, "problem"))
        surv = load_survival_csv(path)
        return make_cox_elastic_net(surv, mu=mu, lam=lam)
    if kind == "quadratic":
        return make_synthetic_quadratic(
            n=int(_req(cfg_problem, "n", int, "problem")),
            d=int(_req(cfg_problem, "d", int, "problem")),
            cond=float(cfg_problem.get("cond", 10.0)),
            seed=int(cfg_problem.get("seed", 0)),
        )
    raise ConfigError(f"problem.kind must be logistic|cox|quadratic, got {kind!r}")


def _beta_schedule(solver_cfg: dict, where: str) -> BetaSchedule:
    beta = float(solver_cfg.get("beta", 1e-6))
    ratio = solver_cfg.get("beta_ratio")
    if ratio is None:
        return BetaSchedule("constant", beta)
    return BetaSchedule("geometric", beta, float(ratio))


def _build_run(problem, solver_cfg, run_cfg, seed, href):
    where = f"solver[{solver_cfg.get('_index', '?')}]"
    kind = _req(solver_cfg, "kind", str, where)
    budget = int(_req(run_cfg, "budget", (int, float), "run"))
    stride = int(run_cfg.get("metric_stride", 1000))
    record_gmn = bool(run_cfg.get("record_grad_map", False))
    if kind == "zivr":
        variant = solver_cfg.get("variant", "impl1")
        if variant not in VARIANTS:
            raise ConfigError(f"{where}.variant must be one of {VARIANTS}")
        R = int(solver_cfg.get("R", 1))
        alpha = solver_cfg.get("alpha", "strongly_convex")
        if isinstance(alpha, str) and alpha not in (
            "strongly_convex", "convex", "nonconvex",
        ):
            raise ConfigError(f"{where}.alpha must be a number or a regime name")
        try:
            sampler = SamplerConfig(
                variant=variant,
                n=problem.n,
                d=problem.d,
                R=R,
                B=solver_cfg.get("B"),
                direction_scheme_S=solver_cfg.get("directions_update", "coordinate"),
                direction_scheme_R=solver_cfg.get("directions", "coordinate"),
                seed=seed,
            )
            cfg = RunConfig(
                sampler=sampler,
                alpha=alpha if isinstance(alpha, str) else float(alpha),
                beta=_beta_schedule(solver_cfg, where),
                max_oracle_calls=budget,
                metric_stride=stride,
                seed=seed,
                warm_start_jacobian=bool(solver_cfg.get("warm_start", False)),
                href=href,
                record_grad_map=record_gmn,
                label=solver_cfg.get("label", f"zivr_{variant}_R{R}"),
            )
        except ZivrError as err:
            raise ConfigError(f"{where}: {err}") from None
        resolved = {
            "alpha": cfg.resolved_alpha(problem),
            "sigma": sigma_nu(sampler).sigma,
            "nu": sigma_nu(sampler).nu,
        }
        return ("zivr", cfg, resolved)
    if kind in BASELINE_KINDS:
        try:
            cfg = BaselineConfig(
                kind=kind,
                beta=float(solver_cfg.get("beta", 1e-6)),
                alpha=(
                    float(solver_cfg["alpha"]) if "alpha" in solver_cfg else None
                ),
                alpha0=(
                    float(solver_cfg["alpha0"]) if "alpha0" in solver_cfg else None
                ),
                m=int(solver_cfg["m"]) if "m" in solver_cfg else None,
                inner_batch=int(solver_cfg.get("inner_batch", 1)),
                direction_scheme=solver_cfg.get("directions", "spherical"),
                seed=seed,
                max_oracle_calls=budget,
                metric_stride=stride,
                href=href,
                record_grad_map=record_gmn,
                label=solver_cfg.get("label", kind),
            )
        except ZivrError as err:
            raise ConfigError(f"{where}: {err}") from None
        return ("baseline", cfg, {"alpha": cfg.step_size(problem, 0)})
    raise ConfigError(
        f"{where}.kind must be zivr or one of {BASELINE_KINDS}, got {kind!r}"
    )


def _load_config_text(path: Path) -> str:
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        if isinstance(doc, dict) and doc.get("zivr_manifest"):
            return doc["config_text"]
        raise ConfigError(f"{path} is JSON but not a zivr manifest")
    return text


def cmd_run(args) -> int:
    path = Path(args.config)
    if not path.exists():
        print(f"error: config file not found: {path}", file=sys.stderr)
        return 2
    try:
        config_text = _load_config_text(path)
        doc = tomli.loads(config_text)
    except (tomli.TOMLDecodeError, ConfigError, json.JSONDecodeError) as err:
        print(f"error: cannot parse config: {err}", file=sys.stderr)
        return 2
    try:
        problem_tbl = _req(doc, "problem", dict, "<root>")
        run_tbl = _req(doc, "run", dict, "<root>")
        solvers = doc.get("solver", [])
        if not isinstance(solvers, list) or not solvers:
            raise ConfigError("at least one [[solver]] table is required")
        seeds = run_tbl.get("seeds", [int(run_tbl.get("seed", 0))])
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("run.seeds must be a nonempty array")
        out_dir = Path(
            args.output or run_tbl.get("output_dir") or path.with_suffix("") .name + "_out"
        )
        problem = _build_problem(problem_tbl)
        href = _resolve_reference(doc.get("metrics", {}), problem)
        jobs = []
        for idx, solver_cfg in enumerate(solvers):
            solver_cfg = dict(solver_cfg)
            solver_cfg["_index"] = idx
            for seed in seeds:
                jobs.append(_build_run(problem, solver_cfg, run_tbl, int(seed), href))
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "zivr_manifest": True,
        "version": __version__,
        "numpy_version": np.__version__,
        "config_text": config_text,
        "problem": {
            "name": problem.name,
            "n": problem.n,
            "d": problem.d,
            "smoothness_L": problem.smoothness_L,
            "strong_convexity_mu": problem.strong_convexity_mu,
            "reference_objective": href,
        },
        "runs": [],
    }
    labels_seen: dict[str, int] = {}
    for job_kind, cfg, resolved in jobs:
        base_label = cfg.label
        key = f"{base_label}_seed{cfg.seed}"
        if key in labels_seen:
            labels_seen[key] += 1
            key = f"{key}_{labels_seen[key]}"
        else:
            labels_seen[key] = 0
        csv_name = f"{key}.csv"
        csv_path = out_dir / csv_name
        print(f"running {key} (budget {cfg.max_oracle_calls}) ...")
        try:
            with open(csv_path, "w") as fh:
                fh.write(Trace.CSV_HEADER + "\n")
                stream = lambda row, fh=fh: fh.write(format_trace_row(row) + "\n")
                if job_kind == "zivr":
                    trace = run(problem, cfg, on_row=stream)
                else:
                    trace = run_baseline(problem, cfg, on_row=stream)
        except DivergenceError as err:
            print(f"error: run {key} diverged: {err}", file=sys.stderr)
            return 3
        final = trace.final()
        manifest["runs"].append(
            {
                "label": base_label,
                "seed": cfg.seed,
                "csv": csv_name,
                "beta": cfg.beta.beta0 if job_kind == "zivr" else cfg.beta,
                "resolved": resolved,
                "final_oracle_calls": final.oracle_calls,
                "final_objective": final.objective,
                "final_gap": final.gap,
                "wall_ms": final.wall_ms,
            }
        )
        print(
            f"  done: {final.oracle_calls} calls, objective {final.objective:.6g}"
            + (f", gap {final.gap:.3e}" if final.gap is not None else "")
        )
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {len(jobs)} trace(s) + manifest to {out_dir}")
    return 0


def _resolve_reference(metrics_tbl: dict, problem) -> float | None:
    ref = metrics_tbl.get("reference", "none")
    if isinstance(ref, (int, float)) and not isinstance(ref, bool):
        return float(ref)
    if ref == "none":
        return problem.known_optimum[1] if problem.known_optimum else None
    if ref == "auto":
        if problem.known_optimum is not None:
            return problem.known_optimum[1]
        tol = float(metrics_tbl.get("reference_tol", 1e-10))
        _, h_star = reference_minimize(problem, tol=tol)
        return h_star
    raise ConfigError("metrics.reference must be 'auto', 'none', or a number")


def cmd_compare(args) -> int:
    out_dir = Path(args.directory)
    manifest_path = out_dir / "manifest.json"
    if not manifest_path.exists():
        print(f"error: missing manifest: {manifest_path}", file=sys.stderr)
        return 2
    manifest = json.loads(manifest_path.read_text())
    thresholds = [float(t) for t in (args.threshold or [])]
    header = ["run", "calls", "final_objective", "final_gap", "wall_ms"]
    header += [f"calls_to_{t:g}" for t in thresholds]
    rows = []
    for entry in manifest.get("runs", []):
        csv_path = out_dir / entry["csv"]
        with open(csv_path) as fh:
            trace = parse_trace_csv(fh)
        final = trace.final()
        row = [
            f"{entry['label']}_seed{entry['seed']}",
            str(final.oracle_calls),
            repr(final.objective),
            "" if final.gap is None else repr(final.gap),
            f"{final.wall_ms:.1f}",
        ]
        for t in thresholds:
            hit = next(
                (r.oracle_calls for r in trace.rows if r.gap is not None and r.gap <= t),
                None,
            )
            row.append("not reached" if hit is None else str(hit))
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    print(fmt.format(*header))
    for row in rows:
        print(fmt.format(*row))
    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    print(f"wrote {summary_path}")
    return 0


def cmd_verify(args) -> int:
    results = battery(
        seed=args.seed,
        samples_scale=args.samples_scale,
        sigma_scale=args.sigma_scale,
    )
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    out = Path(args.out) if args.out else Path("verify_report.csv")
    with open(out, "w") as fh:
        fh.write("check,passed,detail\n")
        for res in results:
            name = res.name.replace(",", ";")
            detail = res.detail.replace(",", ";")
            fh.write(f"{name},{int(res.passed)},{detail}\n")
    print(f"wrote {out}")
    if failed:
        print(f"{len(failed)} check(s) FAILED: " + ", ".join(r.name for r in failed))
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    if args.kind == "survival":
        try:
            ds = gen_survival(
                n=args.n, d=args.d, sparsity=args.sparsity,
                censor_rate=args.censor_rate, seed=args.seed,
            )
        except ZivrError as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        write_survival_csv(ds, out)
        print(f"wrote survival dataset ({ds.n} rows, d={ds.d}) to {out}")
        return 0
    if args.kind == "quadratic":
        try:
            problem = make_synthetic_quadratic(
                n=args.n, d=args.d, cond=args.cond, seed=args.seed
            )
        except ZivrError as err:
            print(f"error: {err}", file=sys.stderr)
            return 2
        x_star, h_star = problem.known_optimum
        doc = {
            "kind": "quadratic",
            "n": args.n,
            "d": args.d,
            "cond": args.cond,
            "seed": args.seed,
            "smoothness_L": problem.smoothness_L,
            "strong_convexity_mu": problem.strong_convexity_mu,
            "x_star": x_star.tolist(),
            "h_star": h_star,
        }
        out.write_text(json.dumps(doc, indent=2) + "\n")
        print(f"wrote quadratic problem spec to {out}")
        return 0
    print(f"error: unknown data kind {args.kind!r}", file=sys.stderr)
    return 2


def cmd_datasets(_args) -> int:
    print("Public benchmark datasets (download manually, see ZIVR_DATA_DIR):")
    for name, url in KNOWN_DATASET_URLS.items():
        print(f"  {name}: {url}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zivr", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"zivr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run an experiment config (TOML or manifest)")
    pr.add_argument("config")
    pr.add_argument("--output", "-o", help="override the output directory")
    pr.set_defaults(func=cmd_run)

    pc = sub.add_parser("compare", help="summarize a run directory")
    pc.add_argument("directory")
    pc.add_argument(
        "--threshold", "-t", action="append", type=float,
        help="gap threshold; reports oracle calls to reach it (repeatable)",
    )
    pc.set_defaults(func=cmd_compare)

    pv = sub.add_parser("verify", help="run the verification battery")
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument(
        "--samples-scale", type=float, default=1.0,
        help="scale all Monte-Carlo sample counts (testing hook)",
    )
    pv.add_argument(
        "--sigma-scale", type=float, default=1.0,
        help="fault-injection hook: scales the sketch targets; != 1 must fail",
    )
    pv.add_argument("--out", help="CSV report path (default verify_report.csv)")
    pv.set_defaults(func=cmd_verify)

    pg = sub.add_parser("gen-data", help="generate synthetic datasets")
    gsub = pg.add_subparsers(dest="kind", required=True)
    gs = gsub.add_parser("survival", help="exponential-hazard survival CSV")
    gs.add_argument("--n", type=int, default=112)
    gs.add_argument("--d", type=int, default=160)
    gs.add_argument("--sparsity", type=float, default=0.2)
    gs.add_argument("--censor-rate", dest="censor_rate", type=float, default=0.3)
    gs.add_argument("--seed", type=int, default=0)
    gs.add_argument("--out", required=True)
    gs.set_defaults(func=cmd_gen_data)
    gq = gsub.add_parser("quadratic", help="synthetic quadratic problem spec")
    gq.add_argument("--n", type=int, default=50)
    gq.add_argument("--d", type=int, default=20)
    gq.add_argument("--cond", type=float, default=100.0)
    gq.add_argument("--seed", type=int, default=0)
    gq.add_argument("--out", required=True)
    gq.set_defaults(func=cmd_gen_data)

    pd = sub.add_parser("datasets", help="print known dataset URLs")
    pd.set_defaults(func=cmd_datasets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"error: divergence: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
