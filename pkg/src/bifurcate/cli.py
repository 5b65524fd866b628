"""Command-line front end.

Exit codes: 0 on success, 2 on invalid input, 3 when a concentration check
reports a violated bound.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import reports
from .bounds import bound_set
from .config import Config, ConfigError, Experiment, load_config
from .estimate import Kernel1D, nw_fit, transition_density_fit
from .harness import (ExperimentSpec, replicate_means, run_bias_check, run_contraction_check,
                      run_laplace_check, run_tail_check)
from .kernel import Drift, InitialLaw, NBARModel, Noise, nbar_kernel
from .metrics import wasserstein_p
from .simulate import Functional, dump_csv, empirical_mean, map_replicates, simulate_tree
from .tree import IndexSet

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VIOLATED = 3


def _u64(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [model], [experiment], [bounds], [output]")
    common.add_argument("--seed", type=_u64, help="master seed (overrides [experiment] seed)")
    common.add_argument("--threads", type=_positive,
                        help="worker threads; changes speed only (default: $BIFURCATE_THREADS or 1)")
    common.add_argument("--out", help="directory for output files (default: stdout)")
    common.add_argument("--format", choices=("csv", "json", "table"), help="output format")

    p = argparse.ArgumentParser(prog="bifurcate", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate trees")
    s.add_argument("--dump", nargs="?", const="-", metavar="PATH",
                   help="write raw samples as CSV (to PATH, or to stdout / OUT/samples.csv)")
    sub.add_parser("bounds", parents=[common], help="print the theoretical constants")
    c = sub.add_parser("concentration", parents=[common], help="Monte-Carlo bound checks")
    c.add_argument("--check", choices=("tail", "laplace", "bias", "contraction"), default="tail")
    e = sub.add_parser("estimate", parents=[common], help="Nadaraya-Watson fits")
    e.add_argument("--target", choices=("f0", "f1", "transition"))
    w = sub.add_parser("wasserstein", parents=[common], help="W_p between two sample files")
    w.add_argument("file_a")
    w.add_argument("file_b")
    w.add_argument("--p", type=float, default=1.0)
    return p


class _Output:
    """Collects named documents and writes them to ``--out`` or stdout."""

    def __init__(self, out_dir: str | None):
        self.out_dir = out_dir
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)

    def emit(self, name: str, text: str, primary: bool = True):
        if self.out_dir:
            path = os.path.join(self.out_dir, name)
            with open(path, "w", newline="") as fh:
                fh.write(text)
            print(path)
        elif primary:
            sys.stdout.write(text)


def _config(args) -> Config:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = Config(_default_model(), Experiment())
    if args.seed is not None:
        cfg.experiment.seed = args.seed
    return cfg


def _default_model() -> NBARModel:
    return NBARModel(Drift.linear(0.4, 1.0), Drift.linear(0.3, 0.5), Noise("gaussian", 1.0),
                     InitialLaw.dirac(0.0))


def _fmt(args, cfg: Config, default: str = "json") -> str:
    return args.format or cfg.fmt or default


def cmd_simulate(args, cfg: Config, out: _Output) -> int:
    e = cfg.experiment
    kern = nbar_kernel(cfg.model)
    if args.dump is not None:
        samples = [simulate_tree(kern, e.depth, (e.seed, r)) for r in range(e.replicates)]
        if out.out_dir or args.dump != "-":
            path = args.dump if args.dump != "-" else os.path.join(out.out_dir, "samples.csv")
            dump_csv(samples, path)
            print(path)
        else:
            dump_csv(samples, sys.stdout)
        return EXIT_OK
    T, G = IndexSet.subtree(e.depth), IndexSet.generation(e.depth)
    ident = Functional.identity()
    pairs = map_replicates(kern, e.depth, e.seed, e.replicates,
                           lambda s: (empirical_mean(s, T, ident), empirical_mean(s, G, ident)),
                           args.threads)
    doc = {"kind": "simulate", "depth": e.depth, "replicates": e.replicates, "master_seed": e.seed,
           "tree_mean": [a for a, _ in pairs], "generation_mean": [b for _, b in pairs]}
    if _fmt(args, cfg) == "csv":
        rows = [{"replicate": i, "tree_mean": a, "generation_mean": b} for i, (a, b) in enumerate(pairs)]
        out.emit("simulate.csv", reports.write_csv(rows, ["replicate", "tree_mean", "generation_mean"]))
    else:
        out.emit("simulate.json", reports.dumps(reports.validate(doc)))
    return EXIT_OK


def cmd_bounds(args, cfg: Config, out: _Output) -> int:
    meta = cfg.model.meta
    b = cfg.bounds
    bs = bound_set(b.get("C", meta.C), b.get("p", 1.0), b.get("q", meta.q), b.get("r0", meta.r0),
                   b.get("r1", meta.r1), b.get("n", cfg.experiment.depth), b.get("lip", 1.0))
    doc = bs.as_dict()
    fmt = _fmt(args, cfg)
    if fmt == "json":
        out.emit("bounds.json", reports.dumps(reports.validate(doc)))
        return EXIT_OK
    rows = []
    for name in bs.VALUES:
        v = getattr(bs, name)
        rows.append({"name": name, "value": v if v is not None else None,
                     "note": bs.not_applicable.get(name, bs.flags.get(name, ""))})
    if fmt == "csv":
        out.emit("bounds.csv", reports.write_csv(rows, ["name", "value", "note"]))
    else:
        lines = [f"inputs: C={reports.fmt_float(bs.C)} p={reports.fmt_float(bs.p)} "
                 f"q={reports.fmt_float(bs.q)} r0={reports.fmt_float(bs.r0)} "
                 f"r1={reports.fmt_float(bs.r1)} n={bs.n} N={bs.N} lip={reports.fmt_float(bs.lip)}"]
        width = max(len(r["name"]) for r in rows)
        for r in rows:
            val = "n/a" if r["value"] is None else reports.fmt_float(r["value"])
            lines.append(f"{r['name']:<{width}}  {val:<24}  {r['note']}".rstrip())
        lines.append("regimes: " + ", ".join(f"{k}={v}" for k, v in bs.regimes.items()))
        out.emit("bounds.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def _spec(cfg: Config, threads) -> ExperimentSpec:
    e = cfg.experiment
    g = Functional.identity() if e.functional == "identity" else Functional.innovation(cfg.model)
    return ExperimentSpec(cfg.model, e.depth, e.replicates, g, e.index, e.t_grid, e.seed,
                          threads=threads, laplace_points=e.laplace_points)


def cmd_concentration(args, cfg: Config, out: _Output) -> int:
    e = cfg.experiment
    fmt = _fmt(args, cfg)
    check = args.check
    if check in ("tail", "laplace"):
        spec = _spec(cfg, args.threads)
        means = replicate_means(spec)
        reps = run_tail_check(spec, means) if check == "tail" else run_laplace_check(spec, means)
        violated = any(r.any_violated for r in reps)
        cols = (["t", "p_hat", "ci_lo", "ci_hi", "bound", "verdict"] if check == "tail"
                else ["t", "lhs", "se", "rhs", "verdict"])
        if fmt == "csv":
            for i, r in enumerate(reps):
                suffix = "" if r.centering == "replicate_mean" else "_" + r.centering
                out.emit(f"concentration_{check}{suffix}.csv", reports.write_csv(r.rows(), cols),
                         primary=(i == 0))
        else:
            doc = {"kind": "concentration", "check": check, "reports": [r.as_dict() for r in reps]}
            out.emit(f"concentration_{check}.json", reports.dumps(reports.validate(doc)))
    else:
        if check == "bias":
            rep = run_bias_check(cfg.model, e.depth, e.replicates, e.chains, e.chain_steps,
                                 e.burn_in, e.seed, args.threads)
            violated = rep.verdict == "violated" or rep.verdict_exact == "violated"
        else:
            rep = run_contraction_check(cfg.model, e.contraction_steps, e.x, e.x_tilde, e.draws, e.seed)
            violated = rep.verdict == "violated"
        d = rep.as_dict()
        if fmt == "csv":
            cols = [k for k in d if k != "kind"]
            out.emit(f"concentration_{check}.csv", reports.write_csv([d], cols))
        else:
            doc = {"kind": "concentration", "check": check, "reports": [d]}
            out.emit(f"concentration_{check}.json", reports.dumps(reports.validate(doc)))
    return EXIT_VIOLATED if violated else EXIT_OK


def cmd_estimate(args, cfg: Config, out: _Output) -> int:
    e = cfg.experiment
    target = args.target or e.target
    s = simulate_tree(nbar_kernel(cfg.model), e.depth, (e.seed, 0))
    k = Kernel1D(e.kernel)
    grid = np.linspace(e.grid_min, e.grid_max, e.grid_points)
    fmt = _fmt(args, cfg, "csv")
    if target == "transition":
        pts = np.column_stack([grid, cfg.model.f0(grid), cfg.model.f1(grid)])
        fit = transition_density_fit(s, k, e.alpha, pts)
        rows = [{"x": p[0], "y": p[1], "z": p[2], "fhat": fit.fhat[i], "fhat_h3": fit.fhat_h3[i],
                 "Dtilde": fit.Dtilde[i], "Phat": fit.Phat[i], "Phat_h3": fit.Phat_h3[i],
                 "defined": bool(fit.defined[i])} for i, p in enumerate(pts)]
        cols = ["x", "y", "z", "fhat", "fhat_h3", "Dtilde", "Phat", "Phat_h3", "defined"]
        side = {"kind": "nw_fit", "alpha": e.alpha, "h": fit.h, "n": e.depth, "count": fit.count,
                "kernel": k.shape, "target": "transition", "seed": list(s.seed),
                "normalization": fit.normalization}
    else:
        fit = nw_fit(s, k, e.alpha, grid, target)
        rows = [{"x": x, "f0hat": fit.f0hat[i], "f1hat": fit.f1hat[i], "Dtilde": fit.Dtilde[i],
                 "defined": bool(fit.defined[i])} for i, x in enumerate(grid)]
        cols = ["x", "f0hat", "f1hat", "Dtilde", "defined"]
        side = fit.sidecar()
    reports.validate(side)
    if fmt == "json":
        doc = dict(side)
        doc["rows"] = rows
        out.emit("estimate.json", reports.dumps(doc))
    else:
        out.emit("estimate.csv", reports.write_csv(rows, cols))
        out.emit("estimate.sidecar.json", reports.dumps(side), primary=False)
    return EXIT_OK


def read_samples(path: str) -> np.ndarray:
    """Values from a sample dump (``value`` column) or from a plain list of numbers."""
    with open(path, newline="") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: no samples")
    head = [c.strip() for c in lines[0].split(",")]
    if "value" in head:
        col = head.index("value")
        vals = [float(row[col]) for row in csv.reader(lines[1:])]
    else:
        vals = [float(tok) for ln in lines for tok in ln.replace(",", " ").split()]
    if not vals:
        raise ValueError(f"{path}: no samples")
    return np.asarray(vals, dtype=np.float64)


def cmd_wasserstein(args, cfg, out: _Output) -> int:
    a, b = read_samples(args.file_a), read_samples(args.file_b)
    value = wasserstein_p(a, b, args.p)
    if args.format == "json":
        out.emit("wasserstein.json", reports.dumps(reports.validate(
            {"kind": "wasserstein", "p": args.p, "value": value})))
    elif args.format == "csv":
        out.emit("wasserstein.csv", reports.write_csv([{"p": args.p, "value": value}], ["p", "value"]))
    else:
        out.emit("wasserstein.txt", reports.fmt_float(value) + "\n")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "bounds": cmd_bounds, "concentration": cmd_concentration,
            "estimate": cmd_estimate, "wasserstein": cmd_wasserstein}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = None if args.command == "wasserstein" else _config(args)
        out_dir = args.out or (cfg.out_dir if cfg is not None else None)
        return COMMANDS[args.command](args, cfg, _Output(out_dir))
    except (ConfigError, ValueError, OSError, IndexError) as exc:
        print(f"bifurcate {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
