"""
``netmix`` command line.

Subcommands: simulate, fit, fit-outlier, summarize, distances.  Every
subcommand accepts ``--config FILE`` (a JSON object whose keys are the long
option names with dashes replaced by underscores); flags given on the
command line override the file.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import summarize, thin
from .graph import METRICS, AdjacencyError, classical_mds, distance_matrix
from .io import (DataFormatError, read_json, read_population, read_samples, read_truth,
                 write_matrix_csv, write_population, write_samples, write_summary,
                 write_truth)
from .model import Hyperparams
from .pipeline import fit, samples_manifest, seed_streams
from .sampler import ConfigError
from .simulate import RegimeSpec, generate_population, preset, preset_names

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
UNSUPPORTED_METRICS = ("wavelet",)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# Built-in defaults; argparse defaults stay None so that file values survive
# unless a flag is given.
DEFAULTS = {
    "simulate": dict(preset=None, spec=None, seed=0, out=None),
    "fit": dict(data=None, out=None, clusters=None, blocks=None, iters=None, burnin=None,
                thin=1, seed=0, chains=1, metrics=list(METRICS), omega=None,
                rep_kernel_mix=0.8, kernel_weights=None, u_ladder=None, u_weights=None,
                hyper=None),
    "summarize": dict(samples=None, truth=None, out=None, burnin=None, lag=1, level=0.95,
                      thresholds=[1, 5, 10], relabel=False),
    "distances": dict(data=None, out=None, metric="all", mds=False, mds_dim=2),
}
DEFAULTS["fit-outlier"] = dict(DEFAULTS["fit"], clusters=2)


def _floats(s):
    return [float(x) for x in s.split(",")]


def _ints(s):
    return [int(x) for x in s.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netmix", description="Bayesian clustering of network populations.")
    parser.add_argument("--version", action="version", version=f"netmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file with option values")

    p = sub.add_parser("simulate", help="generate a synthetic population and its ground truth")
    common(p)
    p.add_argument("--preset", help=f"regime preset ({', '.join(preset_names())})")
    p.add_argument("--spec", help="JSON file with an inline regime specification")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")

    for name, help_ in (("fit", "fit the mixture model"),
                        ("fit-outlier", "fit the two-cluster outlier model")):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--data", help="population file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--clusters", type=int)
        p.add_argument("--blocks", type=int)
        p.add_argument("--iters", type=int)
        p.add_argument("--burnin", type=int)
        p.add_argument("--thin", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--chains", type=int)
        p.add_argument("--metrics", type=lambda s: s.split(","), help="comma-separated init metrics")
        p.add_argument("--omega", type=float, help="per-pair flip probability of local proposals")
        p.add_argument("--rep-kernel-mix", type=float, help="probability of the local proposal")
        p.add_argument("--kernel-weights", type=_floats, help="representative,p,q kernel weights")
        p.add_argument("--u-ladder", type=_floats, help="noise random-walk widths")
        p.add_argument("--u-weights", type=_floats)

    p = sub.add_parser("summarize", help="posterior summary of a fitted chain")
    common(p)
    p.add_argument("--samples", help="chain output directory")
    p.add_argument("--truth", help="ground-truth JSON")
    p.add_argument("--out", help="output directory (default: <samples>/summary)")
    p.add_argument("--burnin", type=int, help="additional burn-in, in iterations")
    p.add_argument("--lag", type=int, help="additional thinning lag, in iterations")
    p.add_argument("--level", type=float)
    p.add_argument("--thresholds", type=_ints)
    p.add_argument("--relabel", action="store_true", default=None)

    p = sub.add_parser("distances", help="pairwise distance matrices and MDS coordinates")
    common(p)
    p.add_argument("--data", help="population file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--metric", help=f"all or one of {', '.join(METRICS)}")
    p.add_argument("--mds", action="store_true", default=None)
    p.add_argument("--mds-dim", type=int)
    return parser


def resolve(args) -> dict:
    """Merge built-in defaults, the config file and explicit flags."""
    opts = dict(DEFAULTS[args.command])
    if getattr(args, "config", None):
        try:
            cfg = read_json(args.config)
        except FileNotFoundError:
            raise UsageError(f"config file {args.config} not found") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(cfg) - set(opts)
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        opts.update(cfg)
    for k, v in vars(args).items():
        if k in opts and v is not None:
            opts[k] = v
    return opts


def _require(opts, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def cmd_simulate(opts):
    _require(opts, "out")
    if (opts["preset"] is None) == (opts["spec"] is None):
        raise UsageError("give exactly one of --preset or --spec")
    if opts["preset"] is not None:
        try:
            spec = preset(opts["preset"], seed=opts["seed"])
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    else:
        raw = opts["spec"] if isinstance(opts["spec"], dict) else read_json(opts["spec"])
        try:
            spec = RegimeSpec.from_dict({**raw, "seed": opts["seed"]})
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid regime specification: {exc}") from None
    rng = np.random.default_rng(seed_streams(opts["seed"])["simulate"])
    pop, truth = generate_population(spec, rng)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_population(out / "population.txt", pop)
    write_truth(out / "truth.json", truth)
    print(f"wrote {pop.N} networks on {pop.n} nodes to {out}")


def cmd_fit(opts, outlier=False):
    _require(opts, "data", "out", "clusters", "blocks", "iters", "burnin")
    if outlier and opts["clusters"] != 2:
        raise UsageError("fit-outlier requires --clusters 2")
    pop = read_population(opts["data"])
    mcmc = {}
    for key in ("omega", "kernel_weights", "u_ladder", "u_weights"):
        if opts[key] is not None:
            mcmc[key] = tuple(opts[key]) if isinstance(opts[key], list) else opts[key]
    mcmc["rep_kernel_mix"] = opts["rep_kernel_mix"]
    if opts["hyper"] is not None:
        mcmc["hyper"] = Hyperparams(**opts["hyper"])
    result = fit(pop, C=opts["clusters"], K=opts["blocks"], iterations=opts["iters"],
                 burn_in=opts["burnin"], thin=opts["thin"], seed=opts["seed"],
                 chains=opts["chains"], outlier=outlier, metrics=opts["metrics"], **mcmc)
    out = Path(opts["out"])
    for i, samples in enumerate(result.chains):
        target = out if len(result.chains) == 1 else out / f"chain_{i}"
        manifest = samples_manifest(result, i, opts["seed"], opts["data"])
        manifest["command"] = "fit-outlier" if outlier else "fit"
        manifest["options"] = {k: v for k, v in opts.items() if k != "out"}
        write_samples(target, samples, manifest)
        print(f"chain {i}: {len(samples)} draws written to {target}")


def cmd_summarize(opts):
    _require(opts, "samples")
    samples, man = read_samples(opts["samples"])
    if opts["burnin"] is not None or opts["lag"] != 1:
        burn = opts["burnin"] if opts["burnin"] is not None else man["config"]["burn_in"]
        samples = thin(samples, burn, opts["lag"])
        if len(samples) == 0:
            raise UsageError("no draws left after burn-in and thinning")
    truth_z = truth_reps = None
    if opts["truth"] is not None:
        truth_reps, _, truth_z = read_truth(opts["truth"])
        if len(truth_z) != samples.z.shape[1]:
            raise DataFormatError(f"{opts['truth']}: {len(truth_z)} memberships for "
                                  f"{samples.z.shape[1]} networks")
    report = summarize(samples, truth_z=truth_z, truth_reps=truth_reps, level=opts["level"],
                       thresholds=tuple(opts["thresholds"]), relabel=bool(opts["relabel"]))
    out = Path(opts["out"]) if opts["out"] else Path(opts["samples"]) / "summary"
    write_summary(out, report)
    print(f"summary of {report['n_draws']} draws written to {out}")


def cmd_distances(opts):
    _require(opts, "data", "out")
    metric = opts["metric"]
    if metric in UNSUPPORTED_METRICS:
        raise UsageError(f"metric {metric!r} is unsupported; available: all, {', '.join(METRICS)}")
    if metric != "all" and metric not in METRICS:
        raise UsageError(f"unknown metric {metric!r}; available: all, {', '.join(METRICS)}")
    pop = read_population(opts["data"])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    for m in (METRICS if metric == "all" else (metric,)):
        d = distance_matrix(pop, m)
        write_matrix_csv(out / f"distances_{m}.csv", d)
        if opts["mds"]:
            write_matrix_csv(out / f"mds_{m}.csv", classical_mds(d, opts["mds_dim"]))
    print(f"wrote distance matrices to {out}")


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit,
            "fit-outlier": lambda o: cmd_fit(o, outlier=True),
            "summarize": cmd_summarize, "distances": cmd_distances}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve(args)
        COMMANDS[args.command](opts)
    except (DataFormatError, AdjacencyError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"netmix {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"netmix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PermissionError as exc:
        print(f"netmix {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
