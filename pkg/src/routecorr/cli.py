"""Command-line interface: ``routecorr <subcommand> ...``.

Every subcommand writes CSV to ``--out`` (a file, or a directory for
``bench``) or to standard output. Validation errors exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import bench, conl
from .gev import ModelError, theta0_from_cv
from .gevcov import QuadratureError, QuadratureSpec
from .mnp import MnpSpec, ds_moments, simulate_mnp_probabilities, xi_from_cv
from .netgraph import NetworkError, OdPair, parse_params
from .routegen import enumerate_efficient_routes, sample_choice_set

PROB_MODELS = ("mnp", *bench.MODELS)
CORR_MODELS = ("mnp", *bench.MODELS)


@contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _writer(stream):
    return csv.writer(stream, lineterminator="\n")


def _network(args):
    od = OdPair.parse(args.od) if args.od else None
    return bench.resolve_network(args.network, parse_params(args.params or ""), od)


def _add_network_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", default="mesh2x2", help="built-in name or network file path")
    p.add_argument("--params", default="", help="built-in network parameters, e.g. a=4,b=5,h=0.1")
    p.add_argument("--od", default=None, help="o-d pair such as 1-9 (default: the network's own)")
    p.add_argument("--out", default=None, help="output CSV path (default: stdout)")


def _add_model_args(p: argparse.ArgumentParser, choices) -> None:
    p.add_argument("--model", required=True, choices=choices)
    p.add_argument("--cv", type=float, default=0.1)
    p.add_argument("--dmin", type=float, default=0.0)
    p.add_argument("--weights", type=int, default=24, choices=conl.WEIGHT_VARIANTS)
    p.add_argument("--gamma", type=float, default=1.0)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_routes(args) -> int:
    net, od = _network(args)
    if args.mode == "efficient":
        cs = enumerate_efficient_routes(net, od)
    else:
        cs = sample_choice_set(net, od, args.draws, args.cv, args.seed)
    with _output(args.out) as fh:
        cs.to_csv(fh)
    return 0


def _choice_set(args):
    net, od = _network(args)
    return net, enumerate_efficient_routes(net, od)


def cmd_probs(args) -> int:
    net, cs = _choice_set(args)
    c_min = cs.min_impedance
    with _output(args.out) as fh:
        w = _writer(fh)
        if args.model == "mnp":
            res = simulate_mnp_probabilities(net, cs, MnpSpec(xi_from_cv(args.cv, c_min), args.draws, args.seed))
            w.writerow(["route_index", "probability", "std_error"])
            for k, (p, s) in enumerate(zip(res.probabilities, res.std_errors)):
                w.writerow([k, bench.fmt(p), bench.fmt(s)])
        else:
            spec = bench.ModelSpec(args.model, str(args.weights) if args.model == "conl" else "")
            model = spec.build(net, cs, theta0_from_cv(args.cv, c_min), args.dmin, args.gamma)
            w.writerow(["route_index", "probability"])
            for k, p in enumerate(bench.model_probabilities(model, cs)):
                w.writerow([k, bench.fmt(p)])
    return 0


def cmd_corr(args) -> int:
    net, cs = _choice_set(args)
    ds_cov, ds_corr = ds_moments(net, cs, 1.0)
    if args.model == "mnp":
        fcm = ds_corr
    else:
        spec = bench.ModelSpec(args.model, str(args.weights) if args.model == "conl" else "")
        model = spec.build(net, cs, theta0_from_cv(args.cv, cs.min_impedance), args.dmin, args.gamma)
        fcm = bench.model_fcm(model, QuadratureSpec(nodes=args.quad_nodes))
    if args.space == "fcm":
        matrix = fcm
    else:
        if args.rcm_ref is not None:
            if not 0 <= args.rcm_ref < len(cs):
                raise bench.ConfigError(f"rcm reference {args.rcm_ref} out of range for {len(cs)} routes")
            ref = args.rcm_ref
        else:
            ref = bench.find_rcm_reference(ds_cov, bench.rcm_anchor(args.network, parse_params(args.params or "")))
        matrix = bench.reduce_to_rcm(ds_cov, ref) if args.model == "mnp" else bench.model_rcm(fcm, ref)
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(["row_index", "col_index", "value"])
        for i, j in np.ndindex(matrix.shape):
            w.writerow([i, j, bench.fmt(matrix[i, j])])
    return 0


def cmd_conl_structure(args) -> int:
    net, cs = _choice_set(args)
    model = conl.build_conl(net, cs, theta0_from_cv(args.cv, cs.min_impedance), args.weights, args.dmin, args.gamma)
    targets = {t.link: t for t in model.targets}
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(["component", "weight", "nest", "routes", "delta", "residual", "unclamped"])
        for comp, weight in zip(model.components, model.weights):
            for nest in comp.nests:
                routes = ";".join(str(k) for k in nest.routes)
                if nest.link is None:
                    w.writerow([comp.index, bench.fmt(weight), "", routes, "1", "", ""])
                else:
                    t = targets[nest.link]
                    w.writerow([comp.index, bench.fmt(weight), nest.link, routes, bench.fmt(t.delta),
                                bench.fmt(t.residual), int(t.unclamped)])
    return 0


BENCH_KEYS = ("network", "params", "od", "models", "weights", "dmin", "cv", "draws", "seed", "out", "rcm_ref", "gamma")


def read_config(path: str) -> dict[str, str]:
    """Plain ``key=value`` lines; '#' starts a comment; keys mirror the bench flags."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in BENCH_KEYS:
                raise bench.ConfigError(f"{path}:{lineno}: expected one of {BENCH_KEYS} as key=value")
            values[key] = value.strip()
    return values


def bench_config(args) -> tuple[bench.ExperimentConfig, str]:
    values = {k: v for k, v in (read_config(args.config) if args.config else {}).items()}
    for key in BENCH_KEYS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = str(flag)
    try:
        cfg = bench.ExperimentConfig(
            network=values.get("network", "mesh2x2"),
            network_params=parse_params(values.get("params", "")),
            od=OdPair.parse(values["od"]) if values.get("od") else None,
            models=tuple(m.strip() for m in values.get("models", ",".join(bench.MODELS)).split(",") if m.strip()),
            weights=tuple(int(w) for w in values.get("weights", "24").split(",") if w.strip()),
            dmin=bench.parse_grid(values.get("dmin", "0:1:0.1")),
            cv=bench.parse_grid(values.get("cv", "0.1,0.2")),
            draws=int(values.get("draws", "1000000")),
            seed=int(values.get("seed", "0")),
            rcm_ref=int(values["rcm_ref"]) if values.get("rcm_ref") not in (None, "", "auto") else None,
            gamma=float(values.get("gamma", "1")),
        )
    except ValueError as exc:
        if isinstance(exc, (bench.ConfigError, NetworkError)):
            raise
        raise bench.ConfigError(str(exc)) from None
    return cfg, values.get("out", "results")


def cmd_bench(args) -> int:
    cfg, out = bench_config(args)
    report = bench.run_grid(cfg)
    for path in bench.emit_outputs(report, out):
        print(path)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="routecorr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("routes", help="enumerate or sample a choice set")
    _add_network_args(p)
    p.add_argument("--mode", choices=("efficient", "sample"), default="efficient")
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--cv", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_routes)

    p = sub.add_parser("probs", help="route choice probabilities")
    _add_network_args(p)
    _add_model_args(p, PROB_MODELS)
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_probs)

    p = sub.add_parser("corr", help="utility (fcm) or utility-difference (rcm) correlations")
    _add_network_args(p)
    _add_model_args(p, CORR_MODELS)
    p.add_argument("--space", choices=("fcm", "rcm"), default="fcm")
    p.add_argument("--rcm-ref", type=int, default=None, help="reference route index (default: anchored search)")
    p.add_argument("--quad-nodes", type=int, default=QuadratureSpec().nodes)
    p.set_defaults(func=cmd_corr)

    p = sub.add_parser("conl-structure", help="CoNL components, weights, deltas and residuals")
    _add_network_args(p)
    p.add_argument("--cv", type=float, default=0.1)
    p.add_argument("--dmin", type=float, default=0.0)
    p.add_argument("--weights", type=int, default=24, choices=conl.WEIGHT_VARIANTS)
    p.add_argument("--gamma", type=float, default=1.0)
    p.set_defaults(func=cmd_conl_structure)

    p = sub.add_parser("bench", help="MSE grid against the probit target")
    p.add_argument("--config", default=None, help="key=value file mirroring these flags")
    p.add_argument("--network", default=None)
    p.add_argument("--params", default=None)
    p.add_argument("--od", default=None)
    p.add_argument("--models", default=None, help=f"comma list from {','.join(bench.MODELS)}")
    p.add_argument("--weights", default=None, help="CoNL weight variants, e.g. 24,25")
    p.add_argument("--dmin", default=None, help="range start:stop:step or comma list")
    p.add_argument("--cv", default=None, help="comma list")
    p.add_argument("--draws", default=None)
    p.add_argument("--seed", default=None)
    p.add_argument("--out", default=None, help="output directory (default results/)")
    p.add_argument("--rcm-ref", dest="rcm_ref", default=None)
    p.add_argument("--gamma", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NetworkError, ModelError, bench.ConfigError, ValueError, OSError) as exc:
        print(f"routecorr: error: {exc}", file=sys.stderr)
        return 2
    except QuadratureError as exc:
        print(f"routecorr: quadrature error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
