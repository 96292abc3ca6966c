"""Command-line entry point.

Exit status is 0 on success, 2 on invalid input or usage, 1 on anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from faithcheck.core import dumps_trace, load_trace, write_trace
from faithcheck.discretizers import DiscretizerSpec, discretize_trace
from faithcheck.estimators import ConfigurationError, Relation, estimate_global, estimate_local
from faithcheck.harness import (
    WorldSpec,
    generate_world,
    make_rng,
    split_populations,
    sweep_samples,
    sweep_threshold,
)
from faithcheck.oracle import (
    FiniteSystem,
    decoder_report,
    exact_global_consistency,
    exact_global_sufficiency,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _add_world_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--kind", required=required,
                   choices=["tree", "xor", "balanced-pair", "label-purity"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--leaves", type=int, default=64, help="tree world: number of leaves")
    p.add_argument("--noise", type=float, default=0.0, help="tree world: label noise")
    p.add_argument("--dim", type=int, default=None, help="tree world: input dimension")
    p.add_argument("--extent", type=float, default=2.0, help="xor world: grid half-width")
    p.add_argument("--step", type=float, default=0.5, help="xor world: grid spacing")
    p.add_argument("--domain-size", type=int, default=None,
                   help="balanced-pair world: finite domain size (continuous if omitted)")
    p.add_argument("--pure-keys", type=int, default=10, help="label-purity world")
    p.add_argument("--mixed-keys", type=int, default=10, help="label-purity world")
    p.add_argument("--positive-share", type=float, default=0.5, help="label-purity world")
    p.add_argument("--explainer", default=None, help="which of the world's explainers to use")


def _world_spec(a) -> WorldSpec:
    return WorldSpec(a.kind, a.seed, leaves=a.leaves, label_noise=a.noise, dim=a.dim,
                     extent=a.extent, step=a.step, domain_size=a.domain_size,
                     pure_keys=a.pure_keys, mixed_keys=a.mixed_keys,
                     positive_share=a.positive_share)


def _cmd_evaluate(a) -> None:
    trace = load_trace(a.trace, a.format)
    measures = ["consistency", "sufficiency"] if a.measure == "both" else [a.measure]
    reports = {}
    for m in measures:
        try:
            reports[m] = estimate_global(trace, Relation.parse(m), bounds=a.bounds).to_json()
        except ConfigurationError:
            if a.measure != "both":
                raise
    out = reports[a.measure] if a.measure != "both" else reports
    _emit(_json(out), a.out)


def _cmd_local(a) -> None:
    trace = load_trace(a.trace, a.format)
    query = next((r for r in trace.records if r.instance.id == a.query), None)
    if query is None:
        raise ValueError(f"no record with id {a.query!r}")
    est = estimate_local(trace, query)
    _emit(_json({"id": a.query, "consistency": est.consistency, "sufficiency": est.sufficiency,
                 "N_c": est.n_consistency, "N_c_same": est.n_consistency_same,
                 "N_s": est.n_sufficiency, "N_s_same": est.n_sufficiency_same}), a.out)


def _cmd_discretize(a) -> None:
    trace = load_trace(a.trace, a.format)
    result = discretize_trace(trace, DiscretizerSpec.parse(a.method))
    if a.out:
        write_trace(result, a.out)
    else:
        sys.stdout.write(dumps_trace(result))


def _cmd_synth(a) -> None:
    world = generate_world(_world_spec(a))
    traces = world.sample(a.n, make_rng(a.seed))
    out_dir = Path(a.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, trace in traces.items():
        path = out_dir / f"{name}.jsonl"
        write_trace(trace, path)
        (out_dir / f"{name}.truth.json").write_text(_json(world.ground_truth[name]), encoding="utf-8")
        written[name] = str(path)
    (out_dir / "ground_truth.json").write_text(_json(world.ground_truth), encoding="utf-8")
    sys.stdout.write(_json({"traces": written, "ground_truth": world.ground_truth}))


def _cmd_sweep_samples(a) -> None:
    res = sweep_samples(_world_spec(a), _ints(a.grid), a.reps, [a.measure], a.explainer)
    _emit(res[a.measure].to_csv(), a.out)


def _cmd_sweep_threshold(a) -> None:
    if a.trace:
        source = load_trace(a.trace, a.format)
    elif a.kind:
        source = _world_spec(a)
    else:
        raise UsageError("sweep-threshold needs --trace or --kind")
    res = sweep_threshold(source, _floats(a.thresholds), a.search_size, a.eval_size, a.seed,
                          a.explainer)
    _emit(res[a.measure].to_csv(), a.out)


def _cmd_split(a) -> None:
    trace = load_trace(a.trace, a.format)
    one, two = split_populations(trace, a.positive_label, a.p, a.seed, a.allow_boundary)
    out_dir = Path(a.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace(one, out_dir / "population1.jsonl")
    write_trace(two, out_dir / "population2.jsonl")
    summary = {"population1": len(one), "population2": len(two)}
    for name, t in (("population1", one), ("population2", two)):
        if len(t):
            summary[f"{name}_consistency"] = estimate_global(t).estimate
    sys.stdout.write(_json(summary))


def _cmd_oracle(a) -> None:
    system = FiniteSystem.load(a.system)
    report = decoder_report(system)
    _emit(_json({"m_c": exact_global_consistency(system), "m_s": exact_global_sufficiency(system),
                 "decoder": report.to_json()}), a.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faithcheck",
                     description="Consistency and sufficiency of explanation traces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def trace_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--trace", required=True)
        p.add_argument("--format", choices=["jsonl", "csv"], default=None)
        return p

    p = trace_cmd("evaluate", "global consistency/sufficiency estimates")
    p.add_argument("--measure", choices=["consistency", "sufficiency", "both"], default="both")
    p.add_argument("--bounds", action="store_true", help="attach plug-in bound diagnostics")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = trace_cmd("local", "local estimates for one record")
    p.add_argument("--query", required=True, help="instance id of the query record")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_local)

    p = trace_cmd("discretize", "re-key a trace with a discretizer")
    p.add_argument("--method", required=True,
                   help="original|fp:<k>|sign|rank|sign-of-top:<m>|delta|delta-sign|is-feature-modified")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_discretize)

    p = sub.add_parser("synth", help="sample traces from a synthetic world")
    _add_world_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sweep-samples", help="estimates across sample sizes (CSV)")
    _add_world_args(p)
    p.add_argument("--grid", required=True, help="comma-separated sample sizes")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--measure", choices=["consistency", "sufficiency"], default="consistency")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep_samples)

    p = sub.add_parser("sweep-threshold", help="anchor estimates across thresholds (CSV)")
    _add_world_args(p, required=False)
    p.add_argument("--trace")
    p.add_argument("--format", choices=["jsonl", "csv"], default=None)
    p.add_argument("--thresholds", default="0.5,0.7,0.9,0.95")
    p.add_argument("--search-size", type=int, default=1000)
    p.add_argument("--eval-size", type=int, default=200)
    p.add_argument("--measure", choices=["consistency", "sufficiency"], default="sufficiency")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep_threshold)

    p = trace_cmd("split-populations", "label-dependent random split of a trace")
    p.add_argument("--positive-label", required=True)
    p.add_argument("--p", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-boundary", action="store_true", help="accept p = 0 or p = 1")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("oracle", help="exact measures of an enumerated system")
    p.add_argument("--system", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
