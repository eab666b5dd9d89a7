"""Command-line interface: ``chaingraph <subcommand> ...``; JSON on stdout."""

from __future__ import annotations

import argparse
import functools
import json
import sys
from dataclasses import dataclass

import numpy as np

from .errors import ChainGraphError
from .graph import chain_components, dag_relations, read_graph
from .markov import MarkovType, merge_duplicates, statements, statements_c1, statements_c2, statements_c3
from .mle import FitOptions, fit
from .moebius import check_theorem8, model_dimension, sample_model_point
from .tables import counts_to_csv, obeys_markov, read_counts_csv, read_table_csv, simulate_counts

SCHEMA = "1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliConfig:
    subcommand: str
    graph_path: str | None = None
    data_path: str | None = None
    markov_type: str = "IV"
    tolerance: float = 1e-9
    seed: int | None = None
    starts: int = 5
    output_path: str | None = None

    def __post_init__(self):
        if self.tolerance <= 0:
            raise UsageError("--tol must be positive")
        if self.starts < 1:
            raise UsageError("--starts must be at least 1")
        MarkovType.parse(self.markov_type)


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser():
    parser = _Parser(prog="chaingraph", description="Discrete chain graph models.")
    out = _Parser(add_help=False)
    # SUPPRESS so a subcommand without --output keeps the top-level value
    out.add_argument("--output", default=argparse.SUPPRESS,
                     help="write the result to this file instead of stdout")
    parser.add_argument("--output", help="write the result to this file instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser = functools.partial(sub.add_parser, parents=[out])

    p = sub.add_parser("validate", help="check a graph file; list components and their DAG")
    p.add_argument("graph")

    p = sub.add_parser("ci", help="conditional independence statements of a Markov property")
    p.add_argument("graph")
    p.add_argument("--type", default="IV", choices=[t.value for t in MarkovType])
    p.add_argument("--full", action="store_true",
                   help="list every generated statement instead of the minimal list")

    p = sub.add_parser("dim", help="dimension of the type IV model")
    p.add_argument("graph")

    p = sub.add_parser("fit", help="maximum-likelihood fit of the type IV model")
    p.add_argument("graph")
    p.add_argument("counts")
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tol", type=_positive_float, default=1e-8, help="gradient-norm tolerance")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("simulate", help="draw multinomial counts (CSV) from a table or a "
                                        "random type IV model point")
    p.add_argument("graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--table", help="probability CSV to sample from (default: random model point)")

    p = sub.add_parser("check-membership", help="test a table against a Markov property")
    p.add_argument("graph")
    p.add_argument("table")
    p.add_argument("--type", default="IV", choices=[t.value for t in MarkovType])
    p.add_argument("--tol", type=_positive_float, default=1e-9)

    p = sub.add_parser("probe", help="type II / type III case-study probes")
    psub = p.add_subparsers(dest="probe", required=True, parser_class=_Parser)
    psub.add_parser = functools.partial(psub.add_parser, parents=[out])
    for name, text in [("prop14", "type II membership via Q-matrix ranks"),
                       ("prop17", "binary type III decomposition"),
                       ("locus58", "singular-locus equations of the binary type II model"),
                       ("smoothness", "Jacobian rank of the binary type II equations")]:
        q = psub.add_parser(name, help=text)
        q.add_argument("table")
        q.add_argument("--tol", type=_positive_float, default=1e-9)
    return parser


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _components_json(g):
    dag = chain_components(g)
    comps = []
    for k, tau in enumerate(dag.components):
        pa, nd = dag_relations(dag, tau)
        comps.append({"index": k, "vertices": sorted(tau), "pa_D": sorted(pa),
                      "nd_D": sorted(nd)})
    return {
        "vertices": list(g.vertices),
        "levels": {str(v): d for v, d in g.levels.items()},
        "components": [sorted(c) for c in dag.components],
        "component_details": comps,
        "dag_edges": sorted([list(e) for e in dag.dag_edges]),
        "topological_order": list(dag.topological_order),
    }


def _cmd_validate(args):
    g = read_graph(args.graph)
    return {"valid": True, **_components_json(g)}


def _cmd_ci(args):
    g = read_graph(args.graph)
    mtype = MarkovType.parse(args.type)
    if args.full:
        dag = chain_components(g)
        stmts = merge_duplicates(statements_c1(dag) + statements_c2(g, mtype.c2, dag=dag)
                                 + statements_c3(g, mtype.c3, dag=dag))
    else:
        stmts = statements(g, mtype)
    return {"type": mtype.value, "statements": [s.to_json() for s in stmts]}


def _cmd_dim(args):
    g = read_graph(args.graph)
    return {"dim": model_dimension(g)}


def _cmd_fit(args):
    g = read_graph(args.graph)
    counts = read_counts_csv(_read(args.counts), g.levels)
    opts = FitOptions(starts=args.starts, seed=args.seed, gtol=args.tol, threads=args.threads)
    CliConfig("fit", args.graph, args.counts, "IV", args.tol, args.seed, args.starts, args.output)
    return fit(g, counts, opts).to_json(g)


def _cmd_simulate(args):
    g = read_graph(args.graph)
    if args.table:
        p = read_table_csv(_read(args.table), g.levels)
    else:
        _, p = sample_model_point(g, args.seed)
    if args.n < 0:
        raise UsageError("--n must be nonnegative")
    return counts_to_csv(simulate_counts(p, args.n, args.seed))


def _cmd_check(args):
    g = read_graph(args.graph)
    p = read_table_csv(_read(args.table), g.levels)
    out = {"type": args.type, "markov": obeys_markov(p, g, args.type, args.tol).to_json()}
    member = out["markov"]["member"]
    if MarkovType.parse(args.type) is MarkovType.IV and p.positive:
        report = check_theorem8(p, g, args.tol)
        out["moebius"] = report.to_json()
        member = member and report.member
    out["member"] = member
    return out


def _cmd_probe(args):
    from . import probes

    p = read_table_csv(_read(args.table), {v: 2 for v in probes.VERTICES})
    if args.probe == "prop14":
        qs = probes.build_q_matrices(p, args.tol)
        return {"member": probes.prop14_member(p, args.tol),
                "direct_rank_test": probes.direct_2_4_given_13(p),
                "q_matrices": [{"i1": q.i1, "i3": q.i3, "rank": q.rank(),
                                "entries": q.entries.tolist()} for q in qs]}
    if args.probe == "prop17":
        return probes.membership_type_iii_binary(p, args.tol).to_json()
    coords = probes.gbar_coordinates(p, args.tol).binary_vector()
    if args.probe == "locus58":
        res = probes.singular_locus_residuals(coords)
        return {"on_singular_locus": probes.singular_locus_5_8(coords, args.tol),
                "coordinates": dict(zip(probes.COORD_LABELS, coords.tolist())),
                "residuals": res.tolist()}
    report = probes.smoothness_probe(probes.system_5_6_7(), coords)
    return {"coordinates": dict(zip(probes.COORD_LABELS, coords.tolist())),
            "equation_residuals": probes.binary_equations_5_6_7(coords).tolist(),
            **report.to_json()}


COMMANDS = {
    "validate": _cmd_validate,
    "ci": _cmd_ci,
    "dim": _cmd_dim,
    "fit": _cmd_fit,
    "simulate": _cmd_simulate,
    "check-membership": _cmd_check,
    "probe": _cmd_probe,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _emit(text, path, stream):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stream.write(text)


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    output = None
    try:
        args = build_parser().parse_args(argv)
        output = args.output
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        err = {"schema": SCHEMA, "error": {"module": "cli", "code": "usage", "message": str(exc)}}
        stdout.write(json.dumps(err) + "\n")
        return 1
    except FileNotFoundError as exc:
        err = {"schema": SCHEMA, "error": {"module": "cli", "code": "file_not_found",
                                           "message": str(exc), "path": exc.filename}}
        stdout.write(json.dumps(err) + "\n")
        return 2
    except ChainGraphError as exc:
        stdout.write(json.dumps({"schema": SCHEMA, "error": _jsonable(exc.to_json())}) + "\n")
        return 2
    if isinstance(result, str):
        _emit(result, output, stdout)
    else:
        payload = {"schema": SCHEMA, "command": args.command, **_jsonable(result)}
        _emit(json.dumps(payload, indent=2) + "\n", output, stdout)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
