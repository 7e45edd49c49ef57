"""Batch command-line front end: every operation, JSON reports, config files.

Each subcommand maps 1:1 to a library operation.  All randomness is governed
by ``--seed``; for a fixed command line and seed the report is byte-identical
except for the ``meta`` field (timestamps and wall times live there and are
excluded from the determinism contract).  Every report embeds the resolved
parameter set and the tool version.

Exit codes: 0 success / all checks PASS; 1 a check FAILED or a result
mismatched its certificate; 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, extremal, verify
from ._rng import make_rng
from .corr import FunctionTable, max_product_correlation, product_pseudorandom_test
from .cube_core import (SIDE_ALPHABET, SIDE_FULL, SIDE_ZERO_ONE, SIDE_ZERO_TWO,
                        CubeSet, disjoint_product, enumerate_lines,
                        first_line_in_set, line_count, lines_in_set, measure,
                        pullback_weights, uniform_weights)
from .dist_core import (CANONICAL_DHJ_WEIGHTS, ChainParams, chain_marginal,
                        chain_pair, dhj_distribution, line_fourth_power_law,
                        line_square_law, recorded_pair_square_law,
                        recorded_square_law)
from .increment import (DensityTriple, Diagnostic, LineFound, NewTriple,
                        ParamSet, check_structure, increment_step, main_driver,
                        uniformize)
from .restrict import Restriction, restrict_set, sample_restriction

# Deterministic node budget per second of requested search time; the flag is
# expressed in seconds but byte-identical reports require the search length to
# be a pure function of the command line, so seconds convert at a fixed rate.
NODES_PER_SECOND = 5_000_000

_DIST_BUILDERS = {
    "line": lambda: dhj_distribution(*CANONICAL_DHJ_WEIGHTS),
    "line-square": lambda: line_square_law(),
    "line-fourth-power": lambda: line_fourth_power_law(),
    "recorded-square": lambda: recorded_square_law(),
    "recorded-pair-square": lambda: recorded_pair_square_law(),
}


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, complex):
        return obj.real if obj.imag == 0 else {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (bytes, bytearray)):
        return obj.hex()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_json"):
            return _jsonable(obj.to_json())
        return _jsonable(dataclasses.asdict(obj))
    return obj


def _load_params(path: str | None) -> ParamSet:
    if path is None:
        return ParamSet()
    with open(path, encoding="utf-8") as fh:
        return ParamSet.from_json(json.load(fh))


def _load_set(path: str) -> CubeSet:
    with open(path, encoding="utf-8") as fh:
        return CubeSet.from_json(json.load(fh))


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


def _set_summary(s: CubeSet) -> dict:
    return {"n": s.n, "side": s.side, "count": int(s.count()),
            "density": s.density(), "content_key": s.content_key()}


def _random_pm1_table(n: int, seed: int, alphabet=(0, 1, 2)) -> FunctionTable:
    rng = make_rng(seed, "cli-table")
    vals = np.where(rng.random(len(alphabet) ** n) < 0.5, -1.0, 1.0)
    return FunctionTable(n, tuple(alphabet), vals.astype(np.complex128))


def _random_set(n: int, density: float, seed: int,
                side: str = SIDE_FULL) -> CubeSet:
    rng = make_rng(seed, "cli-set")
    card = len(SIDE_ALPHABET[side])
    bits = (rng.random(card ** n) < density).astype(np.uint8)
    return CubeSet.from_bits(n, side, bits)


def _dictator_triple(n: int) -> DensityTriple:
    digs = (np.arange(2 ** n) >> (n - 1)) & 1
    e1 = CubeSet.from_bits(n, SIDE_ZERO_ONE, (digs == 1).astype(np.uint8))
    e2 = CubeSet.full(n, SIDE_ZERO_TWO)
    box = disjoint_product(e1, e2)
    return DensityTriple.from_sets(box, e1, e2)


def _triple_from_args(args) -> DensityTriple:
    if getattr(args, "instance", None) == "dictator":
        if args.n is None:
            raise SystemExit2("--instance dictator requires --n")
        return _dictator_triple(args.n)
    if args.set:
        s = _load_set(args.set)
        e1 = _load_set(args.e1) if getattr(args, "e1", None) else None
        e2 = _load_set(args.e2) if getattr(args, "e2", None) else None
        if e1 is None:
            e1 = CubeSet.full(s.n, SIDE_ZERO_ONE)
        if e2 is None:
            e2 = CubeSet.full(s.n, SIDE_ZERO_TWO)
        return DensityTriple.from_sets(s, e1, e2)
    if args.n is None:
        raise SystemExit2("provide --set or --n")
    s = _random_set(args.n, args.density, args.seed)
    return DensityTriple.from_sets(s, CubeSet.full(args.n, SIDE_ZERO_ONE),
                                   CubeSet.full(args.n, SIDE_ZERO_TWO))


class SystemExit2(Exception):
    """Usage error discovered after argparse: exits with status 2."""


# ---------------------------------------------------------------------------
# subcommand implementations: each returns (result dict, exit code, stdout line)
# ---------------------------------------------------------------------------

def _cmd_lines(args, params):
    n = args.n
    result: dict = {"n": n, "formula_count": 4 ** n - 3 ** n}
    if args.set:
        s = _load_set(args.set)
        if s.n != n:
            raise SystemExit2(f"--set has n={s.n}, flag says n={n}")
        count, found = lines_in_set(s, witness_limit=args.witness_limit)
        result["set"] = _set_summary(s)
        result["count"] = count
        result["witnesses"] = [str(t) for t in found]
    else:
        result["count"] = line_count(n)
        if args.enumerate:
            result["lines"] = [str(t) for t in enumerate_lines(n)]
    line = str(result["count"]) if args.count else None
    return result, 0, line


def _cmd_measure(args, params):
    s = _load_set(args.set)
    weights = (pullback_weights(s.side) if args.weights == "pullback"
               else uniform_weights(s.side))
    result = {"set": _set_summary(s), "weights": args.weights,
              "measure": measure(s, weights)}
    return result, 0, None


def _cmd_boxprod(args, params):
    e1, e2 = _load_set(args.e1), _load_set(args.e2)
    box = disjoint_product(e1, e2)
    mu1 = measure(e1, pullback_weights(e1.side))
    mu2 = measure(e2, pullback_weights(e2.side))
    mu_box = box.density()
    result = {"e1": _set_summary(e1), "e2": _set_summary(e2),
              "box": _set_summary(box), "mu_e1": mu1, "mu_e2": mu2,
              "mu_box": mu_box, "discrepancy": abs(mu_box - mu1 * mu2)}
    if args.emit_set:
        result["box"]["set"] = box.to_json()
    return result, 0, None


_VERIFY_OPS = {
    "tables": verify.verify_table_supports,
    "connectivity": verify.verify_connectivity_claims,
    "factor-reduction": verify.verify_factor_reduction,
    "pair-square": verify.verify_mu4_support,
    "chain": verify.verify_obs_joint,
    "mainterm": lambda: verify.verify_mainterm(seed=0),
    "me1e2": lambda: verify.verify_me1e2(seed=0),
}


def _cmd_verify(args, params):
    if args.op:
        claims = []
        for op in args.op:
            claims.extend(_VERIFY_OPS[op]())
        by_id = {c.claim: {"status": c.status, "detail": c.detail}
                 for c in sorted(claims, key=lambda c: c.claim)}
        statuses = [c.status for c in claims]
        result = {"claims": by_id,
                  "summary": {"total": len(claims),
                              "pass": statuses.count(verify.PASS),
                              "fail": statuses.count(verify.FAIL),
                              "skipped": statuses.count(verify.SKIPPED)},
                  "status": verify.FAIL if verify.FAIL in statuses else verify.PASS}
    else:
        result = verify.verify_all(seed=args.seed)
    code = 0 if result["status"] == verify.PASS else 1
    return result, code, None


def _cmd_corr(args, params):
    if args.set:
        s = _load_set(args.set)
        f = FunctionTable.from_cubeset(s, shift=float(s.density()))
        weights = uniform_weights(s.side)
    else:
        if args.n is None:
            raise SystemExit2("provide --set or --n")
        f = _random_pm1_table(args.n, args.seed)
        weights = uniform_weights(SIDE_FULL)
    rep = max_product_correlation(
        f, weights, method=args.method, restarts=params.maximizer_restarts,
        tol=params.maximizer_tol, seed=args.seed,
        max_sweeps=params.maximizer_sweeps)
    result = {"n": f.n, "method": rep.method, "value": rep.value,
              "magnitude": rep.magnitude, "converged": rep.converged,
              "monotone_min_delta": rep.monotone_min_delta,
              "witness_tables": None if rep.witness is None else
              rep.witness.tables.tolist()}
    return result, 0, None


def _cmd_pseudo(args, params):
    if args.set:
        s = _load_set(args.set)
        f = FunctionTable.from_cubeset(s, shift=float(s.density()))
        mu = {a: Fraction(1, len(SIDE_ALPHABET[s.side]))
              for a in SIDE_ALPHABET[s.side]}
    else:
        if args.n is None:
            raise SystemExit2("provide --set or --n")
        f = _random_pm1_table(args.n, args.seed)
        mu = {a: Fraction(1, 3) for a in (0, 1, 2)}
    n_prime = args.nprime if args.nprime else params.tester_dimension(f.n)
    gamma = args.gamma if args.gamma is not None else params.gamma
    rep = product_pseudorandom_test(
        f, n_prime, float(gamma), mu, trials=params.tester_trials,
        seed=args.seed, restarts=params.tester_restarts,
        max_sweeps=params.tester_sweeps, tol=params.tester_tol)
    result = {"n": f.n, "n_prime": n_prime, "gamma": float(gamma),
              "verdict": rep.verdict,
              "stats": [dataclasses.asdict(st) for st in rep.stats],
              "witness": None if rep.witness is None else {
                  "delta": rep.witness.delta, "value": rep.witness.value,
                  "fixed": len(rep.witness.restriction.I)}}
    return result, 0, None


def _cmd_restrict(args, params):
    nu = {int(k): Fraction(v) for k, v in
          (pair.split(":") for pair in args.nu.split(","))}
    r = sample_restriction(args.n, float(args.delta), nu, args.seed)
    result = {"n": args.n, "delta": args.delta, "nu": nu,
              "fixed": len(r.I), "free": args.n - len(r.I),
              "I": list(r.I), "z": list(r.z)}
    if args.set:
        s = _load_set(args.set)
        out = restrict_set(s, r)
        result["set"] = _set_summary(s)
        result["restricted"] = _set_summary(out)
    return result, 0, None


def _uniformize_result(uni) -> dict:
    return {"rounds": uni.rounds, "terminated": uni.terminated,
            "nonterminated": uni.nonterminated,
            "trajectory": list(uni.trajectory),
            "not_good_mass": uni.not_good_mass,
            "actionable_mass": uni.actionable_mass,
            "entries": len(uni.state.entries),
            "weight_sum": sum((w for w, _ in uni.state.entries), Fraction(0)),
            "selected_good": uni.selected_good,
            "selected": {"n": uni.triple.n, "alpha": uni.triple.alpha,
                         "delta1": uni.triple.delta1,
                         "delta2": uni.triple.delta2,
                         "mu_box": uni.triple.mu_box,
                         "steps": len(uni.triple.provenance)}}


def _cmd_uniformize(args, params):
    t = _triple_from_args(args)
    if args.alpha is not None:
        params = dataclasses.replace(params, alpha=args.alpha)
    uni = uniformize(t, params, round_cap=args.rounds, seed=args.seed)
    result = {"input": {"n": t.n, "alpha": t.alpha, "mu_box": t.mu_box},
              **_uniformize_result(uni)}
    return result, 0, None


def _outcome_result(out) -> dict:
    if isinstance(out, LineFound):
        return {"outcome": "line-found", "stage": out.stage,
                "template": out.template_root.word,
                "template_local": out.template_local.word,
                "line_count": out.line_count}
    if isinstance(out, NewTriple):
        t = out.triple
        return {"outcome": "new-triple", "stage": out.stage, "gain": out.gain,
                "triple": {"n": t.n, "alpha": t.alpha, "delta1": t.delta1,
                           "delta2": t.delta2, "mu_box": t.mu_box,
                           "steps": len(t.provenance)}}
    return {"outcome": "diagnostic", "report": out.report}


def _cmd_increment(args, params):
    t = _triple_from_args(args)
    if args.alpha is not None:
        params = dataclasses.replace(params, alpha=args.alpha)
    out = increment_step(t, params, seed=args.seed)
    result = {"input": {"n": t.n, "alpha": t.alpha, "mu_box": t.mu_box},
              **_outcome_result(out)}
    return result, 0, None


def _cmd_drive(args, params):
    if args.set:
        s0 = _load_set(args.set)
    else:
        if args.n is None:
            raise SystemExit2("provide --set or --n")
        s0 = _random_set(args.n, args.density, args.seed)
    trace = main_driver(s0, params, step_cap=args.steps, seed=args.seed)
    result = {"input": _set_summary(s0),
              "steps": [r.to_json() for r in trace.records],
              "line": None if trace.line is None else
              _outcome_result(trace.line),
              "final": {"n": trace.final.n, "alpha": trace.final.alpha,
                        "delta1": trace.final.delta1,
                        "delta2": trace.final.delta2}}
    return result, 0, None


def _cmd_extremal(args, params):
    budget_nodes = (args.budget * NODES_PER_SECOND if args.budget
                    else extremal.DEFAULT_NODE_BUDGET)
    rep = extremal.max_line_free(args.n, node_budget=budget_nodes,
                                 seed=args.seed)
    ok = extremal.verify_certificate(rep.witness, rep.size)
    certificate = {"claimed_size": rep.size, "proven_optimal": rep.proven,
                   "set": rep.witness.to_json()}
    cert_path = Path(args.cert) if args.cert else Path(f"extremal-n{args.n}.cert.json")
    cert_path.write_text(json.dumps(_jsonable(certificate), indent=2,
                                    sort_keys=True) + "\n", encoding="utf-8")
    result = {"n": args.n, "size": rep.size, "proven": rep.proven,
              "nodes": rep.nodes, "node_budget": budget_nodes,
              "certificate_file": str(cert_path), "certificate_valid": ok,
              "witness": _set_summary(rep.witness)}
    return result, 0 if ok else 1, str(rep.size) if args.count else None


def _cmd_dist(args, params):
    if args.name in ("chain-pair", "chain-marginal"):
        cp = ChainParams.create(args.K, args.eta_prime, args.eta, args.chain_n)
        if args.name == "chain-pair":
            d = chain_pair(cp, args.i, args.j)
        else:
            d = chain_marginal(cp, args.i)
    else:
        d = _DIST_BUILDERS[args.name]()
    if args.marginal:
        names = [s.strip() for s in args.marginal.split(",")]
        d = d.marginal(names)
    rows = [{"atom": list(t), "mass": q} for t, q in sorted(d.rows)]
    result = {"name": args.name, "names": list(d.names),
              "alphabets": [list(a) for a in d.alphabets], "rows": rows}
    line = None
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow([*d.names, "mass"])
        for r in rows:
            w.writerow([*r["atom"], r["mass"]])
        line = buf.getvalue().rstrip("\n")
    return result, 0, line


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="master seed for all randomness (default 0)")
    common.add_argument("--out", type=str, default=None,
                        help="write the JSON report to this path")
    common.add_argument("--config", type=str, default=None,
                        help="parameter-set JSON file")
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap (recorded; execution is single-process)")
    common.add_argument("--budget", type=int, default=None,
                        help="search budget in seconds (converted to a "
                             "deterministic node budget)")

    p = argparse.ArgumentParser(
        prog="dhjlab",
        description="Exact desk-scale laboratory for density increments on "
                    "the 3-letter cube.")
    p.add_argument("--version", action="version", version=f"dhjlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("lines", parents=[common],
                        help="count or enumerate combinatorial lines")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--count", action="store_true",
                    help="print just the count")
    sp.add_argument("--enumerate", action="store_true",
                    help="include every template word in the report")
    sp.add_argument("--set", type=str, default=None,
                    help="count lines inside this set file instead")
    sp.add_argument("--witness-limit", type=int, default=10)
    sp.set_defaults(func=_cmd_lines)

    sp = sub.add_parser("measure", parents=[common],
                        help="density and weighted measure of a set file")
    sp.add_argument("--set", type=str, required=True)
    sp.add_argument("--weights", choices=("uniform", "pullback"),
                    default="uniform")
    sp.set_defaults(func=_cmd_measure)

    sp = sub.add_parser("boxprod", parents=[common],
                        help="disjoint product of two side sets")
    sp.add_argument("--e1", type=str, required=True)
    sp.add_argument("--e2", type=str, required=True)
    sp.add_argument("--emit-set", action="store_true")
    sp.set_defaults(func=_cmd_boxprod)

    sp = sub.add_parser("verify", parents=[common],
                        help="run the exact verification suite")
    sp.add_argument("--all", action="store_true",
                    help="run every op (default)")
    sp.add_argument("--op", action="append", choices=sorted(_VERIFY_OPS),
                    help="run a single op (repeatable)")
    sp.set_defaults(func=_cmd_verify)

    sp = sub.add_parser("corr", parents=[common],
                        help="maximize product correlation of a table")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--set", type=str, default=None)
    sp.add_argument("--method", choices=("alternating", "grid"),
                    default="alternating")
    sp.set_defaults(func=_cmd_corr)

    sp = sub.add_parser("pseudo", parents=[common],
                        help="product-pseudorandomness tester")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--set", type=str, default=None)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--nprime", type=int, default=None)
    sp.set_defaults(func=_cmd_pseudo)

    sp = sub.add_parser("restrict", parents=[common],
                        help="sample a random restriction")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--delta", type=_fraction, default=Fraction(1, 2),
                    help="per-coordinate survival probability")
    sp.add_argument("--nu", type=str, default="0:1/3,1:1/3,2:1/3",
                    help="fixing law, e.g. '0:1/3,1:1/3,2:1/3'")
    sp.add_argument("--set", type=str, default=None,
                    help="also restrict this set file")
    sp.set_defaults(func=_cmd_restrict)

    sp = sub.add_parser("uniformize", parents=[common],
                        help="run the uniformization loop on a triple")
    sp.add_argument("--set", type=str, default=None)
    sp.add_argument("--e1", type=str, default=None)
    sp.add_argument("--e2", type=str, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--density", type=float, default=0.9)
    sp.add_argument("--instance", choices=("dictator",), default=None)
    sp.add_argument("--alpha", type=_fraction, default=None)
    sp.add_argument("--rounds", type=int, default=None)
    sp.set_defaults(func=_cmd_uniformize)

    sp = sub.add_parser("increment", parents=[common],
                        help="one increment step on a triple")
    sp.add_argument("--set", type=str, default=None)
    sp.add_argument("--e1", type=str, default=None)
    sp.add_argument("--e2", type=str, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--density", type=float, default=0.9)
    sp.add_argument("--instance", choices=("dictator",), default=None)
    sp.add_argument("--alpha", type=_fraction, default=None)
    sp.set_defaults(func=_cmd_increment)

    sp = sub.add_parser("drive", parents=[common],
                        help="full driver loop on a set")
    sp.add_argument("--set", type=str, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--density", type=float, default=0.9)
    sp.add_argument("--steps", type=int, default=8)
    sp.set_defaults(func=_cmd_drive)

    sp = sub.add_parser("extremal", parents=[common],
                        help="maximum line-free subset by branch and bound")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--cert", type=str, default=None,
                    help="certificate path (default extremal-n<k>.cert.json)")
    sp.add_argument("--count", action="store_true",
                    help="print just the size")
    sp.set_defaults(func=_cmd_extremal)

    sp = sub.add_parser("dist", parents=[common],
                        help="print an exact distribution")
    sp.add_argument("--name", required=True,
                    choices=sorted(_DIST_BUILDERS) + ["chain-pair",
                                                      "chain-marginal"])
    sp.add_argument("--marginal", type=str, default=None,
                    help="comma-separated variable names")
    sp.add_argument("--csv", action="store_true",
                    help="also print the rows as CSV")
    sp.add_argument("--i", type=int, default=0)
    sp.add_argument("--j", type=int, default=1)
    sp.add_argument("--K", type=int, default=50)
    sp.add_argument("--eta", type=_fraction, default=Fraction(1, 100))
    sp.add_argument("--eta-prime", type=_fraction, default=Fraction(1, 10**6))
    sp.add_argument("--chain-n", type=int, default=10**4)
    sp.set_defaults(func=_cmd_dist)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = _load_params(args.config)
        t0 = time.time()
        result, code, line = args.func(args, params)
        report = {
            "command": args.command,
            "version": __version__,
            "seed": args.seed,
            "threads": args.threads,
            "budget": args.budget,
            "params": params.to_json(),
            "result": _jsonable(result),
            "meta": {"timestamp": datetime.now(timezone.utc).isoformat(),
                     "elapsed_seconds": round(time.time() - t0, 6)},
        }
        text = json.dumps(report, indent=2, sort_keys=True)
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        if line is not None:
            print(line)
        elif not args.out:
            print(text)
        return code
    except SystemExit2 as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
