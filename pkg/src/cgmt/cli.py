"""Command-line front end: parse specs, dispatch, emit deterministic reports.

Commands cover the exact-measure engine (measure, cover-verify), subset
extraction (extract, extract-pruned, thin, besicovitch), path operations
(lebesgue-path, baire), the injection-range encodings (gadget), and the
seeded DP-vs-enumeration harness (verify-suite).

Exit codes, one per error family:

  0  success
  1  command ran to completion with a negative verdict
  2  usage error (argparse)
  3  spec or input parse failure
  4  measure precondition failure
  5  no stable index inside the window
  6  dense-open search exhausted
  7  promised mass refuted
  8  explicit work budget exhausted
  9  validation failure (code discipline, covers, extendibility)
 10  other library error
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from typing import Optional

from .core import BudgetExceeded, CgmtError, DepthCapExceeded
from .weights import AlgebraicWeight
from .trees import (
    BlockMarking,
    CodeViolation,
    NotExtendible,
    TreeSource,
)
from .measure import (
    DepthTooLarge,
    LengthViolation,
    NotACover,
    PreconditionMeasure,
    count_covers,
    htilde,
    htilde_bruteforce,
    measure_sequence,
)
from .construct import (
    DensityViolated,
    NoStableIndex,
    PromiseViolated,
    approx_subset,
    baire_intersect,
    besicovitch_extract,
    lebesgue_path,
    pruned_approx_subset,
    thinify,
)
from .gadgets import (
    GADGET_KINDS,
    InjectionTable,
    build_gadget,
    check_gadget,
    required_depth,
)
from .treespec import ParseError, parse_spec
from .report import (
    ReportDocument,
    certificate_from_obj,
    certificate_obj,
    interpolation_obj,
    measure_value_obj,
    render_csv,
    render_json,
    thinning_obj,
    weight_obj,
)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_PARSE = 3
EXIT_PRECONDITION = 4
EXIT_NO_STABLE = 5
EXIT_DENSITY = 6
EXIT_PROMISE = 7
EXIT_BUDGET = 8
EXIT_VALIDATION = 9
EXIT_LIBRARY = 10

_ERROR_FAMILIES = (
    (ParseError, EXIT_PARSE),
    (PreconditionMeasure, EXIT_PRECONDITION),
    (NoStableIndex, EXIT_NO_STABLE),
    (DensityViolated, EXIT_DENSITY),
    (PromiseViolated, EXIT_PROMISE),
    (BudgetExceeded, EXIT_BUDGET),
    (DepthCapExceeded, EXIT_VALIDATION),
    (DepthTooLarge, EXIT_VALIDATION),
    (NotACover, EXIT_VALIDATION),
    (LengthViolation, EXIT_VALIDATION),
    (CodeViolation, EXIT_VALIDATION),
    (NotExtendible, EXIT_VALIDATION),
    (CgmtError, EXIT_LIBRARY),
)


def parse_constant(text: str):
    """Exact constant: a rational literal or a JSON weight object."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            return AlgebraicWeight.from_json_obj(json.loads(stripped))
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad weight object {text!r}: {exc}") from exc
    try:
        return Fraction(stripped)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad rational constant {text!r}") from exc


def parse_dimension(text: str) -> Fraction:
    try:
        s = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad dimension {text!r}") from exc
    if s <= 0:
        raise ParseError(f"dimension must be positive, got {s}")
    return s


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise ParseError(f"bad integer list {text!r}") from exc


# -- verification harness ---------------------------------------------------------


def random_marking(rng: random.Random, block_max: int, n: int, cover_budget: int) -> BlockMarking:
    """Seeded prefix-closed marking whose enumeration cost fits the budget."""
    while True:
        block = rng.randint(0, block_max)
        levels: list[frozenset[str]] = [frozenset({""})]
        for length in range(1, block + 1):
            kept = set()
            for parent in levels[-1]:
                for bit in "01":
                    if rng.random() < 0.72:
                        kept.add(parent + bit)
            if not kept and levels[-1]:
                parent = rng.choice(sorted(levels[-1]))
                kept.add(parent + rng.choice("01"))
            levels.append(frozenset(kept))
        marking = BlockMarking(block, tuple(levels))
        if count_covers(marking, n) <= cover_budget:
            return marking


def run_verify_suite(
    trials: int,
    seed: int,
    block_max: int = 6,
    n_max: int = 2,
    cover_budget: int = 250_000,
) -> dict:
    """DP-vs-literal-enumeration comparison on seeded random markings."""
    rng = random.Random(seed)
    dimensions = (Fraction(1, 2), Fraction(2, 3), Fraction(1), Fraction(3, 2))
    mismatches = []
    for trial in range(trials):
        s = dimensions[rng.randrange(len(dimensions))]
        n = rng.randint(0, n_max)
        marking = random_marking(rng, block_max, n, cover_budget)
        fast = htilde(marking, s, n, want_witness=False).value
        slow = htilde_bruteforce(marking, s, n).value
        if not (fast - slow).is_zero():
            mismatches.append(
                {
                    "trial": trial,
                    "s": str(s),
                    "n": n,
                    "block": marking.block,
                    "dp": weight_obj(fast),
                    "enumeration": weight_obj(slow),
                }
            )
    return {
        "trials": trials,
        "block_max": block_max,
        "n_max": n_max,
        "mismatches": mismatches,
        "ok": not mismatches,
    }


# -- command handlers -------------------------------------------------------------


def _tree(args) -> TreeSource:
    return parse_spec(args.tree)


def _cmd_measure(args) -> tuple[dict, dict, int]:
    src = _tree(args)
    blocks = parse_int_list(args.blocks) if args.blocks else list(range(args.n, args.depth + 1))
    values = measure_sequence(src, parse_dimension(args.s), args.n, blocks)
    results = {"sequence": [measure_value_obj(v) for v in values]}
    inputs = {"tree": args.tree, "s": args.s, "n": args.n, "blocks": blocks}
    return inputs, results, EXIT_OK


def _cmd_cover_verify(args) -> tuple[dict, dict, int]:
    with open(args.certificate, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad certificate file: {exc}") from exc
    if isinstance(doc, dict) and "results" in doc:
        doc = doc["results"].get("certificates", [])
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list):
        raise ParseError("certificate file must hold an object or a list")
    verdicts = []
    for obj in doc:
        cert = certificate_from_obj(obj)
        verdicts.append({"stage": cert.stage, "ok": cert.verify()})
    all_ok = all(v["ok"] for v in verdicts)
    results = {"certificates": len(verdicts), "verdicts": verdicts, "all_ok": all_ok}
    return (
        {"certificate": args.certificate},
        results,
        EXIT_OK if all_ok else EXIT_VERDICT,
    )


def _cmd_extract(args, pruned: bool) -> tuple[dict, dict, int]:
    src = _tree(args)
    op = pruned_approx_subset if pruned else approx_subset
    res = op(
        src,
        parse_dimension(args.s),
        args.n,
        parse_constant(args.c),
        parse_constant(args.eps),
        window=args.window,
        budget=args.budget,
    )
    inputs = {
        "tree": args.tree,
        "s": args.s,
        "n": args.n,
        "c": args.c,
        "eps": args.eps,
        "window": args.window,
    }
    return inputs, {"interpolation": interpolation_obj(res)}, EXIT_OK


def _cmd_thin(args) -> tuple[dict, dict, int]:
    src = _tree(args)
    code, cert = thinify(
        src,
        parse_dimension(args.s),
        args.n,
        args.nu if args.nu is not None else args.n,
        parse_constant(args.c),
        parse_constant(args.theta),
        window=args.window,
        n0=args.n0,
        budget=args.budget,
    )
    inputs = {
        "tree": args.tree,
        "s": args.s,
        "n": args.n,
        "c": args.c,
        "theta": args.theta,
        "n0": args.n0,
    }
    results = {
        "certificate": thinning_obj(cert),
        "live_depth": code.live_depth,
        "replaced": list(cert.replaced()),
    }
    return inputs, results, EXIT_OK


def _cmd_besicovitch(args) -> tuple[dict, dict, int]:
    src = _tree(args)
    code, certs = besicovitch_extract(
        src,
        parse_dimension(args.s),
        parse_constant(args.c),
        args.n0,
        args.stages,
        window=args.window,
        budget=args.budget,
    )
    verified = [cert.verify() for cert in certs]
    inputs = {
        "tree": args.tree,
        "s": args.s,
        "c": args.c,
        "n0": args.n0,
        "stages": args.stages,
    }
    results = {
        "certificates": [certificate_obj(c) for c in certs],
        "verified": verified,
        "live_depth": code.live_depth,
    }
    return inputs, results, EXIT_OK if all(verified) else EXIT_VERDICT


def _cmd_lebesgue(args) -> tuple[dict, dict, int]:
    src = _tree(args)
    path = lebesgue_path(
        src,
        parse_constant(args.c),
        args.depth,
        cap=args.cap,
        budget=args.budget,
    )
    inputs = {"tree": args.tree, "c": args.c, "depth": args.depth}
    return inputs, {"path": path}, EXIT_OK


def _load_opens(path: str) -> list[list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad opens file: {exc}") from exc
    if not isinstance(doc, list) or not all(
        isinstance(code, list) and all(isinstance(p, str) for p in code) for code in doc
    ):
        raise ParseError("opens file must hold a list of prefix lists")
    return doc


def _cmd_baire(args) -> tuple[dict, dict, int]:
    src = _tree(args)
    prefix_codes = _load_opens(args.opens)

    def as_open(prefixes: list[str]):
        return lambda sigma: any(sigma.startswith(p) for p in prefixes)

    z = baire_intersect(
        src,
        [as_open(code) for code in prefix_codes],
        args.start,
        args.depth,
        cap=args.cap,
    )
    stages = []
    for i, prefixes in enumerate(prefix_codes):
        hit = next((p for p in sorted(prefixes) if z.startswith(p)), None)
        if hit is None:
            raise CgmtError(f"stage {i} recheck failed on the emitted path")
        stages.append({"stage": i, "prefix": hit})
    inputs = {"tree": args.tree, "opens": args.opens, "depth": args.depth, "start": args.start}
    return inputs, {"path": z, "stages": stages}, EXIT_OK


def _cmd_gadget(args) -> tuple[dict, dict, int]:
    try:
        values = tuple(int(v) for v in args.table.split(",") if v.strip() != "")
    except ValueError as exc:
        raise ParseError(f"bad table {args.table!r}") from exc
    table = InjectionTable(values)
    depth = args.depth if args.depth is not None else required_depth(args.kind, table)
    gadget = build_gadget(args.kind, table, depth)
    report = check_gadget(gadget, table)
    inputs = {"kind": args.kind, "table": list(values), "depth": depth}
    results = {
        "horizon": report.horizon,
        "rows": [{"n": n, "gadget": g, "direct": d} for n, g, d in report.rows],
        "ok": report.ok,
        "mismatches": list(report.mismatches()),
        "stand_in": report.stand_in,
    }
    return inputs, results, EXIT_OK if report.ok else EXIT_VERDICT


def _cmd_verify_suite(args) -> tuple[dict, dict, int]:
    seed = args.seed if args.seed is not None else 0
    results = run_verify_suite(
        args.trials,
        seed,
        block_max=args.block_max,
        n_max=args.n_max,
    )
    inputs = {"trials": args.trials, "seed": seed, "block_max": args.block_max, "n_max": args.n_max}
    return inputs, results, EXIT_OK if results["ok"] else EXIT_VERDICT


# -- argument wiring --------------------------------------------------------------


def _add_tree(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tree", required=True, help="spec file path or builtin name")


def _add_budget(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=int, default=1_000_000, help="work budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgmt",
        description="Exact Hausdorff premeasures and effective subset extraction on tree codes.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=None, help="echoed into the report")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def sub_parser(name: str, help: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(name, help=help, parents=[common])

    p = sub_parser("measure", "premeasure value sequence over blocks")
    _add_tree(p)
    p.add_argument("--s", required=True, help="dimension, a positive rational")
    p.add_argument("--n", type=int, required=True, help="granularity")
    p.add_argument("--depth", type=int, default=6, help="last block when --blocks is absent")
    p.add_argument("--blocks", default=None, help="comma-separated block list")
    p.set_defaults(handler=_cmd_measure)

    p = sub_parser("cover-verify", "recheck emitted certificates")
    p.add_argument("--certificate", required=True, help="certificate JSON path")
    p.set_defaults(handler=_cmd_cover_verify)

    for name, pruned in (("extract", False), ("extract-pruned", True)):
        p = sub_parser(name, "interpolated subset with pinned block values")
        _add_tree(p)
        p.add_argument("--s", required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--c", required=True, help="target value (rational or weight object)")
        p.add_argument("--eps", required=True, help="bracket width")
        p.add_argument("--window", type=int, default=2)
        _add_budget(p)
        p.set_defaults(handler=lambda a, _pruned=pruned: _cmd_extract(a, _pruned))

    p = sub_parser("thin", "force branches to baseline weight, keep the floor")
    _add_tree(p)
    p.add_argument("--s", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--nu", type=int, default=None, help="committed prefix block (default n)")
    p.add_argument("--c", required=True)
    p.add_argument("--theta", required=True, help="slack per branch")
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--n0", type=int, default=0, help="granularity where c was certified")
    _add_budget(p)
    p.set_defaults(handler=_cmd_thin)

    p = sub_parser("besicovitch", "staged extraction with closing upper bounds")
    _add_tree(p)
    p.add_argument("--s", required=True)
    p.add_argument("--c", required=True)
    p.add_argument("--n0", type=int, default=0)
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--window", type=int, default=2)
    _add_budget(p)
    p.set_defaults(handler=_cmd_besicovitch)

    p = sub_parser("lebesgue-path", "path through a tree of promised unit-dimension mass")
    _add_tree(p)
    p.add_argument("--c", required=True, help="promised mass")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--cap", type=int, default=None)
    _add_budget(p)
    p.set_defaults(handler=_cmd_lebesgue)

    p = sub_parser("baire", "extendible string meeting every open code")
    _add_tree(p)
    p.add_argument("--opens", required=True, help="JSON file: list of prefix lists")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--start", default="")
    p.add_argument("--cap", type=int, default=1_000_000)
    p.set_defaults(handler=_cmd_baire)

    p = sub_parser("gadget", "build one injection-range encoding and decode it")
    p.add_argument("--kind", required=True, choices=GADGET_KINDS)
    p.add_argument("--table", required=True, help="comma-separated injection values")
    p.add_argument("--depth", type=int, default=None, help="default: least decodable depth")
    p.set_defaults(handler=_cmd_gadget)

    p = sub_parser("verify-suite", "seeded DP-vs-enumeration comparison")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--block-max", dest="block_max", type=int, default=6)
    p.add_argument("--n-max", dest="n_max", type=int, default=2)
    p.set_defaults(handler=_cmd_verify_suite)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        inputs, results, code = args.handler(args)
        doc = ReportDocument(
            command=args.command,
            inputs=inputs,
            results=results,
            seed=args.seed,
        )
        sys.stdout.write(render_csv(doc) if args.format == "csv" else render_json(doc))
        return code
    except CgmtError as exc:
        for family, code in _ERROR_FAMILIES:
            if isinstance(exc, family):
                break
        else:
            code = EXIT_LIBRARY
        sys.stderr.write(f"error[{code}] {type(exc).__name__}: {exc}\n")
        return code
    except OSError as exc:
        sys.stderr.write(f"error[{EXIT_PARSE}] {type(exc).__name__}: {exc}\n")
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
