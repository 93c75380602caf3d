"""Command-line front end.

Commands: ``entropies``, ``plan``, ``validate``, ``bounds``.

Exit codes: 0 ok, 1 input/parse/usage error, 2 dimension cap, 3 numeric
failure, 4 search budget exceeded, 5 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import closedform as cf
from . import plansearch as ps
from . import statekit as sk
from . import stateparse
from .errors import (DimensionLimitError, NumericError, ParseError, SearchBudgetExceeded,
                     StateError, TeleplanError)

EXIT_OK, EXIT_INPUT, EXIT_DIM, EXIT_NUMERIC, EXIT_BUDGET, EXIT_INVALID = range(6)

FAMILY_EXPR = {
    "bundle4": lambda args: "pairs(A-B,B-C,B-C,C-D)",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_input(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--state", metavar="FILE", help="state description file")
    src.add_argument("-e", "--expr", metavar="EXPR", help="inline state expression")
    src.add_argument("--family", nargs="+", metavar=("NAME", "ARGS"),
                     help="named family, e.g. --family ghz 4")
    p.add_argument("--renormalize", action="store_true", help="normalize explicit amplitudes")
    p.add_argument("--max-dim", type=int, default=sk.MAX_TOTAL_DIM, help="total dimension cap")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("table", "doc"), default="table")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--prune", choices=("on", "off"), default="off")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="teleplan", description="Teleportation-cost bounds for multipartite pure states")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("entropies", help="entropy of every nontrivial cut")
    _add_input(p)
    _add_common(p)
    p.add_argument("--granularity", choices=("party", "cell"), default="party")

    p = sub.add_parser("plan", help="minimum-cost teleportation plan")
    _add_input(p)
    _add_common(p)
    p.add_argument("--protocol", choices=("p1", "p2", "p3", "naive", "route"), default="p1")
    p.add_argument("--granularity", choices=("party", "cell"), default="party",
                   help="cell layout for --protocol route")
    p.add_argument("--embeddings", metavar="FILE", help="isometry file for p3")
    p.add_argument("--root", metavar="PARTY", help="start party (naive, p1)")

    p = sub.add_parser("validate", help="check searches against closed forms, or re-verify a plan")
    p.add_argument("family", nargs="?", choices=("ghz", "schmidt", "toast", "bundle4", "etoast"))
    p.add_argument("range", nargs="?", help="N range like 3..8 (eps list for etoast)")
    p.add_argument("--plan", metavar="FILE", help="plan document to re-verify")
    _add_common(p)

    p = sub.add_parser("bounds", help="E_F bounds and closed-form costs")
    p.add_argument("family", choices=("ghz", "toast"))
    p.add_argument("n", type=int, metavar="N")
    _add_common(p)
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_state(args) -> sk.StateTensor:
    if args.state:
        text = _read(args.state)
    elif args.expr is not None:
        text = args.expr
    else:
        name, *rest = args.family
        text = FAMILY_EXPR[name](rest) if name in FAMILY_EXPR else f"{name}({','.join(rest)})"
    return stateparse.loads(text, renormalize=args.renormalize, max_total_dim=args.max_dim)


def _config(args) -> ps.SearchConfig:
    if args.tol <= 0:
        raise UsageError("--tol must be positive")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    return ps.SearchConfig(tol=args.tol, prune=args.prune == "on", workers=args.workers)


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def _party(state: sk.StateTensor, name: str | None) -> int | None:
    if name is None:
        return None
    try:
        return state.party_index(name)
    except StateError:
        raise UsageError(f"unknown party {name!r}; parties are {', '.join(state.party_names)}") from None


def _parse_range(text: str | None, default):
    if text is None:
        return default
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return list(range(int(lo), int(hi) + 1))
        return [float(x) if "." in x or "e" in x else int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected LO..HI or a comma list") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_entropies(args) -> int:
    state = _load_state(args)
    config = _config(args)
    if args.granularity == "party":
        table = sk.cut_entropy_table(state, "party", workers=config.workers)
    else:
        layout = ps.prime_split(state)
        table = ps.layout_table(state, layout, ps.SearchConfig(max_cells=sk.MAX_TABLE_UNITS,
                                                               workers=config.workers))
    rows = ps.table_to_rows(table)
    if args.format == "doc":
        _emit({"granularity": args.granularity, "units": list(table.unit_names),
               "entropies": [{"subset": list(k), "ebits": v} for k, v in rows]})
    else:
        width = max(len(",".join(k)) for k, _ in rows) if rows else 0
        for k, v in rows:
            print(f"{','.join(k):<{width}}  {v:.9f}")
    return EXIT_OK


def _run_protocol(args, state, config) -> ps.TeleportPlan:
    proto = args.protocol
    root = _party(state, args.root)
    if proto == "p1":
        return ps.p1(state, config, root=root)
    if proto == "naive":
        return ps.naive_cost(state, 0 if root is None else root, config)
    if proto == "p2":
        return ps.p2(state, config)
    if proto == "route":
        layout = ps.party_layout(state) if args.granularity == "party" else ps.prime_split(state)
        return ps.route_search(state, layout, config, root=root)
    if not args.embeddings:
        raise UsageError("--protocol p3 needs --embeddings FILE")
    specs = stateparse.parse_embeddings(_read(args.embeddings), state)
    return ps.p3(state, specs, config)


def cmd_plan(args) -> int:
    state = _load_state(args)
    config = _config(args)
    plan = _run_protocol(args, state, config)
    naive_root = plan.root if plan.root is not None and plan.root >= 0 else 0
    naive = ps.naive_cost(state, naive_root, config)
    if args.format == "doc":
        doc = ps.plan_to_doc(plan)
        doc["naive_baseline"] = {"root": state.party_names[naive_root], "total_ebits": naive.total}
        _emit(doc)
    else:
        print(f"protocol {plan.protocol}  root {plan.party_name(plan.root)}  "
              f"layout {plan.layout.derivation}")
        for line in plan.describe():
            print(f"  {line}")
        print(f"total_ebits {plan.total:.9f}")
        print(f"naive({state.party_names[naive_root]}) {naive.total:.9f}")
    return EXIT_OK


def _print_checks(rows: list[tuple[str, bool, str]], fmt: str) -> None:
    if fmt == "doc":
        _emit({"checks": [{"check": c, "pass": ok, "detail": d} for c, ok, d in rows],
               "pass": all(ok for _, ok, _ in rows)})
    else:
        for c, ok, d in rows:
            print(f"{'PASS' if ok else 'FAIL'}  {c}  {d}")


def cmd_validate(args) -> int:
    if args.plan:
        if args.family:
            raise UsageError("give either a family or --plan, not both")
        try:
            doc = json.loads(_read(args.plan))
            state, layout, plan = ps.plan_from_doc(doc)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"malformed plan document: {exc}") from None
        report = ps.verify_plan(state, layout, plan, tol=args.tol)
        rows = [(v, False, "") for v in report.violations]
        rows.append(("plan replay", report.ok, f"recomputed total {report.recomputed_total:.9f}"))
        _print_checks(rows, args.format)
        return EXIT_OK if report.ok else EXIT_INVALID
    if not args.family:
        raise UsageError("validate needs a family or --plan FILE")
    values = _parse_range(args.range, None)
    if values is not None and args.family == "etoast":
        values = [float(v) for v in values]
    report = cf.cross_validate(args.family, values, _config(args))
    rows = [(c.label, c.passed, f"expected {c.expected:.9f} observed {c.observed:.9f} "
                                f"|d| {c.deviation:.3e}") for c in report.checks]
    _print_checks(rows, args.format)
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_bounds(args) -> int:
    n = args.n
    if n < 2:
        raise UsageError("N must be >= 2")
    config = _config(args)
    out: dict = {"family": args.family, "N": n}
    lines = []
    if args.family == "ghz":
        rep = cf.ef_bounds_ghz(n)
        out.update(lower=rep.lower, lower_open=rep.lower_open, upper=rep.upper,
                   upper_open=rep.upper_open, degenerate=rep.degenerate,
                   provenance=rep.provenance, notes=list(rep.notes))
        lines.append(rep.interval() + ("  (degenerate: N=2 is one EPR pair)" if rep.degenerate else ""))
        lines.append(f"provenance: {rep.provenance}")
        lines.extend(f"note: {x}" for x in rep.notes)
        if n <= 12:
            p1 = ps.p1(sk.ghz(n), config).total
            out["P1_computed"] = p1
            lines.append(f"P1 computed = {p1:.9f}")
    else:
        ef, p1c, ratio = cf.ef_toast(n), cf.p1_toast(n), cf.toast_inefficiency(n)
        out.update(E_F=ef, P1=p1c, ratio=ratio,
                   provenance="toast: E_F = C(N,2); P1 = (N-1)^2; ratio 2(N-1)/N")
        lines.append(f"E_F = {ef:g}; P1 = {p1c:g}; ratio P1/E_F = {ratio:g}")
        lines.append(f"provenance: {out['provenance']}")
        if n <= 5:
            p1 = ps.p1(sk.toast(n), config).total
            out["P1_computed"] = p1
            lines.append(f"P1 computed = {p1:.9f}")
        if n <= 3:
            p2 = ps.p2(sk.toast(n), config).total
            out["P2_computed"] = p2
            lines.append(f"P2 computed = {p2:.9f}")
    if args.format == "doc":
        _emit(out)
    else:
        print("\n".join(lines))
    return EXIT_OK


COMMANDS = {"entropies": cmd_entropies, "plan": cmd_plan, "validate": cmd_validate, "bounds": cmd_bounds}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DimensionLimitError as exc:
        print(f"dimension cap: {exc}", file=sys.stderr)
        return EXIT_DIM
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SearchBudgetExceeded as exc:
        print(f"search budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (StateError, TeleplanError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
