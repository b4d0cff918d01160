"""Command-line front end."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .casestudy import CheckOutcome, load_expectations, run_all_checks, shipped_text
from .contracts import (
    CompositionError, Contract, DecompositionReport, Specification, check_decomposition, compose_contracts,
    default_jobs, quotient_contracts, refines_contract, refines_spec, saturate,
)
from .kripke import satisfies, valid_in_model
from .logic import SignatureClash
from .search import CheckResult, SearchBounds, UsageError, Verdict, entails_global
from .surface import ParseError, SourceUnit, parse_unit, render_formula, witness_unit

EXIT_OK, EXIT_FAIL, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 64
MAX_WORLDS_CAP, MAX_ANON_CAP = 6, 3


class CliError(Exception):
    pass


def _names(text: Optional[str]) -> list:
    return [n.strip() for n in text.split(",") if n.strip()] if text else []


def _load(path: str) -> SourceUnit:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"{path}: cannot read: {exc.strerror or exc}") from exc
    try:
        return parse_unit(text)
    except ParseError as exc:
        raise CliError(f"{path}:{exc.line}:{exc.col}: {exc.message}") from exc


def _lookup(table: dict, name: str, what: str):
    if name not in table:
        raise CliError(f"unknown {what} {name!r}")
    return table[name]


def _contract(unit: SourceUnit, name: str) -> Contract:
    c = _lookup(unit.contracts, name, "contract")
    return Contract(unit.signature, c.assume, c.guarantee)


def _spec(unit: SourceUnit, name: str) -> Specification:
    s = _lookup(unit.specs, name, "spec")
    sig = unit.signature if s.symbols is None else unit.signature.restrict(s.symbols)
    return Specification(sig, s.phi)


def _bounds(args) -> SearchBounds:
    if not 1 <= args.max_worlds <= MAX_WORLDS_CAP:
        raise CliError(f"--max-worlds must be between 1 and {MAX_WORLDS_CAP}")
    if not 0 <= args.max_anon <= MAX_ANON_CAP:
        raise CliError(f"--max-anon must be between 0 and {MAX_ANON_CAP}")
    access = None if args.access is None else args.access.replace("-", "_")
    timeout = None if args.timeout_ms is None else args.timeout_ms / 1000
    try:
        return SearchBounds(args.max_worlds, args.max_anon, access, args.sample, timeout)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _pinned(unit: SourceUnit, args):
    if args.pinned:
        return _lookup(unit.templates, args.pinned, "template")
    if len(unit.templates) == 1:
        return next(iter(unit.templates.values()))
    return None


def _theory(unit: SourceUnit, args) -> tuple:
    return _lookup(unit.theories, args.theory, "theory") if args.theory else ()


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _verdict_text(res: CheckResult) -> str:
    if res.verdict is Verdict.VALID:
        return "no countermodel within bounds"
    if res.verdict is Verdict.COUNTERMODEL:
        return "countermodel found"
    if res.verdict is Verdict.UNKNOWN:
        return "unknown (timeout)"
    return "not applicable"


def _result_lines(res: CheckResult, indent: str = "") -> list:
    lines = [f"{indent}{res.label}: {_verdict_text(res)}"]
    if res.bounds is not None:
        lines.append(f"{indent}  bounds: {res.bounds.describe()}")
        lines.append(f"{indent}  structures examined: {res.stats.structures}, "
                     f"feasibility calls: {res.stats.feasibility_calls}")
    for d in res.diagnostics:
        lines.append(f"{indent}  note: {d}")
    if res.witness is not None:
        lines.append(f"{indent}  witness:")
        lines.extend(f"{indent}    {line}" for line in witness_unit(res.witness, res.world).splitlines())
    return lines


def _contract_lines(name: str, c: Contract) -> list:
    return [f"contract {name} {{", f"  assume: {render_formula(c.assume)};",
            f"  guarantee: {render_formula(c.guarantee)}", "}"]


def _exit_for(verdict: Verdict) -> int:
    return {Verdict.VALID: EXIT_OK, Verdict.COUNTERMODEL: EXIT_FAIL, Verdict.UNKNOWN: EXIT_UNKNOWN,
            Verdict.NOT_APPLICABLE: EXIT_FAIL}[verdict]


def _first_witness(results) -> Optional[str]:
    for r in results:
        if r.witness is not None:
            return witness_unit(r.witness, r.world)
    return None


def _emit(args, text: str, results=()) -> None:
    if args.format == "krx":
        wit = _first_witness(results)
        text = wit if wit is not None else "# no witness\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_check_model(args) -> int:
    unit = _load(args.file)
    m = _lookup(unit.models, args.model, "model")
    f = _lookup(unit.formulas, args.formula, "formula")
    world = args.world or unit.at.get(args.model)
    if world is not None:
        if world not in m.worlds:
            raise CliError(f"unknown world {world!r}")
        value = satisfies(m, world, f)
        where = f"at {world}"
    else:
        value = valid_in_model(m, f)
        where = "in every world"
    _emit(args, f"{args.formula} {where} of {args.model}: {'true' if value else 'false'}\n")
    return EXIT_OK if value else EXIT_FAIL


def cmd_entail(args) -> int:
    unit = _load(args.file)
    premises = [_lookup(unit.formulas, n, "formula") for n in _names(args.premises)]
    conclusion = _lookup(unit.formulas, args.conclusion, "formula")
    res = entails_global(list(_theory(unit, args)) + premises, conclusion, unit.signature,
                         _pinned(unit, args), _bounds(args))
    res.label = "entailment"
    head = f"entailment {', '.join(_names(args.premises))} |= {args.conclusion}"
    _emit(args, "\n".join([head] + _result_lines(res)) + "\n", [res])
    return _exit_for(res.verdict)


def cmd_refine_spec(args) -> int:
    unit = _load(args.file)
    res = refines_spec(_spec(unit, args.left), _spec(unit, args.right), _bounds(args), _pinned(unit, args),
                       _theory(unit, args))
    _emit(args, "\n".join([f"spec refinement {args.left} <= {args.right}"] + _result_lines(res)) + "\n", [res])
    return _exit_for(res.verdict)


def cmd_refine_contract(args) -> int:
    unit = _load(args.file)
    c1, c2 = _contract(unit, args.left), _contract(unit, args.right)
    res = refines_contract(c1, c2, _bounds(args), _pinned(unit, args), _theory(unit, args))
    lines = [f"contract refinement {args.left} <= {args.right}", "saturated forms:"]
    lines += _contract_lines(args.left, saturate(c1)) + _contract_lines(args.right, saturate(c2))
    _emit(args, "\n".join(lines + _result_lines(res)) + "\n", [res])
    return _exit_for(res.verdict)


def decomposition_report(top_name: str, part_names: list, top: Contract, parts: list,
                         report: DecompositionReport, strict: bool) -> str:
    lines = [f"decomposition {top_name} <= {', '.join(part_names)}{' (strict)' if strict else ''}",
             "saturated forms:"]
    lines += _contract_lines(top_name, saturate(top))
    for name, p in zip(part_names, parts):
        lines += _contract_lines(name, saturate(p))
    for i, res in enumerate(report.results, 1):
        sub = _result_lines(res)
        lines += [f"[{i}] {sub[0]}"] + sub[1:]
    lines.append(f"overall: {_verdict_text(CheckResult(report.verdict))}")
    return "\n".join(lines) + "\n"


def cmd_decompose(args) -> int:
    unit = _load(args.file)
    names = _names(args.parts)
    if not names:
        raise CliError("--parts needs at least one contract")
    top = _contract(unit, args.top)
    parts = [_contract(unit, n) for n in names]
    report = check_decomposition(top, parts, _theory(unit, args), _bounds(args), _pinned(unit, args),
                                 args.strict, names, jobs=args.jobs)
    _emit(args, decomposition_report(args.top, names, top, parts, report, args.strict), report.results)
    return _exit_for(report.verdict)


def _emit_contract(args, name: str, c: Contract) -> int:
    _emit(args, "\n".join(_contract_lines(name, c)) + "\n")
    return EXIT_OK


def cmd_compose(args) -> int:
    unit = _load(args.file)
    names = _names(args.contracts)
    if len(names) < 2:
        raise CliError("--contracts needs at least two contracts")
    result = _contract(unit, names[0])
    for n in names[1:]:
        result = compose_contracts(result, _contract(unit, n))
    return _emit_contract(args, args.name or "_x_".join(names), result)


def cmd_quotient(args) -> int:
    unit = _load(args.file)
    result = quotient_contracts(_contract(unit, args.top), _contract(unit, args.part))
    return _emit_contract(args, args.name or f"{args.top}_by_{args.part}", result)


def cmd_saturate(args) -> int:
    unit = _load(args.file)
    return _emit_contract(args, args.contract, saturate(_contract(unit, args.contract)))


def _outcome_lines(o: CheckOutcome, expected: Optional[str]) -> list:
    mark = "" if expected is None else (" [as expected]" if o.outcome == expected else f" [EXPECTED {expected}]")
    lines = [f"check {o.name} ({o.kind}): {o.outcome}{mark}"]
    if o.report is not None:
        for i, res in enumerate(o.report.results, 1):
            sub = _result_lines(res, "  ")
            lines.append(f"  [{i}] {sub[0].strip()}")
            lines.extend(sub[1:])
    if o.result is not None:
        lines.extend(_result_lines(o.result, "  "))
    lines.extend(f"  note: {d}" for d in o.details)
    return lines


def cmd_casestudy(args) -> int:
    unit = parse_unit(shipped_text()) if args.file is None else _load(args.file)
    expected = load_expectations() if args.file is None else {}
    overrides = {}
    if args.max_worlds_given:
        overrides["max_worlds"] = args.max_worlds
    if args.timeout_ms is not None:
        overrides["timeout"] = args.timeout_ms / 1000
    _bounds(args)  # cap validation
    outcomes = run_all_checks(SearchBounds(), args.jobs, unit, overrides or None)
    lines = []
    results = []
    for o in outcomes:
        lines += _outcome_lines(o, expected.get(o.name))
        if o.report is not None:
            results += o.report.results
        elif o.result is not None:
            results.append(o.result)
    mismatches = [o.name for o in outcomes if o.name in expected and o.outcome != expected[o.name]]
    lines.append(f"summary: {len(outcomes) - len(mismatches)}/{len(outcomes)} checks as expected")
    _emit(args, "\n".join(lines) + "\n", results)
    if any(o.outcome == Verdict.UNKNOWN.value for o in outcomes):
        return EXIT_UNKNOWN
    return EXIT_FAIL if mismatches else EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--max-worlds", type=int, default=3)
    common.add_argument("--max-anon", type=int, default=1)
    common.add_argument("--access", choices=["derived", "free-s5"])
    common.add_argument("--sample", help="full, free or cell:AGENT")
    common.add_argument("--timeout-ms", type=int)
    common.add_argument("--out", help="write output here instead of standard output")
    common.add_argument("--format", choices=["text", "krx"], default="text")
    common.add_argument("--jobs", type=int, default=None)
    common.add_argument("--pinned", help="template pinning the domain (default: the unit's only template)")
    common.add_argument("--theory", help="background theory added to every premise set")

    parser = _Parser(prog="kontrakt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check-model", parents=[common], help="model-check a formula")
    p.add_argument("file")
    p.add_argument("--model", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--world")
    p.set_defaults(run=cmd_check_model)

    p = sub.add_parser("entail", parents=[common], help="bounded global consequence")
    p.add_argument("file")
    p.add_argument("--premises", default="")
    p.add_argument("--conclusion", required=True)
    p.set_defaults(run=cmd_entail)

    for name, fn, what in (("refine-spec", cmd_refine_spec, "spec"), ("refine-contract", cmd_refine_contract,
                                                                      "contract")):
        p = sub.add_parser(name, parents=[common], help=f"{what} refinement LEFT <= RIGHT")
        p.add_argument("file")
        p.add_argument("--left", required=True)
        p.add_argument("--right", required=True)
        p.set_defaults(run=fn)

    p = sub.add_parser("decompose", parents=[common], help="check a decomposition of a contract")
    p.add_argument("file")
    p.add_argument("--top", required=True)
    p.add_argument("--parts", required=True)
    p.add_argument("--strict", action="store_true", help="omit the top assumption from the guarantee obligation")
    p.set_defaults(run=cmd_decompose)

    p = sub.add_parser("compose", parents=[common], help="compose contracts")
    p.add_argument("file")
    p.add_argument("--contracts", required=True)
    p.add_argument("--name")
    p.set_defaults(run=cmd_compose)

    p = sub.add_parser("quotient", parents=[common], help="contract quotient TOP / PART")
    p.add_argument("file")
    p.add_argument("--top", required=True)
    p.add_argument("--part", required=True)
    p.add_argument("--name")
    p.set_defaults(run=cmd_quotient)

    p = sub.add_parser("saturate", parents=[common], help="normal form of a contract")
    p.add_argument("file")
    p.add_argument("--contract", required=True)
    p.set_defaults(run=cmd_saturate)

    p = sub.add_parser("casestudy", parents=[common], help="run every check of the case study")
    p.add_argument("file", nargs="?", help="unit to run instead of the shipped case study")
    p.set_defaults(run=cmd_casestudy)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.max_worlds_given = any(a == "--max-worlds" or a.startswith("--max-worlds=") for a in argv)
        if args.jobs is None:
            args.jobs = default_jobs()
        if args.jobs < 1:
            raise CliError("--jobs must be positive")
        return args.run(args)
    except CliError as exc:
        print(f"kontrakt: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, CompositionError, SignatureClash, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"kontrakt: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
