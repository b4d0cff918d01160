"""UAV landing case study: signature, theory, contracts, models and expected verdicts."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Optional

from .contracts import Contract, DecompositionReport, Specification, check_decomposition, verify_implementation
from .kripke import satisfies, valid_in_model
from .logic import format_rational
from .search import CheckResult, SearchBounds, Verdict
from .surface import SourceUnit, bounds_from, parse_unit

ALPHA = Fraction(99, 100)
BETA = Fraction(1, 100)
BETA_TIGHT = Fraction(1, 200)
ALPHA_C = Fraction(199, 200)
GAMMA = Fraction(1, 2)
GAMMA_PRIME = Fraction(99, 100)

FIXTURE = "uam.ksl"
EXPECTATIONS = "uam.expect"

# Pinned geometry: p s m h R_O R_C pos_err r, then locations L1 L2 L3.
CONSTS = ["p", "s", "m", "h", "R_O", "R_C", "pos_err", "r"]
L1, L2, L3 = 8, 9, 10
POSITIONS = [0, L1, L2, L3]


def _rows(rows) -> str:
    return "{" + ", ".join("(" + ", ".join(f"@{d}" for d in row) + ")" for row in rows) + "}"


def _geometry(indent: str) -> list:
    pos_err, r = CONSTS.index("pos_err"), CONSTS.index("r")
    r_o, r_c = CONSTS.index("R_O"), CONSTS.index("R_C")
    dist = [(x, x, d) for x in POSITIONS for d in (pos_err, r)] + [(L1, 0, r), (0, L1, r)]
    lines = [f"{indent}{c} = @{i};" for i, c in enumerate(CONSTS)]
    lines.append(f"{indent}loc_e = {_rows([(L1,), (L2,), (L3,)])};")
    lines.append(f"{indent}in_e = {_rows([(L1, r_o), (L1, r_c), (L2, r_o), (L2, r_c)])};")
    lines.append(f"{indent}dist_leq = {_rows(dist)};")
    return lines


def _world(name: str, l_e_u: int, l_u_u: int, gnss: int, grd: int, ctrl: int,
           cp: dict, failure: bool = False, safe: bool = False) -> str:
    s = CONSTS.index("s")
    weather = _rows([(loc, s) for loc in (L1, L2, L3)])
    cp_rows = _rows([(loc, CONSTS.index(level)) for loc, level in sorted(cp.items())])
    parts = [f"l_e_u = @{l_e_u};", f"l_u_u = @{l_u_u};", f"l_u_gnss = @{gnss};", f"l_u_grd = @{grd};",
             f"l_ctrl_grd = @{ctrl};", f"w_e = {weather};", f"cp_e = {cp_rows};",
             f"safe_landing_e = {_rows([(l_e_u, 0)] if safe else [])};",
             f"failure_e = {_rows([()] if failure else [])};"]
    return f"  world {name} {{\n" + "".join(f"    {p}\n" for p in parts) + "  }"


def _prob(world: str, weights: list) -> str:
    sample = ", ".join(w for w, _ in weights)
    body = " ".join(f"{w}: {format_rational(q)};" for w, q in weights)
    return f"  prob {world} {{ sample {{{sample}}}; {body} }}"


def _dist(a: str, b: str, d: str) -> str:
    return f"dist_leq({a}, {b}, {d})"


def fixture_text(alpha=ALPHA, beta=BETA, beta_tight=BETA_TIGHT, alpha_c=ALPHA_C,
                 gamma=GAMMA, gamma_prime=GAMMA_PRIME) -> str:
    """The shipped ``uam.ksl``, generated from the case-study parameters."""
    q = format_rational
    acc = _dist("l_e_u", "l_u_u", "pos_err")
    a_spec = ("(forall l. loc_e(l) & in_e(l, R_O) -> !w_e(l, h)) & (forall l. in_e(l, R_C) -> in_e(l, R_O))"
              " & loc_e(l_e_u) & in_e(l_e_u, R_C)")
    functional = []
    for pred in ("w_e", "cp_e"):
        cases = [" & ".join(f"{'' if lv == hit else '!'}{pred}(l, {lv})" for lv in ("s", "m", "h"))
                 for hit in ("s", "m", "h")]
        functional.append(f"  forall l. loc_e(l) -> ({cases[0]}) | ({cases[1]}) | ({cases[2]});")

    def gnss(name, a):
        return [f"contract {name} {{",
                "  assume: !w_e(l_e_u, h);",
                f"  guarantee: Pr{{cp_e(l_e_u, s) -> {_dist('l_e_u', 'l_u_gnss', 'pos_err')}}} >= {q(a)}",
                "}"]

    def grd(name, a):
        return [f"contract {name} {{",
                "  assume: !w_e(l_e_u, h);",
                f"  guarantee: Pr{{{_dist('l_e_u', 'p', 'r')} -> {_dist('l_e_u', 'l_ctrl_grd', 'pos_err')}}} >= {q(a)}",
                "}"]

    def sl(name, b):
        return [f"contract {name} {{",
                f"  assume: K[u] (Pr{{!{acc}}} <= {q(b)});",
                "  guarantee: safe_landing_e(l_e_u, p)",
                "}"]

    bounds = "bounds(worlds=3, anon=1, access=derived, sample=cell:u)"
    lines = [
        "# UAV landing case study.",
        "# Formula encodings are reconstructions from the prose description of the scenario.",
        "",
        "agents { ctrl, e, u }",
        "",
        "symbols shared {",
        *[f"  const {c};" for c in CONSTS],
        "  pred dist_leq/3 rigid;",
        "  pred in_e/2 rigid;",
        "  pred loc_e/1 rigid;",
        "}",
        "",
        "symbols owner=e {",
        "  var l_e_u;",
        "  pred w_e/2;",
        "  pred cp_e/2;",
        "  pred safe_landing_e/2;",
        "  pred failure_e/0;",
        "}",
        "",
        "symbols owner=u {",
        "  var l_u_u;",
        "  var l_u_gnss;",
        "  var l_u_grd;",
        "}",
        "",
        "symbols owner=ctrl {",
        "  var l_ctrl_grd;",
        "}",
        "",
        "# Weather and complexity levels are functions of the location.",
        "theory UamTheory {",
        *functional,
        "}",
        "",
        "contract C_e_SPEC {",
        f"  assume: {a_spec};",
        "  guarantee: safe_landing_e(l_e_u, p)",
        "}",
        "",
        *sl("C_u_SL", beta),
        "",
        "# Same landing contract with a bound that violates 1 - alpha <= beta.",
        *sl("C_u_SL_tight", beta_tight),
        "",
        "contract C_u_SA {",
        f"  assume: {a_spec};",
        f"  guarantee: Pr{{{acc}}} >= {q(alpha)}",
        "}",
        "",
        "# Situational awareness that degrades when the environment fails.",
        "contract C_u_SAf {",
        f"  assume: {a_spec};",
        f"  guarantee: (failure_e -> Pr{{{acc}}} >= {q(gamma)}) & (!failure_e -> Pr{{{acc}}} >= {q(gamma_prime)})",
        "}",
        "",
        *gnss("GNSS", alpha_c),
        "",
        *grd("GRD", alpha_c),
        "",
        "contract LNK {",
        "  assume: true;",
        "  guarantee: eq(l_u_grd, l_ctrl_grd)",
        "}",
        "",
        "contract FUSION {",
        "  assume: true;",
        f"  guarantee: ({_dist('l_e_u', 'p', 'r')} -> eq(l_u_u, l_u_grd)) & "
        f"(!{_dist('l_e_u', 'p', 'r')} -> eq(l_u_u, l_u_gnss))",
        "}",
        "",
        "contract COMPL {",
        "  assume: true;",
        "  guarantee: forall l. loc_e(l) & !dist_leq(l, p, r) -> cp_e(l, s)",
        "}",
        "",
        "# Sensor contracts promising only the composite accuracy.",
        *gnss("GNSS_same", alpha),
        "",
        *grd("GRD_same", alpha),
        "",
        "spec I_perfect { sig: all; phi: eq(l_u_u, l_e_u) }",
        "",
        f"formula RemarkKnows {{ K[u] (Pr{{!{acc}}} <= {q(beta)}) }}",
        f"formula RemarkBound {{ Pr{{!{acc}}} <= {q(beta)} }}",
        "",
        "template UamGeometry {",
        "  domain 11;",
        *_geometry("  "),
        "  access derived;",
        "  sample cell:u;",
        "}",
        "",
        "# Every contract premise holds in this single nominal world.",
        "model UamNominal {",
        "  worlds w1;",
        "  domain 11;",
        *_geometry("  "),
        _world("w1", L1, L1, L1, L1, L1, {L1: "s", L2: "s", L3: "s"}, safe=True),
        "  access derived;",
        _prob("w1", [("w1", Fraction(1))]),
        "}",
        "",
        "# Two worlds the vehicle cannot tell apart: nominal (w1) and failed (w2).",
        "model UamRemark {",
        "  worlds w1, w2;",
        "  domain 11;",
        *_geometry("  "),
        _world("w1", L1, L1, L1, L1, L1, {L1: "s", L2: "s", L3: "s"}),
        _world("w2", L2, L1, L1, L1, L1, {L1: "s", L2: "s", L3: "s"}, failure=True),
        "  access derived;",
        _prob("w1", [("w1", gamma_prime), ("w2", 1 - gamma_prime)]),
        _prob("w2", [("w1", gamma), ("w2", 1 - gamma)]),
        "}",
        "",
        "# Sensors each meet the composite accuracy, yet their failures land on different",
        "# worlds, so the fused estimate misses it.",
        "model UamSameAlpha {",
        "  worlds w1, w2, w3;",
        "  domain 11;",
        *_geometry("  "),
        _world("w1", L1, L1, L1, L1, L1, {L1: "s", L2: "s", L3: "s"}),
        _world("w2", L2, L1, L1, L1, L1, {L1: "s", L2: "s", L3: "s"}),
        _world("w3", L1, L2, L1, L2, L2, {L1: "m", L2: "s", L3: "s"}),
        "  access derived;",
        *[_prob(w, [("w1", Fraction(49, 50)), ("w2", Fraction(1, 100)), ("w3", Fraction(1, 100))])
          for w in ("w1", "w2", "w3")],
        "}",
        "",
        f"check landing: decomposition C_e_SPEC <= C_u_SL, C_u_SA theory UamTheory pinned UamGeometry {bounds};",
        f"check landing_tight: decomposition C_e_SPEC <= C_u_SL_tight, C_u_SA theory UamTheory pinned UamGeometry {bounds};",
        f"check without_compl: decomposition C_u_SA <= GNSS, GRD, LNK, FUSION theory UamTheory pinned UamGeometry {bounds};",
        f"check with_compl: decomposition C_u_SA <= GNSS, GRD, LNK, FUSION, COMPL theory UamTheory pinned UamGeometry {bounds};",
        "check same_alpha: refutes UamSameAlpha at w1 decomposition C_u_SA <= GNSS_same, GRD_same, LNK, FUSION, COMPL"
        " theory UamTheory;",
        "check remark_knows: holds UamRemark at w1 RemarkKnows;",
        "check remark_bound: holds UamRemark at w1 RemarkBound;",
        f"check implementation: implementation I_perfect |= C_u_SA theory UamTheory pinned UamGeometry {bounds};",
    ]
    return "\n".join(lines) + "\n"


def fixture_path(name: str = FIXTURE):
    return resources.files("kontrakt") / "fixtures" / name


def shipped_text(name: str = FIXTURE) -> str:
    return fixture_path(name).read_text()


# ---------------------------------------------------------------------------
# Fixture access and check execution
# ---------------------------------------------------------------------------


@dataclass
class UamFixture:
    unit: SourceUnit
    alpha: Fraction = ALPHA
    beta: Fraction = BETA
    alpha_c: Fraction = ALPHA_C
    gamma: Fraction = GAMMA
    gamma_prime: Fraction = GAMMA_PRIME

    @property
    def signature(self):
        return self.unit.signature

    @property
    def theory(self) -> tuple:
        return self.unit.theories["UamTheory"]

    @property
    def template(self):
        return self.unit.templates["UamGeometry"]

    def contract(self, name: str) -> Contract:
        c = self.unit.contracts[name]
        return Contract(self.signature, c.assume, c.guarantee)

    @property
    def contracts(self) -> dict:
        return {name: self.contract(name) for name in self.unit.contracts}


def build_fixture() -> UamFixture:
    text = fixture_text()
    return UamFixture(parse_unit(text))


def load_expectations(text: Optional[str] = None) -> dict:
    """``name -> expected outcome`` from the plain-text expectations file."""
    text = shipped_text(EXPECTATIONS) if text is None else text
    out = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            name, outcome = line.split()
            out[name] = outcome
    return out


@dataclass
class CheckOutcome:
    """Result of one ``check`` directive."""

    name: str
    kind: str
    outcome: str  # a Verdict value, or "true"/"false" for model checks
    report: Optional[DecompositionReport] = None
    result: Optional[CheckResult] = None
    details: list = field(default_factory=list)


def _contract(unit: SourceUnit, name: str) -> Contract:
    if name not in unit.contracts:
        raise KeyError(f"unknown contract {name!r}")
    c = unit.contracts[name]
    return Contract(unit.signature, c.assume, c.guarantee)


def _spec(unit: SourceUnit, name: str) -> Specification:
    if name not in unit.specs:
        raise KeyError(f"unknown spec {name!r}")
    s = unit.specs[name]
    sig = unit.signature if s.symbols is None else unit.signature.restrict(s.symbols)
    return Specification(sig, s.phi)


def run_check(unit: SourceUnit, check, base: SearchBounds = SearchBounds(), overrides: Optional[dict] = None,
              jobs: int = 1, engine: str = "sat") -> CheckOutcome:
    """Execute one ``check`` directive of ``unit``.

    ``overrides`` (bound field -> value) take precedence over the directive's own bounds.
    """
    from dataclasses import replace

    from .contracts import refines_contract, refines_spec
    from .search import entails_global

    name = check.name or check.kind
    bounds = bounds_from(check.bounds, base)
    if overrides:
        bounds = replace(bounds, **overrides)
    theory = unit.theories.get(check.theory, ()) if check.theory else ()
    if check.theory and check.theory not in unit.theories:
        raise KeyError(f"unknown theory {check.theory!r}")
    pinned = unit.templates[check.pinned] if check.pinned else None

    if check.kind == "decomposition":
        top = _contract(unit, check.left[0])
        parts = [_contract(unit, p) for p in check.right]
        report = check_decomposition(top, parts, theory, bounds, pinned, check.strict, check.right,
                                     engine, jobs)
        return CheckOutcome(name, check.kind, report.verdict.value, report=report)
    if check.kind == "holds":
        m = unit.models[check.model]
        f = unit.formulas[check.right[0]]
        return CheckOutcome(name, check.kind, "true" if satisfies(m, check.world, f) else "false")
    if check.kind == "refutes":
        m = unit.models[check.model]
        top = _contract(unit, check.left[0])
        parts = [_contract(unit, p) for p in check.right]
        from .contracts import decomposition_obligations
        ob = decomposition_obligations(top, parts, theory, check.strict, check.right)[0]
        failing = [i for i, p in enumerate(ob.premises) if not valid_in_model(m, p)]
        refuted = not failing and not satisfies(m, check.world, ob.conclusion)
        details = [f"premise {i + 1} not valid in the model" for i in failing]
        return CheckOutcome(name, check.kind, Verdict.COUNTERMODEL.value if refuted else "no",
                            details=details)
    if check.kind == "spec_refinement":
        res = refines_spec(_spec(unit, check.left[0]), _spec(unit, check.right[0]), bounds, pinned, theory, engine)
    elif check.kind == "contract_refinement":
        res = refines_contract(_contract(unit, check.left[0]), _contract(unit, check.right[0]), bounds, pinned,
                               theory, engine)
    elif check.kind == "implementation":
        res = verify_implementation(_spec(unit, check.left[0]), _contract(unit, check.right[0]), bounds,
                                    pinned, theory, engine)
    elif check.kind == "entailment":
        premises = list(theory) + [unit.formulas[n] for n in check.left]
        res = entails_global(premises, unit.formulas[check.right[0]], unit.signature, pinned, bounds, engine)
    else:  # pragma: no cover - the parser rejects other kinds
        raise ValueError(check.kind)
    return CheckOutcome(name, check.kind, res.verdict.value, result=res)


def run_all_checks(bounds: SearchBounds = SearchBounds(), jobs: int = 1, unit: Optional[SourceUnit] = None,
                   overrides: Optional[dict] = None) -> list:
    """Every ``check`` directive of the case study, in file order."""
    unit = unit if unit is not None else parse_unit(shipped_text())
    return [run_check(unit, c, bounds, overrides, jobs) for c in unit.checks]
