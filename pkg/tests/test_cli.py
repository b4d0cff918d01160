import subprocess
import sys

import pytest

from kontrakt.casestudy import fixture_path
from kontrakt.cli import main
from kontrakt.kripke import satisfies, valid_in_model
from kontrakt.surface import parse_unit

UAM = str(fixture_path())
LANDING = ["decompose", UAM, "--top", "C_e_SPEC", "--parts", "C_u_SL,C_u_SA", "--theory", "UamTheory"]
FAIL_2A = ["decompose", UAM, "--top", "C_u_SA", "--parts", "GNSS,GRD,LNK,FUSION", "--theory", "UamTheory"]

TOY = """\
agents { u, e }
symbols shared { pred p/0; pred q/0; }
formula P { p }
formula Q { q }
formula PQ { p & q }
formula KuP { K[u] p }
contract A { assume: p; guarantee: q }
contract B { assume: true; guarantee: p }
spec Sp { sig: all; phi: p & q }
spec Sq { sig: all; phi: q }
model M {
  worlds w1, w2;
  domain 1;
  world w1 { p = {()}; q = {}; }
  world w2 { p = {}; q = {()}; }
  access u = {(w1, w1), (w1, w2), (w2, w1), (w2, w2)};
  access e = {(w1, w1), (w2, w2)};
  prob w1 { sample {w1, w2}; w1: 1/2; w2: 1/2; }
  prob w2 { sample {w1, w2}; w1: 1/2; w2: 1/2; }
}
at w1
"""


@pytest.fixture
def toy(tmp_path):
    path = tmp_path / "toy.ksl"
    path.write_text(TOY)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_landing_exit_zero(capsys):
    code, out, _ = run(LANDING + ["--jobs", "1"], capsys)
    assert code == 0
    assert "no countermodel within bounds" in out
    assert "bounds: worlds<=3, anon<=1, access=derived, sample=cell:u" in out
    assert "valid" not in out.replace("valid_within", "")


def test_failing_decomposition_emits_witness(capsys, tmp_path):
    out_path = tmp_path / "w.krx"
    code, _, _ = run(FAIL_2A + ["--format", "krx", "--out", str(out_path), "--jobs", "1"], capsys)
    assert code == 1
    unit = parse_unit(out_path.read_text())
    (name, m), = unit.models.items()
    world = unit.at[name]
    fx = parse_unit(open(UAM).read())
    from kontrakt.contracts import Contract, decomposition_obligations
    top = Contract(fx.signature, fx.contracts["C_u_SA"].assume, fx.contracts["C_u_SA"].guarantee)
    parts = [Contract(fx.signature, fx.contracts[n].assume, fx.contracts[n].guarantee)
             for n in ("GNSS", "GRD", "LNK", "FUSION")]
    ob = decomposition_obligations(top, parts, fx.theories["UamTheory"])[0]
    assert all(valid_in_model(m, p) for p in ob.premises)
    assert not satisfies(m, world, ob.conclusion)


def test_missing_file_is_usage_error(capsys):
    code, _, err = run(["entail", "missing.ksl", "--conclusion", "X"], capsys)
    assert code == 64 and "missing.ksl" in err


def test_parse_error_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.ksl"
    bad.write_text("agents { u }\nformula F { p & }\n")
    code, _, err = run(["entail", str(bad), "--conclusion", "F"], capsys)
    assert code == 64 and "2:17" in err


def test_caps(capsys, toy):
    assert run(["entail", toy, "--conclusion", "P", "--max-worlds", "7"], capsys)[0] == 64
    assert run(["entail", toy, "--conclusion", "P", "--max-anon", "4"], capsys)[0] == 64


def test_check_model(capsys, toy):
    code, out, _ = run(["check-model", toy, "--model", "M", "--formula", "KuP"], capsys)
    assert code == 1 and "KuP at w1 of M: false" in out
    code, out, _ = run(["check-model", toy, "--model", "M", "--formula", "P", "--world", "w1"], capsys)
    assert code == 0


def test_entail(capsys, toy):
    assert run(["entail", toy, "--premises", "PQ", "--conclusion", "P"], capsys)[0] == 0
    code, out, _ = run(["entail", toy, "--premises", "P", "--conclusion", "Q"], capsys)
    assert code == 1 and "countermodel found" in out and "witness:" in out


def test_refinements(capsys, toy):
    assert run(["refine-spec", toy, "--left", "Sp", "--right", "Sq"], capsys)[0] == 0
    assert run(["refine-spec", toy, "--left", "Sq", "--right", "Sp"], capsys)[0] == 1
    code, out, _ = run(["refine-contract", toy, "--left", "A", "--right", "A"], capsys)
    assert code == 0 and "saturated forms:" in out and "guarantee: p -> q" in out


def test_algebra_commands(capsys, toy):
    code, out, _ = run(["saturate", toy, "--contract", "A"], capsys)
    assert code == 0 and "guarantee: p -> q" in out
    code, out, _ = run(["compose", toy, "--contracts", "A,B"], capsys)
    assert code == 0 and out.startswith("contract A_x_B {")
    code, out, _ = run(["quotient", toy, "--top", "A", "--part", "B"], capsys)
    assert code == 0 and "contract A_by_B {" in out
    assert run(["compose", toy, "--contracts", "A"], capsys)[0] == 64


def test_unknown_name(capsys, toy):
    assert run(["saturate", toy, "--contract", "Nope"], capsys)[0] == 64


def test_timeout_exit_two(capsys, toy):
    code, out, _ = run(["entail", toy, "--premises", "P", "--conclusion", "KuP", "--timeout-ms", "0"], capsys)
    assert code == 2 and "unknown (timeout)" in out


def test_casestudy(capsys):
    code, out, _ = run(["casestudy", "--jobs", "1"], capsys)
    assert code == 0
    assert out.rstrip().endswith("summary: 8/8 checks as expected")


@pytest.mark.parametrize("fmt", ["text", "krx"])
def test_jobs_do_not_change_output(capsys, fmt):
    outs = {run(FAIL_2A + ["--format", fmt, "--jobs", str(j)], capsys)[1] for j in (1, 8)}
    assert len(outs) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kontrakt", "saturate", UAM, "--contract", "LNK"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "contract LNK {" in proc.stdout
