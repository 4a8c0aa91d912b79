import json

import pytest

from algcurv import io as jio
from algcurv.cli import main
from algcurv.tensor_core import COVDERIV, CURV, random_element


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


@pytest.fixture
def pair_files(tmp_path):
    a, a1 = tmp_path / "A.json", tmp_path / "A1.json"
    jio.write_json(a, jio.tensor_to_dict(random_element(3, CURV, 0)))
    jio.write_json(a1, jio.tensor_to_dict(random_element(3, COVDERIV, 1)))
    return str(a), str(a1)


def test_lemma21(capsys):
    code, rep = report(capsys, "lemma21", "--mbar", "3")
    assert code == 0
    res = rep["canonical"]["result"]
    assert res["rank_R_A"] == 6 and res["rank_R_A1"] == 6
    assert rep["canonical"]["manifest"]["command"] == "lemma21"
    assert "wall_time_s" in rep["timing"]


def test_dims(capsys):
    code, rep = report(capsys, "dims", "--m", "4")
    assert code == 0
    assert rep["canonical"]["result"] == {"4": {"curv": 20, "covderiv": 60}}


def test_realize_verify(capsys, pair_files, tmp_path):
    germ = tmp_path / "germ.json"
    code, rep = report(capsys, "realize", "--in", ",".join(pair_files), "--verify", "--out", str(germ))
    assert code == 0
    assert rep["canonical"]["result"]["roundtrip"]["exact_max_error"] <= 1e-10
    code, rep = report(capsys, "curv-from-metric", "--in", str(germ))
    assert code == 0


def test_check_fails_on_bad_tensor(capsys, tmp_path):
    p = tmp_path / "bad.json"
    jio.write_json(p, {"m": 2, "kind": "curv", "entries": [[0, 1, 1, 0, 1.0]]})
    code, rep = report(capsys, "check", "--in", str(p))
    assert code == 1
    assert rep["canonical"]["passed"] is False


def test_project_then_check(capsys, tmp_path):
    raw, proj = tmp_path / "raw.json", tmp_path / "proj.json"
    jio.write_json(raw, {"m": 2, "kind": "curv", "entries": [[0, 1, 1, 0, 1.0]]})
    code, _ = report(capsys, "project", "--in", str(raw), "--out", str(proj))
    assert code == 0
    code, _ = report(capsys, "check", "--in", str(proj))
    assert code == 0
    t = jio.tensor_from_dict(jio.read_json(proj))
    # m=2: the class is spanned by A_I, four entries of size 1, so the weight is 1/4
    assert t.components[0, 1, 1, 0] == pytest.approx(0.25, abs=1e-15)


def test_malformed_json_exit_2(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"m": 2,,}')
    code, _, err = run(capsys, "check", "--in", str(p))
    assert code == 2
    assert "line 1 column" in err


def test_unknown_flag_exit_2(capsys):
    code, _, _ = run(capsys, "dims", "--bogus")
    assert code == 2


def test_seed_mandatory(capsys):
    code, _, err = run(capsys, "decompose", "--m", "2")
    assert code == 2
    assert "--seed" in err


def test_op_wrong_vector_count(capsys, pair_files):
    code, _, _ = run(capsys, "op", "skew", "--in", pair_files[0], "--vectors", "1,0,0")
    assert code == 2


def test_op_jacobi(capsys, pair_files):
    code, rep = report(capsys, "op", "jacobi", "--in", pair_files[0], "--vectors", "0,0,1", "--signature", "1,2")
    assert code == 0
    assert rep["canonical"]["checks"] == {"self_adjoint": True}


def test_signature_mismatch(capsys, pair_files):
    code, _, _ = run(capsys, "op", "jacobi", "--in", pair_files[0], "--vectors", "0,0,1", "--signature", "1,1")
    assert code == 2


def test_decompose_pair_from_files(capsys, pair_files):
    code, rep = report(capsys, "decompose", "--in", ",".join(pair_files), "--seed", "0")
    assert code == 0
    assert rep["canonical"]["result"]["target_kind"] == "pair"


def test_decompose_failure_exit_1(capsys, pair_files):
    code, rep = report(capsys, "decompose", "--in", pair_files[0], "--seed", "0",
                       "--max-terms", "1", "--restarts", "2")
    assert code == 1
    assert rep["canonical"]["checks"]["converged"] is False


def test_gf_and_graph(capsys):
    assert report(capsys, "gf-example", "--p", "3", "--seed", "0")[0] == 0
    assert report(capsys, "graph-decomp", "--m", "2", "--seed", "1")[0] == 0


def test_eig_constancy_expectation(capsys):
    code, _ = report(capsys, "eig-constancy", "--m", "4", "--seed", "0", "--expect", "constant")
    assert code == 1


def test_text_format(capsys):
    code, out, _ = run(capsys, "dims", "--m", "3", "--format", "text", "--no-timing")
    assert code == 0
    assert "curv: 6" in out and "covderiv: 15" in out
    assert "timing" not in out


def test_no_timing_is_byte_identical(capsys):
    _, a, _ = run(capsys, "span-check", "--m", "3", "--seed", "4", "--no-timing")
    _, b, _ = run(capsys, "span-check", "--m", "3", "--seed", "4", "--no-timing")
    assert a == b
