import json

import jsonschema
import numpy as np
import pytest

from sublab.cli import REPORT_SCHEMA, UsageError, load_J, main, parse_sweep
from sublab.fixtures import builtin_corpus


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_example_analysis_passes(capsys):
    code, out, _ = run(["analyze", "--example", "ex4_3", "--param", "alpha=0.7", "--n", "20"], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["verdict"] == "v-semi-slant"
    assert abs(report["theta"] - 0.7) < 1e-12
    jsonschema.validate(report, REPORT_SCHEMA)


def test_identity_map_is_valid(tmp_path, capsys):
    path = tmp_path / "id.map"
    path.write_text("domain 2\ncodomain 2\nF1 = x1\nF2 = x2\n")
    code, out, _ = run(["analyze", "--map", str(path), "--n", "5"], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["dims"]["vertical"] == 0 and report["verdict"] == "v-invariant"


def test_radial_expected_failure_exit_code(capsys):
    code, out, _ = run(["analyze", "--example", "radial", "--check", "totally-geodesic-map",
                        "--n", "5", "--check-points", "2"], capsys)
    report = json.loads(out)
    assert code == 2
    tg = report["checks"]["totally-geodesic-map"]
    assert not tg["pass"] and tg["max_residual"] > 1e-3


def test_reports_are_byte_identical(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["analyze", "--example", "radial", "--n", "10", "--seed", "3",
                     "--report", str(p)]) in (0, 2)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    report = json.loads(paths[0].read_text())
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["sampling"]["seed"] == 3
    # lossless round trip
    assert json.loads(json.dumps(report)) == report


def test_text_format(capsys):
    code, out, _ = run(["analyze", "--example", "ex4_5", "--format", "text", "--n", "5"], capsys)
    assert code == 0 and "v-semi-invariant" in out and "j-hat" in out


@pytest.mark.parametrize("argv_tail, message", [
    (["--map", "{missing}"], "cannot read map"),
    (["--map", "{bad}"], "line 3"),
    (["--map", "{param}"], "unbound"),
    (["--example", "ex4_4", "--J", "{missing}"], "cannot read J"),
    (["--example", "ex4_4", "--J", "{badJ}"], "expected 8x8"),
    (["--example", "nosuch"], "unknown fixture"),
    (["--example", "ex4_4", "--param", "zeta=1"], "no parameter"),
    (["--map", "{odd}"], "odd dimension"),
])
def test_usage_errors_exit_1(tmp_path, capsys, argv_tail, message):
    files = {"missing": tmp_path / "nope", "bad": tmp_path / "bad.map",
             "param": tmp_path / "p.map", "badJ": tmp_path / "j.txt", "odd": tmp_path / "odd.map"}
    files["bad"].write_text("domain 2\ncodomain 1\nF1 = x1 +\n")
    files["param"].write_text("domain 2\ncodomain 1\nparam a\nF1 = a*x1\n")
    files["badJ"].write_text("0 -1\n1 0\n")
    files["odd"].write_text("domain 3\ncodomain 1\nF1 = x1\n")
    argv = ["analyze"] + [a.format(**{k: str(v) for k, v in files.items()}) for a in argv_tail]
    code, _, err = run(argv, capsys)
    assert code == 1
    assert message in err


def test_argparse_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["analyze"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["analyze", "--example", "ex4_4", "--check", "nonsense"])
    assert info.value.code == 1


def test_J_file_round_trip(tmp_path):
    j = np.array([[0.0, 0, -1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, 1, 0, 0]])
    path = tmp_path / "J.txt"
    path.write_text("\n".join(" ".join(repr(float(v)) for v in row) for row in j))
    np.testing.assert_array_equal(load_J(str(path), 4), j)
    path.write_text("1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n")
    with pytest.raises(UsageError, match="square to -I"):
        load_J(str(path), 4)


def test_custom_J_changes_the_angle(tmp_path, capsys):
    # with J e1 = e3 the horizontal plane <e1, e2> of the projection becomes totally real
    path = tmp_path / "J.txt"
    path.write_text("0 0 -1 0\n0 0 0 -1\n1 0 0 0\n0 1 0 0\n")
    code, out, _ = run(["analyze", "--example", "trivial_invariant", "--J", str(path),
                        "--n", "5", "--check", "submersion"], capsys)
    report = json.loads(out)
    assert code == 0 and report["verdict"] == "v-slant"
    assert abs(report["theta"] - np.pi / 2) < 1e-12


def test_sweep_parsing():
    assert parse_sweep("alpha=0:0.3:0.1") == ("alpha", [0.0, 0.1, 0.2, 0.3])
    with pytest.raises(UsageError):
        parse_sweep("alpha=0:1")
    with pytest.raises(UsageError):
        parse_sweep("alpha=1:0:0.1")


def test_verify_single_fixture_and_sweep(capsys):
    code, out, _ = run(["verify", "--example", "ex4_7", "--sweep", "alpha=0.2:0.4:0.2",
                        "beta=0.2:0.4:0.2", "--n", "10", "--check-points", "1"], capsys)
    assert code == 0
    assert "4/4 cells pass" in out
    assert "alpha=0.2, beta=0.2" in out  # the pi/2 cell is included and passes


def test_verify_unknown_parameter(capsys):
    code, _, err = run(["verify", "--example", "ex4_4", "--sweep", "alpha=0:1:0.5"], capsys)
    assert code == 1 and "no parameter" in err


def test_corpus_listing(capsys):
    code, out, _ = run(["corpus"], capsys)
    assert code == 0
    for fx in builtin_corpus():
        assert fx.name + ":" in out
    assert "theta 0.785398163397448" in out
    assert "derived:" in out and "stated:" in out and "trivial:" in out


def test_corpus_is_exactly_the_builtin_set():
    names = [fx.name for fx in builtin_corpus()]
    assert names == ["ex4_3", "ex4_4", "ex4_5", "ex4_6", "ex4_7", "trivial_invariant", "radial"]
