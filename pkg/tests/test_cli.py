import json
import math

import pytest
from hypothesis import given, strategies as st

from affsurf.bodies import AffineImage, Ball, HPolytope, LpBall, VPolytope
from affsurf.cli import BodySpecError, build_parser, main, parse_body, reference_asa, run
from affsurf.report import COLUMNS, ExperimentConfig, ExperimentReport, Row


def _body_rows(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_parse_simple_bodies():
    assert isinstance(parse_body("ball"), Ball)
    K = parse_body("bpn:1.5", 3)
    assert isinstance(K, LpBall) and K.dim == 3 and K.p == 1.5
    E = parse_body("ellipsoid:2,1")
    assert isinstance(E, AffineImage) and E.dim == 2
    assert parse_body("cube", 3).volume() == pytest.approx(8.0)
    assert parse_body("simplex").volume() == pytest.approx(0.5)
    assert len(parse_body("polygon:6").vertices) == 6


def test_parse_polytope_files(tmp_path):
    tri = tmp_path / "tri.json"
    tri.write_text(json.dumps({"dim": 2, "vertices": [[0, 0], [1, 0], [0, 1]]}))
    P = parse_body(f"poly:@{tri}")
    assert isinstance(P, VPolytope) and P.volume() == pytest.approx(0.5)
    sq = tmp_path / "sq.json"
    hs = [{"normal": n, "offset": 1.0} for n in ([1, 0], [-1, 0], [0, 1], [0, -1])]
    sq.write_text(json.dumps({"dim": 2, "halfspaces": hs}))
    Q = parse_body(f"poly:@{sq}")
    assert isinstance(Q, HPolytope) and Q.volume() == pytest.approx(4.0)


@pytest.mark.parametrize("spec,pos", [
    ("bpn:x", 4), ("bpn:0.5", 4), ("ellipsoid:2", 10), ("ellipsoid:2,-1", 10),
    ("torus", 0), ("ball:3", 4), ("bpn", 3), ("3ball", 0), ("ellipsoid:2,1,1,1", 10),
    ("poly:tri.json", 5), ("poly:@/nonexistent.json", 6), ("cube;", 4),
])
def test_parse_errors_report_position(spec, pos):
    with pytest.raises(BodySpecError) as exc:
        parse_body(spec)
    assert exc.value.position == pos


def test_reference_asa():
    assert reference_asa(Ball(2))[0] == pytest.approx(2 * math.pi)
    assert reference_asa(parse_body("ellipsoid:2,1"))[0] == pytest.approx(2 * math.pi * 2 ** (1 / 3))
    assert reference_asa(parse_body("cube")) == (0.0, "closed_form")


configs = st.builds(
    ExperimentConfig,
    command=st.sampled_from(["asa", "floating", "randpoly", "rolling", "bestapprox"]),
    body=st.sampled_from(["ball", "bpn:3", "ellipsoid:2,1", "cube"]),
    dim=st.sampled_from([None, 2, 3]),
    grid=st.sampled_from([None, 1024]),
    t_list=st.lists(st.floats(1e-9, 0.1), max_size=3).map(tuple),
    N_list=st.lists(st.integers(3, 5000), max_size=3).map(tuple),
    replicates=st.sampled_from([None, 10]),
    seed=st.integers(0, 2 ** 31),
    format=st.sampled_from(["csv", "json"]),
)


@given(cfg=configs)
def test_config_round_trip(cfg):
    # flags only exist on the subcommand that uses them
    if cfg.command != "floating":
        cfg.t_list = ()
    if cfg.command not in ("randpoly", "bestapprox"):
        cfg.N_list = ()
    if cfg.command != "randpoly":
        cfg.replicates = None
    ns = build_parser().parse_args(cfg.to_argv())
    assert ExperimentConfig.from_args(ns) == cfg


def test_check_suite_round_trip():
    cfg = ExperimentConfig("check", suite="curvature", seed=7)
    assert ExperimentConfig.from_args(build_parser().parse_args(cfg.to_argv())) == cfg


def test_rows_need_provenance_with_reference():
    with pytest.raises(ValueError):
        Row("x", "", 1.0, reference=1.0)
    r = Row("x", "", 2.0, reference=4.0, provenance="oracle")
    assert r.ratio == 0.5


def test_csv_and_json_have_same_rows():
    rep = ExperimentReport("asa", 3)
    rep.add("a", "p=1", 1.5, 0.1, 1.0, tolerance="rel 1", provenance="closed_form", passed=True)
    rep.add("b", "", math.nan)
    lines = _body_rows(rep.to_csv())
    assert lines[0] == ",".join(COLUMNS)
    data = json.loads(rep.to_json())
    assert [r["experiment"] for r in data["rows"]] == ["a", "b"]
    assert data["rows"][1]["estimate"] is None
    assert data["metadata"]["seed"] == 3


def test_asa_command(capsys):
    assert main(["asa", "--body", "bpn:3", "--dim", "2", "--closed-form"]) == 0
    rows = _body_rows(capsys.readouterr().out)
    assert rows[1].startswith("asa,") and rows[1].endswith("closed_form,true")
    assert rows[2].startswith("asa.closed_form,")


def test_invalid_body_exits_2(capsys):
    assert main(["asa", "--body", "bpn:x"]) == 2
    assert "position 4" in capsys.readouterr().err


def test_usage_error_exits_2(capsys):
    assert main(["asa", "--dim", "7"]) == 2
    assert main(["nonsense"]) == 2


def test_module_error_gives_error_row_and_exit_1(tmp_path):
    out = tmp_path / "r.json"
    code = main(["curvature", "--body", "cube", "--point", "1,0", "--out", str(out), "--format", "json"])
    assert code == 1
    rows = json.loads(out.read_text())["rows"]
    assert rows[-1]["experiment"] == "error" and rows[-1]["passed"] is False


def test_numeric_failure_exits_1(tmp_path):
    # far too few points for the boundary slope check
    out = tmp_path / "r.csv"
    code = main(["randpoly", "--body", "ball", "--mode", "boundary:cos:0.9", "--N", "4,5",
                 "--reps", "5", "--out", str(out)])
    assert code == 1
    assert any(line.endswith(",false") for line in out.read_text().splitlines())


def test_report_is_reproducible_apart_from_timestamp(tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p, w in zip(paths, (1, 2)):
        main(["randpoly", "--body", "ball", "--N", "50,100", "--reps", "20", "--seed", "4",
              "--workers", str(w), "--out", str(p)])
    a, b = (p.read_text().splitlines() for p in paths)
    assert [x for x in a if not x.startswith("# timestamp")] == [x for x in b if not x.startswith("# timestamp")]


def test_other_commands_run():
    for argv in (["floating", "--body", "cube", "--t", "1e-3,1e-5,1e-7,1e-9"],
                 ["floating", "--body", "ball", "--t", "1e-4,1e-6"],
                 ["rolling", "--body", "cube", "--samples", "20000", "--tgrid", "11"],
                 ["bestapprox"],
                 ["curvature", "--body", "ellipsoid:2,1", "--point", "1,1"],
                 ["curvature", "--body", "bpn:4", "--point", "1,2"]):
        cfg = ExperimentConfig.from_args(build_parser().parse_args(argv))
        rep = run(cfg)
        assert rep.ok, (argv, [r for r in rep.rows if r.passed is False])
        assert all(r.tolerance for r in rep.rows if r.passed is not None)


def test_check_inequalities_table(capsys):
    assert main(["check", "inequalities", "--seed", "7"]) == 0
    rows = _body_rows(capsys.readouterr().out)[1:]
    assert len(rows) >= 20 and all(r.endswith(",true") or r.endswith(",") for r in rows)
