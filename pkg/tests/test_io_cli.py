import numpy as np
import pytest

from coinfdr.cli import build_parser, main
from coinfdr.data import SummaryData
from coinfdr.io import (
    InputError,
    MissingNuError,
    RunReport,
    read_raw_matrix,
    read_report,
    read_summary_table,
    write_report,
    write_summary_table,
)
from coinfdr.simulation import ScenarioSpec, make_replicate


def _write(path, text):
    path.write_text(text)
    return path


def test_read_summary_basic(tmp_path):
    p = _write(tmp_path / "t.csv", "id,x,s2\na,1.0,0.5\nb,-2,1.5\nc,0.3,2\n")
    t = read_summary_table(p, nu=4)
    assert t.ids == ["a", "b", "c"] and t.nu == 4
    assert t.x.tolist() == [1.0, -2.0, 0.3]


def test_nu_comment_and_override(tmp_path):
    p = _write(tmp_path / "t.csv", "# nu=18\nid,x,s2\na,1,1\n")
    assert read_summary_table(p).nu == 18
    assert read_summary_table(p, nu=5).nu == 5
    q = _write(tmp_path / "q.csv", "id,x,s2\na,1,1\n")
    with pytest.raises(MissingNuError):
        read_summary_table(q)


def test_duplicate_id_line(tmp_path):
    p = _write(tmp_path / "t.csv", "# nu=3\nid,x,s2\na,1,1\nb,1,1\na,2,2\n")
    with pytest.raises(InputError, match="line 5") as err:
        read_summary_table(p)
    assert err.value.line == 5


def test_bad_number_and_negative(tmp_path):
    p = _write(tmp_path / "t.csv", "id,x,s2\na,1,1\nb,oops,1\n")
    with pytest.raises(InputError, match="line 3") as err:
        read_summary_table(p, nu=2)
    assert err.value.column == 2
    q = _write(tmp_path / "q.csv", "id,x,s2\na,1,-1\n")
    with pytest.raises(InputError):
        read_summary_table(q, nu=2)


def test_zero_s2_clamped(tmp_path):
    p = _write(tmp_path / "t.csv", "id,x,s2\na,1,0\nb,2,0.5\nc,3,2\n")
    t = read_summary_table(p, nu=3)
    data, mask = t.prepared()
    assert t.n_zero == 1
    assert data.s2.tolist() == [0.5, 0.5, 2.0] and mask.tolist() == [False, True, True]


def test_summary_roundtrip(tmp_path):
    d = SummaryData(np.array([0.1, -2.5]), np.array([1.25, 3.0]), 7, np.array(["x", "y"]))
    write_summary_table(tmp_path / "s.csv", d)
    t = read_summary_table(tmp_path / "s.csv")
    assert t.ids == ["x", "y"] and t.nu == 7
    assert t.x.tolist() == d.x.tolist() and t.s2.tolist() == d.s2.tolist()


def test_raw_matrix(tmp_path):
    p = _write(tmp_path / "r.csv", "id,a1,a2,b1\nf1,1,2,3\nf2,4,5,6\n")
    raw = read_raw_matrix(p, "two-group", n1=2)
    assert raw.values.shape == (2, 3) and raw.group_sizes == (2, 1)
    assert raw.ids.tolist() == ["f1", "f2"]
    with pytest.raises(InputError, match="out of range"):
        read_raw_matrix(p, "two-group", n1=3)
    q = _write(tmp_path / "q.csv", "f1,1,2,3\nf2,4,5\n")
    with pytest.raises(InputError, match="line 2"):
        read_raw_matrix(q, "one-group")
    z = _write(tmp_path / "z.csv", "f1,1,2,3\nf2,4,x,6\n")
    with pytest.raises(InputError, match="line 2, column 3"):
        read_raw_matrix(z, "one-group")


def test_report_roundtrip(tmp_path):
    rep = RunReport("coin-fs", 0.1, 7, {"K": 5, "c": 0.9}, ["a"], [{"id": "a", "evalue": 12.5}],
                    {"U": 0.3, "tau": [float("-inf"), 0.2]}, {"zero_s2_rows": 0}, 1.5)
    write_report(rep, tmp_path / "r.jsonl")
    assert read_report(tmp_path / "r.jsonl") == rep


@pytest.fixture(scope="module")
def table(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    rep = make_replicate(ScenarioSpec("scenario1", "SIC", "Unimodal", 0.3, 600), 1)
    s = rep.summary
    write_summary_table(d / "t.csv", SummaryData(s.x, s.s2, s.nu, np.array([f"g{i}" for i in range(600)])))
    with open(d / "raw.csv", "w") as fh:
        for i, row in enumerate(rep.raw.values):
            fh.write(f"f{i}," + ",".join(repr(float(v)) for v in row) + "\n")
    return d


def test_cli_fs_byte_identical(table, capsys):
    r1, r2 = table / "r1.jsonl", table / "r2.jsonl"
    assert main(["fs", str(table / "t.csv"), "--alpha", "0.1", "--seed", "7", "--report", str(r1)]) == 0
    assert main(["fs", str(table / "t.csv"), "--alpha", "0.1", "--seed", "7", "--report", str(r2)]) == 0
    assert r1.read_bytes() == r2.read_bytes()
    rep = read_report(r1)
    assert rep.method == "coin-fs" and rep.seed == 7
    # every default is materialised in the report
    for key in ("folds", "c", "no_randomize", "nu", "npmle", "working_prior"):
        assert key in rep.config
    assert len(rep.records) == 600
    assert "rejections" in capsys.readouterr().out


def test_cli_seed_env(table, monkeypatch):
    monkeypatch.setenv("COIN_SEED", "11")
    out = table / "env.jsonl"
    assert main(["fs", str(table / "t.csv"), "--report", str(out)]) == 0
    assert read_report(out).seed == 11


def test_cli_coin_and_ss(table):
    out = table / "c.jsonl"
    assert main(["coin", str(table / "t.csv"), "--train", str(table / "t.csv"), "--refined",
                 "--report", str(out)]) == 0
    assert read_report(out).config["refined"] is True
    out = table / "s.jsonl"
    assert main(["ss", str(table / "raw.csv"), "--n1", "10", "--report", str(out)]) == 0
    assert len(read_report(out).records) == 600


def test_cli_exit_codes(table, tmp_path, capsys):
    assert main(["fs", str(table / "t.csv"), "--alpha", "1.5"]) == 2
    with pytest.raises(SystemExit) as err:
        main(["fs", str(table / "t.csv"), "--bogus"])
    assert err.value.code == 2
    nonu = _write(tmp_path / "n.csv", "id,x,s2\na,1,1\n")
    assert main(["fs", str(nonu)]) == 2
    bad = _write(tmp_path / "b.csv", "id,x,s2\na,1,1\na,1,1\n")
    assert main(["fs", str(bad), "--nu", "3"]) == 1
    assert main(["fs", str(tmp_path / "missing.csv"), "--nu", "3"]) == 1
    assert main(["ss", str(table / "raw.csv"), "--n1", "3"]) == 2
    assert main(["simulate", "--scenario", "s2", "--g", "PM", "--reps", "1"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_simulate_table(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--scenario", "s1", "--g", "PM", "--f", "Unimodal", "--pi", "0.3",
               "--m", "200", "--reps", "2", "--methods", "oracle-coin", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "method,pi,fdr,tpr,se_fdr,se_tpr"
    assert lines[1].startswith("oracle-coin,0.3,")
    assert "se_tpr" in capsys.readouterr().out


def test_cli_paper_scale_flag():
    args = build_parser().parse_args(["simulate", "--paper-scale"])
    assert args.paper_scale is True


def test_cli_oracle_check(capsys, tmp_path):
    out = tmp_path / "o.jsonl"
    assert main(["oracle-check", "--reps", "5", "--m", "200", "--report", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.count("PASS") + text.count("FAIL") == 2
    assert len(read_report(out).records) == 2


def test_help_mentions_seed_env(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    assert "COIN_SEED" in capsys.readouterr().out
