import math

import pytest

from mceuler.cli import _fmt_cell, main
from mceuler.reference import GL_SECOND_MOMENT_TARGET, gbm_moment

_CONV_HEADER = "seed,model,N,M,estimate,restricted,abs_error,effort"


def read_csv(path):
    comments, header, rows = [], None, []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                comments.append(line[2:])
            elif header is None:
                header = line
            else:
                rows.append(line.split(","))
    return comments, header, rows


def test_fmt_cell_roundtrips_doubles():
    for x in (1.0 / 3.0, 0.4945, 1e-17, -123.456e78):
        assert float(_fmt_cell(x)) == x
    assert _fmt_cell(None) == ""
    assert _fmt_cell(True) == "1"
    assert _fmt_cell(False) == "0"
    assert _fmt_cell(42) == "42"


def test_table_ginzburg(tmp_path):
    out = tmp_path / "table.csv"
    rc = main(["table", "--which", "ginzburg", "--n-min", "4", "--n-max", "16",
               "--out", str(out)])
    assert rc == 0
    comments, header, rows = read_csv(out)
    assert header == _CONV_HEADER
    assert comments[0].startswith("mceuler ")
    assert "command=table" in comments
    assert "which=ginzburg" in comments
    assert "reference_method=gl_known_target" in comments
    assert [r[2] for r in rows] == ["4", "8", "16"]
    assert all(r[0] == "0" and r[1] == "ginzburg_landau" for r in rows)
    assert [r[3] for r in rows] == ["16", "64", "256"]
    for r in rows:
        est, abs_err = float(r[4]), float(r[6])
        assert abs_err == abs(est - GL_SECOND_MOMENT_TARGET)
    assert [float(r[7]) for r in rows] == [64.0, 512.0, 4096.0]


def test_table_with_explicit_reference(tmp_path):
    out = tmp_path / "t.csv"
    rc = main(["table", "--which", "cubic", "--n-min", "4", "--n-max", "8",
               "--reference", "0.45", "--out", str(out)])
    assert rc == 0
    comments, _, rows = read_csv(out)
    assert "reference_method=explicit" in comments
    assert "reference_value=0.45000000000000001" in comments
    assert len(rows) == 2


def test_table_writes_to_stdout_by_default(capsys):
    rc = main(["table", "--which", "ginzburg", "--n-min", "4", "--n-max", "4"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# mceuler ")
    assert _CONV_HEADER in lines


def test_convergence_multi_seed_with_fit(tmp_path):
    out = tmp_path / "conv.csv"
    rc = main(["convergence", "--model", "ginzburg_landau", "--seeds", "0..1",
               "--n-min", "16", "--n-max", "64", "--out", str(out)])
    assert rc == 0
    comments, header, rows = read_csv(out)
    assert header == _CONV_HEADER
    assert [r[0] for r in rows] == ["0", "0", "0", "1", "1", "1"]
    assert [r[2] for r in rows] == ["16", "32", "64"] * 2
    assert "seeds=0,1" in comments
    assert any(c.startswith("fit_slope=") for c in comments)
    assert "fit_rows=3" in comments


def test_diagnose_dominator_campaign(tmp_path):
    out = tmp_path / "dom.csv"
    rc = main(["diagnose", "--kind", "dominator", "--model", "cubic",
               "--seeds", "0,1", "--n-min", "16", "--n-max", "32",
               "--out", str(out)])
    assert rc == 0
    comments, header, rows = read_csv(out)
    assert header == "seed,N,model,n_max,violations,omega_N_member"
    assert "total_violations=0" in comments
    assert len(rows) == 4
    for r in rows:
        assert r[2] == "cubic"
        assert r[3] == r[1]  # finite all the way to the last step
        assert r[4] == "0"
        assert r[5] == "0"  # event empty in this regime


def test_diagnose_moments(tmp_path):
    out = tmp_path / "mom.csv"
    rc = main(["diagnose", "--kind", "moments", "--model", "cubic",
               "--n-min", "16", "--n-max", "32", "--samples", "500",
               "--out", str(out)])
    assert rc == 0
    comments, header, rows = read_csv(out)
    assert header == "model,p,N,M,restricted_moment,finite_fraction"
    assert "event_resolved=intro" in comments
    assert len(rows) == 2
    for r in rows:
        assert float(r[4]) > 0.0
        assert r[5] == "1"


def test_diagnose_omega_prob(tmp_path):
    out = tmp_path / "prob.csv"
    rc = main(["diagnose", "--kind", "omega-prob", "--model", "ginzburg_landau",
               "--n-min", "16", "--n-max", "32", "--samples", "300",
               "--out", str(out)])
    assert rc == 0
    comments, header, rows = read_csv(out)
    assert header == "model,N,M,p_complement,std_err"
    assert "event_empty_for_N=16,32" in comments
    assert [r[3] for r in rows] == ["1", "1"]
    assert [r[4] for r in rows] == ["0", "0"]


def test_diagnose_divergence(tmp_path):
    out = tmp_path / "div.csv"
    rc = main(["diagnose", "--kind", "divergence", "--model", "cubic",
               "--model-param", "sigma_bar=0", "--x0", "10", "--steps", "10",
               "--out", str(out)])
    assert rc == 0
    _, header, rows = read_csv(out)
    assert header == "model,x0,N,T,threshold,steps_to_exceed"
    (row,) = rows
    assert row[0] == "cubic"
    assert float(row[4]) == 1e50
    assert row[5] == "5"


def test_diagnose_divergence_bounded_start(tmp_path):
    out = tmp_path / "div2.csv"
    rc = main(["diagnose", "--kind", "divergence", "--model", "cubic",
               "--model-param", "sigma_bar=0", "--x0", "0.1", "--steps", "100",
               "--out", str(out)])
    assert rc == 0
    _, _, rows = read_csv(out)
    assert rows[0][5] == ""  # threshold never reached


def test_reference_gbm_closed_form(tmp_path):
    out = tmp_path / "ref.csv"
    rc = main(["reference", "--which", "gbm", "--model-param", "a=0.5",
               "--model-param", "b=0.5", "--payoff-power", "2",
               "--out", str(out)])
    assert rc == 0
    comments, header, rows = read_csv(out)
    assert header == "method,value,std_error,seed"
    (row,) = rows
    assert row[0] == "gbm_closed_form"
    assert float(row[1]) == gbm_moment(0.5, 0.5, 1.0, 1.0, 2.0)
    assert row[2] == ""  # closed form has no statistical error
    assert row[3] == ""
    assert "param_power=2.0" in comments


def test_reference_gl_small(tmp_path):
    out = tmp_path / "gl.csv"
    rc = main(["reference", "--which", "gl", "--samples", "2000",
               "--riemann-points", "64", "--out", str(out)])
    assert rc == 0
    comments, _, rows = read_csv(out)
    assert rows[0][0] == "gl_exact_mc"
    assert abs(float(rows[0][1]) - GL_SECOND_MOMENT_TARGET) < 0.05
    assert "param_n_samples=2000" in comments


def test_reference_cubic_small_with_cache(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    cache = tmp_path / "refs.json"
    argv = ["reference", "--which", "cubic", "--n-steps", "32",
            "--cache-file", str(cache)]
    assert main(argv + ["--out", str(out1)]) == 0
    assert cache.exists()
    assert main(argv + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_validate_model_passes_for_builtin(tmp_path):
    out = tmp_path / "val.csv"
    rc = main(["validate-model", "--model", "gbm",
               "--model-param", "a=0.25,b=0.5", "--out", str(out)])
    assert rc == 0
    comments, header, rows = read_csv(out)
    assert header == "kind,which,order,x,y,lhs,rhs"
    assert "passed=1" in comments
    assert rows == []


def test_config_file_merge_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# an experiment\nwhich=ginzburg\nn_min=4\nn_max=8\nseed=3\n")
    out = tmp_path / "out.csv"
    rc = main(["table", "--config", str(cfg), "--n-max", "16",
               "--out", str(out)])
    assert rc == 0
    comments, _, rows = read_csv(out)
    assert "seed=3" in comments
    assert "n_max=16" in comments  # flag beats the config file
    assert [r[2] for r in rows] == ["4", "8", "16"]
    assert all(r[0] == "3" for r in rows)


def test_unknown_config_key_is_an_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("which=ginzburg\nwat=1\n")
    rc = main(["table", "--config", str(cfg)])
    assert rc == 2
    assert "wat" in capsys.readouterr().err


def test_worker_count_never_changes_output(tmp_path):
    outs = []
    for w in ("1", "2", "8"):
        out = tmp_path / ("w%s.csv" % w)
        rc = main(["table", "--which", "ginzburg", "--n-min", "4",
                   "--n-max", "32", "--workers", w, "--out", str(out)])
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_value_errors_exit_2(tmp_path, capsys):
    rc = main(["table", "--which", "ginzburg", "--n-min", "5", "--n-max", "8"])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")
    rc = main(["table"])  # no --which anywhere
    assert rc == 2
    rc = main(["diagnose", "--kind", "moments", "--model", "cubic",
               "--n-min", "16", "--n-max", "16", "--samples", "0"])
    assert rc == 2


def test_argparse_rejects_bad_flags():
    with pytest.raises(SystemExit):
        main(["diagnose", "--kind", "nope"])
    with pytest.raises(SystemExit):
        main(["convergence", "--seeds", "9..0"])
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("mceuler ")


def test_missing_config_file_exits_2(capsys):
    rc = main(["table", "--which", "ginzburg", "--config", "/nonexistent/x.cfg"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_seed_list_flag(tmp_path):
    out = tmp_path / "s.csv"
    rc = main(["convergence", "--model", "ginzburg_landau", "--seeds", "2,5",
               "--n-min", "16", "--n-max", "32", "--out", str(out)])
    assert rc == 0
    _, _, rows = read_csv(out)
    assert sorted(set(r[0] for r in rows)) == ["2", "5"]
