import csv
import io
import json

import pytest

from ptwell.cli import fmt, fmt_complex, main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_fmt():
    assert fmt(0.1 + 0.2) == "0.3"
    assert fmt(-0.0) == "0"
    assert fmt(True) == "true"
    assert fmt(None) == ""
    assert fmt(3) == "3"
    assert fmt_complex(2j) == "0+2i"
    assert fmt_complex(1 - 0.5j) == "1-0.5i"


def test_linear_sweep_oracle(capsys):
    code, out, _ = run(["linear-sweep", "--j", "0", "--gamma-max", "1.2", "--gamma-steps", "241"], capsys)
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["gamma", "branch", "re_mu", "im_mu", "pt_defect"]
    assert len(rows) == 3 * 241
    for r in rows:
        g = float(r["gamma"])
        if g < 1 and r["branch"] != "1":
            assert abs(abs(float(r["re_mu"])) - (1 - g * g) ** 0.5) < 1e-10


def test_linear_sweep_lf_and_header(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["linear-sweep", "--j", "1", "--gamma-steps", "11", "--gamma-max", "0.5", "--out", str(out)]) == 0
    data = out.read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")
    rows = read_csv(data.decode())
    assert all(float(r["im_mu"]) != 0 for r in rows if r["branch"] in "12" and float(r["gamma"]) > 0)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["outputs"] == ["s.csv"]


def test_usage_errors(capsys):
    assert run(["linear-sweep", "--j", "0", "--gamma-steps", "1"], capsys)[0] == 2
    assert run(["linear-sweep", "--j", "x"], capsys)[0] == 2
    assert run(["linear-sweep", "--j", "0", "--gamma-max", "3"], capsys)[0] == 2
    assert run(["nosuch"], capsys)[0] == 2
    assert run(["--threads", "0", "ep2", "--j", "0"], capsys)[0] == 2


def test_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(["linear-sweep", "--j", "0", "--out", str(blocker / "sub" / "a.csv")], capsys)
    assert code == 3 and "cannot write" in err


def test_ep2(capsys):
    assert run(["ep2", "--j", "0"], capsys)[1] == "J=0 gamma_EP=1.00000000 pair=0,2\n"
    code, out, _ = run(["ep2", "--j", "1"], capsys)
    assert code == 0 and "degenerate_at_zero" in out
    code, out, _ = run(["ep2", "--j", "0.4"], capsys)
    assert 0 < float(out.split("gamma_EP=")[1].split()[0]) < 1
    assert run(["ep2", "--j", "0.4", "--bracket", "0", "0.5"], capsys)[0] == 4


def test_kato(capsys):
    code, out, _ = run(["kato", "--j", "0", "--level", "0", "--max-order", "4"], capsys)
    rows = read_csv(out)
    assert code == 0 and [r["s"] for r in rows] == ["1", "2", "3", "4"]
    assert float(rows[1]["re_mu_s"]) == 0.5 and float(rows[3]["re_mu_s"]) == 0.125
    assert abs(float(rows[0]["re_mu_s"])) < 1e-12 and abs(float(rows[2]["re_mu_s"])) < 1e-12
    assert "abs_err_gamma_0.1" in rows[0]


def test_kato_degenerate_exit(capsys):
    code, _, err = run(["kato", "--j", "1", "--level", "2"], capsys)
    assert code == 5 and "degenerate-check" in err
    assert run(["kato", "--j", "0.5", "--level", "3"], capsys)[0] == 2


def test_degenerate_check(capsys):
    code, out, _ = run(["degenerate-check", "--j", "1"], capsys)
    assert code == 0 and "pt_survives=false" in out and "0.57735026919i" in out
    _, out, _ = run(["degenerate-check", "--j", "1", "--paper-basis"], capsys)
    assert "S[0]=[0+0i, 0+2i]" in out and "S[1]=[0+2i, 0+0i]" in out
    _, out, _ = run(["degenerate-check", "--j", "0.5"], capsys)
    assert "no degeneracies" in out


def test_nonlinear_command(tmp_path):
    code = main(["nonlinear", "--j", "1", "--u", "1", "--gamma-max", "0.3", "--gamma-steps", "61",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    folds = read_csv((tmp_path / "folds.csv").read_text())
    assert len(folds) == 2
    states = read_csv((tmp_path / "states.csv").read_text())
    header = list(states[0])
    assert header[:12] == ["gamma", "branch", "re_mu", "im_mu", "re_psi1", "im_psi1", "re_psi2", "im_psi2",
                           "re_psi3", "im_psi3", "stable", "max_im_omega"]
    new = {r["branch"] for r in states if r["kind"] == "new"}
    assert len(new) == 4


def test_nonlinear_u0_reduces_to_linear(tmp_path):
    assert main(["nonlinear", "--j", "0.4", "--u", "0", "--gamma-steps", "5", "--out-dir", str(tmp_path)]) == 0
    states = read_csv((tmp_path / "states.csv").read_text())
    assert len(states) == 15
    assert (tmp_path / "folds.csv").read_text() == "branch,gamma_fold\n"


def test_currents_command(capsys):
    code, out, _ = run(["currents", "--j", "0.8", "--gamma-steps", "31", "--gamma-max", "0.3"], capsys)
    rows = read_csv(out)
    assert code == 0
    assert list(rows[0])[:8] == ["gamma", "branch", "j_ext", "j12", "j13", "ratio", "any_broken", "stable"]
    assert any(r["pt_symmetric"] == "false" for r in rows)
    for r in rows:
        if r["pt_symmetric"] == "true":
            assert abs(float(r["j_ext"]) - float(r["j12"]) - float(r["j13"])) <= 1e-9


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for a short sweep\nj = 0.4\ngamma-max = 0.5\ngamma_steps=3\n")
    code, out, _ = run(["--config", str(cfg), "linear-sweep"], capsys)
    assert code == 0 and len(read_csv(out)) == 9
    code, out, _ = run(["--config", str(cfg), "linear-sweep", "--gamma-steps", "2"], capsys)
    assert code == 0 and len(read_csv(out)) == 6
    cfg.write_text("nonsense = 1\n")
    assert run(["--config", str(cfg), "linear-sweep", "--j", "0"], capsys)[0] == 2
    assert run(["--config", str(tmp_path / "missing"), "linear-sweep", "--j", "0"], capsys)[0] == 2


def test_threads_do_not_change_output(capsys, monkeypatch):
    args = ["linear-sweep", "--j", "0.8", "--gamma-steps", "40"]
    _, a, _ = run(["--threads", "1"] + args, capsys)
    _, b, _ = run(["--threads", "3"] + args, capsys)
    monkeypatch.setenv("PTWELL_THREADS", "2")
    _, c, _ = run(args, capsys)
    assert a == b == c


@pytest.mark.parametrize("n,files", [(3, 4), (4, 4), (2, 2)])
def test_fig_panels(tmp_path, n, files):
    assert main(["fig", "--n", str(n), "--out-dir", str(tmp_path)]) == 0
    csvs = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert len(csvs) == files and all(c.startswith(f"fig{n}_") for c in csvs)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outputs"] == csvs
    if n == 3:
        js = sorted({r["J"] for r in read_csv((tmp_path / "fig3_a.csv").read_text())})
        assert js == ["0"]
        assert {read_csv((tmp_path / f"fig3_{p}.csv").read_text())[0]["J"] for p in "abcd"} == {"0", "0.1", "0.4",
                                                                                            "0.8"}
    if n == 2:
        rows = [r for r in read_csv((tmp_path / "fig2_a.csv").read_text()) if r["gamma"] == "0" and r["J"] == "0.4"]
        r0 = (2 * 0.16 + 0.25) ** 0.5
        assert [float(r["re_mu"]) for r in rows] == pytest.approx([-r0 - 0.5, r0 - 0.5, 1.0], abs=1e-10)


def test_fig_rejects_bad_n(capsys):
    assert run(["fig", "--n", "7"], capsys)[0] == 2
