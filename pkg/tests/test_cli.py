import csv
import subprocess
import sys

import numpy as np
import pytest

from cdorate.cli import fmt, main, parse_list, parse_range
from cdorate.prob_core import binary_entropy


def run(tmp_path, *argv):
    out = tmp_path / "out.csv"
    code = main([*argv, "--out", str(out)])
    text = out.read_bytes().decode() if out.exists() else ""
    return code, text


def table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# cdorate ")
    return list(csv.DictReader(lines[1:]))


class TestFormatting:
    @pytest.mark.parametrize("x", [0.1, 1 / 3, 0.5310044064107188, 1e-9, 123456.789, 2.0**-40])
    def test_round_trips(self, x):
        assert float(fmt(x)) == x

    def test_minimum_twelve_digits(self):
        assert fmt(0.1) == "0.1"
        assert fmt(1 / 3) == repr(1 / 3)
        assert fmt(0.333333333333) == "0.333333333333"
        assert fmt(2.0**-10) == "0.0009765625"

    def test_specials(self):
        assert fmt(float("inf")) == "inf"
        assert fmt(-0.0) == "0"
        assert fmt(np.int64(7)) == "7"

    def test_lists_and_ranges(self):
        assert parse_list("0, 0.1,1e-3") == [0.0, 0.1, 1e-3]
        assert parse_list("0:0.3:0.1") == [0.0, 0.1, 0.2, 0.3]
        assert parse_range("0.3:0.4:0.05") == [0.3, 0.35, 0.4]
        for bad in ("", "a", "1:0:0.1", "0:1"):
            with pytest.raises(ValueError):
                parse_list(bad)


def test_rd_curve_visible(tmp_path):
    code, text = run(tmp_path, "rd-curve", "--delta", "0,0.01,0.05")
    assert code == 0
    assert text.splitlines()[1] == "delta,rate,lambda"
    rows = table(text)
    assert float(rows[0]["rate"]) == pytest.approx(0.5310, abs=1e-3)
    assert "\r" not in text


def test_rd_curve_identical_rows(tmp_path):
    code, text = run(tmp_path, "rd-curve", "--alpha1", "0.4", "--alpha2", "0.4",
                     "--delta", "0:0.1:0.05", "--mode", "hidden")
    assert code == 0
    assert all(float(r["rate"]) == 0.0 for r in table(text))


def test_rd_curve_both_measures(tmp_path):
    rates = {}
    for measure in ("bw", "id"):
        out = tmp_path / f"{measure}.csv"
        assert main(["rd-curve", "--measure", measure, "--delta", "0:0.2:0.05",
                     "--out", str(out)]) == 0
        rates[measure] = [float(r["rate"]) for r in table(out.read_text())]
    assert all(r >= 0 for r in rates["id"])
    assert rates["bw"] != rates["id"]


def test_fig_hidden(tmp_path):
    code, text = run(tmp_path, "fig-hidden", "--alpha2-grid", "0.6:0.7:0.05",
                     "--delta", "1e-3,1e-6")
    assert code == 0
    rows = table(text)
    assert text.splitlines()[1] == "alpha2,delta,rate"
    a2 = sorted({float(r["alpha2"]) for r in rows})
    assert a2 == [0.6, 0.65, 0.7]  # 1/3 lies outside the grid, so it is not added
    for a in a2:
        by = {float(r["delta"]): float(r["rate"]) for r in rows if float(r["alpha2"]) == a}
        assert by[1e-3] <= by[1e-6]
        assert by[1e-6] <= binary_entropy(1 / 6 + a / 2)


def test_fig_hidden_dip(tmp_path):
    code, text = run(tmp_path, "fig-hidden", "--alpha2-grid", "0.3:0.4:0.1", "--delta", "1e-4")
    assert code == 0
    rows = {float(r["alpha2"]): float(r["rate"]) for r in table(text)}
    assert rows[1 / 3] < 0.1
    assert rows[0.3] > rows[1 / 3] and rows[0.4] > rows[1 / 3]


def test_bounds(tmp_path):
    code, text = run(tmp_path, "bounds")
    assert code == 0
    row = {k: float(v) for k, v in table(text)[0].items()}
    assert row["state_entropy"] == 1.0
    assert row["outcome_entropy"] == pytest.approx(1.0, abs=1e-12)
    assert row["erasure_bound"] == pytest.approx(1.0, abs=1e-12)
    assert row["mi_lower_bound"] == pytest.approx(0.5310, abs=5e-5)
    _, text = run(tmp_path, "bounds", "--alpha1", "0.3", "--alpha2", "0.3")
    row = {k: float(v) for k, v in table(text)[0].items()}
    assert row["erasure_bound"] == 0.0
    assert row["mi_lower_bound"] <= min(row["state_entropy"], row["outcome_entropy"])


def test_ensemble_file(tmp_path):
    f = tmp_path / "e.txt"
    f.write_text("2 4\n0.5 0.5\n0.2 0.2 0.1 0.5\n0.2 0.2 0.5 0.1\n")
    code, text = run(tmp_path, "bounds", "--ensemble", str(f))
    assert code == 0
    row = table(text)[0]
    assert float(row["erasure_bound"]) < float(row["outcome_entropy"])


def test_simulate_deterministic(tmp_path):
    args = ["simulate", "--block-len", "40", "--rate", "0.2,0.8", "--trials", "20",
            "--sub-block", "10", "--seed", "4"]
    code1, a = run(tmp_path, *args)
    code2, b = run(tmp_path, *args)
    assert code1 == code2 == 0 and a == b
    rows = table(a)
    assert list(rows[0]) == ["L", "R", "trials", "mean_distortion", "overlap_fail_rate"]
    assert float(rows[0]["mean_distortion"]) > float(rows[1]["mean_distortion"])


def test_simulate_with_solved_channel(tmp_path):
    code, text = run(tmp_path, "simulate", "--block-len", "40", "--rate", "0.6", "--trials",
                     "10", "--sub-block", "20", "--delta", "0.02")
    assert code == 0
    assert len(table(text)) == 1


def test_oracle_both_modes(tmp_path):
    code, text = run(tmp_path, "oracle", "--delta", "0.05,0.5")
    assert code == 0
    rows = table(text)
    assert text.splitlines()[1] == "mode,delta,rate_solver,rate_oracle,abs_diff"
    assert [r["mode"] for r in rows] == ["visible", "visible", "hidden", "hidden"]
    big = [r for r in rows if r["delta"] == "0.5"]
    assert all(float(r["rate_solver"]) == 0 and float(r["rate_oracle"]) == 0 for r in big)


@pytest.mark.parametrize("argv,code", [
    (["rd-curve", "--alpha1", "1.5"], 2),
    (["rd-curve", "--delta", "-0.1"], 2),
    (["rd-curve", "--ensemble", "/nonexistent/file"], 2),
    (["oracle", "--ensemble", "{three}"], 2),
    (["simulate", "--rate", "0.64"], 4),
    (["rd-curve", "--delta", "0.05", "--max-iters", "1"], 3),
])
def test_exit_codes(tmp_path, argv, code):
    three = tmp_path / "three.txt"
    three.write_text("2 3\n0.5 0.5\n0.2 0.3 0.5\n0.5 0.3 0.2\n")
    argv = [a.replace("{three}", str(three)) for a in argv]
    assert main(argv + ["--out", str(tmp_path / "x.csv")]) == code


def test_bad_subcommand_is_config_error():
    with pytest.raises(SystemExit) as exc:
        main(["plot"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cdorate", "bounds"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[1].startswith("state_entropy")
