import json

import pytest

from oht.cli import (
    BENCH_COLUMNS,
    EXIT_CAPACITY,
    EXIT_USAGE,
    EXPONENT_COLUMNS,
    FIXED_COLUMNS,
    SEQ_COLUMNS,
    fmt_exp,
    fmt_prob,
    main,
    parse_sweep,
)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out.splitlines(), out.err


def rows(lines):
    return [line.split(",") for line in lines[1:]]


class TestSweepParsing:
    def test_forms(self):
        assert parse_sweep("5") == [5.0]
        assert parse_sweep("1,2,4", int) == [1, 2, 4]
        assert parse_sweep("100:400:100", int) == [100, 200, 300, 400]
        assert parse_sweep(None) == []

    @pytest.mark.parametrize("bad", ["3,2", "1,1", "5:1:1", "a,b"])
    def test_rejects(self, bad):
        with pytest.raises(Exception):
            parse_sweep(bad)


def test_number_formats():
    assert fmt_prob(0.123456789) == "0.123457"
    assert fmt_exp(0.106666) == "0.10667"


class TestExponent:
    def test_header_and_value(self, capsys):
        code, lines, _ = run(capsys, "exponent", "--kind", "thm1", "--pn", "0.4", "--pa", "0.9")
        assert code == 0 and lines[0] == ",".join(EXPONENT_COLUMNS)
        (row,) = rows(lines)
        assert row[1] == "Thm1_mis" and abs(float(row[2]) - 0.107) <= 0.002
        assert "eta_AN=" in row[4] and "eta_NA=" in row[4]

    def test_equal_distributions_zero_for_every_kind(self, capsys):
        kinds = "thm1,thm2,thm3,Thm3_fr,Thm3_fa,thm4,Thm4_fr,Thm4_fa"
        code, lines, _ = run(
            capsys, "exponent", "--kind", kinds, "--pn", "0.5", "--pa", "0.5",
            "--lambda1", "0", "--lambda2", "0", "--lambda", "0",
        )
        assert code == 0 and len(lines) == 9
        assert all(float(r[2]) == 0.0 for r in rows(lines))

    def test_infeasible_marker(self, capsys):
        code, lines, _ = run(capsys, "exponent", "--kind", "Thm4_fa", "--pn", "0.4", "--pa", "0.9", "--lambda1", "0.1", "--lambda2", "1.5")
        assert code == 0 and "feasible=false" in lines[1]

    def test_pa_sweep_rows(self, capsys):
        code, lines, _ = run(capsys, "exponent", "--pn", "0.5", "--pa-sweep", "0.1,0.3", "--grid-res", "100", "--refine", "1")
        assert code == 0 and [r[0] for r in rows(lines)] == ["0.1", "0.3"]

    def test_missing_threshold(self, capsys):
        code, _, err = run(capsys, "exponent", "--kind", "thm2", "--pn", "0.4", "--pa", "0.9")
        assert code == EXIT_USAGE and "lambda" in err


class TestSimulate:
    def test_fixed_smoke(self, capsys):
        code, lines, _ = run(
            capsys, "simulate", "--test", "fix-known", "--M", "10", "--t", "3",
            "--pn", "0.23", "--pa", "0.3", "--n", "50,100", "--trials", "10",
        )
        assert code == 0 and lines[0] == ",".join(FIXED_COLUMNS) and len(lines) == 3
        assert rows(lines)[0][6] == "nan"  # false alarm unpopulated under outliers

    def test_sequential_smoke(self, capsys):
        code, lines, _ = run(
            capsys, "simulate", "--test", "seq-unknown", "--M", "8", "--outliers", "2",
            "--pn", "0.2", "--pa", "0.6", "--lambda1", "0.001", "--lambda2", "0.01",
            "--nmin", "10", "--trials", "10",
        )
        assert code == 0 and lines[0] == ",".join(SEQ_COLUMNS) and len(lines) == 2

    def test_thread_count_byte_identical(self, tmp_path):
        outs = []
        for threads in ("1", "2"):
            path = tmp_path / f"t{threads}.csv"
            argv = ["simulate", "--test", "fix-unknown", "--M", "10", "--outliers", "2", "--lambda", "0.01",
                    "--pn", "0.23", "--pa", "0.3", "--n", "100", "--trials", "40", "--seed", "7",
                    "--threads", threads, "--out", str(path)]
            assert main(argv) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_seed_changes_output(self, capsys):
        base = ["simulate", "--test", "fix-known", "--M", "10", "--t", "3", "--pn", "0.23", "--pa", "0.3",
                "--n", "100", "--trials", "200"]
        _, a, _ = run(capsys, *base, "--seed", "1")
        _, b, _ = run(capsys, *base, "--seed", "2")
        assert a != b

    def test_config_file_and_override(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"test": "fix-known", "M": 10, "t": 3, "pn": 0.23, "pa": 0.3, "n": "60", "trials": 5}))
        code, lines, _ = run(capsys, "simulate", "--config", str(cfg), "--trials", "7")
        assert code == 0 and rows(lines)[0][:2] == ["60", "7"]

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        code, _, err = run(capsys, "simulate", "--config", str(cfg))
        assert code == EXIT_USAGE and "bogus" in err

    def test_fixed_test_without_n(self, capsys):
        code, _, _ = run(capsys, "simulate", "--test", "li", "--M", "10", "--t", "3", "--pn", "0.2", "--pa", "0.3", "--nmin", "5")
        assert code == EXIT_USAGE

    def test_zero_trials(self, capsys):
        code, _, _ = run(capsys, "simulate", "--test", "li", "--M", "10", "--t", "3", "--pn", "0.2", "--pa", "0.3", "--n", "5", "--trials", "0")
        assert code == EXIT_USAGE


class TestBench:
    def test_rows(self, capsys):
        code, lines, _ = run(capsys, "bench", "--tests", "fix-known,li", "--M", "12", "--t", "4", "--trials", "20", "--warmup", "2")
        assert code == 0 and lines[0] == ",".join(BENCH_COLUMNS)
        assert [r[0] for r in rows(lines)] == ["fix-known", "li"]
        assert all(r[-1] == "ok" for r in rows(lines))

    def test_capacity_row(self, capsys):
        argv = ["bench", "--tests", "li", "--M", "40", "--t", "10", "--trials", "5", "--warmup", "0"]
        code, lines, _ = run(capsys, *argv)
        assert code == EXIT_CAPACITY and rows(lines)[0][-1] == "capacity"
        code, _, _ = run(capsys, *argv, "--allow-capacity")
        assert code == 0

    def test_invalid_point_header_only(self, capsys):
        code, lines, _ = run(capsys, "bench", "--tests", "li", "--M", "6", "--t", "4", "--trials", "5")
        assert code == EXIT_USAGE and lines == [",".join(BENCH_COLUMNS)]


def test_unknown_figure_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["figure", "nope"])


def test_exponent_figure_smoke(capsys):
    code, lines, _ = run(capsys, "figure", "known_exponent", "--grid-res", "60", "--refine", "0")
    assert code == 0 and len(lines) == 1 + 18 * 2


def test_sequential_exponent_figure_near_nominal(capsys):
    # the limiting lambda2 shrinks towards zero as P_A approaches P_N
    code, lines, _ = run(capsys, "figure", "kl_vs_gjs_seq", "--grid-res", "40", "--refine", "0")
    assert code == 0 and len(lines) == 1 + 98 * 2
