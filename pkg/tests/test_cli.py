"""CLI subcommands, exit codes, and CSV stability."""

import json

from tilesync_sim.cli import CSV_COLUMNS, main


def run_cli(capsys, *argv) -> tuple[int, str]:
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


class TestRun:
    def test_mlp_1024_both_modes(self, capsys):
        code, out = run_cli(capsys, "run", "--preset", "mlp:1024",
                            "--mode", "both")
        assert code == 0
        assert "mode=stream" in out and "mode=fine" in out
        assert "waves=5" in out       # chained whole waves
        assert "waves=3.6" in out     # fractional sum

    def test_fig2_fine_rowsync_three_waves(self, capsys):
        code, out = run_cli(capsys, "run", "--preset", "fig2", "--mode",
                            "fine", "--policy", "row")
        assert code == 0
        assert "generations=3" in out
        assert "sizes=4,4,4" in out

    def test_expected_deadlock_exits_zero(self, capsys):
        code, out = run_cli(capsys, "run", "--preset", "fig2", "--mode",
                            "fine", "--no-wait-kernel", "--adversarial-order",
                            "--expect-deadlock")
        assert code == 0
        assert "deadlock=true" in out

    def test_unexpected_deadlock_exits_nonzero(self, capsys):
        code, _ = run_cli(capsys, "run", "--preset", "fig2", "--mode", "fine",
                          "--no-wait-kernel", "--adversarial-order")
        assert code == 2

    def test_unknown_preset_config_error(self, capsys):
        code, _ = run_cli(capsys, "run", "--preset", "nope:1")
        assert code == 1

    def test_csv_and_trace_files(self, capsys, tmp_path):
        csv_path = tmp_path / "m.csv"
        trace_path = tmp_path / "t.jsonl"
        code, _ = run_cli(capsys, "run", "--preset", "fig2", "--mode", "fine",
                          "--csv", str(csv_path), "--trace", str(trace_path))
        assert code == 0
        header = csv_path.read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        first = json.loads(trace_path.read_text().splitlines()[0])
        assert first["kind"] == "scheduled"


class TestCompare:
    def test_mlp_suite_matches_published_waves(self, capsys):
        code, out = run_cli(capsys, "compare", "--suite", "table5")
        assert code == 0
        lines = [l for l in out.splitlines() if l.startswith("mlp:")]
        assert len(lines) == 6
        # Right-anchored columns: stream_waves, fine_waves are -5 and -4.
        waves = {l.split()[0]: (l.split()[-5], l.split()[-4]) for l in lines}
        assert waves == {"mlp:1-64": ("2", "0.5"), "mlp:128": ("2", "0.8"),
                         "mlp:256": ("3", "1.8"), "mlp:512": ("4", "2.4"),
                         "mlp:1024": ("5", "3.6"), "mlp:2048": ("8", "7.2")}

    def test_alias_suites_identical(self, capsys):
        _, a = run_cli(capsys, "compare", "--suite", "mlp")
        _, b = run_cli(capsys, "compare", "--suite", "table5")
        assert a == b

    def test_fig2_ratio(self, capsys):
        code, out = run_cli(capsys, "compare", "--preset", "fig2")
        assert code == 0
        row = next(l for l in out.splitlines() if l.startswith("fig2"))
        assert "1.33" in row  # four stream generations over three fine ones


class TestSweep:
    def test_policy_cross_presets_row_count(self, capsys, tmp_path):
        out_path = tmp_path / "sweep.csv"
        code, _ = run_cli(capsys, "sweep", "--suite", "mlp",
                          "--policies", "tile,row", "--modes", "fine",
                          "--csv", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        # 6 presets x 2 policies x 1 mode x 2 stages + header
        assert len(lines) == 1 + 24
        runs = {tuple(l.split(",")[:3]) for l in lines[1:]}
        assert len(runs) == 12

    def test_empty_axis_is_an_error_and_writes_nothing(self, capsys,
                                                       tmp_path):
        out_path = tmp_path / "never.csv"
        code, _ = run_cli(capsys, "sweep", "--policies", "row",
                          "--csv", str(out_path))
        assert code == 1
        assert not out_path.exists()

    def test_reorder_axis_never_hurts(self, capsys, tmp_path):
        out_path = tmp_path / "reorder.csv"
        code, _ = run_cli(capsys, "sweep", "--presets", "fig2",
                          "--policies", "tile", "--modes", "fine",
                          "--reorder-loads", "both", "--csv", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()[1:]
        makespans = [int(l.split(",")[11]) for l in lines]
        off, on = makespans[0], makespans[2]
        assert on <= off

    def test_byte_identical_reruns(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            code, _ = run_cli(capsys, "sweep", "--presets",
                              "fig2,random:5", "--modes", "both",
                              "--seed", "42", "--csv", str(path))
            assert code == 0
        assert a.read_bytes() == b.read_bytes()


class TestValidate:
    def test_clean_trace_passes(self, capsys, tmp_path):
        trace_path = tmp_path / "fig2.jsonl"
        run_cli(capsys, "run", "--preset", "fig2", "--mode", "fine",
                "--trace", str(trace_path))
        code, out = run_cli(capsys, "validate", "--preset", "fig2",
                            "--trace", str(trace_path))
        assert code == 0
        assert "no dependency violations" in out

    def test_corrupted_trace_fails(self, capsys, tmp_path):
        trace_path = tmp_path / "fig2.jsonl"
        run_cli(capsys, "run", "--preset", "fig2", "--mode", "fine",
                "--trace", str(trace_path))
        lines = trace_path.read_text().splitlines()
        kept = [l for l in lines if '"post"' not in l or '"tb": 0' not in l]
        trace_path.write_text("\n".join(kept) + "\n")
        code, out = run_cli(capsys, "validate", "--preset", "fig2",
                            "--trace", str(trace_path))
        assert code == 1
        assert "violation" in out


class TestListPresets:
    def test_lists_all(self, capsys):
        code, out = run_cli(capsys, "list-presets")
        assert code == 0
        for name in ("fig2", "mlp:1024", "attn:toy", "conv128:32"):
            assert name in out
