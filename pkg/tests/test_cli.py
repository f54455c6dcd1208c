import csv
import json

import numpy as np
import pytest

from latfuse import NumericalError, save_image
from latfuse.cli import (
    EXIT_INPUT,
    EXIT_NUMERICAL,
    EXIT_OK,
    find_pairs,
    main,
)
from synth import tno_style_pair


@pytest.fixture()
def pair_dir(tmp_path):
    rng = np.random.default_rng(60)
    d = tmp_path / "pairs"
    d.mkdir()
    for name in ("street", "bunker"):
        ir, vis = tno_style_pair(rng, height=48, width=64)
        save_image(ir, d / f"IR_{name}.png")
        save_image(vis, d / f"VIS_{name}.png")
    return d


def _read_csv_rows(path):
    comments = []
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line.strip())
            else:
                rows.append(line)
    return comments, list(csv.reader(rows))


class TestFindPairs:
    def test_matches_by_shared_suffix(self, pair_dir):
        pairs, unmatched = find_pairs(pair_dir)
        assert [p[0] for p in pairs] == ["bunker", "street"]
        assert unmatched == []

    def test_prefix_matching_is_case_insensitive(self, tmp_path):
        rng = np.random.default_rng(61)
        ir, vis = tno_style_pair(rng, height=48, width=64)
        save_image(ir, tmp_path / "ir_a.png")
        save_image(vis, tmp_path / "Vis_a.png")
        pairs, unmatched = find_pairs(tmp_path)
        assert len(pairs) == 1
        assert unmatched == []

    def test_unpaired_files_reported(self, tmp_path):
        save_image(np.zeros((8, 8)), tmp_path / "IR_lonely.png")
        save_image(np.zeros((8, 8)), tmp_path / "photo.png")
        pairs, unmatched = find_pairs(tmp_path)
        assert pairs == []
        assert sorted(p.name for p in unmatched) == ["IR_lonely.png", "photo.png"]

    def test_ambiguous_names_rejected(self, tmp_path):
        from latfuse import InvalidInputError

        save_image(np.zeros((8, 8)), tmp_path / "IR_a.png")
        save_image(np.zeros((8, 8)), tmp_path / "ir_a.pgm")
        with pytest.raises(InvalidInputError):
            find_pairs(tmp_path)

    def test_missing_directory_rejected(self, tmp_path):
        from latfuse import InvalidInputError

        with pytest.raises(InvalidInputError):
            find_pairs(tmp_path / "absent")


class TestFuseCommand:
    def test_writes_image_and_prints_metrics(self, pair_dir, tmp_path, capsys):
        out = tmp_path / "fused.png"
        rc = main(
            [
                "fuse",
                "--ir",
                str(pair_dir / "IR_street.png"),
                "--vis",
                str(pair_dir / "VIS_street.png"),
                "-o",
                str(out),
            ]
        )
        assert rc == EXIT_OK
        assert out.is_file()
        lines = capsys.readouterr().out.strip().splitlines()
        config_lines = [ln for ln in lines if ln.startswith("#")]
        assert "# lambda=0.8" in config_lines
        assert lines[-2] == "qabf,scd,ssim_a,nabf"
        values = [float(v) for v in lines[-1].split(",")]
        assert len(values) == 4

    def test_json_report(self, pair_dir, tmp_path, capsys):
        out = tmp_path / "fused.png"
        rc = main(
            [
                "fuse",
                "--ir",
                str(pair_dir / "IR_street.png"),
                "--vis",
                str(pair_dir / "VIS_street.png"),
                "-o",
                str(out),
                "--json",
            ]
        )
        assert rc == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert set(payload["metrics"]) == {"qabf", "scd", "ssim_a", "nabf"}
        assert payload["config"]["lambda"] == 0.8

    def test_missing_input_exits_1(self, tmp_path, capsys):
        rc = main(
            [
                "fuse",
                "--ir",
                str(tmp_path / "absent.png"),
                "--vis",
                str(tmp_path / "absent2.png"),
                "-o",
                str(tmp_path / "f.png"),
            ]
        )
        assert rc == EXIT_INPUT
        assert "error:" in capsys.readouterr().err

    def test_mismatched_pair_exits_1(self, tmp_path):
        save_image(np.zeros((16, 16)), tmp_path / "a.png")
        save_image(np.zeros((16, 20)), tmp_path / "b.png")
        rc = main(
            [
                "fuse",
                "--ir",
                str(tmp_path / "a.png"),
                "--vis",
                str(tmp_path / "b.png"),
                "-o",
                str(tmp_path / "f.png"),
            ]
        )
        assert rc == EXIT_INPUT

    def test_numerical_failure_exits_2(self, pair_dir, tmp_path, monkeypatch):
        import latfuse.cli as cli

        def boom(*args, **kwargs):
            raise NumericalError("synthetic breakdown")

        monkeypatch.setattr(cli, "fuse_pipeline", boom)
        rc = main(
            [
                "fuse",
                "--ir",
                str(pair_dir / "IR_street.png"),
                "--vis",
                str(pair_dir / "VIS_street.png"),
                "-o",
                str(tmp_path / "f.png"),
            ]
        )
        assert rc == EXIT_NUMERICAL

    def test_usage_error_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["fuse", "--ir", "x.png"])
        assert exc.value.code == EXIT_INPUT

    def test_unknown_command_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["explode"])
        assert exc.value.code == EXIT_INPUT

    def test_invalid_lambda_exits_1(self, pair_dir, tmp_path):
        rc = main(
            [
                "fuse",
                "--ir",
                str(pair_dir / "IR_street.png"),
                "--vis",
                str(pair_dir / "VIS_street.png"),
                "-o",
                str(tmp_path / "f.png"),
                "--lambda",
                "-2",
            ]
        )
        assert rc == EXIT_INPUT


class TestDecomposeCommand:
    def test_writes_three_parts_twice(self, pair_dir, tmp_path):
        out = tmp_path / "parts"
        rc = main(
            [
                "decompose",
                str(pair_dir / "IR_street.png"),
                "-o",
                str(out),
                "--max-iter",
                "400",
            ]
        )
        assert rc == EXIT_OK
        names = sorted(p.name for p in out.iterdir())
        assert names == [
            "IR_street_low_rank.csv",
            "IR_street_low_rank.png",
            "IR_street_residual.csv",
            "IR_street_residual.png",
            "IR_street_saliency.csv",
            "IR_street_saliency.png",
        ]

    def test_csv_matrices_reconstruct_input(self, pair_dir, tmp_path):
        from latfuse import load_image

        out = tmp_path / "parts"
        rc = main(["decompose", str(pair_dir / "IR_street.png"), "-o", str(out)])
        assert rc == EXIT_OK
        img = load_image(pair_dir / "IR_street.png")
        total = np.zeros_like(img)
        for part in ("low_rank", "saliency", "residual"):
            total += np.loadtxt(out / f"IR_street_{part}.csv", delimiter=",")
        assert np.abs(total - img).max() <= 1e-12


class TestProfileCommand:
    def test_fused_column_is_sum_of_sources(self, pair_dir, tmp_path):
        out = tmp_path / "profile.csv"
        rc = main(
            [
                "profile",
                "--ir",
                str(pair_dir / "IR_street.png"),
                "--vis",
                str(pair_dir / "VIS_street.png"),
                "--row",
                "24",
                "-o",
                str(out),
            ]
        )
        assert rc == EXIT_OK
        comments, rows = _read_csv_rows(out)
        assert any(c.startswith("# lambda=") for c in comments)
        assert rows[0] == ["column", "ir_saliency", "vis_saliency", "fused_saliency"]
        body = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        assert body.shape[0] == 64
        assert np.abs(body[:, 0] + body[:, 1] - body[:, 2]).max() <= 1e-12

    def test_row_out_of_range_exits_1(self, pair_dir, tmp_path):
        rc = main(
            [
                "profile",
                "--ir",
                str(pair_dir / "IR_street.png"),
                "--vis",
                str(pair_dir / "VIS_street.png"),
                "--row",
                "999",
                "-o",
                str(tmp_path / "p.csv"),
            ]
        )
        assert rc == EXIT_INPUT


class TestBenchCommand:
    def test_csv_report_structure(self, pair_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("LATFUSE_THREADS", "2")
        report = tmp_path / "report.csv"
        rc = main(["bench", "--pairs", str(pair_dir), "-o", str(report)])
        assert rc == EXIT_OK
        comments, rows = _read_csv_rows(report)
        assert any(c == "# lambda=0.8" for c in comments)
        assert rows[0] == ["pair", "qabf", "scd", "ssim_a", "nabf", "iterations"]
        assert [r[0] for r in rows[1:]] == ["bunker", "street", "mean"]
        # Means are plain column averages of the rows above.  Rows and the
        # mean are printed at 5 decimals independently, so reconstructing
        # the average from rounded rows can be off by one print quantum.
        for col in range(1, 5):
            vals = [float(r[col]) for r in rows[1:3]]
            assert float(rows[3][col]) == pytest.approx(
                sum(vals) / 2, abs=1.1e-5
            )
        assert (tmp_path / "fused" / "street.png").is_file()
        assert (tmp_path / "fused" / "bunker.png").is_file()

    def test_json_report(self, pair_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("LATFUSE_THREADS", "1")
        report = tmp_path / "report.json"
        rc = main(["bench", "--pairs", str(pair_dir), "-o", str(report), "--json"])
        assert rc == EXIT_OK
        payload = json.loads(report.read_text())
        assert [r["pair"] for r in payload["rows"]] == ["bunker", "street"]
        assert "runtime_s" not in payload["rows"][0]
        assert payload["config"]["max_iter"] == 2000

    def test_timings_flag_adds_runtime_column(self, pair_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("LATFUSE_THREADS", "1")
        report = tmp_path / "report.csv"
        rc = main(
            ["bench", "--pairs", str(pair_dir), "-o", str(report), "--timings"]
        )
        assert rc == EXIT_OK
        _, rows = _read_csv_rows(report)
        assert rows[0][-1] == "runtime_s"
        assert float(rows[1][-1]) > 0.0

    def test_empty_directory_exits_1(self, tmp_path, capsys):
        d = tmp_path / "empty"
        d.mkdir()
        rc = main(["bench", "--pairs", str(d), "-o", str(tmp_path / "r.csv")])
        assert rc == EXIT_INPUT

    def test_bad_thread_env_exits_1(self, pair_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("LATFUSE_THREADS", "zero")
        rc = main(["bench", "--pairs", str(pair_dir), "-o", str(tmp_path / "r.csv")])
        assert rc == EXIT_INPUT
