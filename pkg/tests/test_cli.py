import json
import subprocess
import sys

import numpy as np
import pytest

from ffgmix.cli import EXIT_INFERENCE, EXIT_IO, EXIT_OK, EXIT_USAGE, build_parser, main
from ffgmix.experiments import read_results


class TestExitCodes:
    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK
        assert "verify" in capsys.readouterr().out

    def test_vad_help_labels_defaults(self, capsys):
        assert main(["vad", "--help"]) == EXIT_OK
        out = " ".join(capsys.readouterr().out.split())
        assert out.count("our choice, not a published value") == 2

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["verify", "--out", "-"],
            ["verify", "--method", "stacking", "--out", "-"],
            ["verify", "--method", "bma", "--n", "0", "--out", "-"],
            ["verify", "--method", "bma", "--noise-var", "abc", "--out", "-"],
            ["verify", "--method", "bma", "--noise-var", "-1", "--out", "-"],
            ["vad", "--out", "-"],
            ["vad", "--input", "a.csv", "--synthetic", "speech:3", "--out", "-"],
            ["vad", "--synthetic", "speech", "--out", "-"],
            ["vad", "--synthetic", "speech:10", "--rho", "0", "--out", "-"],
        ],
    )
    def test_bad_arguments(self, argv, capsys):
        assert main(argv) == EXIT_USAGE

    def test_non_finite_input(self, tmp_path):
        path = tmp_path / "y.csv"
        path.write_text("0.1\nnan\n0.3\n")
        assert main(["vad", "--input", str(path), "--out", str(tmp_path / "o.csv")]) == EXIT_INFERENCE
        assert not (tmp_path / "o.csv").exists()

    def test_unparsable_input(self, tmp_path):
        path = tmp_path / "y.csv"
        path.write_text("0.1\nhello\n")
        assert main(["vad", "--input", str(path), "--out", "-"]) == EXIT_INFERENCE

    def test_missing_input(self, tmp_path):
        assert main(["vad", "--input", str(tmp_path / "nope.csv"), "--out", "-"]) == EXIT_IO

    def test_unwritable_output(self, tmp_path, capsys):
        out = tmp_path / "no" / "such" / "dir.csv"
        assert main(["verify", "--method", "bma", "--n", "5", "--out", str(out)]) == EXIT_IO
        assert str(out) in capsys.readouterr().err


class TestOutputs:
    def test_verify_csv(self, tmp_path):
        out = tmp_path / "v.csv"
        assert main(["verify", "--method", "bma", "--n", "100", "--noise-var", "5", "--seed", "1", "--out", str(out)]) == EXIT_OK
        table = read_results(out)
        assert table.columns == ("n", "q1", "q2", "q3", "log_evidence", "free_energy")
        np.testing.assert_array_equal(table.column("n"), [1, 5, 10, 100])

    def test_verify_json(self, tmp_path):
        out = tmp_path / "v.json"
        assert main(["verify", "--method", "bmc-online", "--n", "10", "--alpha", "10", "--reduce-to", "1", "--out", str(out), "--format", "json"]) == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["config"]["method"] == "bmc-online"
        assert sum(doc["totals"]["counts"]) == 10

    def test_vad_synthetic_stdout(self, capsys):
        assert main(["vad", "--synthetic", "speech:20,silence:30", "--seed", "2", "--out", "-"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "t,y,p_speech" and len(lines) == 51

    def test_vad_input_file(self, tmp_path):
        signal = tmp_path / "y.csv"
        signal.write_text("\n".join(str(v) for v in np.zeros(25)) + "\n")
        out = tmp_path / "p.csv"
        assert main(["vad", "--input", str(signal), "--out", str(out)]) == EXIT_OK
        p = read_results(out).column("p_speech")
        assert p.size == 25 and p[-1] < p[0]

    @pytest.mark.parametrize(
        "argv",
        [
            ["verify", "--method", "bmc-vmp", "--n", "200", "--seed", "4"],
            ["verify", "--method", "bms", "--n", "50", "--seed", "4"],
            ["vad", "--synthetic", "speech:100,silence:100", "--seed", "4"],
        ],
    )
    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_byte_identical_reruns(self, tmp_path, argv, fmt):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([*argv, "--out", str(a), "--format", fmt]) == EXIT_OK
        assert main([*argv, "--out", str(b), "--format", fmt]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_module_entry_point(self, tmp_path):
        out = tmp_path / "m.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "ffgmix", "verify", "--method", "bma", "--n", "5", "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.read_text().startswith("n,q1,q2,q3,log_evidence,free_energy\n")
        bad = subprocess.run([sys.executable, "-m", "ffgmix", "verify"], capture_output=True, text=True)
        assert bad.returncode == 2

    def test_parser_defaults(self):
        args = build_parser().parse_args(["vad", "--synthetic", "speech:1", "--out", "-"])
        assert (args.rho, args.process_var, args.format) == (0.95, 1.0, "csv")
