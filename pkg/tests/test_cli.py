"""
Tests for the coevo command line
Flag spellings, output formats and exit codes
"""
import csv
import io
import json
import sys
from pathlib import Path

import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from coevotree.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, build_parser, main


@pytest.fixture(scope="module")
def parser():
    return build_parser()


class TestParser:
    """Argument spellings"""

    def test_hitting_flags(self, parser):
        args = parser.parse_args(["rw", "hitting", "--pmf", "geometric:0.3", "--k", "5", "--steps", "200", "--csv"])
        assert (args.K, args.N, args.csv) == (5, 200, True)

    def test_hitting_aliases(self, parser):
        args = parser.parse_args(["rw", "hitting", "--pmf", "geometric:0.3", "--K", "3", "--N", "50"])
        assert (args.K, args.N, args.csv) == (3, 50, False)

    def test_constants_flags(self, parser):
        args = parser.parse_args(["constants", "--pmf", "geometric:0.3", "--k", "200", "--json"])
        assert args.k_max == 200
        assert args.json
        assert parser.parse_args(["constants", "--pmf", "geometric:0.3", "--k-max", "40"]).k_max == 40

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["constants", "--pmf", "geometric:0.3", "--bogus"])
        assert exc.value.code == EXIT_ERROR


class TestCommands:
    """Commands end to end"""

    def test_constants_json(self, capsys):
        assert main(["constants", "--pmf", "geometric:0.3", "--k", "20", "--json"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert abs(payload["s0"]["value"] - 1.0 / 1.4) < 1e-10
        assert [point["k"] for point in payload["alpha_k_trace"]] == [5, 10, 15, 20]

    def test_constants_plain(self, capsys):
        assert main(["constants", "--pmf", "geometric:0.3", "--k", "0"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "regime: NonFringe" in out
        assert "alpha_k_trace" not in out

    def test_bad_pmf(self, capsys):
        assert main(["constants", "--pmf", "pmf:0.5,0.4"]) == EXIT_ERROR
        assert "MassNotOne" in capsys.readouterr().err

    def test_hitting_csv(self, capsys):
        assert main(["rw", "hitting", "--pmf", "geometric:0.5", "--k", "2", "--steps", "20", "--csv"]) == EXIT_OK
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert rows[0] == ["k", "i", "prob"]
        assert {row[0] for row in rows[1:]} == {"1", "2"}
        first = {(int(k), int(i)): float(p) for k, i, p in rows[1:]}
        assert abs(first[(1, 1)] - 0.5) < 1e-15

    def test_grow_then_stats(self, tmp_path, capsys):
        tree = tmp_path / "tree.bin"
        assert main(["grow", "--pmf", "geometric:0.3", "--n", "500", "--seed", "7", "--out", str(tree)]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["n"] == 500
        assert main(["stats", "--in", str(tree), "--fringe", "3", "--json"]) == EXIT_OK
        stats = json.loads(capsys.readouterr().out)
        assert stats["n"] == 500
        assert sum(stats["depth_profile"]) == 500

    def test_missing_tree_file(self, tmp_path):
        assert main(["stats", "--in", str(tmp_path / "absent.bin")]) == EXIT_ERROR


class TestExperimentExitCodes:
    """0 when every experiment passes, 1 when one fails, 2 on bad input"""

    def test_all_pass(self, tmp_path):
        config = tmp_path / "exp.json"
        config.write_text(json.dumps([{"kind": "ClosedFormConstants", "pmf": "geometric:0.3"}]))
        out = tmp_path / "report.json"
        assert main(["experiment", "--config", str(config), "--out", str(out)]) == EXIT_OK
        assert json.loads(out.read_text())[0]["passed"] is True

    def test_one_fails(self, tmp_path):
        config = tmp_path / "exp.json"
        config.write_text(json.dumps([
            {"kind": "ClosedFormConstants", "pmf": "geometric:0.3"},
            {"kind": "ClosedFormConstants", "pmf": "srw:0.4", "tolerance": -1.0},
        ]))
        assert main(["experiment", "--config", str(config)]) == EXIT_FAILED

    def test_nothing_to_run(self):
        assert main(["experiment"]) == EXIT_ERROR

    def test_invalid_config(self, tmp_path):
        config = tmp_path / "exp.json"
        config.write_text(json.dumps({"kind": "NoSuchKind", "pmf": "geometric:0.3"}))
        assert main(["experiment", "--config", str(config)]) == EXIT_ERROR


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
