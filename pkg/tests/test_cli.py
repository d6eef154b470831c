import json

import pytest

from achilles import load_network, save_network
from achilles.cli import main
from helpers import flip_net


@pytest.fixture
def flip_net_path(tmp_path):
    path = tmp_path / "flip.relunet"
    save_network(flip_net(), path)
    return str(path)


class TestGenNet:
    def test_writes_parsable_file(self, tmp_path, capsys):
        out = tmp_path / "net.relunet"
        code = main(["gen-net", "--shape", "2,8,8,2", "--seed", "5", "--out", str(out)])
        assert code == 0
        net = load_network(out)
        assert net.layer_sizes == (2, 8, 8, 2)

    def test_stdout_output(self, capsys):
        assert main(["gen-net", "--shape", "2,4,2", "--seed", "1"]) == 0
        text = capsys.readouterr().out
        assert text.startswith("relunet v1")

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.net", tmp_path / "b.net"
        main(["gen-net", "--shape", "3,5,3", "--seed", "9", "--out", str(a)])
        main(["gen-net", "--shape", "3,5,3", "--seed", "9", "--out", str(b)])
        assert a.read_text() == b.read_text()

    def test_bad_shape_is_usage_error(self, capsys):
        assert main(["gen-net", "--shape", "2,x,2"]) == 1


class TestVerify:
    def test_find_campaign_writes_reports(self, flip_net_path, tmp_path, capsys):
        out = tmp_path / "report"
        code = main(
            [
                "verify", "--net", flip_net_path, "--mode", "bg", "--delta", "0.2",
                "--find", "3", "--seed", "1", "--out", str(out),
                "--sample-set-size", "100", "--col-num", "50",
            ]
        )
        assert code == 0
        assert (out / "runs.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["sat_total"] == 3
        assert "rate=" in capsys.readouterr().out

    def test_repeats_write_mean_summary(self, flip_net_path, tmp_path, capsys):
        out = tmp_path / "report"
        code = main(
            [
                "verify", "--net", flip_net_path, "--mode", "b", "--delta", "0.2",
                "--find", "2", "--repeats", "2", "--seed", "3", "--out", str(out),
                "--sample-set-size", "50", "--col-num", "20",
            ]
        )
        assert code == 0
        assert (out / "repeat_0" / "runs.csv").exists()
        assert (out / "repeat_1" / "runs.csv").exists()
        top = json.loads((out / "summary.json").read_text())
        assert len(top["repeats"]) == 2
        assert "rate" in top["mean"]

    def test_budget_and_find_are_exclusive(self, flip_net_path, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(
                [
                    "verify", "--net", flip_net_path, "--mode", "r", "--delta", "0.1",
                    "--budget", "1", "--find", "2", "--out", str(tmp_path / "x"),
                ]
            )
        assert exc.value.code == 1

    def test_missing_net_file_is_data_error(self, tmp_path, capsys):
        code = main(
            [
                "verify", "--net", str(tmp_path / "missing.net"), "--mode", "r",
                "--delta", "0.1", "--find", "1", "--out", str(tmp_path / "r"),
            ]
        )
        assert code == 2

    def test_corrupt_net_file_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.net"
        bad.write_text("relunet v1\n2 2\n")
        code = main(
            [
                "verify", "--net", str(bad), "--mode", "r", "--delta", "0.1",
                "--find", "1", "--out", str(tmp_path / "r"),
            ]
        )
        assert code == 2


class TestAttack:
    def test_prints_rate(self, flip_net_path, capsys):
        code = main(
            [
                "attack", "--net", flip_net_path, "--selection", "r",
                "--eps", "0.2", "--epo", "4", "--inputs", "20", "--seed", "2",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "rate=1.0000" in out

    def test_seed_export(self, flip_net_path, tmp_path, capsys):
        seeds_file = tmp_path / "seeds.txt"
        code = main(
            [
                "attack", "--net", flip_net_path, "--selection", "b",
                "--eps", "0.1", "--epo", "2", "--inputs", "5",
                "--seeds-out", str(seeds_file),
            ]
        )
        assert code == 0
        lines = seeds_file.read_text().strip().splitlines()
        assert len(lines) == 5


class TestOracle:
    def test_sat_on_flip_net(self, flip_net_path, capsys):
        code = main(
            ["oracle", "--net", flip_net_path, "--delta", "0.2", "--x0", "0.4"]
        )
        assert code == 0
        assert capsys.readouterr().out.startswith("sat ")

    def test_unsat_far_from_boundary(self, flip_net_path, capsys):
        code = main(
            [
                "oracle", "--net", flip_net_path, "--delta", "0.05",
                "--x0", "0.1", "--spacing", "0.001",
            ]
        )
        assert code == 0
        assert capsys.readouterr().out.strip() == "unsat"


class TestUsage:
    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_missing_required_argument(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--mode", "r"])
        assert exc.value.code == 1
