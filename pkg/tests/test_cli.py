import json

import pytest

from fedkf import cli
from fedkf.bench import PHASES, time_local_steps
from fedkf.config import load_preset


@pytest.fixture
def short_config(tmp_path):
    path = tmp_path / "short.json"
    path.write_text(json.dumps(load_preset().replace(rounds=60).to_dict()))
    return str(path)


class TestRun:
    def test_outputs_and_table(self, tmp_path, short_config, capsys):
        out = tmp_path / "out"
        assert cli.main(["run", "--config", short_config, "--out", str(out)]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["metrics.csv", "rmse_per_round_fkf.csv", "rmse_per_round_skf.csv",
                         "trace_fkf.csv", "trace_skf.csv"]
        metrics = (out / "metrics.csv").read_text().splitlines()
        assert metrics[0].startswith("# config_sha256=") and "seed=1" in metrics[0]
        assert metrics[1] == "mode,distance_m,rmse_m,mean_accuracy_pct,samples"
        assert sum(1 for line in metrics[2:] if line.split(",")[1] == "all") == 2
        trace = (out / "trace_fkf.csv").read_text().splitlines()
        assert trace[1] == ("round,fog_id,raw_rssi_dbm,filtered_rssi_dbm,est_distance_m,"
                            "true_distance_m,fix_x_m,fix_y_m,rejections")
        assert len(trace) == 2 + 60 * 4
        text = capsys.readouterr().out
        assert "FKF" in text and "SKF" in text

    def test_byte_identical_reruns(self, tmp_path, short_config):
        for name in ("a", "b"):
            assert cli.main(["run", "--config", short_config, "--out", str(tmp_path / name)]) == 0
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_seed_and_mode_override(self, tmp_path, short_config):
        out = tmp_path / "o"
        assert cli.main(["run", "--config", short_config, "--out", str(out), "--mode", "skf", "--seed", "9"]) == 0
        assert not (out / "trace_fkf.csv").exists()
        assert "seed=9" in (out / "metrics.csv").read_text().splitlines()[0]

    def test_unwritable_output(self, tmp_path, short_config, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert cli.main(["run", "--config", short_config, "--out", str(blocker / "sub")]) != 0
        assert "error" in capsys.readouterr().err

    def test_failed_write_leaves_nothing(self, tmp_path, short_config, monkeypatch):
        real_open = open
        calls = []

        def flaky_open(path, *args, **kwargs):
            calls.append(path)
            if len(calls) == 3:
                raise OSError("disk full")
            return real_open(path, *args, **kwargs)

        monkeypatch.setattr(cli, "open", flaky_open, raising=False)
        out = tmp_path / "out"
        assert cli.main(["run", "--config", short_config, "--out", str(out)]) == 1
        assert list(out.iterdir()) == []

    def test_bad_config_exit(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"rounds": 10, "burn_in": 20}')
        assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "burn_in" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == 2


class TestLedger:
    def _init(self, path):
        assert cli.main(["ledger", "init", "--chain", str(path)]) == 0
        assert cli.main(["ledger", "add", "fog-1", "fog-2", "fog-3", "fog-4", "--chain", str(path)]) == 0
        assert cli.main(["ledger", "add", "edge-1", "--chain", str(path)]) == 0

    def test_init_add_verify_show(self, tmp_path, capsys):
        path = tmp_path / "chain.txt"
        self._init(path)
        capsys.readouterr()
        assert cli.main(["ledger", "verify", "--chain", str(path)]) == 0
        assert "ok" in capsys.readouterr().out
        assert cli.main(["ledger", "show", "--chain", str(path)]) == 0
        assert capsys.readouterr().out.split() == ["fog-1", "fog-2", "fog-3", "fog-4", "edge-1"]

    def test_tamper_detected(self, tmp_path, capsys):
        path = tmp_path / "chain.txt"
        self._init(path)
        path.write_text(path.read_text().replace("fog-3", "fog-9"))
        capsys.readouterr()
        assert cli.main(["ledger", "verify", "--chain", str(path)]) == 1
        assert "block 1" in capsys.readouterr().out
        assert cli.main(["ledger", "add", "edge-2", "--chain", str(path)]) == 1
        assert cli.main(["ledger", "show", "--chain", str(path)]) == 1

    def test_duplicate_add(self, tmp_path):
        path = tmp_path / "chain.txt"
        self._init(path)
        assert cli.main(["ledger", "add", "fog-1", "--chain", str(path)]) == 1


class TestBench:
    def test_format(self, tmp_path, short_config, capsys):
        assert cli.main(["bench", "--config", short_config, "--rounds", "200"]) == 0
        out = capsys.readouterr().out.splitlines()
        rows = [line for line in out if line.startswith(("skf,", "fkf,"))]
        assert [r.split(",")[1] for r in rows] == list(PHASES) * 2
        assert any(line.startswith("fkf/skf total ratio") for line in out)

    def test_local_step_complexity_ordering(self):
        timings = time_local_steps([1, 4], number=300, repeat=25)
        assert timings[1] < timings[4]
