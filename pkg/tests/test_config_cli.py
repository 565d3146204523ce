import csv
import json
from pathlib import Path

import numpy as np
import pytest

from nplab import cli, nn, runner
from nplab.config import parse_config, serialize
from nplab.exceptions import ConfigParseError, ContractError
from nplab.optimize import EIKONAL_SCHEDULE, LrSchedule
from nplab.results import PLOT_HEADER, RunResult, emit_plot_data

CONFIGS = sorted(Path(__file__).resolve().parents[1].joinpath("configs").glob("*.ini"))

HEAT_SMALL = """\
[method]
name = feynman-kac
[problem]
key = heat
dim = 2
[network]
width = 8
[training]
epochs = {epochs}
seed = 4
schedule = constant:0.001
batch_size = 32
"""


class TestParse:
    def test_defaults(self):
        config = parse_config("[method]\nname = pinn\n[problem]\nkey = eikonal\n")
        assert config.epochs == 10000 and config.schedule == EIKONAL_SCHEDULE
        assert config.seed == 0 and config.target_loss is None

    def test_comments_and_blank_lines(self):
        config = parse_config("# header\n\n[method]\nname = deep-bsde  # trailing\n"
                              "[problem]\nkey = lqg-hjb\n[network]\npreset = l3\n")
        assert config.network == {"preset": "l3"}

    @pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
    def test_shipped_configs_round_trip(self, path):
        config = parse_config(path.read_text())
        assert parse_config(serialize(config)) == config

    def test_negative_epochs_names_line(self):
        text = "[method]\nname = pinn\n[problem]\nkey = burgers\n[training]\nepochs=-5\n"
        with pytest.raises(ConfigParseError) as info:
            parse_config(text)
        assert info.value.lineno == 6 and "line 6" in str(info.value)

    @pytest.mark.parametrize("text, lineno", [
        ("[method]\nname = pinn\n[problem]\nkey = burgers\ncolour = red\n", 5),
        ("[method]\nname = pinn\n[solver]\n", 3),
        ("name = pinn\n", 1),
        ("[method]\nname = pinn\nname = pinn\n", 3),
        ("[method]\nname = pinn\n[problem]\nkey = burgers\n[training]\nschedule = linear:1\n", 6),
        ("[method]\nname = pinn\n[problem]\nkey = burgers\n[network]\nactivation = gelu\n", 6),
    ])
    def test_malformed(self, text, lineno):
        with pytest.raises(ConfigParseError) as info:
            parse_config(text)
        assert info.value.lineno == lineno

    def test_incompatible_method_and_problem(self):
        with pytest.raises(ConfigParseError) as info:
            parse_config("[method]\nname = feynman-kac\n[problem]\nkey = burgers\n")
        assert info.value.lineno == 4

    def test_missing_method(self):
        with pytest.raises(ConfigParseError):
            parse_config("[problem]\nkey = burgers\n")

    def test_preset_outside_bsde(self):
        with pytest.raises(ConfigParseError):
            parse_config("[method]\nname = pinn\n[problem]\nkey = burgers\n[network]\npreset = l3\n")

    def test_with_seed(self):
        config = parse_config(HEAT_SMALL.format(epochs=3))
        assert config.with_seed(11).seed == 11 and config.with_seed(11).epochs == 3


class TestPlotData:
    def test_rows_per_metric(self):
        result = RunResult("pinn", "burgers", 0)
        for e in range(3):
            result.add_row(e, 0.0, loss=1.0 / (e + 1), lr=0.01, loss_residual=0.5, loss_initial=0.25)
        lines = emit_plot_data(result).splitlines()
        assert lines[0] == PLOT_HEADER == "epoch,metric,value"
        assert len(lines) == 1 + 12

    def test_missing_cells_skipped(self):
        result = RunResult("feynman-kac", "heat", 0)
        result.add_row(0, 0.0, loss=1.0, rel_l1=0.5)
        result.add_row(1, 0.1, loss=0.5)
        assert len(emit_plot_data(result).splitlines()) == 1 + 3
        assert result.to_csv().splitlines()[2] == "1,0.5,"

    def test_empty_result(self):
        with pytest.raises(ContractError):
            emit_plot_data(RunResult("pinn", "burgers", 0))

    def test_values_round_trip(self):
        result = RunResult("pinn", "burgers", 0)
        result.add_row(0, 0.0, loss=0.1 + 0.2)
        row = emit_plot_data(result).splitlines()[1].split(",")
        assert float(row[2]) == 0.1 + 0.2


class TestRunner:
    def test_files_read_back(self, tmp_path):
        config = parse_config(HEAT_SMALL.format(epochs=5))
        out = tmp_path / "heat"
        result = runner.run(config, out=str(out))
        with open(f"{out}.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["epoch"]) for r in rows] == list(range(6))
        np.testing.assert_array_equal([float(r["loss"]) for r in rows], result.metric("loss"))
        summary = json.loads(Path(f"{out}.json").read_text())
        assert summary["status"] == "ok" and summary["seed"] == 4
        assert parse_config(summary["config"]) == config
        plot = Path(f"{out}.plot.csv").read_text().splitlines()
        assert plot[0] == PLOT_HEADER
        entries = nn.read_snapshot(f"{out}.params")
        total = sum(np.size(a) for kind, _, a in entries if kind == "param")
        assert total == result.params.theta.size

    def test_divergence_before_first_row(self, tmp_path):
        result = RunResult("deep-bsde", "allen-cahn", 0, status="diverged", message="epoch 0")
        runner.write_outputs(result, tmp_path / "e")
        assert (tmp_path / "e.csv").read_text() == "epoch\n"
        assert json.loads((tmp_path / "e.json").read_text())["status"] == "diverged"
        assert not (tmp_path / "e.plot.csv").exists()

    def test_zero_epochs_one_row(self, tmp_path):
        result = runner.run(parse_config(HEAT_SMALL.format(epochs=0)), out=str(tmp_path / "z"))
        assert len(result) == 1
        assert len((tmp_path / "z.csv").read_text().splitlines()) == 2

    def test_list_problems(self):
        keys = dict(runner.list_problems())
        assert keys["burgers"] == ["pinn", "pinn-rk"]
        assert set(keys) == {"burgers", "eikonal", "eikonal-param", "heat", "heat-potential",
                             "lqg-hjb", "allen-cahn"}


class TestCli:
    def write(self, tmp_path, text, name="c.ini"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    def test_run_ok(self, tmp_path, capsys):
        path = self.write(tmp_path, HEAT_SMALL.format(epochs=2))
        assert cli.main(["run", path, "--out", str(tmp_path / "o")]) == cli.EXIT_OK
        assert "status=ok" in capsys.readouterr().out
        assert (tmp_path / "o.csv").exists()

    def test_parse_error_exit(self, tmp_path, capsys):
        path = self.write(tmp_path, "[method]\nname = pinn\n[problem]\nkey = burgers\n[training]\nepochs=-5\n")
        assert cli.main(["run", path]) == cli.EXIT_PARSE == 2
        assert "line 6" in capsys.readouterr().err

    def test_diverged_exit(self, tmp_path):
        text = HEAT_SMALL.format(epochs=20).replace("constant:0.001", "constant:1e300")
        path = self.write(tmp_path, text)
        with np.errstate(all="ignore"):
            assert cli.main(["run", path, "--out", str(tmp_path / "d")]) == cli.EXIT_DIVERGED == 3
        assert json.loads((tmp_path / "d.json").read_text())["status"] == "diverged"

    def test_seed_override(self, tmp_path, monkeypatch):
        path = self.write(tmp_path, HEAT_SMALL.format(epochs=1))
        monkeypatch.setenv("NPLAB_SEED", "17")
        cli.main(["run", path, "--out", str(tmp_path / "s")])
        assert json.loads((tmp_path / "s.json").read_text())["seed"] == 17

    def test_bad_seed_override(self, tmp_path, monkeypatch):
        path = self.write(tmp_path, HEAT_SMALL.format(epochs=1))
        monkeypatch.setenv("NPLAB_SEED", "x")
        assert cli.main(["run", path]) == cli.EXIT_PARSE

    def test_repeated_runs_byte_identical(self, tmp_path):
        path = self.write(tmp_path, HEAT_SMALL.format(epochs=10))
        for name in ("a", "b"):
            assert cli.main(["--threads", "1", "run", path, "--out", str(tmp_path / name)]) == 0
        for suffix in (".csv", ".plot.csv", ".params"):
            assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()

    def test_list_problems(self, capsys):
        assert cli.main(["list-problems"]) == 0
        assert "allen-cahn" in capsys.readouterr().out

    def test_oracle(self, capsys):
        assert cli.main(["oracle", "lqg", "--d", "2", "--t", "0", "--samples", "10"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert float(lines[1].split()[1]) == pytest.approx(np.log(0.5)) and lines[2] == "stderr 0.0"

    def test_check_grad(self, tmp_path, capsys):
        path = self.write(tmp_path, "[method]\nname = pinn\n[problem]\nkey = burgers\n")
        assert cli.main(["check-grad", path, "--nets", "3"]) == 0
        assert capsys.readouterr().out.strip().endswith(": ok")

    def test_schedule_in_config(self):
        config = parse_config(HEAT_SMALL.format(epochs=1))
        assert config.schedule == LrSchedule.constant(0.001)
