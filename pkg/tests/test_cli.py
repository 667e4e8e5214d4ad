import json
import subprocess
import sys

import numpy as np
import pytest

from envpoison.cli import EXIT_BAD_INPUT, EXIT_INFEASIBLE, EXIT_OK, build_parser, load_config, main
from envpoison.mdp import Mdp


def test_attack_writes_mdp(tmp_path, capsys):
    out = tmp_path / "poisoned.json"
    assert main(["attack", "--attack", "nt-rattack", "--p", "1", "-o", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "feasible     True" in text
    mdp = Mdp.from_dict(json.loads(out.read_text()))
    assert mdp.n_states == 4


def test_attack_infeasible_exit(capsys):
    code = main(["attack", "--attack", "nt-dattack", "--eps", "0.9"])
    assert code == EXIT_INFEASIBLE
    assert "feasible     False" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["attack", "--eps", "-1"],
    ["attack", "--attack", "none"],
    ["attack", "--set", "colour=blue"],
    ["attack", "--config", "/nonexistent/file.cfg"],
])
def test_bad_input_exit(argv, capsys):
    assert main(argv) == EXIT_BAD_INPUT


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["attack", "--no-such-flag"])
    assert exc.value.code == EXIT_BAD_INPUT


def test_flag_overrides_config(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("eps = 0.3\nr_s0 = 5\nseeds = 4\n")
    args = build_parser().parse_args(["attack", "-c", str(cfg_file), "--eps", "0.2",
                                      "--set", "seeds=7"])
    cfg = load_config(args)
    assert cfg.eps == (0.2,) and cfg.r_s0 == (5.0,) and cfg.seeds == 7


def test_sweep_offline(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sweep-offline", "--eps", "0,0.5", "--r-s0", "-2.5", "--attack",
                 "nt-rattack,rattack", "--output", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 5


def test_sweep_online(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert main(["sweep-online", "--horizon", "2000", "--seeds", "1", "--output", str(out)]) == 0
    assert "AvgMiss(T)" in capsys.readouterr().out


def test_verify_builtin(capsys):
    assert main(["verify"]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_verify_file_with_target(tmp_path, capsys):
    rng = np.random.default_rng(0)
    p = rng.dirichlet(np.ones(3), size=(3, 2)) + 0.05
    mdp = Mdp(rng.uniform(-1, 1, (3, 2)), p / p.sum(axis=2, keepdims=True))
    doc = mdp.to_dict()
    doc["target"] = [1, 0, 1]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    assert main(["verify", str(path), "--eps", "0.05"]) == EXIT_OK


def test_bench_kernels_only(capsys):
    assert main(["bench", "--kernels-only", "--rollout-steps", "2000", "--repeat", "1"]) == 0
    assert "active backend" in capsys.readouterr().out


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "envpoison.cli", "attack", "--eps", "0.1"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "cost" in out.stdout
