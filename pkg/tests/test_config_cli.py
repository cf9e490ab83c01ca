import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from poelab.cli import main, run_experiment
from poelab.config import load_config, parse_config, system_document
from poelab.errors import ConfigurationError
from poelab.systems import sys_b

ROOT = Path(__file__).resolve().parents[1]
SMALL_OPT = {"starts": 4, "prefixes": 16, "length": 64, "max_sweeps": 20}


def small_doc(**over):
    s = sys_b()
    doc = system_document("SYS-B", s.spec, s.psi, s.cocycle, n_max=8, fiber_grid_log2=6, bins=64,
                          mc_samples=2000, beta_grid=[0.5, 1.0], optimizer=SMALL_OPT)
    doc.update(over)
    return doc


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_round_trip():
    cfg = parse_config(small_doc())
    s = sys_b()
    assert np.array_equal(cfg.cocycle.matrices, s.cocycle.matrices)
    assert cfg.n_max == 8 and cfg.beta_grid == [0.5, 1.0]
    assert cfg.optimizer.starts == 4


@pytest.mark.parametrize("path", sorted((ROOT / "configs").glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.spec.irreducible


@pytest.mark.parametrize(
    "over, match",
    [
        ({"format": 2}, "format"),
        ({"n_max": 30}, "n_max"),
        ({"beta_grid": [0.0]}, "beta"),
        ({"adjacency": [[1, 0], [0, 1]]}, "symbol 1"),
        ({"psi": {"memory": 1, "values": [0.0]}}, "psi"),
    ],
)
def test_invalid_documents(over, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(small_doc(**over))


def test_missing_key():
    doc = small_doc()
    del doc["bins"]
    with pytest.raises(ConfigurationError, match="bins"):
        parse_config(doc)


def test_reducible_shift_exits_2_and_names_symbol(tmp_path, capsys):
    doc = small_doc(alphabet_size=3, adjacency=[[1, 1, 0], [1, 1, 0], [1, 0, 1]],
                    psi={"memory": 1, "values": [0.0, 0.0, 0.0]},
                    matrices={"window": [0, 0], "entries": [[2, 0, 0, 1], [1, 0, 0, 2], [1, 0, 0, 1]]})
    code = run_experiment("pressure", write(tmp_path, doc), tmp_path / "out")
    assert code == 2
    assert "symbol 2" in capsys.readouterr().err


def test_malformed_json_exits_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run_experiment("pressure", p, tmp_path / "out") == 2


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_report_outputs_and_headers(tmp_path):
    out = tmp_path / "out"
    assert main(["report", "--config", str(write(tmp_path, small_doc())), "--out", str(out), "--seed", "5"]) == 0
    headers = {
        "pressure.csv": ["t_index", "beta", "pressure", "bound", "margin"],
        "partition.csv": ["n", "anchor", "t_index", "log_Z_lower", "log_Z_upper", "sup_log", "fekete_upper"],
        "hyperbolicity.csv": ["beta", "n", "t_index", "moment_exact", "moment_mc", "ci_low", "ci_high", "log_rate"],
        "reduce.csv": ["word", "a", "b", "c", "d"],
    }
    for name, header in headers.items():
        assert read_csv(out / name)[0] == header
    assert read_csv(out / "variational.csv")[0][:6] == ["system", "s", "m", "lower", "fekete_upper", "width"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["seed"] == 5
    assert summary["checks"]["gap_bound"]["worst_margin"] >= 0


@pytest.mark.parametrize("command", ["pressure", "gibbs", "poe", "reduce"])
def test_single_commands(tmp_path, command):
    out = tmp_path / command
    assert run_experiment(command, write(tmp_path, small_doc()), out, seed=1) == 0
    assert (out / "summary.json").exists()


def test_outputs_identical_across_thread_counts(tmp_path):
    cfg = write(tmp_path, small_doc())
    blobs = []
    for threads in (1, 4, 8):
        out = tmp_path / f"t{threads}"
        assert run_experiment("report", cfg, out, seed=11, threads=threads) == 0
        blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert blobs[0] == blobs[1] == blobs[2]


def test_seed_changes_monte_carlo(tmp_path):
    cfg = write(tmp_path, small_doc())
    for seed in (1, 2):
        run_experiment("hyperbolicity", cfg, tmp_path / f"s{seed}", seed=seed)
    a = (tmp_path / "s1" / "hyperbolicity.csv").read_text()
    b = (tmp_path / "s2" / "hyperbolicity.csv").read_text()
    assert a != b


def test_console_entry_point(tmp_path):
    out = tmp_path / "cli"
    proc = subprocess.run(
        [sys.executable, "-m", "poelab.cli", "reduce", "--config", str(ROOT / "configs" / "past_twist.json"), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    summary = json.loads((out / "summary.json").read_text())
    assert summary["checks"]["reduction"]["cohomology"] < 1e-9
