import json

import numpy as np
import pytest

from srsfa import io
from srsfa.cli import main


@pytest.fixture
def small_run(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--lx", "5", "--ly", "4", "--steps", "20000", "--seed", "3", "--out", str(out)]) == 0
    return out / "trajectory.sftr"


def test_simulate_writes_trajectory_and_sidecar(small_run):
    side = json.loads(small_run.with_suffix(".json").read_text())
    assert (side["lx"], side["ly"], side["T"], side["seed"]) == (5, 4, 20000, 3)
    assert len(side["pi"]) == 20 and sum(side["pi"]) == pytest.approx(1.0)
    assert small_run.stat().st_size == 28 + 4 * 20000


def test_single_cell_simulation(tmp_path):
    assert main(["simulate", "--lx", "1", "--ly", "1", "--steps", "50", "--out", str(tmp_path), "--export-csv"]) == 0
    states = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)[:, 1]
    assert np.all(states == 0)


def test_simulate_and_analyze_are_deterministic(tmp_path):
    digests = []
    for rep in ("a", "b"):
        out = tmp_path / rep
        main(["simulate", "--lx", "4", "--ly", "3", "--steps", "5000", "--seed", "9", "--out", str(out)])
        main(["analyze", "--trajectory", str(out / "trajectory.sftr"), "--out", str(out), "--heatmaps", "1"])
        digests.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert digests[0].keys() == digests[1].keys()
    assert all(digests[0][k] == digests[1][k] for k in digests[0])
    assert {"eigenvalues.csv", "weights.csv", "output_stats.csv", "heatmap_output_1.pgm"} <= digests[0].keys()


def test_analyze_outputs(small_run, tmp_path):
    assert main(["analyze", "--trajectory", str(small_run), "--out", str(tmp_path)]) == 0
    eig = np.loadtxt(tmp_path / "eigenvalues.csv", delimiter=",", skiprows=1)
    assert eig.shape == (20, 2) and eig[0, 1] == pytest.approx(1.0, abs=1e-3)
    header = (tmp_path / "output_stats.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["j", "eigenvalue", "delta"] and {"C1", "C2", "C3", "F0.8", "F0.9"} <= set(header)
    W = io.read_matrix_csv(tmp_path / "weights.csv")
    assert W.shape == (20, 20)


def test_analyze_json(small_run, tmp_path):
    args = ["analyze", "--trajectory", str(small_run), "--out", str(tmp_path), "--format", "json",
            "--variant", "lf", "--gamma", "0.8", "--tau-max", "20"]
    assert main(args) == 0
    data = json.loads((tmp_path / "solution.json").read_text())
    assert len(data["eigenvalues"]) == 20 and data["spec"]["variant"] == "lf"


@pytest.mark.parametrize(
    "extra",
    [
        ["--variant", "sfa", "--tau", "2"],
        ["--variant", "tau", "--gamma", "0.9"],
        ["--variant", "lf", "--gamma", "1.5"],
        ["--outputs", "0"],
        ["--heatmaps", "99"],
        ["--type", "3"],
    ],
)
def test_analyze_usage_errors(small_run, tmp_path, extra):
    assert main(["analyze", "--trajectory", str(small_run), "--out", str(tmp_path), *extra]) == 2


def test_numerical_failure_exit_code(small_run, tmp_path):
    args = ["analyze", "--trajectory", str(small_run), "--out", str(tmp_path),
            "--type", "1", "--formulation", "symmetric", "--sigma2", "0"]
    assert main(args) == 3


def test_usage_errors(tmp_path):
    assert main(["simulate", "--lx", "0", "--out", str(tmp_path)]) == 2
    assert main(["nonsense"]) == 2
    assert main(["analyze", "--trajectory", str(tmp_path / "missing.sftr")]) == 2
    assert main(["freeresp", "--T", "45", "--j", "45", "--out", str(tmp_path)]) == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small world\nlx = 3\nly=2\nsteps=300\nseed=5\n")
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    side = json.loads((out / "trajectory.json").read_text())
    assert (side["lx"], side["ly"], side["T"], side["seed"]) == (3, 2, 300, 5)
    # flags override the file
    assert main(["simulate", "--config", str(cfg), "--steps", "400", "--out", str(out)]) == 0
    assert json.loads((out / "trajectory.json").read_text())["T"] == 400
    cfg.write_text("colour=blue\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2
    cfg.write_text("no separator\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2


def test_freeresp(tmp_path, capsys):
    assert main(["freeresp", "--T", "45", "--j", "3,41,0", "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out
    assert "j=3    delta=0.046 C1=0.977" in printed
    assert "j=41   delta=3.954 C1=-0.977" in printed
    rows = np.loadtxt(tmp_path / "freeresp.csv", delimiter=",", skiprows=1)
    assert rows[2].tolist() == [0.0, 0.0, 1.0]
    signals = np.loadtxt(tmp_path / "freeresp_signals.csv", delimiter=",", skiprows=1)
    assert signals.shape == (45, 4) and np.all(signals[:, 3] == 1.0)


def test_limits_command(tmp_path, capsys):
    base = ["limits", "--lx", "1", "--ly", "1", "--steps", "200", "--tau-max", "10", "--out", str(tmp_path)]
    assert main(base) == 0
    assert "FAIL" not in capsys.readouterr().out
    short = ["limits", "--lx", "15", "--ly", "10", "--steps", "100", "--seed", "7", "--out", str(tmp_path)]
    assert main(short) == 1
    assert "FAIL" in capsys.readouterr().out
    assert main(short + ["--format", "json"]) == 1
    reports = json.loads((tmp_path / "limits.json").read_text())
    assert {"target_name", "relative_error", "passed"} <= reports[0].keys()


def test_heatmap_consistency(small_run, tmp_path):
    assert main(["heatmap", "--trajectory", str(small_run), "--index", "7", "--out", str(tmp_path), "--svg"]) == 0
    stem = tmp_path / "heatmap_stc_7"
    grid = io.read_matrix_csv(stem.with_suffix(".csv"))
    pixels = io.read_pgm(stem.with_suffix(".pgm"))
    assert grid.shape == pixels.shape == (4, 5)
    assert np.array_equal(pixels, np.rint(255 * grid).astype(np.uint8))
    assert 0.0 <= grid.min() and grid.max() <= 1.0
    assert stem.with_suffix(".svg").read_text().startswith("<svg")
    # interior state (row 1, col 2): itself and four neighbours, rendered with row 0 at the bottom
    assert np.count_nonzero(grid) == 5


def test_heatmap_zero_lag_is_single_cell(small_run, tmp_path):
    args = ["heatmap", "--trajectory", str(small_run), "--index", "12", "--tau", "0", "--out", str(tmp_path)]
    assert main(args) == 0
    grid = io.read_matrix_csv(tmp_path / "heatmap_stc_12.csv")
    assert np.count_nonzero(grid) == 1
    row, col = divmod(12, 5)
    assert io.rendered(grid)[row, col] == 1.0


def test_heatmap_of_constant_output(small_run, tmp_path):
    # the Type 2 SFA constant solution is exact and renders as the flat 0.5 field
    assert main(["analyze", "--trajectory", str(small_run), "--variant", "sfa", "--out", str(tmp_path)]) == 0
    args = ["heatmap", "--trajectory", str(small_run), "--source", "weights", "--weights",
            str(tmp_path / "weights.csv"), "--index", "0", "--out", str(tmp_path)]
    assert main(args) == 0
    assert np.all(io.read_matrix_csv(tmp_path / "heatmap_weights_0.csv") == 0.5)
    # the CSFA leading vector is constant only up to O(1/T) edge terms
    assert main(["heatmap", "--trajectory", str(small_run), "--source", "output", "--index", "0",
                 "--out", str(tmp_path)]) == 0
    assert (tmp_path / "heatmap_output_0.pgm").exists()
    assert main(["heatmap", "--trajectory", str(small_run), "--index", "20", "--out", str(tmp_path)]) == 2


def test_table_command(tmp_path, capsys):
    main(["simulate", "--lx", "5", "--ly", "4", "--steps", "20000", "--seed", "1", "--out", str(tmp_path)])
    args = ["table", "--trajectory", str(tmp_path / "trajectory.sftr"), "--indices", "0,1,19",
            "--tau-max", "50", "--out", str(tmp_path)]
    assert main(args) == 0
    lines = (tmp_path / "table.csv").read_text().splitlines()
    assert lines[0] == "statistic,0,1,19"
    assert [l.split(",")[0] for l in lines[1:]] == ["C1", "C2", "C3", "F0.8", "F0.9"]
    assert "C1" in capsys.readouterr().out


@pytest.mark.parametrize("chain", ["gridworld", "cycle3", "single", "random-reversible"])
def test_eigcheck(tmp_path, chain):
    args = ["eigcheck", "--chain", chain, "--lx", "4", "--ly", "3", "--out", str(tmp_path)]
    assert main(args) == 0
    assert (tmp_path / "eigcheck.csv").exists()


def test_io_round_trips(tmp_path):
    m = np.random.default_rng(0).normal(size=(3, 4))
    io.write_matrix_csv(tmp_path / "m.csv", m)
    assert np.array_equal(io.read_matrix_csv(tmp_path / "m.csv"), m)
    sq = m[:, :3]
    back, meta = io.matrix_from_json(io.matrix_to_json(sq, {"k": 1}))
    assert np.array_equal(back, sq) and meta == {"k": 1}
    assert np.all(io.normalize_grid(np.full((2, 2), 3.0)) == 0.5)
    assert io.normalize_grid([[1.0, 3.0]]).tolist() == [[0.0, 1.0]]
