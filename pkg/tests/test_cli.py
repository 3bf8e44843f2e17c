import json
import math

import numpy as np
import pytest

from ctrlcomm.cli import main
from ctrlcomm.errors import InvalidInputError
from ctrlcomm.io import parse_matrix_text, read_solution, solution_from_dict, solution_to_dict
from ctrlcomm.synthesis import synthesize_single_round

from conftest import TARGET, hadamard


def write_csv(path, a):
    path.write_text("\n".join(",".join(f"{x:g}" for x in row) for row in np.atleast_2d(a)) + "\n")
    return str(path)


def test_parse_matrix_formats():
    assert parse_matrix_text("1,2\n3,4\n").tolist() == [[1, 2], [3, 4]]
    assert parse_matrix_text('{"rows": 1, "cols": 2, "data": [[1, 2]]}').shape == (1, 2)
    assert parse_matrix_text("[[5]]").tolist() == [[5]]
    for bad in ("", "1,2\n3\n", "1,x\n", '{"rows": 2, "data": [[1]]}', '{"data": []}', "{oops"):
        with pytest.raises(InvalidInputError):
            parse_matrix_text(bad)


def test_solution_roundtrip():
    sol = synthesize_single_round(TARGET)
    back = solution_from_dict(json.loads(json.dumps(solution_to_dict(sol))))
    assert np.array_equal(back.alice, sol.alice) and back.cost == sol.cost
    assert np.array_equal(back.meta["target"], TARGET)
    with pytest.raises(InvalidInputError):
        solution_from_dict({"schema": 2})
    with pytest.raises(InvalidInputError):
        solution_from_dict({"schema": 1, "alice": [[1]]})


def test_cost_command(tmp_path, capsys):
    assert main(["cost", write_csv(tmp_path / "i.csv", np.eye(2)), "--json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["schema"] == 1
    assert d["single_round_cost"] == pytest.approx(2 * math.pi, abs=1e-12)
    assert d["shared_info_cost"] == pytest.approx(math.pi, abs=1e-12)
    assert main(["cost", write_csv(tmp_path / "h.csv", hadamard(4))]) == 0
    out = capsys.readouterr().out
    assert "(6.000000 pi)" in out and "(2.000000 pi)" in out


def test_cost_bad_files(tmp_path, capsys):
    (tmp_path / "e.csv").write_text("")
    assert main(["cost", str(tmp_path / "e.csv")]) == 2
    assert main(["cost", str(tmp_path / "missing.csv")]) == 2
    assert "error" in capsys.readouterr().err


def test_synth_and_simulate(tmp_path, capsys):
    out = tmp_path / "sol.json"
    assert main(["synth", write_csv(tmp_path / "i.csv", np.eye(2)), "--out", str(out)]) == 0
    sol = read_solution(out)
    assert sol.alice.shape[0] == 2 and sol.bob.shape[0] == 2
    assert sol.cost == pytest.approx(2 * math.pi, abs=1e-12)
    capsys.readouterr()
    traj = tmp_path / "t.csv"
    assert main(["simulate", str(out), "--pair", "1", "1", "--traj", str(traj)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["realized"] and d["choice"] == [1, 1]
    assert traj.read_text().startswith("t,x,y,z\n")
    assert main(["simulate", str(out), "--pair", "3", "1"]) == 2
    assert main(["simulate", str(out), "--pair", "0", "1"]) == 2


def test_synth_infeasible_and_scalar(tmp_path, capsys):
    f = write_csv(tmp_path / "f.csv", np.diag([1.0, 0.0]))
    h = write_csv(tmp_path / "i.csv", np.eye(2))
    assert main(["synth", h, "--map", f, "--out", str(tmp_path / "x.json")]) == 3
    assert "infeasible" in capsys.readouterr().err
    out = tmp_path / "two.json"
    assert main(["synth", write_csv(tmp_path / "two.csv", [[2.0]]), "--out", str(out)]) == 0
    assert read_solution(out).cost == pytest.approx(4 * math.pi, abs=1e-12)


def test_synth_simulate_roundtrip_reproduces_cost(tmp_path, capsys):
    out = tmp_path / "sol.json"
    assert main(["synth", write_csv(tmp_path / "h.csv", TARGET), "--out", str(out)]) == 0
    sol = read_solution(out)
    ref = synthesize_single_round(TARGET)
    assert sol.recompute_cost() == pytest.approx(ref.cost, abs=1e-10)
    capsys.readouterr()
    for i in range(1, 5):
        for j in range(1, 5):
            assert main(["simulate", str(out), "--pair", str(i), str(j)]) == 0
            d = json.loads(capsys.readouterr().out)
            assert abs(d["final_output"] - TARGET[i - 1, j - 1]) <= 1e-6


def test_partition_command(tmp_path, capsys):
    dot = tmp_path / "t.dot"
    assert main(["partition", write_csv(tmp_path / "h.csv", TARGET), "--exact", "--tree", str(dot)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["num_blocks"] == 5 and d["complexity"] == 6 and d["exact"]
    assert dot.read_text().startswith("digraph")
    assert main(["partition", write_csv(tmp_path / "c.csv", np.full((3, 3), 7.0))]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["num_blocks"] == 1 and d["complexity"] == 0


def test_partition_greedy_random(tmp_path, capsys):
    h = np.random.default_rng(3).integers(0, 3, (8, 8))
    path = write_csv(tmp_path / "r.csv", h)
    assert main(["partition", path, "--greedy"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["exact"] is False
    cover = np.zeros((8, 8), dtype=int)
    for b in d["blocks"]:
        cover[np.ix_(b["rows"], b["cols"])] += 1
        assert len({h[i, j] for i in b["rows"] for j in b["cols"]}) == 1
    assert np.all(cover == 1)
    assert main(["partition", path, "--greedy", "--strict"]) == 4


def test_twophase_command(tmp_path, capsys):
    path = write_csv(tmp_path / "h.csv", TARGET)
    log = tmp_path / "log.jsonl"
    assert main(["twophase", path, "--epsilon", "1e-3", "--all-pairs", "--steps", "2000", "--transcript", str(log)]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["pairs"] == 16 and d["all_realized"]
    assert d["mean_energy_over_pi"] == pytest.approx(5.75, rel=0.01)
    assert d["max_bits"] <= 6
    assert [r["choice"] for r in d["runs"]][:2] == [[1, 1], [1, 2]]
    assert all(json.loads(line)["round"] >= 0 for line in log.read_text().splitlines())
    assert main(["twophase", write_csv(tmp_path / "i.csv", np.eye(2)), "--epsilon", "1e-4"]) == 0
    assert json.loads(capsys.readouterr().out)["mean_energy_over_pi"] == pytest.approx(1.0, rel=1e-3)
    assert main(["twophase", path, "--epsilon", "0"]) == 2
    assert main(["twophase", path, "--epsilon", "1e-3", "--pair", "2", "3", "--observation", "z-quantized", "--levels", "3"]) == 4


def test_commands_are_deterministic(tmp_path, capsys):
    path = write_csv(tmp_path / "h.csv", TARGET)
    outs = []
    for _ in range(2):
        assert main(["partition", path]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
