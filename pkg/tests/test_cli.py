import json
import subprocess
import sys

import pytest

from spvarkit.cli import main
from spvarkit.embedding import chimera_graph, clique_embedding
from spvarkit.formats import load_problem

FAST = ["--reads", "60", "--sweeps", "20"]
SET = ["--chimera", "2,2,4", "--couplers", "U10", "--biases", "U10", "--count", "2"]


@pytest.fixture
def problem_dir(tmp_path):
    out = tmp_path / "set"
    assert main(["gen", *SET, "--seed", "7", "--out", str(out)]) == 0
    return out


class TestGen:
    def test_files_and_manifest(self, problem_dir):
        names = sorted(p.name for p in problem_dir.glob("*.json"))
        assert "manifest.json" in names and len(names) == 3
        manifest = json.loads((problem_dir / "manifest.json").read_text())
        assert manifest["spec"]["base_seed"] == 7
        problem = load_problem(sorted(problem_dir.glob("instance-*.json"))[0])
        assert problem.num_variables == 32

    def test_reproducible(self, tmp_path):
        for name in ("a", "b"):
            main(["gen", *SET, "--seed", "3", "--out", str(tmp_path / name)])
        for p in (tmp_path / "a").glob("*.json"):
            assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def _first(problem_dir):
    return str(sorted(problem_dir.glob("instance-*.json"))[0])


def _twice(tmp_path, args):
    outs = []
    for k in range(2):
        path = tmp_path / f"out{k}.json"
        assert main([*args, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    return json.loads(outs[0])


class TestCommands:
    def test_sample(self, problem_dir, tmp_path):
        doc = _twice(tmp_path, ["sample", "--problem", _first(problem_dir), *FAST, "--components"])
        assert len(doc["solutions"]) == 60

    def test_spvar(self, problem_dir, tmp_path):
        doc = _twice(tmp_path, ["spvar", "--problem", _first(problem_dir), *FAST])
        assert "assignment" in doc

    def test_ispvar(self, problem_dir, tmp_path):
        doc = _twice(tmp_path, ["ispvar", "--problem", _first(problem_dir), *FAST])
        assert sum(s["m"] + s["c"] for s in doc["reports"]) == doc["num_fixed"] == len(doc["assignment"]["values"])

    def test_ispvar_embedded(self, tmp_path):
        from spvarkit.formats import dumps, save_problem
        from spvarkit.model import IsingProblem

        hw = chimera_graph(2)
        (tmp_path / "hw.json").write_text(dumps(hw.to_json()))
        (tmp_path / "emb.json").write_text(dumps(clique_embedding(6, hw).to_json()))
        p = IsingProblem({i: (i % 3) - 1 for i in range(6)}, {(i, j): 1 - 2 * ((i + j) % 2) for i in range(6) for j in range(i + 1, 6)})
        save_problem(p, tmp_path / "p.json")
        for space in ("logical", "physical"):
            args = ["ispvar", "--problem", str(tmp_path / "p.json"), *FAST, "--embedding", str(tmp_path / "emb.json"),
                    "--hardware", str(tmp_path / "hw.json"), "--space", space]
            _twice(tmp_path, args)

    def test_bench(self, problem_dir, tmp_path):
        csv_path = tmp_path / "b.csv"
        args = ["bench", "--problems", str(problem_dir), "--reads", "200", "--sweeps", "20", "--step-reads", "20",
                "--oracle-restarts", "50", "--csv", str(csv_path)]
        doc = _twice(tmp_path, args)
        assert doc["aggregates"]["instances"] == 2
        assert csv_path.read_text().startswith("index,")

    def test_bench_without_method(self, problem_dir, tmp_path):
        args = ["bench", "--problems", str(problem_dir), "--reads", "100", "--sweeps", "10", "--no-method",
                "--oracle-restarts", "20"]
        doc = _twice(tmp_path, args)
        assert "method_success" not in doc["aggregates"]

    def test_sweep(self, tmp_path):
        args = ["sweep", *SET, *FAST, "--fixing-list", "0.9,1.0", "--elite-list", "0.3,1.0"]
        doc = _twice(tmp_path, args)
        assert len(doc["mean_fixed"]) == 2 and len(doc["mean_fixed"][0]) == 2

    def test_autotune(self, problem_dir, tmp_path):
        doc = _twice(tmp_path, ["autotune", "--problem", _first(problem_dir), "--reads", "200", "--sweeps", "20"])
        assert 0 < doc["elite_threshold"] <= 1

    def test_fig1(self, tmp_path):
        args = ["fig1", "--chimera", "2,2,4", "--count", "1", "--n-max", "3", *FAST]
        doc = _twice(tmp_path, args)
        assert [r["n"] for r in doc["rows"]] == [1, 2, 3]

    def test_fig2(self, tmp_path):
        args = ["fig2", "--chimera", "2,2,4", "--count", "1", *FAST]
        doc = _twice(tmp_path, args)
        assert doc["rows"][0]["correlation"] == 1.0

    def test_components(self, problem_dir, tmp_path):
        doc = _twice(tmp_path, ["components", "--problems", str(problem_dir), "--reduce", *FAST])
        assert "histogram" in doc

    def test_bad_input_exits_nonzero(self, tmp_path):
        (tmp_path / "bad.json").write_text("{}")
        assert main(["spvar", "--problem", str(tmp_path / "bad.json")]) == 2
        assert main(["spvar", "--problem", str(tmp_path / "missing.json")]) == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "spvarkit", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "ispvar" in out.stdout
