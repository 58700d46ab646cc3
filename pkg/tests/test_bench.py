import csv
import io

import numpy as np
import pytest

from spvarkit.bench import (
    BenchConfig,
    InstanceResult,
    OracleConfig,
    aggregate,
    autotune_elite,
    best_known,
    biasrange_trend,
    check_report,
    component_histogram,
    correlation_vs_distance,
    fixedcount_vs_biasrange,
    fixing_success,
    run_benchmark,
    sweep_thresholds,
)
from spvarkit.generators import NAMED_SETS, ProblemSetSpec, coefficient_set, random_ising
from spvarkit.embedding import chimera_graph
from spvarkit.model import IsingProblem, fix_variables
from spvarkit.samplers import SamplerConfig, derive_seed, sample_sa
from spvarkit.spvar import SpvarParams, spvar
from spvarkit.ispvar import IspvarParams

from conftest import enumerate_energies, random_problem

SMALL = ProblemSetSpec(NAMED_SETS["U10"], NAMED_SETS["U10"], 3, base_seed=5, chimera=(2, 2, 4))


def _bench_config(**kw):
    base = dict(
        problems=SMALL,
        sampler=SamplerConfig(reads=400, sweeps=50),
        method=IspvarParams(sample_size=40),
        oracle=OracleConfig(tabu_restarts=100),
    )
    base.update(kw)
    return BenchConfig(**base)


class TestBestKnown:
    def test_small_is_proven(self, rng):
        p = random_problem(rng, 14)
        got = best_known(p)
        assert got.proven and got.method == "exact"
        assert got.energy == enumerate_energies(p).min()

    def test_single_variable(self):
        got = best_known(IsingProblem({0: -3}))
        assert got.energy == -3 and got.witness == {0: 1}

    def test_empty(self):
        assert best_known(IsingProblem({}, {}, 4)).energy == 4

    def test_tabu_matches_decomposed_exact(self, rng):
        for _ in range(5):
            blocks = [random_problem(rng, 10, density=0.5) for _ in range(4)]
            h, J = {}, {}
            for k, b in enumerate(blocks):
                h.update({v + 10 * k: x for v, x in b.h.items()})
                J.update({(i + 10 * k, j + 10 * k): x for (i, j), x in b.J.items()})
            p = IsingProblem(h, J)
            exact = best_known(p)
            assert exact.proven
            assert exact.energy == sum(enumerate_energies(b).min() for b in blocks)
            tabu = best_known(p, OracleConfig(tabu_restarts=200, decompose=False, exact_cap=20))
            assert not tabu.proven and tabu.method == "tabu"
            assert tabu.energy == exact.energy


class TestFixingSuccess:
    def test_empty_assignment(self, rng):
        assert fixing_success(random_problem(rng, 5), {})

    def test_wrong_flip(self):
        p = IsingProblem({0: 2, 1: -1}, {})
        assert not fixing_success(p, {0: 1})
        assert fixing_success(p, {0: -1})

    def test_exact_sampler_always_succeeds(self, rng):
        for _ in range(100):
            p = random_problem(rng, 16, density=0.25)
            out = spvar(p, SamplerConfig(kind="exact"), SpvarParams(sample_size=64, elite_threshold=0.3))
            assert fixing_success(p, out.assignment)
            assert enumerate_energies(fix_variables(p, out.assignment)).min() == enumerate_energies(p).min()


class TestRunBenchmark:
    def test_baseline_only(self):
        report = run_benchmark(_bench_config(method=None))
        assert not any(k.startswith("method") for k in report.aggregates)
        assert "better" not in report.aggregates
        assert all(r.method_best is None and r.method_reads == 0 for r in report.rows)
        assert check_report(report, 400) == []

    def test_self_consistent(self):
        report = run_benchmark(_bench_config())
        assert check_report(report, 400) == []
        rows = report.rows
        assert all(r.error is None for r in rows)
        by_hand = 100.0 * sum(r.baseline_best <= r.best_known for r in rows) / len(rows)
        assert report.aggregates["baseline_success"] == by_hand
        assert report.aggregates["mean_fixed"] == np.mean([r.total_fixed for r in rows])
        assert all(r.method_reads <= 400 for r in rows)
        assert all(r.fixing_success for r in rows)

    def test_deterministic(self):
        a = run_benchmark(_bench_config()).as_dict()
        b = run_benchmark(_bench_config()).as_dict()
        assert a == b

    def test_csv(self):
        text = run_benchmark(_bench_config(method=None)).to_csv()
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 3 and rows[0]["name"] == "instance-0000"

    def test_problem_dir(self, tmp_path):
        from spvarkit.formats import save_problem

        for i in range(2):
            save_problem(SMALL.instance(i), tmp_path / f"p{i}.json")
        report = run_benchmark(_bench_config(problems=None, problem_dir=str(tmp_path), method=None))
        assert [r.name for r in report.rows] == ["p0", "p1"]

    def test_check_report_catches_tampering(self):
        report = run_benchmark(_bench_config(method=None))
        report.aggregates["baseline_success"] = -1
        assert check_report(report, 400)
        assert check_report(run_benchmark(_bench_config(method=None)), 500)

    def test_aggregate_handles_errors(self):
        rows = [InstanceResult(0, "a", 3, error="boom"), InstanceResult(1, "b", 3, best_known=-1, baseline_best=-1,
                                                                         baseline_freq=4, baseline_reads=10)]
        agg = aggregate(rows, with_method=False)
        assert agg["failed"] == 1 and agg["baseline_success"] == 100.0 and agg["baseline_freq"] == 4

    def test_final_reads_defaults(self):
        config = _bench_config()
        assert config.resolved_final_reads(False) == 160
        assert config.resolved_final_reads(True) == 480


class TestSweep:
    def test_single_cell_is_spvar(self, rng):
        problems = [random_problem(rng, 12) for _ in range(3)]
        config = SamplerConfig(reads=60, sweeps=20, seed=4)
        grid = sweep_thresholds(problems, config, [1.0], [1.0])
        direct = [
            spvar(p, config.with_seed(derive_seed(4, k)), SpvarParams(sample_size=60, elite_threshold=1.0)).num_fixed
            for k, p in enumerate(problems)
        ]
        assert grid.mean_fixed == [[np.mean(direct)]]

    def test_monotone(self, rng):
        problems = [random_problem(rng, 14) for _ in range(5)]
        fixing = [0.5, 0.7, 0.9, 1.0]
        elite = [0.1, 0.3, 0.6, 1.0]
        grid = sweep_thresholds(problems, SamplerConfig(reads=100, sweeps=10), fixing, elite,
                                oracle=OracleConfig())
        fixed = np.array(grid.mean_fixed)
        assert np.all(np.diff(fixed, axis=1) <= 1e-9)
        # along the elite axis only the unit fixing threshold is guaranteed
        assert np.all(np.diff(fixed[:, -1]) <= 1e-9)
        assert all(0 <= s <= 100 for row in grid.success for s in row)

    def test_empty_lists(self):
        with pytest.raises(ValueError):
            sweep_thresholds([], SamplerConfig(), [], [1.0])


class TestAutotune:
    def test_saturation(self):
        p = IsingProblem({i: 1 for i in range(6)})
        got = autotune_elite(p, SamplerConfig(reads=50, sweeps=20))
        assert not got.in_band and got.fraction == 1.0
        assert got.elite_threshold == 1.0 and "above" in got.warning

    def test_wide_band_takes_first(self, rng):
        p = random_problem(rng, 10)
        got = autotune_elite(p, SamplerConfig(reads=100, sweeps=20), band=(0.0, 1.0))
        assert got.in_band and got.elite_threshold == 0.05 and got.elite_size == 5

    def test_min_elite(self, rng):
        p = random_problem(rng, 6)
        with pytest.raises(ValueError):
            autotune_elite(p, SamplerConfig(reads=4, sweeps=5), num_gauges=1)

    def test_bad_band(self, rng):
        with pytest.raises(ValueError):
            autotune_elite(random_problem(rng, 3), SamplerConfig(), band=(0.5, 0.2))

    def test_u5_mostly_in_band(self):
        graph = chimera_graph(4)
        hits = 0
        for seed in range(10):
            p = random_ising(graph, NAMED_SETS["U5"], NAMED_SETS["U5"], seed)
            got = autotune_elite(p, SamplerConfig(reads=500, sweeps=100, seed=seed))
            hits += got.in_band
        assert hits >= 8


class TestComponentHistogram:
    def test_connected(self, rng):
        p = IsingProblem({}, {(i, i + 1): 1 for i in range(7)})
        assert component_histogram([p]) == {8: 1}

    def test_fully_fixed(self):
        assert component_histogram([IsingProblem({}, {}, 3)]) == {}

    def test_counting_identity(self, rng):
        problems = []
        for _ in range(10):
            p = random_problem(rng, 20, density=0.1)
            fixes = {v: 1 for v in p.variables if rng.random() < 0.4}
            problems.append(fix_variables(p, fixes))
        hist = component_histogram(problems)
        assert sum(k * c for k, c in hist.items()) == sum(p.num_variables for p in problems)


class TestBiasRange:
    def test_rows_and_dominance(self):
        series = [
            ProblemSetSpec(NAMED_SETS["U5"], NAMED_SETS["U2"], 2, chimera=(2, 2, 4)),
            ProblemSetSpec(NAMED_SETS["U5"], coefficient_set("-100,100"), 2, chimera=(2, 2, 4)),
        ]
        rows = fixedcount_vs_biasrange(series, SamplerConfig(sweeps=50), SpvarParams(sample_size=100))
        assert [r["n"] for r in rows] == [2, 100]
        assert rows[1]["mean_fixed"] == 32
        assert rows[0]["mean_fixed"] < 32

    def test_trend(self):
        assert biasrange_trend([{"n": n, "mean_fixed": n * n} for n in range(1, 6)]) == pytest.approx(1.0)


class TestCorrelationDistance:
    def test_distance_zero(self, rng):
        p = random_problem(rng, 10, biases=[0])
        rows = correlation_vs_distance(p, sample_sa(p, SamplerConfig(reads=50, sweeps=20)))
        assert rows[0] == {"distance": 0, "correlation": 1.0, "references": 10}

    def test_ferromagnetic_chain(self):
        p = IsingProblem({i: 0 for i in range(10)}, {(i, i + 1): -1 for i in range(9)})
        ss = sample_sa(p, SamplerConfig(reads=100, sweeps=500, beta_range=(0.1, 10.0)))
        rows = correlation_vs_distance(p, ss)
        assert len(rows) == 10
        assert all(r["correlation"] > 0.95 for r in rows)

    def test_needs_zero_bias(self):
        p = IsingProblem({0: 1})
        with pytest.raises(ValueError):
            correlation_vs_distance(p, sample_sa(p, SamplerConfig(reads=2)))

    def test_absolute_not_below_signed(self, rng):
        p = random_problem(rng, 12, biases=[0])
        ss = sample_sa(p, SamplerConfig(reads=80, sweeps=20))
        signed = correlation_vs_distance(p, ss)
        absolute = correlation_vs_distance(p, ss, absolute=True)
        assert all(a["correlation"] >= s["correlation"] - 1e-12 for a, s in zip(absolute, signed))
