import json
from fractions import Fraction

import pytest

from spvarkit.formats import (
    dumps,
    load_problem,
    problem_from_json,
    problem_to_json,
    sampleset_from_json,
    sampleset_to_json,
    save_problem,
    sha256_of,
)
from spvarkit.model import IsingProblem
from spvarkit.samplers import SamplerConfig, sample_sa

from conftest import random_problem


class TestProblemJson:
    def test_layout(self):
        doc = problem_to_json(IsingProblem({0: 1, 1: 0}, {(0, 1): -2}, 3))
        assert doc == {"variables": [0, 1], "h": {"0": 1, "1": 0}, "J": [[0, 1, -2]], "offset": 3}

    def test_round_trip(self, rng, tmp_path):
        p = random_problem(rng, 9, offset=4)
        save_problem(p, tmp_path / "p.json")
        assert load_problem(tmp_path / "p.json") == p

    def test_fraction_round_trip(self, fraction_problem):
        text = dumps(problem_to_json(fraction_problem))
        back = problem_from_json(json.loads(text))
        assert back == fraction_problem
        assert isinstance(back.h[0], Fraction)

    def test_float_round_trip(self):
        p = IsingProblem({0: 0.1, 1: -1e-7}, {(0, 1): 1 / 3})
        assert problem_from_json(json.loads(dumps(problem_to_json(p)))) == p

    def test_isolated_variable_survives(self):
        p = IsingProblem({}, {}, 0, (0, 4))
        assert problem_from_json(problem_to_json(p)).variables == (0, 4)

    def test_dumps_is_canonical(self):
        assert dumps({"b": 1, "a": [1, 2]}) == dumps({"a": [1, 2], "b": 1})
        assert dumps({}).endswith("\n")


class TestSampleJson:
    def test_round_trip(self, rng):
        p = random_problem(rng, 7)
        ss = sample_sa(p, SamplerConfig(reads=12, sweeps=30))
        doc = json.loads(dumps(sampleset_to_json(ss, p)))
        assert doc["problem_sha"] == sha256_of(problem_to_json(p))
        back = sampleset_from_json(doc, p)
        assert (back.samples == ss.samples).all() and (back.energies == ss.energies).all()

    def test_tampered_energy(self, rng):
        p = random_problem(rng, 5)
        doc = sampleset_to_json(sample_sa(p, SamplerConfig(reads=3, sweeps=10)), p)
        doc["solutions"][0]["energy"] += 1
        with pytest.raises(ValueError):
            sampleset_from_json(doc, p)


class TestProblemJsonErrors:
    @pytest.mark.parametrize("doc", [{}, [], {"offset": 1}])
    def test_not_a_problem(self, doc):
        with pytest.raises(ValueError):
            problem_from_json(doc)
