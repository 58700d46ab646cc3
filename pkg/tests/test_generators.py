import numpy as np
import pytest

from spvarkit.embedding import chimera_graph
from spvarkit.generators import (
    NAMED_SETS,
    CoefficientSet,
    ProblemSetSpec,
    biasrange_series,
    coefficient_set,
    random_ising,
)
from spvarkit.ispvar import IspvarParams, ispvar
from spvarkit.samplers import SamplerConfig


class TestCoefficientSet:
    def test_named(self):
        assert NAMED_SETS["U2"].values == (-2, -1, 0, 1, 2)
        assert NAMED_SETS["S28"].values == (-28, -19, -13, -8, 8, 13, 19, 28)

    @pytest.mark.parametrize(
        "spec,values",
        [("u5", tuple(range(-5, 6))), ("U3", (-3, -2, -1, 0, 1, 2, 3)), ("-3,1,3", (-3, 1, 3)), ("zero", (0,))],
    )
    def test_parse(self, spec, values):
        assert coefficient_set(spec).values == values

    def test_parse_error(self):
        with pytest.raises(ValueError):
            coefficient_set("V7")

    def test_empty(self):
        with pytest.raises(ValueError):
            CoefficientSet(())

    def test_zero_excluded_not_drawable(self):
        s = NAMED_SETS["U2"].without_zero()
        assert 0 not in s.drawable
        assert set(s.draw(np.random.default_rng(0), 500)) == {-2, -1, 1, 2}

    def test_nothing_to_draw(self):
        with pytest.raises(ValueError):
            NAMED_SETS["ZERO"].without_zero().draw(np.random.default_rng(0), 1)


class TestRandomIsing:
    def test_u2_membership(self):
        g = chimera_graph(4)
        p = random_ising(g, NAMED_SETS["U2"], NAMED_SETS["U2"], 3)
        assert set(p.J.values()) <= {-2, -1, 1, 2}
        assert set(p.h.values()) <= {-2, -1, 0, 1, 2}
        assert len(p.J) == len(g.edges) and p.num_variables == 128

    def test_zero_biases_allowed(self):
        p = random_ising(chimera_graph(2), NAMED_SETS["U2"], NAMED_SETS["U2"], 0)
        assert 0 in set(p.h.values())

    def test_zero_bias_family(self):
        p = random_ising(chimera_graph(2), NAMED_SETS["U5"], NAMED_SETS["ZERO"], 1)
        assert p.is_zero_bias

    def test_deterministic(self):
        g = chimera_graph(2)
        a = random_ising(g, NAMED_SETS["U10"], NAMED_SETS["U10"], 9)
        assert a == random_ising(g, NAMED_SETS["U10"], NAMED_SETS["U10"], 9)
        assert a != random_ising(g, NAMED_SETS["U10"], NAMED_SETS["U10"], 10)

    def test_uniform_draws(self):
        p = random_ising(chimera_graph(8), NAMED_SETS["U2"], NAMED_SETS["U2"], 0)
        counts = np.unique(list(p.J.values()), return_counts=True)[1]
        # 1472 edges over 4 values: each near 368
        assert counts.min() > 300 and counts.max() < 440

    def test_zero_bias_triggers_auto_mode(self):
        p = random_ising(chimera_graph(1), NAMED_SETS["U5"], NAMED_SETS["ZERO"], 2)
        out = ispvar(p, SamplerConfig(kind="exact"), IspvarParams.constant(1, 0.3, sample_size=64))
        assert out.reports[0].fixed_z2 >= 1


class TestProblemSetSpec:
    def test_seed_enumeration(self):
        spec = ProblemSetSpec(NAMED_SETS["U5"], NAMED_SETS["U5"], 3, base_seed=7, chimera=(2, 2, 4))
        graph = spec.graph()
        assert [spec.seed(i) for i in range(3)] == [7, 8, 9]
        assert spec.instances()[2] == random_ising(graph, NAMED_SETS["U5"], NAMED_SETS["U5"], 9)

    def test_exactly_one_graph_source(self):
        with pytest.raises(ValueError):
            ProblemSetSpec(NAMED_SETS["U5"], NAMED_SETS["U5"], 1, chimera=None)

    def test_edge_file(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("# triangle plus isolated vertex\n0 1\n1 2\n0 2\n5\n")
        spec = ProblemSetSpec(NAMED_SETS["U2"], NAMED_SETS["U2"], 2, chimera=None, edge_file=str(path))
        p = spec.instance(0)
        assert p.variables == (0, 1, 2, 5) and set(p.J) == {(0, 1), (1, 2), (0, 2)}


class TestBiasRange:
    def test_first_set(self):
        assert biasrange_series(5)[0].biases.values == (-1, 0, 1)

    def test_length_and_couplers(self):
        series = biasrange_series(5)
        assert len(series) == 10
        assert all(s.couplers.values == tuple(range(-5, 6)) for s in series)

    def test_membership_scan(self):
        for n, spec in enumerate(biasrange_series(3, n_max=10, chimera=(2, 2, 4)), start=1):
            for p in spec.instances():
                assert all(-n <= b <= n for b in p.h.values())
                assert all(c != 0 and -5 <= c <= 5 for c in p.J.values())

    def test_invalid(self):
        with pytest.raises(ValueError):
            biasrange_series(1, n_max=0)
