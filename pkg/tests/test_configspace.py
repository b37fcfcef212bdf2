import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import truncnorm

from jahsband import configspace as cs

from conftest import float_space

SPACES_DIR = Path(__file__).resolve().parents[1] / "spaces"


def table_space():
    return cs.load_space(SPACES_DIR / "jahs_table3_4.json")


class TestBuildSpace:
    def test_full_table_loads_with_15_parameters(self):
        space = table_space()
        assert len(space) == 15
        momentum = space["Momentum (SGD)"]
        assert momentum.kind == "log_float"
        assert (momentum.lo, momentum.hi, momentum.default) == (0.5, 0.999, 0.99)
        assert space.grammar is not None

    def test_hpo_block_is_8_parameters(self):
        space = table_space()
        hpo = [
            "Optimizer", "Momentum (SGD)", "Initial Learning Rate",
            "Learning Rate Scheduler", "Weight Decay",
            "Foreground Oversampling", "Loss Function",
            "Data Augmentation Factor",
        ]
        assert [n for n in space.names if n in hpo] == hpo

    def test_empty_spec_list_is_error(self):
        with pytest.raises(cs.EmptyDomainError):
            cs.build_space([])

    def test_default_out_of_domain(self):
        with pytest.raises(cs.DefaultOutOfDomainError):
            cs.ParameterSpec("m", "log_float", lo=0.5, hi=0.999, default=0.2)

    def test_duplicate_names(self):
        spec = cs.ParameterSpec("x", "float", lo=0.0, hi=1.0, default=0.5)
        with pytest.raises(cs.DuplicateNameError):
            cs.build_space([spec, spec])

    def test_log_float_needs_positive_lo(self):
        with pytest.raises(cs.SpaceError):
            cs.ParameterSpec("x", "log_float", lo=0.0, hi=1.0, default=0.5)

    def test_roundtrip_through_dict(self):
        space = table_space()
        again = cs.load_space(cs.space_to_dict(space))
        assert again.names == space.names
        assert cs.space_to_dict(again) == cs.space_to_dict(space)


class TestNormalize:
    def test_log_float_bounds_and_interior(self):
        space = table_space()
        lr = space["Initial Learning Rate"]
        assert lr.to_unit(1e-5) == pytest.approx(0.0)
        # hand check: (log(1e-2) - log(1e-5)) / (log(0.1) - log(1e-5)) = 3/4
        assert lr.to_unit(1e-2) == pytest.approx(0.75)

    def test_ordinal_index_over_k_minus_1(self):
        space = table_space()
        assert space["Model Scale"].to_unit(1) == pytest.approx(1 / 3)

    def test_categorical_maps_to_index(self):
        space = table_space()
        assert space["Optimizer"].to_unit("AdamW") == 2.0

    def test_unknown_parameter(self):
        space = float_space(2)
        with pytest.raises(cs.UnknownParameterError):
            cs.normalize(space, cs.Configuration({"p0": 0.5, "nope": 1.0}))

    def test_roundtrip_floats(self, rng):
        space = float_space(4)
        for _ in range(200):
            config = cs.sample(space, "uniform", rng)
            back = cs.denormalize(space, cs.normalize(space, config))
            for name in space.names:
                assert back[name] == pytest.approx(config[name], abs=1e-12)

    def test_roundtrip_integer_ordinal_after_rounding(self, rng):
        space = cs.build_space([
            cs.ParameterSpec("i", "integer", lo=3, hi=17, default=5),
            cs.ParameterSpec("o", "ordinal", values=(0.5, 1, 1.5, 2), default=1),
        ])
        for _ in range(200):
            config = cs.sample(space, "uniform", rng)
            back = cs.denormalize(space, cs.normalize(space, config))
            assert back.assignments == config.assignments


class TestSample:
    def test_uniform_deterministic_given_seed(self):
        space = table_space()
        assert cs.sample(space, "uniform", 99) == cs.sample(space, "uniform", 99)

    def test_prior_mean_matches_truncnorm(self):
        space = float_space(1, default=0.5, confidence="high")
        rng = np.random.default_rng(0)
        values = [cs.sample(space, "prior", rng)["p0"] for _ in range(10000)]
        a, b = (0 - 0.5) / 0.125, (1 - 0.5) / 0.125
        expected = truncnorm.mean(a, b, loc=0.5, scale=0.125)
        assert np.mean(values) == pytest.approx(expected, abs=0.02)

    def test_high_confidence_concentrates(self):
        rng = np.random.default_rng(1)
        high = float_space(1, confidence="high")
        low = float_space(1, confidence="low")
        vh = [cs.sample(high, "prior", rng)["p0"] for _ in range(10000)]
        vl = [cs.sample(low, "prior", rng)["p0"] for _ in range(10000)]
        assert np.std(vh) < np.std(vl)

    def test_categorical_boosted_default_frequencies(self):
        space = cs.build_space([
            cs.ParameterSpec("c", "categorical", values=("a", "b", "c"),
                             default="a", prior_confidence="medium")
        ])
        rng = np.random.default_rng(2)
        counts = Counter(cs.sample(space, "prior", rng)["c"] for _ in range(10000))
        assert counts["a"] / 10000 == pytest.approx(4 / 6, abs=0.02)
        assert counts["b"] / 10000 == pytest.approx(1 / 6, abs=0.02)
        assert counts["c"] / 10000 == pytest.approx(1 / 6, abs=0.02)

    def test_around_centers_on_given_config(self):
        space = float_space(1)
        center = cs.Configuration({"p0": 0.8})
        rng = np.random.default_rng(3)
        values = [
            cs.sample(space, ("around", center), rng)["p0"] for _ in range(4000)
        ]
        # around uses medium confidence; compare to the analytic median
        a, b = (0 - 0.8) / 0.25, (1 - 0.8) / 0.25
        expected = truncnorm.median(a, b, loc=0.8, scale=0.25)
        assert np.median(values) == pytest.approx(expected, abs=0.02)

    def test_sampled_configs_always_valid(self):
        # 10 000-draw fuzz split across strategies and spaces
        table = table_space()
        small = float_space(3)
        rng = np.random.default_rng(4)
        for _ in range(5000):
            table.validate(cs.sample(table, "uniform", rng))
        center = cs.sample(small, "uniform", rng)
        for _ in range(2500):
            small.validate(cs.sample(small, "prior", rng))
            small.validate(cs.sample(small, ("around", center), rng))

    def test_integer_prior_rounds(self):
        space = cs.build_space(
            [cs.ParameterSpec("i", "integer", lo=1, hi=9, default=5,
                              prior_confidence="high")]
        )
        rng = np.random.default_rng(5)
        values = [cs.sample(space, "prior", rng)["i"] for _ in range(2000)]
        assert all(isinstance(v, int) for v in values)
        assert Counter(values).most_common(1)[0][0] == 5


class TestPriorPdf:
    def test_maximized_at_center_grid(self):
        space = float_space(1)
        center = cs.Configuration({"p0": 0.3})
        grid = np.linspace(0, 1, 101)
        scores = [
            cs.prior_pdf(space, cs.Configuration({"p0": float(g)}), center)
            for g in grid
        ]
        assert int(np.argmax(scores)) == 30
        assert all(s > 0 for s in scores)

    def test_center_scores_highest_jointly(self, rng):
        space = float_space(3)
        center = cs.Configuration({f"p{i}": 0.5 for i in range(3)})
        top = cs.prior_pdf(space, center, center)
        for _ in range(300):
            other = cs.sample(space, "uniform", rng)
            assert cs.prior_pdf(space, other, center) <= top

    def test_symmetry_around_midpoint_center(self):
        space = float_space(1)
        center = cs.Configuration({"p0": 0.5})
        left = cs.prior_pdf(space, cs.Configuration({"p0": 0.35}), center)
        right = cs.prior_pdf(space, cs.Configuration({"p0": 0.65}), center)
        assert left == pytest.approx(right, rel=1e-12)

    def test_categorical_factor_ratio(self):
        space = cs.build_space([
            cs.ParameterSpec("c", "categorical", values=("a", "b", "c"),
                             default="a", prior_confidence="medium")
        ])
        center = cs.Configuration({"c": "a"})
        ratio = cs.prior_pdf(space, center, center) / cs.prior_pdf(
            space, cs.Configuration({"c": "b"}), center
        )
        assert ratio == pytest.approx(4.0)

    def test_out_of_domain(self):
        space = float_space(1)
        with pytest.raises(cs.OutOfDomainError):
            cs.prior_pdf(
                space,
                cs.Configuration({"p0": 1.5}),
                cs.Configuration({"p0": 0.5}),
            )
