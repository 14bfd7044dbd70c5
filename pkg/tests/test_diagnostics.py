import math

import numpy as np
import pytest

from rdbalance import (
    DiagnosticsSeries,
    Grid,
    Interval,
    entropy_dissipation,
    fit_decay_rate,
    relative_entropy,
    simulate,
    weighted_norm,
)

from conftest import four_species_network
from test_solver import mode1_spec

GRID4 = Grid(Interval(1.0), (4,))


def constant_fields(values, grid=GRID4):
    values = np.asarray(values, dtype=float)
    return np.tile(values.reshape((-1,) + (1,) * grid.ndim),
                   (1,) + grid.shape)


class TestWeightedNorm:
    def test_zero_field(self):
        assert weighted_norm(constant_fields([0, 0, 0, 0]), [1, 1, 1, 1], 2,
                             GRID4) == 0.0

    def test_constant_alternating(self):
        h = constant_fields([0.1, -0.1, 0.1, -0.1])
        value = weighted_norm(h, [1, 1, 1, 1], 2, GRID4)
        assert np.isclose(value ** 2, 0.04, rtol=1e-14)

    def test_skewed_weights(self):
        h = constant_fields([0.1, 0.1, 0.1, 0.1])
        value = weighted_norm(h, [2.4, 0.6, 0.4, 1.6], 2, GRID4)
        assert np.isclose(value ** 2, 0.01 * 125 / 24, rtol=1e-13)

    def test_infinity_norm(self):
        h = constant_fields([0.1, -0.3, 0.2, 0.0])
        assert weighted_norm(h, [5, 5, 5, 5], math.inf, GRID4) == 0.3

    def test_monotone_in_p_on_normalized_measure(self, rng):
        # Jensen gives p-monotonicity after normalizing the measure, whose
        # total is (species count) * |Omega| = 4 here
        grid = Grid(Interval(1.0), (32,))
        total = 4.0
        for _ in range(10):
            h = rng.normal(size=(4, 32))
            a = np.ones(4)
            n2 = weighted_norm(h, a, 2, grid) / total ** (1 / 2)
            n4 = weighted_norm(h, a, 4, grid) / total ** (1 / 4)
            linf = weighted_norm(h, a, math.inf, grid)
            assert n2 <= n4 * (1 + 1e-12) <= linf * (1 + 1e-12)

    def test_p_below_one_rejected(self):
        with pytest.raises(ValueError):
            weighted_norm(constant_fields([1, 1, 1, 1]), [1, 1, 1, 1], 0.5, GRID4)


class TestRelativeEntropy:
    def test_zero_at_equilibrium(self):
        a = constant_fields([1, 1, 1, 1])
        assert relative_entropy(a, [1, 1, 1, 1], GRID4) == 0.0

    def test_pure_forward_value(self):
        a = constant_fields([2, 0, 2, 0])
        value = relative_entropy(a, [1, 1, 1, 1], GRID4)
        assert np.isclose(value, 4 * math.log(2), rtol=1e-14)

    def test_scaled_equilibrium_gives_total_mass(self):
        a_inf = np.array([2.4, 0.6, 0.4, 1.6])
        a = constant_fields(math.e * a_inf)
        assert np.isclose(relative_entropy(a, a_inf, GRID4), a_inf.sum(),
                          rtol=1e-13)

    def test_positive_away_from_equilibrium(self, rng):
        grid = Grid(Interval(1.0), (16,))
        a_inf = np.array([1.0, 2.0, 0.5, 1.5])
        for _ in range(20):
            a = rng.uniform(0.1, 3.0, size=(4, 16))
            value = relative_entropy(a, a_inf, grid)
            assert value > 0


class TestEntropyDissipation:
    def test_zero_at_equilibrium(self):
        net = four_species_network()
        a = constant_fields([1, 1, 1, 1])
        fisher, reaction = entropy_dissipation(a, net, [1, 1, 1, 1], GRID4)
        assert fisher == 0.0
        assert abs(reaction) <= 1e-15

    def test_homogeneous_reaction_value(self):
        # Psi(2.25, 0.25) = 2 ln 9
        net = four_species_network()
        a = constant_fields([1.5, 0.5, 1.5, 0.5])
        fisher, reaction = entropy_dissipation(a, net, [1, 1, 1, 1], GRID4)
        assert fisher == 0.0
        assert np.isclose(reaction, 2 * math.log(9), rtol=1e-13)

    def test_nonnegative_random(self, rng):
        net = four_species_network()
        grid = Grid(Interval(1.0), (16,))
        for _ in range(20):
            a = rng.uniform(0.05, 3.0, size=(4, 16))
            fisher, reaction = entropy_dissipation(a, net, [1, 1, 1, 1], grid)
            assert fisher >= 0
            assert reaction >= -1e-15

    def test_rejects_zero_cells(self):
        net = four_species_network()
        a = constant_fields([1, 0, 1, 1])
        with pytest.raises(ValueError, match="non-positive cell"):
            entropy_dissipation(a, net, [1, 1, 1, 1], GRID4)

    def test_balances_entropy_decay_along_trajectory(self):
        net = four_species_network()
        grid = Grid(Interval(1.0), (64,))
        result = simulate(net, grid, mode1_spec(), dt=1e-4, t_end=0.01)
        sr = result.series
        dH = np.diff(sr.entropy) / np.diff(sr.t)
        dissipation = sr.fisher + sr.reaction
        mid = 0.5 * (dissipation[1:] + dissipation[:-1])
        assert np.max(np.abs(dH + mid) / mid) <= 0.03


class TestFitDecayRate:
    def test_exact_exponential(self):
        t = np.linspace(0, 5, 100)
        fit = fit_decay_rate(t, 3 * np.exp(-2 * t))
        assert abs(fit.rate - 2.0) <= 1e-10
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert not fit.degenerate

    def test_two_scale_window_picks_slow_mode(self):
        t = np.linspace(0, 5, 100)
        y = np.exp(-t) + np.exp(-10 * t)
        fit = fit_decay_rate(t, y, window=(2.0, 4.0))
        assert 0.99 <= fit.rate <= 1.01

    def test_constant_series_degenerate(self):
        t = np.linspace(0, 1, 20)
        fit = fit_decay_rate(t, np.full(20, 2.5))
        assert fit.rate == 0.0
        assert fit.r_squared == 0.0
        assert fit.degenerate

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="at least 10"):
            fit_decay_rate(np.linspace(0, 1, 5), np.ones(5))

    def test_nonpositive_y(self):
        t = np.linspace(0, 1, 20)
        y = np.ones(20)
        y[3] = 0.0
        with pytest.raises(ValueError, match="strictly positive"):
            fit_decay_rate(t, y)


class TestQuadratureConsistency:
    def test_refinement_second_order(self):
        # smooth non-periodic fields; midpoint rule error is O(h^2)
        def norm_at(n):
            grid = Grid(Interval(1.0), (n,))
            x = grid.axis_centers(0)
            h = np.stack([np.exp(x) * (1 + 0.3 * np.cos(math.pi * x)),
                          np.sin(1.5 * x) + 0.2,
                          x ** 2 + 0.1,
                          np.cosh(x - 0.3)])
            return weighted_norm(h, [1.0, 2.0, 0.5, 1.5], 2, grid)

        reference = norm_at(4096)
        errors = [abs(norm_at(n) - reference) for n in (16, 32, 64)]
        slopes = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert all(1.8 <= s <= 2.2 for s in slopes)


class TestSeriesCsv:
    def test_round_trip(self, tmp_path):
        net = four_species_network()
        grid = Grid(Interval(1.0), (16,))
        result = simulate(net, grid, mode1_spec(), dt=1e-3, t_end=0.02,
                          output_every=4)
        path = tmp_path / "diag.csv"
        result.series.write_csv(path, comment="rdbalance test 0000")
        loaded = DiagnosticsSeries.read_csv(path)
        assert np.array_equal(loaded.t, result.series.t)
        assert np.array_equal(loaded.masses, result.series.masses)
        assert np.array_equal(loaded.l2, result.series.l2)
        with open(path) as fh:
            first = fh.readline()
        assert first.startswith("# rdbalance")

    def test_column_accessor(self, tmp_path):
        net = four_species_network()
        grid = Grid(Interval(1.0), (16,))
        series = simulate(net, grid, mode1_spec(), dt=1e-3, t_end=0.01).series
        assert np.array_equal(series.column("L2"), series.l2)
        assert np.array_equal(series.column("M2"), series.masses[:, 1])
        with pytest.raises(KeyError):
            series.column("bogus")

    def test_full_precision(self, tmp_path):
        t = np.array([0.0, 1 / 3, 2 / 3])
        series = DiagnosticsSeries(
            t=t, masses=np.full((3, 1), 1 / 7), entropy=t * math.pi,
            l2=t + 1 / 9, l4=t, linf=t, fisher=t, reaction=t)
        path = tmp_path / "d.csv"
        series.write_csv(path)
        loaded = DiagnosticsSeries.read_csv(path)
        assert np.array_equal(loaded.t, t)
        assert np.array_equal(loaded.masses, series.masses)
        assert np.array_equal(loaded.l2, series.l2)
