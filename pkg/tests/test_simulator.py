import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.errors import InsufficientSamplesError, UnstableModelError
from src.model import ModelParams, phase_stationary
from src.simulator import SimConfig, fit_tail, simulate

from .conftest import BRANCH, POLE, POLE_AT_BRANCH, make_params

CHUNK = 1 << 16


@pytest.fixture(scope="module")
def pole_estimate():
    config = SimConfig(params=make_params(*POLE), horizon=1.0e6, warmup=100.0, seed=7, blocks=20)
    return simulate(config, replications=2, chunk=CHUNK)


class TestSimConfig:
    def test_horizon_must_exceed_warmup(self, pole_params):
        with pytest.raises(ValidationError):
            SimConfig(params=pole_params, horizon=10.0, warmup=10.0)

    def test_default_grid_spans_branch_point_scale(self, pole_params):
        grid = SimConfig(params=pole_params).grid()
        assert grid[0] == 0.0
        assert grid[-1] == pytest.approx(40.0 / (4.0 - 2.0 * np.sqrt(3.0)))

    def test_explicit_grid(self, pole_params):
        grid = SimConfig(params=pole_params, grid_max=10.0, grid_points=11).grid()
        assert grid.tolist() == pytest.approx(list(range(11)))


class TestSimulate:
    def test_reproducible(self, pole_params):
        config = SimConfig(params=pole_params, horizon=2.0e4, warmup=10.0, seed=11, blocks=5)
        first = simulate(config, chunk=CHUNK)
        second = simulate(config, chunk=CHUNK)
        assert np.array_equal(first.block_hist, second.block_hist)
        assert first.jumps == second.jumps

    def test_seed_changes_the_path(self, pole_params):
        a = simulate(SimConfig(params=pole_params, horizon=2.0e4, warmup=10.0, seed=1, blocks=5), chunk=CHUNK)
        b = simulate(SimConfig(params=pole_params, horizon=2.0e4, warmup=10.0, seed=2, blocks=5), chunk=CHUNK)
        assert not np.array_equal(a.block_hist, b.block_hist)

    def test_replications_concatenate_blocks(self, pole_estimate):
        assert pole_estimate.replications == 2
        assert pole_estimate.block_samples.shape == (40,)
        # one sample per unit time after the warm-up
        assert pole_estimate.sample_count == pytest.approx(2 * (1.0e6 - 100.0), abs=4)

    def test_unstable(self):
        params = ModelParams(c=1, lam=1.0, mu=3.0, r=3.0)
        with pytest.raises(UnstableModelError):
            simulate(SimConfig(params=params, horizon=100.0, warmup=1.0, grid_max=10.0))

    def test_atom_at_zero(self, pole_estimate):
        assert pole_estimate.atom_fraction > 0.0
        assert pole_estimate.atom_fraction == pytest.approx(1.0 / 3.0, abs=0.03)
        assert pole_estimate.survival[0] + pole_estimate.atom_fraction == pytest.approx(1.0)

    def test_survival_is_monotone(self, pole_estimate):
        assert np.all(np.diff(pole_estimate.survival) <= 0.0)
        assert np.all(pole_estimate.phase_survival.sum(axis=0) <= pole_estimate.survival + 1e-12)

    def test_phase_frequencies(self, pole_estimate, pole_params):
        frequencies, stderr = pole_estimate.phase_frequencies()
        xi = phase_stationary(pole_params).head(2)
        assert np.all(np.abs(frequencies[:3] - xi) <= 4.0 * stderr[:3] + 1e-3)

    def test_sojourn_fractions(self, pole_estimate, pole_params):
        fractions = pole_estimate.sojourn_fractions()
        assert fractions[:3] == pytest.approx(phase_stationary(pole_params).head(2), abs=0.02)
        assert fractions.sum() == pytest.approx(1.0, abs=1e-6)

    def test_frame(self, pole_estimate):
        frame = pole_estimate.to_frame()
        assert list(frame.columns) == ["x", "survival", "survival_phase_0", "survival_phase_1"]
        assert len(frame) == len(pole_estimate.grid)

    def test_summary(self, pole_estimate):
        summary = pole_estimate.summary()
        assert summary["replications"] == 2
        assert summary["samples"] == pole_estimate.sample_count


class TestFitTail:
    def test_too_few_samples(self, pole_estimate):
        with pytest.raises(InsufficientSamplesError):
            fit_tail(pole_estimate, (4.0, 16.0), min_samples=10**9)

    def test_empty_window(self, pole_estimate):
        with pytest.raises(InsufficientSamplesError):
            fit_tail(pole_estimate, (70.0, 74.0))

    def test_rough_rate(self, pole_estimate):
        # far enough out for the dominant mode, close enough for ~1e3 samples at the upper end
        fit = fit_tail(pole_estimate, (2.0, 10.0), resamples=50)
        assert fit.rate == pytest.approx(0.5, rel=0.15)
        assert fit.ci_low < fit.ci_high
        assert pole_estimate.fit is fit


@pytest.mark.slow
class TestTailRates:
    def test_pole_rate(self):
        config = SimConfig(params=make_params(*POLE), horizon=2.5e6, warmup=1.0e3, seed=2024)
        estimate = simulate(config, replications=4)
        assert fit_tail(estimate, (4.0, 16.0)).rate == pytest.approx(0.5, rel=0.05)

    def test_pole_at_branch_rate(self):
        config = SimConfig(params=make_params(*POLE_AT_BRANCH), horizon=2.5e6, warmup=1.0e3, seed=2024)
        estimate = simulate(config, replications=4)
        assert fit_tail(estimate, (3.0, 9.0), power=-0.5).rate == pytest.approx(1.0, rel=0.10)

    def test_branch_rate(self):
        params = make_params(*BRANCH)
        alpha1 = (math.sqrt(90.0) - math.sqrt(20.0)) ** 2 / 10.0
        # fast phase changes; a fine stride keeps the window populated
        config = SimConfig(params=params, horizon=2.5e5, warmup=1.0e2, seed=2024, sample_stride=0.05)
        estimate = simulate(config, replications=4)
        assert estimate.jumps >= 10**7
        assert fit_tail(estimate, (1.0, 3.5), power=-1.5).rate == pytest.approx(alpha1, rel=0.10)
