"""Event-driven Monte Carlo of the fluid queue.

Between phase jumps the level moves linearly at r_Z and sticks at zero while
the rate is negative. The level is sampled on a deterministic time stride
after the warm-up, and every sample is binned on the survival grid as it is
produced so that memory does not grow with the horizon.
"""

import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numba import njit
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from .config import Config
from .errors import InsufficientSamplesError
from .kernel import branch_points
from .logger import get_logger
from .model import ModelParams, require_stable
from .numerics import fit_log_decay

logger = get_logger()


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: ModelParams
    horizon: float = Field(default=Config.DEFAULT_HORIZON, gt=0, description="time units per replication")
    warmup: float = Field(default=Config.DEFAULT_WARMUP, ge=0)
    seed: int = Field(default=Config.DEFAULT_SEED, ge=0, lt=2**64)
    sample_stride: float = Field(default=Config.DEFAULT_STRIDE, gt=0)
    grid_max: Optional[float] = Field(default=None, gt=0)
    grid_points: int = Field(default=Config.SIM_GRID_POINTS, ge=2)
    blocks: int = Field(default=Config.SIM_BLOCKS, ge=2)
    tracked_phases: int = Field(default=Config.SIM_TRACKED_PHASES, ge=1)

    @model_validator(mode="after")
    def _check_horizon(self) -> "SimConfig":
        if self.horizon <= self.warmup:
            raise ValueError("horizon must exceed the warm-up period")
        return self

    def grid(self) -> np.ndarray:
        x_max = self.grid_max or Config.SIM_GRID_SPAN / branch_points(self.params).alpha1
        return np.linspace(0.0, x_max, self.grid_points)


@njit(nogil=True, cache=True)
def _advance(
    state, exponentials, uniforms, lam, mu, c, r, stride, warmup, horizon, block_length,
    grid, hist, phase_hist, phase_counts, zero_counts, samples, phase_time,
):
    """Consume one chunk of variates; returns the number of events used."""
    t, x, phase, next_sample, jumps = state[0], state[1], int(state[2]), state[3], state[4]
    n_blocks = hist.shape[0]
    tracked = phase_time.shape[0]
    used = 0
    for k in range(exponentials.shape[0]):
        if t >= horizon:
            break
        total = lam + min(phase, c) * mu
        end = min(t + exponentials[k] / total, horizon)
        rate = float(phase - c) if phase < c else r

        while next_sample <= end:
            level = x + rate * (next_sample - t)
            if level < 0.0:
                level = 0.0
            block = min(int((next_sample - warmup) / block_length), n_blocks - 1)
            idx = np.searchsorted(grid, level)
            hist[block, idx] += 1
            samples[block] += 1
            if level == 0.0:
                zero_counts[block] += 1
            if phase < tracked:
                phase_hist[phase, idx] += 1
                phase_counts[block, phase] += 1
            next_sample += stride

        start = max(t, warmup)
        if end > start and phase < tracked:
            phase_time[phase] += end - start
        x = x + rate * (end - t)
        if x < 0.0:
            x = 0.0
        t = end
        used = k + 1
        if t >= horizon:
            break
        if uniforms[k] * total < lam:
            phase += 1
        else:
            phase -= 1
        jumps += 1

    state[0] = t
    state[1] = x
    state[2] = phase
    state[3] = next_sample
    state[4] = jumps
    return used


@dataclass
class ReplicationCounts:
    hist: np.ndarray  # (blocks, grid+1) samples binned by searchsorted(grid, X)
    phase_hist: np.ndarray  # (tracked, grid+1)
    phase_counts: np.ndarray  # (blocks, tracked)
    zero_counts: np.ndarray  # (blocks,)
    samples: np.ndarray  # (blocks,)
    phase_time: np.ndarray  # (tracked,)
    jumps: int
    observed_time: float


def _run_replication(config: SimConfig, seed: np.random.SeedSequence, chunk: int) -> ReplicationCounts:
    p = config.params
    grid = config.grid()
    rng = np.random.default_rng(seed)
    blocks, tracked = config.blocks, config.tracked_phases
    counts = ReplicationCounts(
        hist=np.zeros((blocks, len(grid) + 1), dtype=np.int64),
        phase_hist=np.zeros((tracked, len(grid) + 1), dtype=np.int64),
        phase_counts=np.zeros((blocks, tracked), dtype=np.int64),
        zero_counts=np.zeros(blocks, dtype=np.int64),
        samples=np.zeros(blocks, dtype=np.int64),
        phase_time=np.zeros(tracked),
        jumps=0,
        observed_time=config.horizon - config.warmup,
    )
    state = np.array([0.0, 0.0, 0.0, config.warmup, 0.0])
    block_length = (config.horizon - config.warmup) / blocks
    while state[0] < config.horizon:
        _advance(
            state, rng.standard_exponential(chunk), rng.random(chunk),
            p.lam, p.mu, p.c, p.r, config.sample_stride, config.warmup, config.horizon, block_length,
            grid, counts.hist, counts.phase_hist, counts.phase_counts, counts.zero_counts,
            counts.samples, counts.phase_time,
        )
    counts.jumps = int(state[4])
    return counts


class TailFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    rate: float
    ci_low: float
    ci_high: float
    stderr: float
    power: float
    prefactor: float
    window: Tuple[float, float]
    samples_in_window: int


@dataclass
class SurvivalEstimate:
    config: SimConfig
    grid: np.ndarray
    block_hist: np.ndarray
    phase_hist: np.ndarray
    block_phase_counts: np.ndarray
    block_zero_counts: np.ndarray
    block_samples: np.ndarray
    phase_time: np.ndarray
    observed_time: float
    jumps: int
    replications: int
    fit: Optional[TailFit] = field(default=None)

    @property
    def sample_count(self) -> int:
        return int(self.block_samples.sum())

    @staticmethod
    def _exceedances(hist: np.ndarray) -> np.ndarray:
        """#(X > grid[j]) from bin counts, along the last axis."""
        return np.cumsum(hist[..., ::-1], axis=-1)[..., ::-1][..., 1:]

    @property
    def survival(self) -> np.ndarray:
        return self._exceedances(self.block_hist.sum(axis=0)) / self.sample_count

    @property
    def phase_survival(self) -> np.ndarray:
        """P̂(Z = i, X > x), shape (tracked, grid)."""
        return self._exceedances(self.phase_hist) / self.sample_count

    @property
    def atom_fraction(self) -> float:
        return float(self.block_zero_counts.sum() / self.sample_count)

    def phase_frequencies(self) -> Tuple[np.ndarray, np.ndarray]:
        """P̂(Z = i) with batch-means standard errors."""
        mean = self.block_phase_counts.sum(axis=0) / self.sample_count
        per_block = self.block_phase_counts / self.block_samples[:, None]
        stderr = per_block.std(axis=0, ddof=1) / math.sqrt(len(self.block_samples))
        return mean, stderr

    def sojourn_fractions(self) -> np.ndarray:
        return self.phase_time / (self.observed_time * self.replications)

    def to_frame(self, phases: Optional[Sequence[int]] = None) -> pd.DataFrame:
        phases = range(self.config.params.c + 1) if phases is None else phases
        frame = pd.DataFrame({"x": self.grid, "survival": self.survival})
        phase_survival = self.phase_survival
        for phase in phases:
            if phase < phase_survival.shape[0]:
                frame[f"survival_phase_{phase}"] = phase_survival[phase]
        return frame

    def summary(self) -> dict:
        return {
            "samples": self.sample_count,
            "jumps": self.jumps,
            "replications": self.replications,
            "atom_fraction": self.atom_fraction,
            "fit": self.fit.model_dump() if self.fit else None,
        }


def _merge(config: SimConfig, parts: List[ReplicationCounts]) -> SurvivalEstimate:
    return SurvivalEstimate(
        config=config,
        grid=config.grid(),
        block_hist=np.concatenate([part.hist for part in parts]),
        phase_hist=sum(part.phase_hist for part in parts),
        block_phase_counts=np.concatenate([part.phase_counts for part in parts]),
        block_zero_counts=np.concatenate([part.zero_counts for part in parts]),
        block_samples=np.concatenate([part.samples for part in parts]),
        phase_time=sum(part.phase_time for part in parts),
        observed_time=parts[0].observed_time,
        jumps=sum(part.jumps for part in parts),
        replications=len(parts),
    )


def simulate(
    config: SimConfig,
    replications: int = 1,
    max_workers: Optional[int] = None,
    progress: bool = False,
    chunk: int = Config.SIM_CHUNK,
) -> SurvivalEstimate:
    """Run independent replications of ``config.horizon`` each and merge their counts.

    Replication streams come from spawning ``config.seed``, so results are
    reproducible for a fixed seed and replication count.
    """
    require_stable(config.params)
    seeds = np.random.SeedSequence(config.seed).spawn(replications)
    workers = max_workers or min(replications, Config.SIM_MAX_WORKERS)
    logger.info(
        f"Simulating {replications} replication(s) of T={config.horizon:g} for {config.params.label()}"
    )
    parts: List[Optional[ReplicationCounts]] = [None] * replications
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_run_replication, config, seed, chunk): i for i, seed in enumerate(seeds)}
        for future in tqdm(as_completed(futures), total=replications, desc="replications", disable=not progress):
            parts[futures[future]] = future.result()
    estimate = _merge(config, parts)
    logger.info(f"Merged {estimate.sample_count} samples from {estimate.jumps} jump events")
    return estimate


def _window_fit(grid: np.ndarray, survival: np.ndarray, power: float) -> Tuple[float, float]:
    rate, _, prefactor, _, _, _ = fit_log_decay(grid, survival, power)
    return rate, prefactor


def fit_tail(
    estimate: SurvivalEstimate,
    window: Sequence[float],
    power: float = 0.0,
    resamples: int = Config.BOOTSTRAP_RESAMPLES,
    min_samples: int = Config.MIN_TAIL_SAMPLES,
    seed: Optional[int] = None,
) -> TailFit:
    """Slope of log P̂(X > x) − power·log x over the window, with a block-bootstrap interval."""
    x_lo, x_hi = float(window[0]), float(window[1])
    mask = (estimate.grid >= x_lo) & (estimate.grid <= x_hi)
    grid = estimate.grid[mask]
    exceed = SurvivalEstimate._exceedances(estimate.block_hist)[:, mask]
    total = exceed.sum(axis=0)
    in_window = int(total[0] - total[-1]) if len(total) else 0
    if len(grid) < 4 or in_window < min_samples or np.any(total == 0):
        raise InsufficientSamplesError(
            "too few samples in the fit window",
            {"window": [x_lo, x_hi], "samples": in_window, "required": min_samples},
        )
    samples = estimate.block_samples
    rate, prefactor = _window_fit(grid, total / samples.sum(), power)

    rng = np.random.default_rng(estimate.config.seed if seed is None else seed)
    n_blocks = len(samples)
    rates = []
    for _ in range(resamples):
        pick = rng.integers(0, n_blocks, n_blocks)
        counts = exceed[pick].sum(axis=0)
        if np.any(counts == 0):
            continue
        rates.append(_window_fit(grid, counts / samples[pick].sum(), power)[0])
    if len(rates) < 2:
        raise InsufficientSamplesError("bootstrap resamples leave the window empty", {"window": [x_lo, x_hi]})
    rates = np.asarray(rates)
    low, high = np.percentile(rates, [2.5, 97.5])
    fit = TailFit(
        rate=rate,
        ci_low=float(low),
        ci_high=float(high),
        stderr=float(rates.std(ddof=1)),
        power=power,
        prefactor=prefactor,
        window=(x_lo, x_hi),
        samples_in_window=in_window,
    )
    estimate.fit = fit
    logger.info(f"Tail fit on [{x_lo:g}, {x_hi:g}]: rate={rate:.6g} CI=({low:.6g}, {high:.6g})")
    return fit
