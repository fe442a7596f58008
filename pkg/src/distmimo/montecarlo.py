"""Seeded BER campaigns over a designed-SNR grid.

The designed SNR embodies the mmWave power-scaling law: transmit power is
``P = snr_linear * n_streams * n_paths / (n_rx * n_tx)``, so BER curves
stay comparable while per-RAU arrays grow.

Campaigns are deterministic: every random quantity comes from a named
substream keyed by (seed, purpose, point, batch, ...), trials are grouped
into fixed-size batches, and stopping decisions happen at checkpoints that
depend only on accumulated integer counters.  Thread count therefore never
changes the output.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._batch import BATCH_RUNNERS
from .channel import db_to_linear
from .curves import BerCurve, BerPoint

MODES = ("single_user_fc", "single_user_pc", "multiuser_dl")


class PreconditionError(ValueError):
    """A config violates a structural precondition of its mode."""


def designed_snr_to_power(snr_dg_db: float, n_streams: int, n_paths: int,
                          n_rx: int, n_tx: int) -> float:
    """Transmit power for a designed SNR: P = snr * n_s * L / (n_rx * n_tx)."""
    if min(n_streams, n_paths, n_rx, n_tx) < 1:
        raise ValueError("all parameters must be positive")
    return 10.0 ** (snr_dg_db / 10.0) * n_streams * n_paths / (n_rx * n_tx)


def _normalize_g(g_db, n_rows: int, n_cols: int):
    """Scalar or (n_rows, n_cols) nested sequence -> tuple-of-tuples in dB."""
    if isinstance(g_db, (int, float)):
        return tuple((float(g_db),) * n_cols for _ in range(n_rows))
    rows = tuple(tuple(float(v) for v in row) for row in g_db)
    if len(rows) != n_rows or any(len(r) != n_cols for r in rows):
        raise ValueError(f"g_db matrix must be {n_rows}x{n_cols}, got {rows!r}")
    return rows


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a campaign needs; defaults are the desk-scale baseline.

    Single-user modes use (k_tx, n_tx, k_rx, n_rx); the multiuser downlink
    uses (k_bs, n_bs, k_users, n_user).  ``g_db`` is a scalar applied to
    every subchannel or a full (receive RAUs x transmit RAUs) matrix.
    RF chain counts follow the rf_per_stream rule (default 2 per stream).
    """

    mode: str
    n_streams: int
    n_paths: int = 3
    k_tx: int = 2
    k_rx: int = 2
    n_tx: int = 32
    n_rx: int = 32
    k_bs: int = 2
    n_bs: int = 32
    k_users: int = 2
    n_user: int = 8
    rf_per_stream: int = 2
    g_db: object = -20.0
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    min_errors: int = 100
    max_trials: int = 200_000
    symbols_per_trial: int = 10
    batch_trials: int = 512
    noise_std: float = 1.0
    spacing: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("n_streams", "n_paths", "k_tx", "k_rx", "n_tx", "n_rx",
                     "k_bs", "n_bs", "k_users", "n_user", "rf_per_stream",
                     "min_errors", "max_trials", "symbols_per_trial", "batch_trials"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                raise ValueError(f"{name} must be a positive int, got {v!r}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.spacing <= 0:
            raise ValueError("spacing must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ValueError("snr_grid_db must not be empty")
        object.__setattr__(self, "snr_grid_db", grid)
        rows, cols = (self.k_users, self.k_bs) if self.mode == "multiuser_dl" \
            else (self.k_rx, self.k_tx)
        object.__setattr__(self, "g_db", _normalize_g(self.g_db, rows, cols))

    # -- derived quantities -------------------------------------------------

    @property
    def n_rf(self) -> int:
        return self.rf_per_stream * self.n_streams

    @property
    def n_rf_user(self) -> int:
        return self.rf_per_stream * self.n_streams

    @property
    def n_rf_bs(self) -> int:
        return self.rf_per_stream * self.k_users * self.n_streams

    @property
    def bits_per_trial(self) -> int:
        streams = self.n_streams * (self.k_users if self.mode == "multiuser_dl" else 1)
        return streams * self.symbols_per_trial

    def g_linear_grid(self):
        return tuple(tuple(db_to_linear(v) for v in row) for row in self.g_db)

    def power_at(self, snr_db: float) -> float:
        if self.mode == "multiuser_dl":
            return designed_snr_to_power(snr_db, self.n_streams, self.n_paths,
                                         self.n_user, self.n_bs)
        return designed_snr_to_power(snr_db, self.n_streams, self.n_paths,
                                     self.n_rx, self.n_tx)

    def config_hash(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def check_preconditions(self) -> None:
        """Reject mode-level constraint violations before any trial runs."""
        if self.mode == "single_user_fc":
            total = self.k_rx * self.k_tx * self.n_paths
            if self.n_streams > total:
                raise PreconditionError(
                    f"n_streams={self.n_streams} exceeds the multiplexing-gain cap "
                    f"{total} (total path count)")
            if self.n_rf > min(self.k_tx * self.n_tx, self.k_rx * self.n_rx):
                raise PreconditionError("RF chain count exceeds an array size")
        elif self.mode == "single_user_pc":
            cap = min(self.k_tx, self.k_rx)
            if self.n_streams > cap:
                raise PreconditionError(
                    f"partially-connected mode needs n_streams <= min(k_tx, k_rx)={cap}")
        else:
            if not self.n_streams <= self.n_rf_user <= self.n_user:
                raise PreconditionError(
                    f"need n_streams <= n_rf_user <= n_user, got "
                    f"{self.n_streams} <= {self.n_rf_user} <= {self.n_user}")
            if not self.k_users * self.n_streams <= self.n_rf_bs <= self.k_bs * self.n_bs:
                raise PreconditionError(
                    f"need k_users*n_streams <= n_rf_bs <= k_bs*n_bs, got "
                    f"{self.k_users * self.n_streams} <= {self.n_rf_bs} <= "
                    f"{self.k_bs * self.n_bs}")
            cap = self.k_bs * self.n_paths
            if self.n_streams > cap:
                raise PreconditionError(
                    f"n_streams={self.n_streams} exceeds the per-user path total {cap}")
            rank_cap = min(cap, self.n_user, self.k_bs * self.n_bs)
            if min(self.n_rf_user, rank_cap) > min(self.n_rf_bs // self.k_users, rank_cap):
                raise PreconditionError(
                    "BS RF chains per user are fewer than user RF chains; zero "
                    "forcing onto every analog output is impossible")


def _batch_plan(cfg: ExperimentConfig) -> list:
    sizes = []
    remaining = cfg.max_trials
    while remaining > 0:
        sizes.append(min(cfg.batch_trials, remaining))
        remaining -= sizes[-1]
    return sizes


def run_campaign(cfg: ExperimentConfig, threads: int = 1) -> BerCurve:
    """Run the campaign and return its BER curve.

    Per SNR point, batches of trials run until ``min_errors`` bit errors
    accumulate or ``max_trials`` trials are spent; points that hit the cap
    short of the target are low-confidence and excluded from slope fits by
    the window rules.  Results are reduced in batch order, so any thread
    count yields the identical curve.
    """
    cfg.check_preconditions()
    runner = BATCH_RUNNERS[cfg.mode]
    sizes = _batch_plan(cfg)
    points = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for point_idx, snr_db in enumerate(cfg.snr_grid_db):
            power = cfg.power_at(snr_db)
            errors = err_sq = invalid = trials = 0
            b, round_size = 0, 1
            while b < len(sizes) and errors < cfg.min_errors:
                todo = list(range(b, min(b + round_size, len(sizes))))
                if pool is not None:
                    results = list(pool.map(
                        lambda i: runner(cfg, power, cfg.seed, point_idx, i, sizes[i]),
                        todo))
                else:
                    results = [runner(cfg, power, cfg.seed, point_idx, i, sizes[i])
                               for i in todo]
                for r in results:
                    errors += r.errors
                    err_sq += r.err_sq_sum
                    invalid += r.invalid
                    trials += r.trials
                b += len(todo)
                round_size *= 2
            valid = trials - invalid
            ber = errors / (valid * cfg.bits_per_trial) if valid > 0 else 0.0
            points.append(BerPoint(
                snr_db=snr_db, ber=ber, errors=errors, trials=trials,
                invalid_trials=invalid, err_sq_sum=err_sq))
    finally:
        if pool is not None:
            pool.shutdown()
    return BerCurve(points=tuple(points), bits_per_trial=cfg.bits_per_trial,
                    seed=cfg.seed, config_hash=cfg.config_hash(), label=cfg.mode)


def inhomogeneous_g_suite(cfg: ExperimentConfig, g_matrices, threads: int = 1) -> list:
    """Curves for each large-scale-fading matrix plus homogeneous references.

    Returns ``[(label, curve), ...]``: homogeneous curves at the strongest
    and weakest coefficient found across the matrices, then one curve per
    matrix, all under the same seed so comparisons are paired.
    """
    matrices = [_normalize_g(g, cfg.k_rx, cfg.k_tx) for g in g_matrices]
    if not matrices:
        raise ValueError("need at least one g matrix")
    entries = [v for m in matrices for row in m for v in row]
    out = []
    for level in sorted({max(entries), min(entries)}, reverse=True):
        cur = run_campaign(dataclasses.replace(cfg, g_db=level), threads=threads)
        out.append((f"homogeneous_{level:g}dB", cur))
    for idx, m in enumerate(matrices, start=1):
        cur = run_campaign(dataclasses.replace(cfg, g_db=m), threads=threads)
        out.append((f"inhomogeneous_{idx}", cur))
    return out
