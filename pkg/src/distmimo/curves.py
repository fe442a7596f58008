"""BER-versus-SNR curves and their CSV serialization.

Curves hold raw counters next to the rate so consumers (slope fits,
containment tests) can reason about statistical weight.  CSV output uses
``repr`` for floats, which round-trips exactly, and a comment header that
records the config hash and seed the curve came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BerPoint:
    """One SNR point: rate plus the counters it was computed from.

    ``errors`` is a float so that analytically averaged curves can report
    expected error counts; bit-level campaigns always store integers in it.
    ``err_sq_sum`` is the sum of squared per-trial error counts and exists
    only to support standard-error estimates; it is not serialized.
    """

    snr_db: float
    ber: float
    errors: float
    trials: int
    invalid_trials: int = 0
    err_sq_sum: float = 0.0

    def stderr(self, bits_per_trial: int) -> float:
        """Standard error of the BER estimate from per-trial statistics."""
        n = self.trials - self.invalid_trials
        if n <= 1 or bits_per_trial <= 0:
            return float("inf")
        mean = self.errors / n
        var = max(self.err_sq_sum / n - mean * mean, 0.0)
        return float(np.sqrt(var / n) / bits_per_trial)


@dataclass(frozen=True)
class BerCurve:
    """BER samples over an SNR grid with their provenance."""

    points: tuple
    bits_per_trial: int
    seed: int = 0
    config_hash: str = ""
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for p in self.points:
            valid = p.trials - p.invalid_trials
            if valid > 0 and self.bits_per_trial > 0:
                expected = p.errors / (valid * self.bits_per_trial)
                if not np.isclose(p.ber, expected, rtol=1e-9, atol=1e-300):
                    raise ValueError(
                        f"point at {p.snr_db} dB: ber {p.ber} inconsistent with "
                        f"errors/(valid_trials*bits_per_trial) = {expected}")
            if not 0.0 <= p.ber <= 1.0:
                raise ValueError(f"ber out of [0, 1] at {p.snr_db} dB: {p.ber}")

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])


CSV_COLUMNS = ["snr_db", "ber", "errors", "trials", "invalid_trials"]


def _format_count(x: float) -> str:
    # integer counts serialize without a trailing .0
    return repr(int(x)) if float(x).is_integer() else repr(float(x))


def write_curve_csv(curve: BerCurve, path) -> None:
    """Write a curve with full-precision values and a provenance header."""
    lines = [
        f"# config_hash={curve.config_hash} seed={curve.seed} "
        f"bits_per_trial={curve.bits_per_trial} label={curve.label}",
        ",".join(CSV_COLUMNS),
    ]
    for p in curve.points:
        lines.append(",".join([
            repr(float(p.snr_db)),
            repr(float(p.ber)),
            _format_count(p.errors),
            repr(int(p.trials)),
            repr(int(p.invalid_trials)),
        ]))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


def read_curve_csv(path) -> BerCurve:
    """Parse a curve written by :func:`write_curve_csv`, values exact."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    meta = {}
    if lines and lines[0].startswith("#"):
        for tok in lines.pop(0)[1:].split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                meta[k] = v
    header = lines.pop(0).split(",")
    if header != CSV_COLUMNS:
        raise ValueError(f"unexpected columns {header}, want {CSV_COLUMNS}")
    points = []
    for ln in lines:
        snr, ber, errors, trials, invalid = ln.split(",")
        points.append(BerPoint(float(snr), float(ber), float(errors),
                               int(trials), int(invalid)))
    return BerCurve(
        points=tuple(points),
        bits_per_trial=int(meta.get("bits_per_trial", 0)),
        seed=int(meta.get("seed", 0)),
        config_hash=meta.get("config_hash", ""),
        label=meta.get("label", ""),
    )
