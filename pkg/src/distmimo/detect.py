"""BPSK symbol pipeline: modulate, propagate, ZF-detect, count errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

ZF_RCOND = 1e-12  # singular values below ZF_RCOND * s_max count as zero


class RankDeficientChannelError(ValueError):
    """Effective channel lost full column rank; the trial is invalid.

    Campaigns catch this, count the trial as invalid and report the count
    rather than silently dropping it.
    """


def qfunc(x):
    """Standard Gaussian tail probability Q(x) = P(N(0,1) > x).

    Computed through erfc for numerical stability; Q(0) = 0.5.
    """
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


@dataclass(frozen=True)
class SymbolBlock:
    """BPSK bits and their modulated symbols, n_streams x n_symbols."""

    bits: np.ndarray      # {0, 1}
    symbols: np.ndarray   # +/- sqrt(power / n_streams)
    power: float

    @property
    def n_streams(self) -> int:
        return self.bits.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.bits.shape[1]


def modulate(bits: np.ndarray, power: float) -> SymbolBlock:
    """Map bits to antipodal BPSK symbols of per-stream power P/n_streams."""
    bits = np.asarray(bits)
    if bits.ndim != 2:
        raise ValueError("bits must be n_streams x n_symbols")
    amp = math.sqrt(power / bits.shape[0])
    symbols = (2.0 * bits - 1.0) * amp
    return SymbolBlock(bits, symbols.astype(complex), power)


def random_block(rng: np.random.Generator, n_streams: int, n_symbols: int, power: float) -> SymbolBlock:
    return modulate(rng.integers(0, 2, (n_streams, n_symbols)), power)


def transmit_receive(bf, h: np.ndarray, block: SymbolBlock, rng: np.random.Generator,
                     noise_std: float = 1.0) -> np.ndarray:
    """Propagate one symbol block and apply the analog combiner.

    Returns the per-RF-chain baseband samples F_r^H (H F_t W_t s + n) with
    i.i.d. CN(0, noise_std^2) noise.  Digital combining is left to the
    detector.
    """
    composite = bf.tx_analog @ bf.tx_digital          # (n_tx_total, n_streams)
    if composite.shape[1] != block.n_streams:
        raise ValueError(
            f"beamformer carries {composite.shape[1]} streams, block has {block.n_streams}")
    if h.shape[1] != composite.shape[0]:
        raise ValueError(f"channel is {h.shape}, precoder rows {composite.shape[0]}")
    x = composite @ block.symbols
    z = rng.standard_normal((h.shape[0], block.n_symbols, 2))
    noise = (z[..., 0] + 1j * z[..., 1]) * (noise_std / math.sqrt(2.0))
    y = h @ x + noise
    return bf.rx_analog.conj().T @ y


def zf_detect(effective: np.ndarray, received: np.ndarray) -> np.ndarray:
    """Zero-forcing BPSK detection: pseudo-invert, slice the real part.

    ``effective`` is the analog-combined channel F_r^H H F_t W_t.  Raises
    :class:`RankDeficientChannelError` when it has no full column rank at
    the ZF tolerance.
    """
    effective = np.asarray(effective)
    n_streams = effective.shape[1]
    s = np.linalg.svd(effective, compute_uv=False)
    if len(s) < n_streams or s[n_streams - 1] <= ZF_RCOND * s[0]:
        raise RankDeficientChannelError(
            f"effective channel rank < {n_streams} streams (sigma ratio "
            f"{s[-1] / s[0] if s[0] > 0 else 0.0:.2e})")
    estimate = np.linalg.pinv(effective, rcond=ZF_RCOND) @ received
    return (estimate.real > 0).astype(np.int64)


def count_bit_errors(sent: np.ndarray, detected: np.ndarray) -> int:
    return int(np.count_nonzero(np.asarray(sent) != np.asarray(detected)))
