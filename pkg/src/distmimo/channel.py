"""Distributed-subarray channel synthesis.

A channel between ``k_tx`` transmit RAUs and ``k_rx`` receive RAUs is the
block matrix whose (i, j) block is ``sqrt(g_ij) * H_ij``, where each
subchannel ``H_ij`` is a clustered sum of rank-one steering outer products
with i.i.d. CN(0, 1) path gains:

    H_ij = sqrt(n_tx * n_rx / L) * sum_l  alpha_l * a_rx(l) a_tx(l)^H

Equivalently the whole matrix is a sum of rank-one terms over all paths,
with per-path gains ``alpha~ = sqrt(g * n_tx * n_rx / L) * alpha`` and
steering vectors zero-padded into their RAU's block position.  That
decomposition (``path_table``) is what the beamforming stages consume.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayGeometry, sample_angles, steering_matrix


def db_to_linear(db: float) -> float:
    """Power coefficient from its dB value: 10^(db/10)."""
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SubchannelSpec:
    """Path count and large-scale fading (dB) of one RAU-to-RAU subchannel."""

    n_paths: int
    g_db: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.n_paths, int) and self.n_paths >= 1):
            raise ValueError(f"n_paths must be a positive int, got {self.n_paths!r}")
        if not math.isfinite(self.g_db):
            raise ValueError(f"g_db must be finite, got {self.g_db!r}")

    @property
    def g_linear(self) -> float:
        return db_to_linear(self.g_db)


@dataclass(frozen=True)
class PathSet:
    """Per-path complex gains and arrival/departure angles of one subchannel.

    Arrays all have length L; angles are radians.
    """

    gains: np.ndarray     # complex, CN(0,1) draws
    aoa_az: np.ndarray
    aoa_el: np.ndarray
    aod_az: np.ndarray
    aod_el: np.ndarray

    def __len__(self) -> int:
        return len(self.gains)


def draw_subchannel(
    spec: SubchannelSpec,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    rng: np.random.Generator,
) -> tuple[PathSet, np.ndarray]:
    """Draw one normalized subchannel matrix (n_rx x n_tx) and its paths.

    Draw order is fixed (gains, then AoA, then AoD) so that a given stream
    always produces the same realization.  The large-scale factor g is NOT
    applied here; it enters at block assembly.
    """
    L = spec.n_paths
    z = rng.standard_normal((L, 2))
    gains = (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2.0)
    aoa_az, aoa_el = sample_angles(rng, L)
    aod_az, aod_el = sample_angles(rng, L)
    paths = PathSet(gains, aoa_az, aoa_el, aod_az, aod_el)
    a_rx = steering_matrix(rx_geom, aoa_az, aoa_el)   # (L, n_rx)
    a_tx = steering_matrix(tx_geom, aod_az, aod_el)   # (L, n_tx)
    scale = math.sqrt(tx_geom.size * rx_geom.size / L)
    # sum_l gain_l a_rx(l) a_tx(l)^H as one GEMM
    h = (a_rx.swapaxes(-1, -2) * (scale * gains)[None, :]) @ a_tx.conj()
    return paths, h


def embed_rx(a_rx: np.ndarray, rau_index: int, k_rx: int) -> np.ndarray:
    """Zero-pad a per-RAU receive steering vector into the full array dimension.

    The result has ``a_rx`` in block ``rau_index`` (0-based) and exact zeros
    elsewhere, so vectors embedded at different RAUs are exactly orthogonal.
    """
    if not 0 <= rau_index < k_rx:
        raise ValueError(f"rau_index {rau_index} out of range for k_rx={k_rx}")
    n = len(a_rx)
    out = np.zeros(k_rx * n, dtype=complex)
    out[rau_index * n:(rau_index + 1) * n] = a_rx
    return out


def embed_tx(a_tx: np.ndarray, rau_index: int, k_tx: int) -> np.ndarray:
    """Transmit-side counterpart of :func:`embed_rx`."""
    if not 0 <= rau_index < k_tx:
        raise ValueError(f"rau_index {rau_index} out of range for k_tx={k_tx}")
    n = len(a_tx)
    out = np.zeros(k_tx * n, dtype=complex)
    out[rau_index * n:(rau_index + 1) * n] = a_tx
    return out


@dataclass(frozen=True)
class DistributedChannel:
    """Assembled block channel plus the per-subchannel metadata behind it."""

    k_tx: int
    k_rx: int
    tx_geom: ArrayGeometry
    rx_geom: ArrayGeometry
    specs: list            # (k_rx, k_tx) nested list of SubchannelSpec
    paths: list            # (k_rx, k_tx) nested list of PathSet
    h: np.ndarray = field(repr=False)   # (k_rx*n_rx, k_tx*n_tx)

    @property
    def n_tx_total(self) -> int:
        return self.k_tx * self.tx_geom.size

    @property
    def n_rx_total(self) -> int:
        return self.k_rx * self.rx_geom.size

    @property
    def total_paths(self) -> int:
        """Sum of per-subchannel path counts; the channel's asymptotic rank."""
        return sum(s.n_paths for row in self.specs for s in row)


def assemble(
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    specs,
    paths,
    subchannels,
) -> DistributedChannel:
    """Assemble the (k_rx*n_rx) x (k_tx*n_tx) block channel matrix.

    ``specs``, ``paths`` and ``subchannels`` are (k_rx, k_tx) grids of
    SubchannelSpec, PathSet and normalized subchannel matrices; block
    (i, j) of the result is ``sqrt(g_ij_linear) * subchannels[i][j]``.
    RAU geometries are homogeneous per side; a subchannel drawn with a
    different geometry is rejected by the shape check.
    """
    specs = [list(row) for row in specs]
    paths = [list(row) for row in paths]
    subchannels = [list(row) for row in subchannels]
    k_rx = len(specs)
    if k_rx == 0 or len(specs[0]) == 0:
        raise ValueError("specs grid must be non-empty")
    k_tx = len(specs[0])
    for grid, name in ((specs, "specs"), (paths, "paths"), (subchannels, "subchannels")):
        if len(grid) != k_rx or any(len(row) != k_tx for row in grid):
            raise ValueError(f"{name} grid must be {k_rx}x{k_tx}")
    n_rx, n_tx = rx_geom.size, tx_geom.size
    h = np.zeros((k_rx * n_rx, k_tx * n_tx), dtype=complex)
    for i in range(k_rx):
        for j in range(k_tx):
            sub = np.asarray(subchannels[i][j])
            if sub.shape != (n_rx, n_tx):
                raise ValueError(
                    f"subchannel ({i},{j}) has shape {sub.shape}, expected {(n_rx, n_tx)}; "
                    "all RAUs must share one geometry per side"
                )
            if len(paths[i][j]) != specs[i][j].n_paths:
                raise ValueError(f"path set ({i},{j}) does not match its spec's n_paths")
            g = specs[i][j].g_linear
            h[i * n_rx:(i + 1) * n_rx, j * n_tx:(j + 1) * n_tx] = math.sqrt(g) * sub
    return DistributedChannel(k_tx, k_rx, tx_geom, rx_geom, specs, paths, h)


def draw_channel(
    specs,
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    rng_for,
) -> DistributedChannel:
    """Draw all subchannels and assemble them.

    ``rng_for`` is either a single Generator (subchannels drawn from it in
    row-major order) or a callable ``(i, j) -> Generator`` giving each
    subchannel its own stream.
    """
    specs = [list(row) for row in specs]
    get = rng_for if callable(rng_for) else (lambda i, j: rng_for)
    paths, subs = [], []
    for i, row in enumerate(specs):
        prow, srow = [], []
        for j, spec in enumerate(row):
            p, h = draw_subchannel(spec, tx_geom, rx_geom, get(i, j))
            prow.append(p)
            srow.append(h)
        paths.append(prow)
        subs.append(srow)
    return assemble(tx_geom, rx_geom, specs, paths, subs)


@dataclass(frozen=True)
class PathEntry:
    """One rank-one term of the channel: embedded gain and steering vectors."""

    gain: complex          # alpha~ = sqrt(g * n_tx * n_rx / L) * alpha
    rx_rau: int
    tx_rau: int
    path_index: int
    rx_vector: np.ndarray  # embedded, length k_rx*n_rx
    tx_vector: np.ndarray  # embedded, length k_tx*n_tx


def path_table(ch: DistributedChannel) -> list[PathEntry]:
    """All propagation paths sorted by |gain| descending.

    Ties (a probability-zero event for continuous draws) break on the
    (rx_rau, tx_rau, path_index) lexicographic order, stably.
    """
    entries = []
    for i in range(ch.k_rx):
        for j in range(ch.k_tx):
            spec = ch.specs[i][j]
            p = ch.paths[i][j]
            scale = math.sqrt(spec.g_linear * ch.tx_geom.size * ch.rx_geom.size / spec.n_paths)
            a_rx = steering_matrix(ch.rx_geom, p.aoa_az, p.aoa_el)
            a_tx = steering_matrix(ch.tx_geom, p.aod_az, p.aod_el)
            for l in range(spec.n_paths):
                entries.append(PathEntry(
                    gain=complex(scale * p.gains[l]),
                    rx_rau=i,
                    tx_rau=j,
                    path_index=l,
                    rx_vector=embed_rx(a_rx[l], i, ch.k_rx),
                    tx_vector=embed_tx(a_tx[l], j, ch.k_tx),
                ))
    # stable sort on -|gain| keeps lexicographic (i, j, l) order among ties
    entries.sort(key=lambda e: -abs(e.gain))
    return entries


def dump_path_table(ch: DistributedChannel, path) -> None:
    """Write the sorted path table as CSV for debugging/replay.

    Columns: rx_rau i, tx_rau j, path l (all 0-based), gain re/im, and the
    four propagation angles in radians.
    """
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "l", "re_gain", "im_gain",
                    "aoa_az", "aoa_el", "aod_az", "aod_el"])
        for e in path_table(ch):
            p = ch.paths[e.rx_rau][e.tx_rau]
            l = e.path_index
            w.writerow([
                e.rx_rau, e.tx_rau, l,
                repr(e.gain.real), repr(e.gain.imag),
                repr(float(p.aoa_az[l])), repr(float(p.aoa_el[l])),
                repr(float(p.aod_az[l])), repr(float(p.aod_el[l])),
            ])
