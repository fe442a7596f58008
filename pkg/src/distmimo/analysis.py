"""Post-processing: diversity-slope estimation and asymptotic diagnostics.

The diversity order of a BER curve is the magnitude of its high-SNR
log-log slope.  ``fit_slope`` estimates it by least squares over a window
of statistically trustworthy points; the sweeps quantify how fast the
finite-array channel approaches its asymptotic rank/orthogonality
behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _batch
from .arrays import ArrayGeometry, steering_matrix
from .channel import db_to_linear
from .curves import BerCurve
from .rng import substream


@dataclass(frozen=True)
class SlopeWindow:
    """Qualification rule for slope fitting.

    A point qualifies when it carries at least ``min_errors`` (expected)
    errors and its BER is at most ``max_ber``; the fit then uses the
    qualifying points within ``span_db`` of the highest qualifying SNR.
    """

    min_errors: float = 100.0
    max_ber: float = 1e-2
    span_db: float = 10.0
    min_points: int = 3


@dataclass(frozen=True)
class SlopeFit:
    gd_hat: float
    stderr: float
    n_points: int
    window_db: tuple


def fit_slope(curve: BerCurve, window: SlopeWindow = SlopeWindow()) -> SlopeFit:
    """Least-squares diversity order of a BER curve's high-SNR tail.

    Fits log10(BER) against log10(SNR) over the qualifying window and
    returns the negated slope with its OLS standard error.  Raises when
    fewer than ``window.min_points`` points qualify.
    """
    qual = [p for p in curve.points
            if p.errors >= window.min_errors and 0.0 < p.ber <= window.max_ber]
    if not qual:
        raise ValueError("no qualifying points: need errors >= "
                         f"{window.min_errors} and 0 < ber <= {window.max_ber}")
    top = max(p.snr_db for p in qual)
    sel = [p for p in qual if p.snr_db >= top - window.span_db]
    if len(sel) < window.min_points:
        raise ValueError(
            f"only {len(sel)} qualifying points in the {window.span_db} dB window "
            f"ending at {top} dB; need {window.min_points}")
    x = np.array([p.snr_db / 10.0 for p in sel])   # log10 of linear SNR
    y = np.log10([p.ber for p in sel])
    n = len(sel)
    sxx = float(np.sum((x - x.mean()) ** 2))
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    resid = y - (y.mean() + slope * (x - x.mean()))
    rss = float(np.sum(resid ** 2))
    stderr = math.sqrt(max(rss, 0.0) / (n - 2) / sxx) if n > 2 else float("inf")
    return SlopeFit(gd_hat=-slope, stderr=stderr, n_points=n,
                    window_db=(top - window.span_db, top))


def _write_table_csv(path, comment: str, header: list, rows) -> None:
    lines = [f"# {comment}", ",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in row))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class SingularValueTable:
    """Mean ordered singular values of the channel versus per-RAU array size."""

    n_rx: tuple
    indices: tuple          # 1-based singular value ordinals
    values: np.ndarray      # (len(n_rx), len(indices))
    n_seeds: int

    def write_csv(self, path) -> None:
        header = ["n_rx"] + [f"sigma_{i}" for i in self.indices]
        rows = [[n] + [float(v) for v in self.values[r]]
                for r, n in enumerate(self.n_rx)]
        _write_table_csv(path, f"mean singular values over {self.n_seeds} seeds",
                         header, rows)


def singular_value_sweep(
    k: int,
    n_paths: int,
    n_rx_list,
    indices,
    n_seeds: int = 100,
    seed: int = 0,
    n_tx: int | None = None,
    g_db: float = -20.0,
    spacing: float = 0.5,
) -> SingularValueTable:
    """Average the requested ordered singular values of H over seeds.

    ``k`` is the RAU count on both sides; ``n_tx`` defaults to tracking
    ``n_rx``.  ``indices`` are 1-based ordinals (1 = largest).
    """
    indices = tuple(int(i) for i in indices)
    n_rx_list = tuple(int(n) for n in n_rx_list)
    values = np.zeros((len(n_rx_list), len(indices)))
    for r, n_rx in enumerate(n_rx_list):
        n_t = n_tx if n_tx is not None else n_rx
        if max(indices) > min(k * n_rx, k * n_t):
            raise ValueError(f"index {max(indices)} exceeds the matrix rank bound")
        rx_geom = ArrayGeometry.ula(n_rx, spacing)
        tx_geom = ArrayGeometry.ula(n_t, spacing)
        grid = _batch._draw_path_grid(seed, r, 0, n_seeds, k, k, n_paths,
                                      rx_geom, tx_geom)
        g_lin = tuple((db_to_linear(g_db),) * k for _ in range(k))
        h, *_ = _batch._assemble_batch(grid, g_lin, k, k, n_rx, n_t, n_paths, n_seeds)
        sing = np.linalg.svd(h, compute_uv=False)
        for c, idx in enumerate(indices):
            values[r, c] = float(sing[:, idx - 1].mean())
    return SingularValueTable(n_rx=n_rx_list, indices=indices, values=values,
                              n_seeds=n_seeds)


@dataclass(frozen=True)
class OrthogonalityTable:
    """Percentile of |a(angle1)^H a(angle2)| versus element count."""

    n_elements: tuple
    percentile: float
    values: tuple
    n_pairs: int
    identical_pairs: int    # excluded from the percentile, reported apart

    def write_csv(self, path) -> None:
        header = ["n_elements", f"p{self.percentile:g}_inner_product"]
        rows = [[n, float(v)] for n, v in zip(self.n_elements, self.values)]
        _write_table_csv(
            path,
            f"{self.n_pairs} angle pairs, {self.identical_pairs} identical pairs excluded",
            header, rows)


def orthogonality_decay(
    make_geom,
    n_list,
    draws: int = 10_000,
    seed: int = 0,
    percentile: float = 99.0,
) -> OrthogonalityTable:
    """Empirical steering-vector orthogonality decay over array size.

    ``make_geom`` maps an element count to an ArrayGeometry.  One set of
    angle pairs, drawn uniform on (-pi/2, pi/2), is shared by every array
    size so the decay comparison is paired.  Exactly coincident pairs (a
    probability-zero event) would have inner product 1; they are excluded
    from the percentile and counted separately.
    """
    rng = substream(seed, "orthogonality")
    az1 = rng.uniform(-math.pi / 2, math.pi / 2, draws)
    el1 = rng.uniform(-math.pi / 2, math.pi / 2, draws)
    az2 = rng.uniform(-math.pi / 2, math.pi / 2, draws)
    el2 = rng.uniform(-math.pi / 2, math.pi / 2, draws)
    distinct = ~((az1 == az2) & (el1 == el2))
    values = []
    for n in n_list:
        geom = make_geom(int(n))
        a1 = steering_matrix(geom, az1, el1)
        a2 = steering_matrix(geom, az2, el2)
        inner = np.abs(np.sum(a1.conj() * a2, axis=-1))
        values.append(float(np.percentile(inner[distinct], percentile)))
    return OrthogonalityTable(
        n_elements=tuple(int(n) for n in n_list),
        percentile=percentile,
        values=tuple(values),
        n_pairs=draws,
        identical_pairs=int(draws - np.count_nonzero(distinct)),
    )
