"""Hybrid beamformer construction and closed-form diversity gains.

Three architectures are covered:

* fully-connected: the optimal pair comes from the channel's strongest
  paths (equivalently its dominant singular subspace at large arrays) and
  is factored into a phase-only analog stage plus a least-squares digital
  stage;
* partially-connected: one RF chain per RAU, streams assigned to
  RAU-disjoint paths greedily by gain;
* multiuser downlink: per-user analog combiners from each user's own
  channel, ZF digital precoding at the base station across the analog
  stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arrays import steering_matrix
from .channel import DistributedChannel, embed_rx, embed_tx, path_table
from .detect import ZF_RCOND, RankDeficientChannelError

POWER_TOL = 1e-9
MODULUS_TOL = 1e-12


def ls_fit(analog: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Digital stage minimizing ||analog @ digital - target||_F (batched)."""
    return np.linalg.pinv(analog, rcond=ZF_RCOND) @ target


def composite_power_scale(analog: np.ndarray, digital: np.ndarray, n_streams: int):
    """Scale factor making ||analog @ digital||_F^2 equal n_streams."""
    comp = analog @ digital
    frob = np.sqrt(np.sum(np.abs(comp) ** 2, axis=(-2, -1)))
    return math.sqrt(n_streams) / frob


def unit_modulus_phases(columns: np.ndarray) -> np.ndarray:
    """Phase-only copy of ``columns`` with entries of modulus 1/sqrt(rows).

    This is the analog-stage projection: keep each entry's phase, force the
    constant modulus that phase shifters impose.  Entries that are exactly
    zero come out at phase 0.
    """
    rows = columns.shape[-2]
    mods = np.abs(columns)
    out = np.divide(columns, mods, out=np.ones_like(np.asarray(columns, dtype=complex)),
                    where=mods > 0)
    return out / math.sqrt(rows)


@dataclass(frozen=True)
class BeamformerSet:
    """Analog + digital precoder/combiner with per-stream SNR predictions.

    Analog matrices are phase-only where structurally nonzero; the
    composite transmit matrix is normalized to total power n_streams.
    """

    tx_analog: np.ndarray    # (n_tx_total, n_rf_tx)
    tx_digital: np.ndarray   # (n_rf_tx, n_streams)
    rx_analog: np.ndarray    # (n_rx_total, n_rf_rx)
    rx_digital: np.ndarray   # (n_rf_rx, n_streams)
    predicted_snr: np.ndarray | None = None

    def __post_init__(self):
        n_s = self.tx_digital.shape[1]
        power = float(np.sum(np.abs(self.tx_analog @ self.tx_digital) ** 2))
        if abs(power - n_s) > POWER_TOL * max(n_s, 1):
            raise ValueError(f"composite transmit power {power} != n_streams {n_s}")
        for mat, name in ((self.tx_analog, "tx_analog"), (self.rx_analog, "rx_analog")):
            mods = np.abs(mat)
            for c in range(mat.shape[1]):
                nz = mods[:, c][mods[:, c] > 0]
                if nz.size and nz.max() - nz.min() > MODULUS_TOL:
                    raise ValueError(f"{name} column {c} violates the phase-only constraint")

    @property
    def n_streams(self) -> int:
        return self.tx_digital.shape[1]

    @property
    def tx_composite(self) -> np.ndarray:
        return self.tx_analog @ self.tx_digital

    @property
    def rx_composite(self) -> np.ndarray:
        return self.rx_analog @ self.rx_digital


def svd_from_factors(emb_rx: np.ndarray, emb_tx: np.ndarray, gains: np.ndarray,
                     n_columns: int):
    """Leading singular triplets of H = emb_rx diag(gains) emb_tx^H.

    The channel's rank is at most its path count, so its SVD reduces to QR
    factorizations of the embedded steering stacks plus the SVD of a small
    path-by-path core.  Works on stacked (batched) inputs.  Returns
    (tx_columns, rx_columns, singular_values) with ``n_columns`` columns,
    i.e. the leading right/left singular vectors.
    """
    q_rx, r_rx = np.linalg.qr(emb_rx)
    q_tx, r_tx = np.linalg.qr(emb_tx)
    core = (r_rx * gains[..., None, :]) @ r_tx.conj().swapaxes(-1, -2)
    u_core, sing, vh_core = np.linalg.svd(core)
    rank = core.shape[-1]
    if n_columns > rank:
        raise ValueError(f"only {rank} singular directions exist, asked for {n_columns}")
    rx_cols = q_rx @ u_core[..., :, :n_columns]
    tx_cols = q_tx @ vh_core.conj().swapaxes(-1, -2)[..., :, :n_columns]
    return tx_cols, rx_cols, sing[..., :n_columns]


def svd_pair(ch: DistributedChannel, n_columns: int):
    """Leading singular vectors of the assembled channel matrix.

    This is the finite-array counterpart of :func:`optimal_pair`: the
    campaign recipe's first step takes the optimal fully-digital pair from
    the channel's SVD, which the path-ordered embedded vectors only reach
    in the large-array limit.  Returns (tx_columns, rx_columns,
    singular_values).
    """
    if not 1 <= n_columns <= ch.total_paths:
        raise ValueError(
            f"n_columns must be in [1, {ch.total_paths}] (the channel rank bound), "
            f"got {n_columns}")
    entries = []
    for i in range(ch.k_rx):
        for j in range(ch.k_tx):
            spec = ch.specs[i][j]
            p = ch.paths[i][j]
            scale = math.sqrt(spec.g_linear * ch.tx_geom.size * ch.rx_geom.size
                              / spec.n_paths)
            a_rx = steering_matrix(ch.rx_geom, p.aoa_az, p.aoa_el)
            a_tx = steering_matrix(ch.tx_geom, p.aod_az, p.aod_el)
            for l in range(spec.n_paths):
                entries.append((scale * p.gains[l],
                                embed_rx(a_rx[l], i, ch.k_rx),
                                embed_tx(a_tx[l], j, ch.k_tx)))
    gains = np.array([e[0] for e in entries])
    emb_rx = np.column_stack([e[1] for e in entries])
    emb_tx = np.column_stack([e[2] for e in entries])
    return svd_from_factors(emb_rx, emb_tx, gains, n_columns)


def optimal_pair(ch: DistributedChannel, n_streams: int):
    """Optimal fully-digital precoder/combiner columns and per-stream gains.

    Column l targets the l-th strongest path: the embedded transmit
    steering vector rotated by the path gain's conjugate phase, and the
    embedded receive steering vector.  At large per-RAU arrays these are
    the channel's singular vectors and combiner^H H precoder approaches
    diag(|gain_1|, ..., |gain_n|).
    """
    cap = ch.total_paths
    if n_streams > cap:
        raise ValueError(
            f"n_streams={n_streams} exceeds the multiplexing-gain cap: the channel "
            f"has only {cap} propagation paths")
    if n_streams < 1:
        raise ValueError("n_streams must be >= 1")
    top = path_table(ch)[:n_streams]
    combiner = np.column_stack([e.rx_vector for e in top])
    precoder = np.column_stack([
        np.exp(-1j * np.angle(e.gain)) * e.tx_vector for e in top])
    gains = np.array([abs(e.gain) for e in top])
    return precoder, combiner, gains


def phase_pair_split(columns: np.ndarray):
    """Exact two-phase-shifter realization of arbitrary columns (batched).

    Every complex entry v with |v| <= 2c is the sum of two constant-modulus
    terms c*exp(j(phi +/- acos(|v|/2c))), so two RF chains per column
    reproduce it exactly.  Returns (analog, digital): analog has 2 columns
    of modulus 1/sqrt(rows) per input column and analog @ digital equals
    ``columns`` up to rounding.
    """
    columns = np.asarray(columns, dtype=complex)
    rows, cols = columns.shape[-2], columns.shape[-1]
    mods = np.abs(columns)
    phases = np.angle(columns)
    half_peak = np.max(mods, axis=-2, keepdims=True) / 2.0
    offset = np.arccos(np.clip(mods / (2.0 * half_peak), 0.0, 1.0))
    analog = np.empty(columns.shape[:-1] + (2 * cols,), dtype=complex)
    analog[..., 0::2] = np.exp(1j * (phases + offset)) / math.sqrt(rows)
    analog[..., 1::2] = np.exp(1j * (phases - offset)) / math.sqrt(rows)
    digital = np.zeros(columns.shape[:-2] + (2 * cols, cols), dtype=complex)
    weights = half_peak[..., 0, :] * math.sqrt(rows)
    idx = np.arange(cols)
    digital[..., 2 * idx, idx] = weights
    digital[..., 2 * idx + 1, idx] = weights
    return analog, digital


def hybrid_decompose(
    tx_columns: np.ndarray,
    rx_columns: np.ndarray,
    n_streams: int,
    n_rf_tx: int,
    n_rf_rx: int,
    gains: np.ndarray | None = None,
    power: float | None = None,
) -> BeamformerSet:
    """Factor optimal columns into a phase-only analog + digital stage.

    With at least two RF chains per stream the decomposition is exact:
    each optimal column splits into two constant-modulus columns
    (:func:`phase_pair_split`), which is the least-squares optimum (zero
    residual) and the reason campaigns run twice as many chains as
    streams.  With fewer chains the analog stage takes the element-wise
    phases of the first min(n_rf, available) optimal columns and the
    digital stage is the Frobenius-least-squares fit.  Either way the
    transmit composite is rescaled to total power n_streams.

    ``tx_columns``/``rx_columns`` hold the optimal precoder/combiner in
    their first ``n_streams`` columns; any further columns (next-strongest
    singular directions) feed extra RF chains only in the phase+LS branch.
    """
    tx_columns = np.asarray(tx_columns)
    rx_columns = np.asarray(rx_columns)
    if n_rf_tx < n_streams or n_rf_rx < n_streams:
        raise ValueError(
            f"need at least n_streams={n_streams} RF chains per side, got "
            f"tx {n_rf_tx} / rx {n_rf_rx}")
    if n_rf_tx > tx_columns.shape[0] or n_rf_rx > rx_columns.shape[0]:
        raise ValueError("RF chain count cannot exceed the array size")
    if tx_columns.shape[1] < n_streams or rx_columns.shape[1] < n_streams:
        raise ValueError("optimal matrices must provide at least n_streams columns")

    if n_rf_tx >= 2 * n_streams:
        tx_analog, tx_digital = phase_pair_split(tx_columns[:, :n_streams])
    else:
        tx_analog = unit_modulus_phases(tx_columns[:, :min(n_rf_tx, tx_columns.shape[1])])
        tx_digital = ls_fit(tx_analog, tx_columns[:, :n_streams])
    if n_rf_rx >= 2 * n_streams:
        rx_analog, rx_digital = phase_pair_split(rx_columns[:, :n_streams])
    else:
        rx_analog = unit_modulus_phases(rx_columns[:, :min(n_rf_rx, rx_columns.shape[1])])
        rx_digital = ls_fit(rx_analog, rx_columns[:, :n_streams])
    tx_digital = tx_digital * composite_power_scale(tx_analog, tx_digital, n_streams)

    predicted = None
    if gains is not None and power is not None:
        predicted = (power / n_streams) * np.asarray(gains[:n_streams]) ** 2
    return BeamformerSet(tx_analog, tx_digital, rx_analog, rx_digital, predicted)


@dataclass(frozen=True)
class SelectedPath:
    """One greedy pick: which path a stream got and how many were eligible."""

    stream: int
    rx_rau: int
    tx_rau: int
    path_index: int
    gain: complex
    candidate_count: int


def greedy_path_selection(ch: DistributedChannel, n_streams: int) -> list[SelectedPath]:
    """Assign streams to RAU-disjoint paths, strongest gain first.

    Stream 0 takes the globally strongest path; each later stream takes the
    strongest path whose transmit and receive RAUs are both still unused.
    Ties break on (rx_rau, tx_rau, path_index) lexicographic order.
    """
    if n_streams > min(ch.k_tx, ch.k_rx):
        raise ValueError(
            f"partially-connected mode supports at most min(k_tx, k_rx)="
            f"{min(ch.k_tx, ch.k_rx)} streams, got {n_streams}")
    if n_streams < 1:
        raise ValueError("n_streams must be >= 1")
    entries = path_table(ch)  # sorted by |gain| desc, lexicographic ties
    used_rx, used_tx = set(), set()
    picks = []
    for s in range(n_streams):
        avail = [e for e in entries if e.rx_rau not in used_rx and e.tx_rau not in used_tx]
        best = avail[0]
        picks.append(SelectedPath(
            stream=s, rx_rau=best.rx_rau, tx_rau=best.tx_rau,
            path_index=best.path_index, gain=best.gain,
            candidate_count=len(avail)))
        used_rx.add(best.rx_rau)
        used_tx.add(best.tx_rau)
    return picks


def pc_greedy_assign(ch: DistributedChannel, n_streams: int,
                     power: float | None = None) -> BeamformerSet:
    """Block-diagonal analog stages from the greedy RAU-disjoint assignment.

    Each selected RAU's analog vector carries the steering phases of its
    chosen path; unselected RAUs get all-ones placeholder phases and zero
    digital weight, so they transmit nothing.
    """
    picks = greedy_path_selection(ch, n_streams)
    n_tx, n_rx = ch.tx_geom.size, ch.rx_geom.size
    tx_analog = np.zeros((ch.k_tx * n_tx, ch.k_tx), dtype=complex)
    rx_analog = np.zeros((ch.k_rx * n_rx, ch.k_rx), dtype=complex)
    for j in range(ch.k_tx):
        tx_analog[j * n_tx:(j + 1) * n_tx, j] = 1.0 / math.sqrt(n_tx)
    for i in range(ch.k_rx):
        rx_analog[i * n_rx:(i + 1) * n_rx, i] = 1.0 / math.sqrt(n_rx)
    tx_digital = np.zeros((ch.k_tx, n_streams), dtype=complex)
    rx_digital = np.zeros((ch.k_rx, n_streams), dtype=complex)
    for p in picks:
        paths = ch.paths[p.rx_rau][p.tx_rau]
        l = p.path_index
        a_tx = steering_matrix(ch.tx_geom, float(paths.aod_az[l]), float(paths.aod_el[l]))
        a_rx = steering_matrix(ch.rx_geom, float(paths.aoa_az[l]), float(paths.aoa_el[l]))
        tx_analog[p.tx_rau * n_tx:(p.tx_rau + 1) * n_tx, p.tx_rau] = a_tx
        rx_analog[p.rx_rau * n_rx:(p.rx_rau + 1) * n_rx, p.rx_rau] = a_rx
        tx_digital[p.tx_rau, p.stream] = 1.0
        rx_digital[p.rx_rau, p.stream] = 1.0
    scale = composite_power_scale(tx_analog, tx_digital, n_streams)
    predicted = None
    if power is not None:
        predicted = (power / n_streams) * np.array([abs(p.gain) for p in picks]) ** 2
    return BeamformerSet(tx_analog, tx_digital * scale, rx_analog, rx_digital, predicted)


@dataclass(frozen=True)
class MultiuserChannelSet:
    """Per-user channels with the downlink beamformers built on them."""

    channels: tuple                 # per-user (n_user, k_bs*n_bs) matrices
    bs_analog: np.ndarray           # F_b, (k_bs*n_bs, n_rf_bs_used)
    bs_digital: np.ndarray          # W_b after per-column power normalization
    bs_digital_raw: np.ndarray      # W_b straight from the ZF solve
    user_analog: tuple              # per-user (n_user, chains) combiners
    user_digital: tuple             # per-user (chains, n_streams) selections
    h_eq: np.ndarray                # analog-combined equivalent channel
    n_streams: int
    predicted_snr: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return len(self.channels)


def multiuser_downlink(
    channels,
    n_streams: int,
    n_rf_bs: int | None = None,
    n_rf_user: int | None = None,
    path_rank: int | None = None,
    power: float | None = None,
) -> MultiuserChannelSet:
    """Downlink beamformers: per-user SVD combiners + BS zero-forcing.

    Each user's analog combiner takes the phases of its channel's leading
    left singular vectors; the BS analog precoder stacks the phases of
    every user's leading right singular vectors.  The BS digital precoder
    zero-forces the analog-combined equivalent channel onto the active
    streams (each user's first n_streams RF chains) through the
    minimum-norm pseudoinverse, then is renormalized per column so the
    transmit composite has unit-power columns.  The equivalent channel
    must have full row rank across ALL combiner outputs, active or not;
    otherwise the configuration is rejected.  ``path_rank`` caps how many
    singular vectors are trusted (beyond the channel's path count they
    are noise directions).
    """
    channels = tuple(np.asarray(h) for h in channels)
    k_users = len(channels)
    if k_users == 0:
        raise ValueError("need at least one user channel")
    n_user, n_bs_total = channels[0].shape
    if any(h.shape != (n_user, n_bs_total) for h in channels):
        raise ValueError("all user channels must share one shape")
    if n_rf_user is None:
        n_rf_user = 2 * n_streams
    if n_rf_bs is None:
        n_rf_bs = 2 * k_users * n_streams
    if not n_streams <= n_rf_user <= n_user:
        raise ValueError(
            f"need n_streams <= n_rf_user <= n_user, got {n_streams} <= {n_rf_user} <= {n_user}")
    if not k_users * n_streams <= n_rf_bs <= n_bs_total:
        raise ValueError(
            f"need k_users*n_streams <= n_rf_bs <= total BS antennas, got "
            f"{k_users * n_streams} <= {n_rf_bs} <= {n_bs_total}")

    rank_cap = min(n_user, n_bs_total)
    if path_rank is not None:
        rank_cap = min(rank_cap, path_rank)
    chains_user = min(n_rf_user, rank_cap)
    chains_bs_per_user = min(n_rf_bs // k_users, rank_cap)

    user_analog, bs_blocks = [], []
    for h in channels:
        u, _, vh = np.linalg.svd(h, full_matrices=False)
        user_analog.append(unit_modulus_phases(u[:, :chains_user]))
        bs_blocks.append(unit_modulus_phases(vh.conj().T[:, :chains_bs_per_user]))
    bs_analog = np.concatenate(bs_blocks, axis=1)

    h_eq = np.concatenate(
        [user_analog[i].conj().T @ channels[i] @ bs_analog for i in range(k_users)], axis=0)

    sv = np.linalg.svd(h_eq, compute_uv=False)
    if h_eq.shape[0] > h_eq.shape[1] or sv[-1] <= ZF_RCOND * sv[0]:
        raise RankDeficientChannelError(
            f"equivalent channel ({h_eq.shape[0]}x{h_eq.shape[1]}) lacks full row rank; "
            f"zero forcing across the analog combiner outputs is impossible")
    # ZF onto the active streams: rows of h_eq belonging to each user's first
    # n_streams RF chains. The minimum-norm pseudoinverse solution leaves the
    # discarded chains unconstrained, which costs no degrees of freedom.
    active = np.concatenate(
        [np.arange(i * chains_user, i * chains_user + n_streams) for i in range(k_users)])
    bs_digital_raw = np.linalg.pinv(h_eq[active, :], rcond=ZF_RCOND)
    col_norms = np.linalg.norm(bs_analog @ bs_digital_raw, axis=0)
    bs_digital = bs_digital_raw / col_norms

    user_digital = []
    for i in range(k_users):
        w = np.zeros((chains_user, n_streams))
        w[:n_streams, :] = np.eye(n_streams)
        user_digital.append(w)

    predicted = None
    if power is not None:
        predicted = (power / (k_users * n_streams)) / col_norms ** 2
    return MultiuserChannelSet(
        channels=channels,
        bs_analog=bs_analog,
        bs_digital=bs_digital,
        bs_digital_raw=bs_digital_raw,
        user_analog=tuple(user_analog),
        user_digital=tuple(user_digital),
        h_eq=h_eq,
        n_streams=n_streams,
        predicted_snr=predicted,
    )


def diversity_gain_formula(mode: str, n_streams: int, n_paths: int,
                           k_tx: int = 1, k_rx: int = 1, k_bs: int = 1) -> int:
    """Closed-form asymptotic diversity gain for each architecture.

    full:        k_rx*k_tx*L - n_streams + 1     (n_streams <= k_rx*k_tx*L)
    pc:          (k_tx-n_streams+1)*(k_rx-n_streams+1)*L
                                                 (n_streams <= min(k_tx, k_rx))
    mu_downlink: k_bs*L - n_streams + 1          (n_streams <= k_bs*L)
    """
    if n_streams < 1 or n_paths < 1:
        raise ValueError("n_streams and n_paths must be >= 1")
    if mode == "full":
        cap = k_rx * k_tx * n_paths
        if n_streams > cap:
            raise ValueError(f"n_streams={n_streams} exceeds the path total {cap}")
        return cap - n_streams + 1
    if mode == "pc":
        cap = min(k_tx, k_rx)
        if n_streams > cap:
            raise ValueError(f"n_streams={n_streams} exceeds min(k_tx, k_rx)={cap}")
        return (k_tx - n_streams + 1) * (k_rx - n_streams + 1) * n_paths
    if mode == "mu_downlink":
        cap = k_bs * n_paths
        if n_streams > cap:
            raise ValueError(f"n_streams={n_streams} exceeds the per-user path total {cap}")
        return cap - n_streams + 1
    raise ValueError(f"unknown mode {mode!r}; expected full, pc or mu_downlink")
