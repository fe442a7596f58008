"""Generalized selection combining over Rayleigh branches.

A GSC receiver detects from the branch with the l-th highest instantaneous
SNR among L branches.  Its BER slope (diversity order) is L - l + 1, which
makes simulated GSC curves the independent reference against which the
MIMO campaigns' fitted slopes are checked.

BER here is computed by conditional averaging: draw the branch SNRs, apply
the exact BPSK conditional error rate Q(sqrt(2*gamma)) and average.  That
removes the bit-level binomial noise and reaches high diversity orders at
desk scale.  The ``errors`` counters on the resulting curves are expected
error counts (ber * trials), which plug into the same statistical-weight
window rules as bit-level curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import BerCurve, BerPoint
from .detect import qfunc
from .rng import substream


@dataclass(frozen=True)
class GscConfig:
    """Branch count, selection rank (1 = strongest), and per-branch mean SNRs.

    ``branch_snrs`` are linear per-branch average SNRs; all-equal means the
    i.i.d. case.  In sweeps they act as a profile that the grid value
    scales multiplicatively.
    """

    n_branches: int
    selection_rank: int
    branch_snrs: tuple = None

    def __post_init__(self):
        if not 1 <= self.selection_rank <= self.n_branches:
            raise ValueError(
                f"selection_rank must be in [1, {self.n_branches}], got {self.selection_rank}")
        snrs = self.branch_snrs
        if snrs is None:
            snrs = (1.0,) * self.n_branches
        snrs = tuple(float(s) for s in snrs)
        if len(snrs) != self.n_branches:
            raise ValueError(f"need {self.n_branches} branch SNRs, got {len(snrs)}")
        if any(s <= 0 for s in snrs):
            raise ValueError("branch SNRs must be positive")
        object.__setattr__(self, "branch_snrs", snrs)

    @property
    def iid(self) -> bool:
        return len(set(self.branch_snrs)) == 1


def order_stat_pdf(cfg: GscConfig, gamma) -> np.ndarray:
    """Density of the l-th highest of L i.i.d. exponential branch SNRs.

    With F(g) = 1 - exp(-g/gbar) and f(g) = exp(-g/gbar)/gbar:

        f_{l:L}(g) = L! / ((L-l)! (l-1)!) * F^(L-l) * (1-F)^(l-1) * f

    Only the i.i.d. case has this closed form; non-identical branches are
    handled by simulation (their diversity order is bracketed by the
    i.i.d. systems at the extreme branch means).
    """
    if not cfg.iid:
        raise ValueError("closed-form order statistics require i.i.d. branch SNRs")
    L, l = cfg.n_branches, cfg.selection_rank
    gbar = cfg.branch_snrs[0]
    g = np.asarray(gamma, dtype=float)
    coef = math.factorial(L) / (math.factorial(L - l) * math.factorial(l - 1))
    cdf = -np.expm1(-g / gbar)
    sf = np.exp(-g / gbar)
    return coef * cdf ** (L - l) * sf ** (l - 1) * (sf / gbar)


def draw_selected_snr(cfg: GscConfig, scale: float, trials: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Draw the l-th highest branch SNR, ``trials`` times.

    Branch k is exponential with mean ``scale * branch_snrs[k]``.
    """
    means = scale * np.asarray(cfg.branch_snrs)
    draws = rng.exponential(1.0, (trials, cfg.n_branches)) * means
    draws.sort(axis=1)
    return draws[:, cfg.n_branches - cfg.selection_rank]


def gsc_ber_sim(cfg: GscConfig, snr_grid_db, trials: int, seed: int = 0) -> BerCurve:
    """Simulate the GSC BER curve by conditional-BER averaging.

    At grid point ``s`` dB the branch-SNR profile is scaled by 10^(s/10);
    the reported BER is the sample mean of Q(sqrt(2*gamma_l)).
    """
    points = []
    for idx, snr_db in enumerate(snr_grid_db):
        rng = substream(seed, "gsc", idx)
        gamma = draw_selected_snr(cfg, 10.0 ** (snr_db / 10.0), trials, rng)
        q = qfunc(np.sqrt(2.0 * gamma))
        ber = float(q.mean())
        points.append(BerPoint(
            snr_db=float(snr_db),
            ber=ber,
            errors=ber * trials,
            trials=trials,
            err_sq_sum=float(np.square(q).sum()),
        ))
    label = f"gsc_L{cfg.n_branches}_l{cfg.selection_rank}"
    return BerCurve(points=tuple(points), bits_per_trial=1, seed=seed, label=label)


def dgv_curve(diversity_gain: int, snr_grid_db, anchor: tuple) -> BerCurve:
    """Pure power-law reference curve c * snr^(-G_d) through an anchor point.

    ``anchor`` is an (snr_db, ber) pair the curve passes through.  Values
    are clipped at 1 where the power law would exceed a probability.
    """
    if diversity_gain < 1:
        raise ValueError(f"diversity gain must be >= 1, got {diversity_gain}")
    a_snr, a_ber = anchor
    points = []
    for snr_db in snr_grid_db:
        ber = a_ber * 10.0 ** (-diversity_gain * (snr_db - a_snr) / 10.0)
        points.append(BerPoint(snr_db=float(snr_db), ber=min(ber, 1.0),
                               errors=0.0, trials=0))
    return BerCurve(points=tuple(points), bits_per_trial=0,
                    label=f"dgv_Gd{diversity_gain}")
