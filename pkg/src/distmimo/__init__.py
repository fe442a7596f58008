"""Distributed-subarray mmWave massive MIMO link-level simulator.

Channel synthesis for RAU block channels, hybrid analog/digital
beamforming (fully-connected, partially-connected, multiuser downlink),
BPSK zero-forcing detection, Monte Carlo BER campaigns and the
order-statistics machinery used to verify diversity orders.
"""

from .analysis import (OrthogonalityTable, SingularValueTable, SlopeFit,
                       SlopeWindow, fit_slope, orthogonality_decay,
                       singular_value_sweep)
from .arrays import AngleOfPropagation, ArrayGeometry, steering_matrix, steering_vector
from .beamforming import (BeamformerSet, MultiuserChannelSet, SelectedPath,
                          diversity_gain_formula, greedy_path_selection,
                          hybrid_decompose, multiuser_downlink, optimal_pair,
                          pc_greedy_assign, svd_from_factors, svd_pair)
from .channel import (DistributedChannel, PathEntry, PathSet, SubchannelSpec,
                      assemble, db_to_linear, draw_channel, draw_subchannel,
                      dump_path_table, embed_rx, embed_tx, path_table)
from .curves import BerCurve, BerPoint, read_curve_csv, write_curve_csv
from .detect import (RankDeficientChannelError, SymbolBlock, count_bit_errors,
                     modulate, qfunc, random_block, transmit_receive, zf_detect)
from .montecarlo import (ExperimentConfig, PreconditionError,
                         designed_snr_to_power, inhomogeneous_g_suite,
                         run_campaign)
from .orderstats import GscConfig, dgv_curve, draw_selected_snr, gsc_ber_sim, order_stat_pdf
from .rng import substream

__version__ = "0.1.0"
