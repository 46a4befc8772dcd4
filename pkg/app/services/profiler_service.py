"""
Profiler Service - analytic parameter and MAC counts for CRNN configurations
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

from app.models.enums import CellKind
from app.models.network import ModelConfig

logger = logging.getLogger(__name__)

# Rows whose printed totals are farther than this from the formula are flagged
RECONCILE_TOLERANCE = 1000


# ==================== COUNTS ====================

def param_count(cfg: ModelConfig) -> int:
    """
    Exact number of trainable scalars

    Equals ``Weights.zeros(cfg).size``: conv kernel and bias, one bias per
    gate in each direction of each recurrent layer, FC over the
    time-flattened recurrent output, 2-way output layer.

    Examples:
        >>> param_count(ModelConfig())
        229090
    """
    conv = cfg.n_conv_filters * cfg.kernel_time * cfg.kernel_freq + cfg.n_conv_filters

    recurrent = 0
    for layer in range(1, cfg.n_rec_layers + 1):
        d_in = cfg.layer_input_dim(layer)
        recurrent += 2 * cfg.gates * (cfg.rec_hidden * (d_in + cfg.rec_hidden) + cfg.rec_hidden)

    fc = cfg.fc_input_dim * cfg.fc_units + cfg.fc_units
    out = 2 * cfg.fc_units + 2
    return conv + recurrent + fc + out


def mac_breakdown(cfg: ModelConfig) -> Dict[str, int]:
    """Multiply-accumulates per window split by layer"""
    time_out, freq_out = cfg.time_out, cfg.freq_out
    rv = {'conv': time_out * freq_out * cfg.n_conv_filters * cfg.kernel_time * cfg.kernel_freq}
    for layer in range(1, cfg.n_rec_layers + 1):
        d_in = cfg.layer_input_dim(layer)
        rv[f'rnn{layer}'] = 2 * time_out * cfg.gates * cfg.rec_hidden * (d_in + cfg.rec_hidden)
    rv['fc'] = cfg.fc_input_dim * cfg.fc_units
    rv['out'] = 2 * cfg.fc_units
    return rv


def flops_estimate(cfg: ModelConfig) -> Tuple[int, int]:
    """
    (MACs, FLOPs = 2 * MACs) for one 1.5 s window

    Biases, activations and the frontend are not counted.

    Examples:
        >>> flops_estimate(ModelConfig())
        (4095616, 8191232)
    """
    macs = sum(mac_breakdown(cfg).values())
    return macs, 2 * macs


# ==================== ARCHITECTURE SWEEP ====================

# (N_C, (L_T, L_F), (S_T, S_F), R, N_R, unit, N_F, printed thousands)
PUBLISHED_ARCHITECTURES: List[tuple] = [
    (32, (20, 5), (8, 2), 2, 8, CellKind.GRU, 32, 45),
    (32, (20, 5), (8, 2), 3, 8, CellKind.LSTM, 64, 68),
    (32, (5, 1), (4, 1), 2, 8, CellKind.GRU, 64, 102),
    (32, (20, 5), (8, 2), 2, 16, CellKind.GRU, 64, 110),
    (32, (20, 5), (20, 5), 2, 32, CellKind.GRU, 64, 110),
    (32, (20, 5), (8, 2), 3, 16, CellKind.GRU, 64, 115),
    (16, (20, 5), (8, 2), 2, 32, CellKind.GRU, 32, 127),
    (32, (20, 5), (12, 4), 2, 32, CellKind.GRU, 64, 143),
    (16, (20, 5), (8, 2), 1, 32, CellKind.GRU, 64, 148),
    (128, (20, 5), (8, 2), 3, 8, CellKind.GRU, 32, 159),
    (64, (10, 3), (8, 2), 1, 16, CellKind.GRU, 32, 166),
    (128, (20, 5), (8, 2), 1, 32, CellKind.LSTM, 64, 197),
    (32, (20, 5), (12, 2), 2, 32, CellKind.GRU, 64, 205),
    (32, (20, 5), (8, 2), 1, 32, CellKind.GRU, 64, 211),
    (32, (20, 5), (8, 2), 2, 32, CellKind.GRU, 64, 229),
    (32, (40, 10), (8, 2), 2, 32, CellKind.GRU, 64, 239),
    (32, (20, 5), (8, 2), 3, 32, CellKind.GRU, 64, 248),
    (32, (20, 5), (8, 2), 2, 32, CellKind.LSTM, 64, 279),
    (32, (20, 5), (8, 1), 2, 32, CellKind.GRU, 64, 352),
    (64, (20, 5), (8, 2), 2, 32, CellKind.GRU, 64, 355),
    (64, (20, 5), (8, 2), 2, 32, CellKind.LSTM, 32, 407),
    (64, (10, 3), (4, 1), 2, 32, CellKind.GRU, 64, 674),
    (128, (20, 5), (8, 2), 2, 32, CellKind.GRU, 128, 686),
    (32, (20, 5), (8, 2), 2, 128, CellKind.GRU, 128, 1513),
    (256, (20, 5), (8, 2), 4, 64, CellKind.GRU, 128, 2551),
    (128, (20, 5), (4, 1), 4, 64, CellKind.GRU, 128, 2850),
]


def row_config(row: tuple) -> ModelConfig:
    n_c, (l_t, l_f), (s_t, s_f), n_layers, hidden, unit, fc_units, _ = row
    return ModelConfig(
        n_conv_filters=n_c,
        kernel_time=l_t,
        kernel_freq=l_f,
        stride_time=s_t,
        stride_freq=s_f,
        n_rec_layers=n_layers,
        rec_hidden=hidden,
        cell_kind=unit,
        fc_units=fc_units,
    )


@dataclass(frozen=True)
class SweepRow:
    config: ModelConfig
    exact: int
    printed: int
    macs: int

    @property
    def delta(self) -> int:
        return self.exact - self.printed

    @property
    def reconciled(self) -> bool:
        return abs(self.delta) <= RECONCILE_TOLERANCE

    @property
    def flops(self) -> int:
        return 2 * self.macs

    HEADER = [
        'n_conv_filters', 'kernel', 'stride', 'n_rec_layers', 'rec_hidden',
        'cell_kind', 'fc_units', 'exact_params', 'printed_params', 'delta',
        'reconciled', 'macs', 'flops',
    ]

    def to_row(self) -> list:
        cfg = self.config
        return [
            cfg.n_conv_filters,
            f"{cfg.kernel_time}x{cfg.kernel_freq}",
            f"{cfg.stride_time}x{cfg.stride_freq}",
            cfg.n_rec_layers,
            cfg.rec_hidden,
            cfg.cell_kind.value,
            cfg.fc_units,
            self.exact,
            self.printed,
            self.delta,
            int(self.reconciled),
            self.macs,
            self.flops,
        ]


def architecture_sweep() -> List[SweepRow]:
    """
    Reconcile every published architecture row against param_count

    Returns:
        One SweepRow per row, in table order
    """
    rows = []
    for row in PUBLISHED_ARCHITECTURES:
        cfg = row_config(row)
        macs, _ = flops_estimate(cfg)
        rows.append(SweepRow(config=cfg, exact=param_count(cfg), printed=row[-1] * 1000, macs=macs))

    outliers = [r.printed for r in rows if not r.reconciled]
    logger.info(
        "Architecture sweep complete",
        extra={'rows': len(rows), 'reconciled': len(rows) - len(outliers), 'outliers': outliers}
    )
    return rows
