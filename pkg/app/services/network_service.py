"""
Network Service - CRNN forward and reverse-mode backward passes

All arithmetic runs in float64 on batches shaped (batch, mels, frames);
checkpoints store float32 and are upcast on entry.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from app.core.errors import DimensionError, EmptyInputError, NumericError
from app.models.audio import FeatureMatrix
from app.models.enums import Activation, CellKind, Constants
from app.models.network import DIRECTIONS, Checkpoint, ModelConfig, Weights, ceil_div

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, FeatureMatrix]


# ==================== ACTIVATIONS ====================

def _phi(x: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(x, 0.0)
    return np.tanh(x)


def _phi_grad(x: np.ndarray, activation: Activation) -> np.ndarray:
    """Derivative of the candidate activation; ReLU'(0) = 0"""
    if activation is Activation.RELU:
        return (x > 0).astype(np.float64)
    t = np.tanh(x)
    return 1.0 - t * t


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ==================== CACHES ====================

@dataclass
class DirectionCache:
    """Per-step intermediates of one recurrent scan (time-major)"""
    x: np.ndarray
    h_prev: np.ndarray
    gates: Dict[str, np.ndarray]


@dataclass
class ForwardCache:
    patches: np.ndarray
    conv_pre: np.ndarray
    layer_inputs: List[np.ndarray] = field(default_factory=list)
    directions: List[Dict[str, DirectionCache]] = field(default_factory=list)
    flat: Optional[np.ndarray] = None
    fc_pre: Optional[np.ndarray] = None
    fc_act: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None


# ==================== CONVOLUTION ====================

def conv_output_shape(cfg: ModelConfig) -> Tuple[int, int]:
    """
    "Same" padded strided output geometry

    Examples:
        >>> conv_output_shape(ModelConfig())
        (19, 20)
    """
    return ceil_div(cfg.input_frames, cfg.stride_time), ceil_div(cfg.input_mels, cfg.stride_freq)


def _same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int]:
    out = ceil_div(size, stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


def _conv_patches(x: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """(B, mels, frames) -> (B, time_out, freq_out, L_T, L_F) patches"""
    time_out, freq_out = conv_output_shape(cfg)
    pt = _same_padding(cfg.input_frames, cfg.kernel_time, cfg.stride_time)
    pf = _same_padding(cfg.input_mels, cfg.kernel_freq, cfg.stride_freq)

    # Time-major view: (B, frames, mels)
    padded = np.pad(x.transpose(0, 2, 1), ((0, 0), pt, pf))
    windows = sliding_window_view(padded, (cfg.kernel_time, cfg.kernel_freq), axis=(1, 2))
    return windows[:, ::cfg.stride_time, ::cfg.stride_freq][:, :time_out, :freq_out]


def _conv_pre(patches: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Cross-correlation plus bias -> (B, time_out, N_C, freq_out)"""
    b, t, f, lt, lf = patches.shape
    n_c = kernel.shape[0]
    out = patches.reshape(b * t * f, lt * lf) @ kernel.reshape(n_c, lt * lf).T
    out = out.reshape(b, t, f, n_c).transpose(0, 1, 3, 2)
    return out + bias[None, None, :, None]


def conv_forward(x: ArrayLike, cfg: ModelConfig, weights: Weights) -> np.ndarray:
    """
    Convolution stage of a single window

    Args:
        x: input_mels x input_frames features
        cfg: Model configuration
        weights: Model weights

    Returns:
        time_out x (N_C * freq_out) matrix, channel-major then frequency
    """
    batch = _as_batch([x], cfg)
    pre = _conv_pre(_conv_patches(batch, cfg), _f64(weights['conv.w']), _f64(weights['conv.b']))
    return np.maximum(pre, 0.0).reshape(1, pre.shape[1], -1)[0]


# ==================== RECURRENT SCANS ====================

def _gru_scan(x: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray,
              activation: Activation, keep: bool) -> Tuple[np.ndarray, Optional[DirectionCache]]:
    """x (T, B, D) -> h (T, B, H); gate order z, r, h~"""
    steps, batch, _ = x.shape
    hidden = U.shape[1]
    a_in = x @ W.T + b
    U_z, U_r, U_h = U[:hidden], U[hidden:2 * hidden], U[2 * hidden:]

    h = np.zeros((batch, hidden))
    out = np.empty((steps, batch, hidden))
    if keep:
        h_prev = np.empty_like(out)
        z_all, r_all, ah_all, c_all = (np.empty_like(out) for _ in range(4))

    for t in range(steps):
        a_t = a_in[t]
        z = expit(a_t[:, :hidden] + h @ U_z.T)
        r = expit(a_t[:, hidden:2 * hidden] + h @ U_r.T)
        ah = a_t[:, 2 * hidden:] + (r * h) @ U_h.T
        c = _phi(ah, activation)
        if keep:
            h_prev[t], z_all[t], r_all[t], ah_all[t], c_all[t] = h, z, r, ah, c
        h = (1.0 - z) * h + z * c
        out[t] = h

    cache = None
    if keep:
        cache = DirectionCache(x=x, h_prev=h_prev, gates={'z': z_all, 'r': r_all, 'ah': ah_all, 'c': c_all})
    return out, cache


def _lstm_scan(x: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray,
               activation: Activation, keep: bool) -> Tuple[np.ndarray, Optional[DirectionCache]]:
    """x (T, B, D) -> h (T, B, H); gate order i, f, g, o"""
    steps, batch, _ = x.shape
    hidden = U.shape[1]
    a_in = x @ W.T + b

    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    out = np.empty((steps, batch, hidden))
    if keep:
        h_prev = np.empty_like(out)
        names = ('i', 'f', 'g', 'o', 'ag', 'c', 'c_prev')
        saved = {name: np.empty_like(out) for name in names}

    for t in range(steps):
        a = a_in[t] + h @ U.T
        i = expit(a[:, :hidden])
        f = expit(a[:, hidden:2 * hidden])
        ag = a[:, 2 * hidden:3 * hidden]
        g = _phi(ag, activation)
        o = expit(a[:, 3 * hidden:])
        c_new = f * c + i * g
        if keep:
            h_prev[t] = h
            for name, value in zip(names, (i, f, g, o, ag, c_new, c)):
                saved[name][t] = value
        c = c_new
        h = o * _phi(c, activation)
        out[t] = h

    cache = DirectionCache(x=x, h_prev=h_prev, gates=saved) if keep else None
    return out, cache


def _scan(cell_kind: CellKind, *args, **kwargs):
    if cell_kind is CellKind.GRU:
        return _gru_scan(*args, **kwargs)
    return _lstm_scan(*args, **kwargs)


def _bidirectional(seq: np.ndarray, cfg: ModelConfig, weights: Weights, layer: int,
                   keep: bool) -> Tuple[np.ndarray, Dict[str, DirectionCache]]:
    """seq (B, T, D) -> (B, T, 2H) with [fw; bw] per step"""
    x = seq.transpose(1, 0, 2)
    outputs, caches = [], {}
    for direction in DIRECTIONS:
        W, U, b = (_f64(t) for t in weights.layer(layer, direction))
        inp = x if direction == "fw" else x[::-1]
        h, cache = _scan(cfg.cell_kind, inp, W, U, b, cfg.rec_activation, keep=keep)
        outputs.append(h if direction == "fw" else h[::-1])
        caches[direction] = cache

    out = np.concatenate(outputs, axis=-1).transpose(1, 0, 2)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"recurrent layer {layer} produced non-finite activations", payload={'layer': layer})
    return out, caches


def recurrent_forward(seq: np.ndarray, cfg: ModelConfig, weights: Weights, layer: int = 1) -> np.ndarray:
    """
    One bidirectional recurrent layer over a single sequence

    Args:
        seq: T' x D input (D must equal the layer's input width)
        cfg: Model configuration (cell kind and activation)
        weights: Model weights
        layer: 1-based layer index

    Returns:
        T' x 2*N_R output, forward half first
    """
    seq = np.asarray(seq, dtype=np.float64)
    expected = cfg.layer_input_dim(layer)
    if seq.ndim != 2 or seq.shape[1] != expected:
        raise DimensionError(f"layer {layer} expects T x {expected} input, got {seq.shape}")
    out, _ = _bidirectional(seq[None], cfg, weights, layer, keep=False)
    return out[0]


# ==================== FULL MODEL ====================

def forward_batch(x: np.ndarray, cfg: ModelConfig, weights: Weights,
                  keep: bool = False) -> Tuple[np.ndarray, Optional[ForwardCache]]:
    """
    Class posteriors for a batch of windows

    Args:
        x: (B, input_mels, input_frames) features
        keep: Retain intermediates for backward()

    Returns:
        (B, 2) softmax posteriors (column 1 = keyword) and the cache
    """
    patches = _conv_patches(x, cfg)
    conv_pre = _conv_pre(patches, _f64(weights['conv.w']), _f64(weights['conv.b']))
    seq = np.maximum(conv_pre, 0.0).reshape(x.shape[0], conv_pre.shape[1], -1)

    cache = ForwardCache(patches=patches, conv_pre=conv_pre) if keep else None
    for layer in range(1, cfg.n_rec_layers + 1):
        if keep:
            cache.layer_inputs.append(seq)
        seq, dir_caches = _bidirectional(seq, cfg, weights, layer, keep=keep)
        if keep:
            cache.directions.append(dir_caches)

    flat = seq.reshape(seq.shape[0], -1)
    fc_pre = flat @ _f64(weights['fc.w']).T + _f64(weights['fc.b'])
    fc_act = np.maximum(fc_pre, 0.0)
    logits = fc_act @ _f64(weights['out.w']).T + _f64(weights['out.b'])
    if not np.all(np.isfinite(logits)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(logits), axis=1))[0])
        raise NumericError("non-finite logits", index=bad)
    probs = softmax(logits)

    if keep:
        cache.flat, cache.fc_pre, cache.fc_act = flat, fc_pre, fc_act
        cache.logits, cache.probs = logits, probs
    return probs, cache


def model_forward(x: ArrayLike, ckpt: Checkpoint) -> float:
    """
    Keyword posterior of one window

    Examples:
        >>> model_forward(FeatureMatrix(np.zeros((40, 151))), ckpt)
        0.5   # with zero output layer
    """
    probs, _ = forward_batch(_as_batch([x], ckpt.config), ckpt.config, ckpt.weights)
    return float(probs[0, 1])


# ==================== BACKWARD ====================

def _gru_backward(dh_out: np.ndarray, cache: DirectionCache, W: np.ndarray, U: np.ndarray,
                  activation: Activation) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    steps, batch, hidden = dh_out.shape
    U_z, U_r, U_h = U[:hidden], U[hidden:2 * hidden], U[2 * hidden:]
    gates = cache.gates
    h_prev = cache.h_prev

    da = np.empty((steps, batch, 3 * hidden))
    dh_next = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        z, r, c = gates['z'][t], gates['r'][t], gates['c'][t]
        hp = h_prev[t]
        dh = dh_out[t] + dh_next

        dz = dh * (c - hp)
        dah = dh * z * _phi_grad(gates['ah'][t], activation)
        d_rh = dah @ U_h
        dr = d_rh * hp
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)

        dh_next = dh * (1.0 - z) + d_rh * r + daz @ U_z + dar @ U_r
        da[t, :, :hidden] = daz
        da[t, :, hidden:2 * hidden] = dar
        da[t, :, 2 * hidden:] = dah

    flat_da = da.reshape(-1, 3 * hidden)
    flat_hp = h_prev.reshape(-1, hidden)
    rh = (gates['r'] * h_prev).reshape(-1, hidden)
    dU = np.concatenate([
        flat_da[:, :hidden].T @ flat_hp,
        flat_da[:, hidden:2 * hidden].T @ flat_hp,
        flat_da[:, 2 * hidden:].T @ rh,
    ])
    dW = flat_da.T @ cache.x.reshape(-1, cache.x.shape[-1])
    db = flat_da.sum(axis=0)
    dx = da @ W
    return dx, dW, dU, db


def _lstm_backward(dh_out: np.ndarray, cache: DirectionCache, W: np.ndarray, U: np.ndarray,
                   activation: Activation) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    steps, batch, hidden = dh_out.shape
    gates = cache.gates

    da = np.empty((steps, batch, 4 * hidden))
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        i, f, g, o = gates['i'][t], gates['f'][t], gates['g'][t], gates['o'][t]
        c = gates['c'][t]
        dh = dh_out[t] + dh_next

        dc = dc_next + dh * o * _phi_grad(c, activation)
        do = dh * _phi(c, activation)
        dai = dc * g * i * (1.0 - i)
        daf = dc * gates['c_prev'][t] * f * (1.0 - f)
        dag = dc * i * _phi_grad(gates['ag'][t], activation)
        dao = do * o * (1.0 - o)

        da_t = np.concatenate([dai, daf, dag, dao], axis=1)
        da[t] = da_t
        dh_next = da_t @ U
        dc_next = dc * f

    flat_da = da.reshape(-1, 4 * hidden)
    dU = flat_da.T @ cache.h_prev.reshape(-1, hidden)
    dW = flat_da.T @ cache.x.reshape(-1, cache.x.shape[-1])
    db = flat_da.sum(axis=0)
    dx = da @ W
    return dx, dW, dU, db


def backward_from_cache(cache: ForwardCache, labels: np.ndarray, cfg: ModelConfig,
                        weights: Weights) -> Weights:
    """
    Gradient of the mean cross-entropy given a kept forward cache

    Examples whose keyword posterior sits outside the loss clamp
    [PROB_CLAMP, 1 - PROB_CLAMP] contribute no gradient, matching the
    clamped loss being flat there.

    Args:
        cache: Result of forward_batch(..., keep=True)
        labels: (B,) integer targets (1 = keyword)

    Returns:
        float64 Weights-shaped gradients
    """
    batch = labels.shape[0]
    grads = Weights.zeros(cfg, dtype=np.float64)

    onehot = np.zeros((batch, 2))
    onehot[np.arange(batch), labels] = 1.0
    dlogits = (cache.probs - onehot) / batch
    p_keyword = cache.probs[:, 1]
    dlogits[(p_keyword < Constants.PROB_CLAMP) | (p_keyword > 1.0 - Constants.PROB_CLAMP)] = 0.0

    out_w = _f64(weights['out.w'])
    grads['out.w'] = dlogits.T @ cache.fc_act
    grads['out.b'] = dlogits.sum(axis=0)

    dfc = (dlogits @ out_w) * (cache.fc_pre > 0)
    grads['fc.w'] = dfc.T @ cache.flat
    grads['fc.b'] = dfc.sum(axis=0)

    time_out = cache.conv_pre.shape[1]
    dseq = (dfc @ _f64(weights['fc.w'])).reshape(batch, time_out, -1)

    hidden = cfg.rec_hidden
    step_backward = _gru_backward if cfg.cell_kind is CellKind.GRU else _lstm_backward
    for layer in range(cfg.n_rec_layers, 0, -1):
        dir_caches = cache.directions[layer - 1]
        dx_total = None
        for idx, direction in enumerate(DIRECTIONS):
            W, U, _ = (_f64(t) for t in weights.layer(layer, direction))
            dh = dseq[:, :, idx * hidden:(idx + 1) * hidden].transpose(1, 0, 2)
            if direction == "bw":
                dh = dh[::-1]
            dx, dW, dU, db = step_backward(dh, dir_caches[direction], W, U, cfg.rec_activation)
            if direction == "bw":
                dx = dx[::-1]
            prefix = f"rnn{layer}.{direction}"
            grads[f"{prefix}.W"], grads[f"{prefix}.U"], grads[f"{prefix}.b"] = dW, dU, db
            dx_total = dx if dx_total is None else dx_total + dx
        dseq = dx_total.transpose(1, 0, 2)

    n_c = cfg.n_conv_filters
    dpre = dseq.reshape(cache.conv_pre.shape) * (cache.conv_pre > 0)
    b, t, _, f = dpre.shape
    dpre_rows = dpre.transpose(0, 1, 3, 2).reshape(b * t * f, n_c)
    patch_rows = cache.patches.reshape(b * t * f, -1)
    grads['conv.w'] = (dpre_rows.T @ patch_rows).reshape(n_c, cfg.kernel_time, cfg.kernel_freq)
    grads['conv.b'] = dpre_rows.sum(axis=0)

    return grads


def relu_pattern(cache: ForwardCache, cfg: ModelConfig) -> np.ndarray:
    """Concatenated on/off state of every ReLU site (used to detect kinks)"""
    masks = [cache.conv_pre.ravel() > 0, cache.fc_pre.ravel() > 0]
    if cfg.rec_activation is Activation.RELU:
        for dir_caches in cache.directions:
            for dcache in dir_caches.values():
                for key in ('ah', 'ag', 'c'):
                    if key in dcache.gates:
                        masks.append(dcache.gates[key].ravel() > 0)
    return np.concatenate(masks)


# ==================== INITIALIZATION ====================

def _glorot(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def init_weights(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> Weights:
    """
    Glorot-uniform input kernels, orthogonal recurrent blocks, zero biases

    Args:
        cfg: Model configuration
        rng: Seeded generator
        dtype: Storage dtype (float32 for checkpoints, float64 for training)
    """
    weights = Weights.zeros(cfg, dtype=np.float64)
    area = cfg.kernel_time * cfg.kernel_freq
    weights['conv.w'] = _glorot(rng, weights['conv.w'].shape, area, cfg.n_conv_filters * area)

    hidden = cfg.rec_hidden
    for layer in range(1, cfg.n_rec_layers + 1):
        d_in = cfg.layer_input_dim(layer)
        for direction in DIRECTIONS:
            prefix = f"rnn{layer}.{direction}"
            weights[f"{prefix}.W"] = _glorot(rng, (cfg.gates * hidden, d_in), d_in, cfg.gates * hidden)
            weights[f"{prefix}.U"] = np.concatenate([_orthogonal(rng, hidden) for _ in range(cfg.gates)])

    weights['fc.w'] = _glorot(rng, weights['fc.w'].shape, cfg.fc_input_dim, cfg.fc_units)
    weights['out.w'] = _glorot(rng, weights['out.w'].shape, cfg.fc_units, 2)
    return weights.astype(dtype)


# ==================== SCORER ====================

class KeywordScorer:
    """
    Keyword posterior for feature windows of one checkpoint

    Holds a float64 copy of the weights; safe to share read-only across
    worker threads.
    """

    def __init__(self, ckpt: Checkpoint, max_batch: int = 256):
        self.ckpt = ckpt
        self.config = ckpt.config
        self.feature_cfg = ckpt.feature_cfg
        self.max_batch = max_batch
        self._weights = ckpt.weights.astype(np.float64)

    def score(self, features: ArrayLike) -> float:
        return float(self.score_batch([features])[0])

    def score_batch(self, windows: Sequence[ArrayLike]) -> np.ndarray:
        """Scores aligned with ``windows``; identical to per-window scoring"""
        if len(windows) == 0:
            return np.zeros(0)
        batch = _as_batch(windows, self.config)
        scores = np.empty(batch.shape[0])
        for start in range(0, batch.shape[0], self.max_batch):
            chunk = batch[start:start + self.max_batch]
            probs, _ = forward_batch(chunk, self.config, self._weights)
            scores[start:start + chunk.shape[0]] = probs[:, 1]
        return scores

    __call__ = score


# ==================== HELPERS ====================

def _f64(value: np.ndarray) -> np.ndarray:
    return value if value.dtype == np.float64 else value.astype(np.float64)


def _as_batch(windows: Sequence[ArrayLike], cfg: ModelConfig) -> np.ndarray:
    expected = (cfg.input_mels, cfg.input_frames)

    if isinstance(windows, np.ndarray) and windows.ndim == 3:
        if windows.shape[1:] != expected:
            raise _shape_error(windows.shape[1:], expected)
        return windows.astype(np.float64, copy=False)

    if len(windows) == 0:
        raise EmptyInputError("no feature windows")

    arrays = []
    for window in windows:
        values = np.asarray(window.values if isinstance(window, FeatureMatrix) else window, dtype=np.float64)
        if values.shape != expected:
            raise _shape_error(values.shape, expected)
        arrays.append(values)
    return np.stack(arrays)


def _shape_error(found: tuple, expected: tuple) -> DimensionError:
    return DimensionError(
        f"feature window shape {tuple(found)} does not match model input {expected}",
        payload={'expected': list(expected), 'found': list(found)}
    )
