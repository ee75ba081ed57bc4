"""LSTM with input/output gates, peepholes and no forget gate.

One hidden layer of ``num_blocks`` blocks, each holding ``cells_per_block``
memory cells that share the block's input gate and output gate. Per step::

    net_in  = Wi x + Ri y(t-1) + Pi . s_block(t-1) + bi      in = f(net_in)
    net_c   = Wc x + Rc y(t-1)                              s(t) = s(t-1) + in * g(net_c)
    net_out = Wo x + Ro y(t-1) + Po . s_block(t)   + bo      out = f(net_out)
    y(t)    = out * h(s(t))

with f(x) = sigmoid(alpha x), g = 4 sigmoid - 2 and h = 2 sigmoid - 1. The
sequence probability is sigmoid(v . y(T) + b) read at the last frame.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .errors import InvalidArgumentError

CHECKPOINT_FORMAT = "egosocial-lstm/1"
LOSS_CLIP = 1e-12


@dataclass(frozen=True)
class LstmConfig:
    num_blocks: int = 35
    cells_per_block: int = 2
    input_dim: int = 2
    alpha: float = 3.5
    init_range: tuple[float, float] = (-0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "init_range", tuple(float(v) for v in self.init_range))
        if self.num_blocks < 1 or self.cells_per_block < 1 or self.input_dim < 1:
            raise InvalidArgumentError("num_blocks, cells_per_block and input_dim must be positive")
        if not self.alpha > 0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        lo, hi = self.init_range
        if not (lo < hi and lo == -hi):
            raise InvalidArgumentError(f"init_range must be symmetric about 0, got {self.init_range}")

    @property
    def num_cells(self) -> int:
        return self.num_blocks * self.cells_per_block


def param_shapes(config: LstmConfig) -> dict[str, tuple[int, ...]]:
    n, c, i, m = config.num_blocks, config.cells_per_block, config.input_dim, config.num_cells
    return {
        "Wc": (m, i),  # cell input <- external input
        "Rc": (m, m),  # cell input <- all cell outputs at t-1
        "Wi": (n, i),
        "Ri": (n, m),
        "Pi": (n, c),  # input gate peephole on own block's s(t-1)
        "bi": (n,),
        "Wo": (n, i),
        "Ro": (n, m),
        "Po": (n, c),  # output gate peephole on own block's s(t)
        "bo": (n,),
        "v": (m,),     # output unit <- cell outputs
        "b": (1,),
    }


def num_params(config: LstmConfig) -> int:
    n, c, i, m = config.num_blocks, config.cells_per_block, config.input_dim, config.num_cells
    return m * (i + m) + 2 * n * (i + m + c + 1) + m + 1


def unflatten(config: LstmConfig, flat: np.ndarray) -> dict[str, np.ndarray]:
    """Named views into ``flat``; writes through the views modify ``flat``."""
    views, offset = {}, 0
    for name, shape in param_shapes(config).items():
        size = int(np.prod(shape))
        views[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    if offset != flat.size:
        raise InvalidArgumentError(f"expected {offset} parameters, got {flat.size}")
    return views


class LstmModel:
    """Architecture plus one flat float64 parameter vector."""

    def __init__(self, config: LstmConfig, params: np.ndarray):
        params = np.asarray(params, dtype=float)
        if params.shape != (num_params(config),):
            raise InvalidArgumentError(f"parameter vector has shape {params.shape}, expected ({num_params(config)},)")
        self.config = config
        self.params = params
        self.p = unflatten(config, params)

    def with_params(self, params: np.ndarray) -> "LstmModel":
        return LstmModel(self.config, np.array(params, dtype=float))

    def copy(self) -> "LstmModel":
        return self.with_params(self.params)

    def __repr__(self):
        return f"LstmModel(num_blocks={self.config.num_blocks}, params={self.params.size})"


class CellState(NamedTuple):
    s: np.ndarray
    y: np.ndarray


def gate(x, alpha):
    return expit(alpha * x)


def squash_g(x):
    return 4.0 * expit(x) - 2.0


def squash_h(x):
    return 2.0 * expit(x) - 1.0


def init_model(config: LstmConfig) -> LstmModel:
    rng = np.random.default_rng(config.seed)
    lo, hi = config.init_range
    return LstmModel(config, rng.uniform(lo, hi, size=num_params(config)))


def zero_model(config: LstmConfig) -> LstmModel:
    return LstmModel(config, np.zeros(num_params(config)))


def zero_state(model: LstmModel, batch: int | None = None) -> CellState:
    shape = (model.config.num_cells,) if batch is None else (batch, model.config.num_cells)
    return CellState(np.zeros(shape), np.zeros(shape))


def _peep(P, s, cells):
    # (B, M) states against (N, C) peephole weights -> (B, N)
    return np.einsum("bnc,nc->bn", s.reshape(s.shape[0], -1, cells), P)


def cell_update(p, alpha, cells, x, s_prev, y_prev, mask=None):
    """One batched step. Rows with ``mask`` 0 keep their previous state.

    Returns the new state plus the intermediates backprop needs.
    """
    net_in = x @ p["Wi"].T + y_prev @ p["Ri"].T + _peep(p["Pi"], s_prev, cells) + p["bi"]
    y_in = gate(net_in, alpha)
    sig_c = expit(x @ p["Wc"].T + y_prev @ p["Rc"].T)
    g_c = 4.0 * sig_c - 2.0
    inc = np.repeat(y_in, cells, axis=1) * g_c
    if mask is not None:
        inc = inc * mask
    s = s_prev + inc
    net_out = x @ p["Wo"].T + y_prev @ p["Ro"].T + _peep(p["Po"], s, cells) + p["bo"]
    y_out = gate(net_out, alpha)
    sig_s = expit(s)
    y = np.repeat(y_out, cells, axis=1) * (2.0 * sig_s - 1.0)
    if mask is not None:
        y = np.where(mask > 0, y, y_prev)
    return s, y, (y_in, sig_c, y_out, sig_s)


def _check_input(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("non-finite input")
    return x


def step(model: LstmModel, state: CellState, x) -> tuple[CellState, np.ndarray]:
    x = _check_input(x).reshape(1, -1)
    cfg = model.config
    s, y, _ = cell_update(model.p, cfg.alpha, cfg.cells_per_block, x,
                          np.asarray(state.s).reshape(1, -1), np.asarray(state.y).reshape(1, -1))
    return CellState(s[0], y[0]), y[0]


def readout(model: LstmModel, y):
    return expit(y @ model.p["v"] + model.p["b"][0])


def forward(model: LstmModel, series) -> float:
    """Probability that a normalized (T, 2) series is an interaction."""
    x = _check_input(series).reshape(-1, model.config.input_dim)
    if len(x) == 0:
        raise InvalidArgumentError("empty series")
    state = zero_state(model)
    for t in range(len(x)):
        state, y = step(model, state, x[t])
    return float(readout(model, y))


class Trace(NamedTuple):
    inputs: np.ndarray   # (T, B, I)
    mask: np.ndarray     # (T, B, 1)
    s: np.ndarray        # (T+1, B, M); s[0] = 0
    y: np.ndarray        # (T+1, B, M); y[0] = 0
    y_in: np.ndarray     # (T, B, N)
    sig_c: np.ndarray    # (T, B, M)
    y_out: np.ndarray    # (T, B, N)
    sig_s: np.ndarray    # (T, B, M)


def forward_batch(model: LstmModel, inputs, lengths, keep_trace=False):
    """Vectorized forward over zero-padded (B, T, I) inputs.

    Returns probabilities (B,), and the per-step Trace when requested.
    """
    inputs = np.asarray(inputs, dtype=float)
    lengths = np.asarray(lengths)
    cfg = model.config
    n_batch, n_steps, _ = inputs.shape
    if n_batch == 0 or lengths.min() < 1:
        raise InvalidArgumentError("every series needs at least one frame")
    xs = np.ascontiguousarray(inputs.transpose(1, 0, 2))
    mask = (np.arange(n_steps)[:, None] < lengths[None, :]).astype(float)[:, :, None]
    full = bool(np.all(lengths == n_steps))
    m_cells, n_blocks = cfg.num_cells, cfg.num_blocks
    if keep_trace:
        s_all = np.zeros((n_steps + 1, n_batch, m_cells))
        y_all = np.zeros((n_steps + 1, n_batch, m_cells))
        y_in = np.empty((n_steps, n_batch, n_blocks))
        y_out = np.empty((n_steps, n_batch, n_blocks))
        sig_c = np.empty((n_steps, n_batch, m_cells))
        sig_s = np.empty((n_steps, n_batch, m_cells))
    s = np.zeros((n_batch, m_cells))
    y = np.zeros((n_batch, m_cells))
    for t in range(n_steps):
        s, y, aux = cell_update(model.p, cfg.alpha, cfg.cells_per_block, xs[t], s, y,
                                None if full else mask[t])
        if keep_trace:
            s_all[t + 1], y_all[t + 1] = s, y
            y_in[t], sig_c[t], y_out[t], sig_s[t] = aux
    probs = readout(model, y)
    if not keep_trace:
        return probs
    return probs, Trace(xs, mask, s_all, y_all, y_in, sig_c, y_out, sig_s)


def loss(probability, label):
    """Binary cross-entropy; works elementwise on arrays."""
    p = np.clip(probability, LOSS_CLIP, 1.0 - LOSS_CLIP)
    out = -(label * np.log(p) + (1.0 - label) * np.log1p(-p))
    return float(out) if np.ndim(out) == 0 else out


def save_checkpoint(model: LstmModel, path):
    record = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(model.config),
        "params": {
            name: {"shape": list(arr.shape), "values": arr.ravel().tolist()}
            for name, arr in model.p.items()
        },
    }
    Path(path).write_text(json.dumps(record, indent=1))


def load_checkpoint(path) -> LstmModel:
    record = json.loads(Path(path).read_text())
    if record.get("format") != CHECKPOINT_FORMAT:
        raise InvalidArgumentError(f"{path}: not an {CHECKPOINT_FORMAT} checkpoint")
    config = LstmConfig(**record["config"])
    shapes = param_shapes(config)
    chunks = []
    for name, shape in shapes.items():
        entry = record["params"][name]
        if tuple(entry["shape"]) != shape:
            raise InvalidArgumentError(f"{path}: {name} has shape {entry['shape']}, expected {list(shape)}")
        chunks.append(np.array(entry["values"], dtype=float))
    return LstmModel(config, np.concatenate(chunks))
