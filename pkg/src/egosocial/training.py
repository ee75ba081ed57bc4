"""Full backpropagation through time, SGD with momentum, L-BFGS, early stopping."""
from __future__ import annotations

import csv
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dataset import Batch, InteractionSeries, to_batch
from .errors import DivergedError, InvalidArgumentError
from .lstm import LstmModel, forward_batch, loss, unflatten

log = logging.getLogger(__name__)

# Fixed partition of a batch for gradient/loss reduction. Kept independent of
# the worker count so results are bit-identical however many threads run.
CHUNK_SIZE = 128


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "sgd"
    learning_rate: float = 0.01
    momentum: float = 0.8
    batch_size: int = 500
    max_epochs: int = 200
    patience: int = 20
    lbfgs_memory: int = 10
    lbfgs_batch_size: Optional[int] = None  # None: full batch
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.optimizer not in ("sgd", "lbfgs"):
            raise InvalidArgumentError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0:
            raise InvalidArgumentError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise InvalidArgumentError("momentum must lie in [0, 1)")
        for name in ("batch_size", "max_epochs", "patience", "lbfgs_memory", "workers"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be positive")


@dataclass
class TrainRun:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based; 0 means no epoch completed
    model: Optional[LstmModel] = None
    initial_val_loss: float = math.nan
    fallbacks: int = 0  # L-BFGS steps that fell back to steepest descent

    @property
    def epochs(self) -> int:
        return len(self.val_loss)

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch - 1] if self.best_epoch else math.inf

    @property
    def best_val_acc(self) -> float:
        return self.val_acc[self.best_epoch - 1] if self.best_epoch else 0.0


def _as_batch(data) -> Batch:
    if isinstance(data, Batch):
        return data
    if isinstance(data, InteractionSeries):
        data = [data]
    return to_batch(list(data))


def _chunks(n):
    return [np.arange(i, min(i + CHUNK_SIZE, n)) for i in range(0, n, CHUNK_SIZE)]


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _backward(model: LstmModel, labels, probs, trace):
    """Summed BCE gradient for one chunk, flat, same layout as model.params."""
    cfg = model.config
    p = model.p
    alpha, cells, n_blocks = cfg.alpha, cfg.cells_per_block, cfg.num_blocks
    grad = np.zeros_like(model.params)
    gp = unflatten(cfg, grad)
    n_steps, n_batch, _ = trace.inputs.shape

    dz = probs - labels
    y_final = trace.y[n_steps]
    gp["v"][:] = dz @ y_final
    gp["b"][0] = dz.sum()
    dy = dz[:, None] * p["v"][None, :]
    ds = np.zeros_like(dy)

    for t in range(n_steps - 1, -1, -1):
        x, m = trace.inputs[t], trace.mask[t]
        s_prev, s, y_prev = trace.s[t], trace.s[t + 1], trace.y[t]
        y_in, sig_c, y_out, sig_s = trace.y_in[t], trace.sig_c[t], trace.y_out[t], trace.sig_s[t]

        # y(t) = out * h(s(t)) on live rows, copy of y(t-1) on padded rows
        dy_new = dy * m
        dy_prev = dy - dy_new
        h_s = 2.0 * sig_s - 1.0
        d_out = (dy_new * h_s).reshape(n_batch, n_blocks, cells).sum(axis=2)
        ds = ds + dy_new * np.repeat(y_out, cells, axis=1) * 2.0 * sig_s * (1.0 - sig_s)
        dnet_out = d_out * alpha * y_out * (1.0 - y_out)
        ds = ds + (dnet_out[:, :, None] * p["Po"][None]).reshape(n_batch, -1)
        gp["Wo"] += dnet_out.T @ x
        gp["Ro"] += dnet_out.T @ y_prev
        gp["Po"] += np.einsum("bn,bnc->nc", dnet_out, s.reshape(n_batch, n_blocks, cells))
        gp["bo"] += dnet_out.sum(axis=0)
        dy_prev = dy_prev + dnet_out @ p["Ro"]

        # s(t) = s(t-1) + in * g(net_c): the identity path carries ds back unchanged
        ds_live = ds * m
        g_c = 4.0 * sig_c - 2.0
        d_in = (ds_live * g_c).reshape(n_batch, n_blocks, cells).sum(axis=2)
        dnet_c = ds_live * np.repeat(y_in, cells, axis=1) * 4.0 * sig_c * (1.0 - sig_c)
        gp["Wc"] += dnet_c.T @ x
        gp["Rc"] += dnet_c.T @ y_prev
        dy_prev = dy_prev + dnet_c @ p["Rc"]

        dnet_in = d_in * alpha * y_in * (1.0 - y_in)
        gp["Wi"] += dnet_in.T @ x
        gp["Ri"] += dnet_in.T @ y_prev
        gp["Pi"] += np.einsum("bn,bnc->nc", dnet_in, s_prev.reshape(n_batch, n_blocks, cells))
        gp["bi"] += dnet_in.sum(axis=0)
        dy_prev = dy_prev + dnet_in @ p["Ri"]
        ds = ds + (dnet_in[:, :, None] * p["Pi"][None]).reshape(n_batch, -1)

        dy = dy_prev
    return grad


def loss_and_gradient(model: LstmModel, batch, workers: int = 1):
    """Mean BCE over the batch and its exact gradient (untruncated BPTT)."""
    batch = _as_batch(batch)
    if batch.labels is None:
        raise InvalidArgumentError("gradient needs labelled series")

    def work(idx):
        sub = batch.subset(idx)
        probs, trace = forward_batch(model, sub.inputs, sub.lengths, keep_trace=True)
        return float(np.sum(loss(probs, sub.labels))), _backward(model, sub.labels, probs, trace)

    parts = _map(work, _chunks(len(batch)), workers)
    total_loss, total_grad = 0.0, np.zeros_like(model.params)
    for part_loss, part_grad in parts:
        total_loss += part_loss
        total_grad += part_grad
    n = len(batch)
    return total_loss / n, total_grad / n


def bptt_gradient(model: LstmModel, batch, workers: int = 1) -> np.ndarray:
    return loss_and_gradient(model, batch, workers)[1]


def predict_proba(model: LstmModel, data, workers: int = 1) -> np.ndarray:
    batch = _as_batch(data)

    def work(idx):
        sub = batch.subset(idx)
        return forward_batch(model, sub.inputs, sub.lengths)

    return np.concatenate(_map(work, _chunks(len(batch)), workers))


def evaluate(model: LstmModel, data, workers: int = 1) -> tuple[float, float]:
    """(mean BCE, accuracy at the 0.5 decision threshold)."""
    batch = _as_batch(data)
    probs = predict_proba(model, batch, workers)
    losses = loss(probs, batch.labels)
    return float(np.mean(losses)), float(np.mean((probs > 0.5) == (batch.labels > 0.5)))


def batch_loss(model: LstmModel, data, workers: int = 1) -> float:
    return evaluate(model, data, workers)[0]


# --- optimizers -----------------------------------------------------------

def sgd_step(model, gradient, velocity, config: TrainConfig):
    """Momentum update: v' = momentum v - lr g, w' = w + v'.

    ``model`` may be an LstmModel or a bare parameter array; the same kind is
    returned.
    """
    w = model.params if isinstance(model, LstmModel) else np.asarray(model, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    velocity = np.zeros_like(w) if velocity is None else np.asarray(velocity, dtype=float)
    if gradient.shape != w.shape or velocity.shape != w.shape:
        raise InvalidArgumentError(
            f"shape mismatch: params {w.shape}, gradient {gradient.shape}, velocity {velocity.shape}")
    v_new = config.momentum * velocity - config.learning_rate * gradient
    w_new = w + v_new
    if isinstance(model, LstmModel):
        return model.with_params(w_new), v_new
    return w_new, v_new


class LbfgsHistory:
    """FIFO of curvature pairs (s, y) = (w_k+1 - w_k, g_k+1 - g_k)."""

    def __init__(self, memory: int = 10, curvature_eps: float = 1e-10):
        self.pairs: deque = deque(maxlen=memory)
        self.curvature_eps = curvature_eps
        self.skipped = 0

    def __len__(self):
        return len(self.pairs)

    def push(self, s, y) -> bool:
        sy = float(s @ y)
        if sy <= self.curvature_eps:
            self.skipped += 1
            return False
        self.pairs.append((s.copy(), y.copy(), 1.0 / sy))
        return True


def two_loop_direction(history: LbfgsHistory, gradient) -> np.ndarray:
    """Search direction -H g from the two-loop recursion.

    With no curvature pairs this is the gradient step, scaled down to unit
    length when the gradient is longer than 1.
    """
    g = np.asarray(gradient, dtype=float)
    if not len(history):
        return -g / max(1.0, float(np.linalg.norm(g)))
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(history.pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s_last, y_last, _ = history.pairs[-1]
    r = q * (s_last @ y_last) / (y_last @ y_last)
    for (s, y, rho), a in zip(history.pairs, reversed(alphas)):
        b = rho * (y @ r)
        r += s * (a - b)
    return -r


@dataclass
class LbfgsStepInfo:
    step_size: float
    fell_back: bool
    evaluations: int


def armijo_backtrack(fun, w, f, g, d, c1=1e-4, max_halvings=40):
    """Halve the step from 1 until f(w + t d) <= f + c1 t g.d."""
    slope = float(g @ d)
    t = 1.0
    for k in range(max_halvings):
        w_new = w + t * d
        f_new, g_new = fun(w_new)
        if math.isfinite(f_new) and f_new <= f + c1 * t * slope:
            return t, w_new, f_new, g_new, k + 1
        t *= 0.5
    return 0.0, w, f, g, max_halvings


def lbfgs_step(fun: Callable, w, f, g, history: LbfgsHistory, c1: float = 1e-4):
    """One L-BFGS iteration: two-loop direction, Armijo line search, history update.

    ``fun(w) -> (f, g)``. A non-descent direction or a failed line search falls
    back to steepest descent for this step; ``info.fell_back`` reports it.
    """
    d = two_loop_direction(history, g)
    fell_back = False
    if not float(g @ d) < 0:
        fell_back = True
        d = -g / max(1.0, float(np.linalg.norm(g)))
    t, w_new, f_new, g_new, n_eval = armijo_backtrack(fun, w, f, g, d, c1)
    if t == 0.0 and not fell_back and len(history):
        fell_back = True
        d = -g / max(1.0, float(np.linalg.norm(g)))
        t, w_new, f_new, g_new, more = armijo_backtrack(fun, w, f, g, d, c1)
        n_eval += more
    if fell_back:
        log.debug("L-BFGS fell back to steepest descent")
    if t > 0.0:
        history.push(w_new - w, g_new - g)
    return w_new, f_new, g_new, LbfgsStepInfo(t, fell_back, n_eval)


def lbfgs_minimize(fun: Callable, w0, memory: int = 10, max_iter: int = 100, gtol: float = 0.0):
    """Plain L-BFGS loop; returns (w, list of f after each iteration)."""
    w = np.array(w0, dtype=float)
    f, g = fun(w)
    history = LbfgsHistory(memory)
    trace = []
    for _ in range(max_iter):
        if float(np.linalg.norm(g)) <= gtol:
            break
        w, f, g, _info = lbfgs_step(fun, w, f, g, history)
        trace.append(f)
    return w, trace


# --- training loop --------------------------------------------------------

def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch])


def train(
    model: LstmModel,
    train_set,
    val_set,
    config: TrainConfig,
    evaluator: Optional[Callable] = None,
    on_epoch: Optional[Callable] = None,
) -> TrainRun:
    """Train with early stopping on validation loss.

    Stops after ``patience`` epochs without a strictly lower validation loss,
    or at ``max_epochs``, and returns the best-epoch parameters. ``evaluator``
    replaces the validation pass (``model -> (loss, acc)``), mainly for tests.
    """
    train_b = _as_batch(train_set)
    val_b = _as_batch(val_set)
    if train_b.labels is None or val_b.labels is None:
        raise InvalidArgumentError("training and validation series must be labelled")
    workers = config.workers
    if evaluator is None:
        def evaluator(m):
            return evaluate(m, val_b, workers)

    run = TrainRun()
    run.initial_val_loss = evaluator(model)[0]
    best_params = model.params.copy()
    w = model.params.copy()
    n = len(train_b)

    velocity = np.zeros_like(w)
    history = LbfgsHistory(config.lbfgs_memory)
    lb_state = None

    def full_fun(params, data=train_b):
        return loss_and_gradient(model.with_params(params), data, workers)

    for epoch in range(1, config.max_epochs + 1):
        if config.optimizer == "sgd":
            order = epoch_rng(config.seed, epoch).permutation(n)
            size = min(config.batch_size, n)
            total = 0.0
            for start in range(0, n, size):
                idx = np.sort(order[start:start + size])
                batch_l, grad = loss_and_gradient(model.with_params(w), train_b.subset(idx), workers)
                if not (math.isfinite(batch_l) and np.all(np.isfinite(grad))):
                    raise DivergedError(epoch)
                w, velocity = sgd_step(w, grad, velocity, config)
                total += batch_l * len(idx)
            train_l = total / n
        else:
            if config.lbfgs_batch_size is None or config.lbfgs_batch_size >= n:
                fun = full_fun
                if lb_state is None:
                    lb_state = fun(w)
            else:
                idx = np.sort(epoch_rng(config.seed, epoch).permutation(n)[: config.lbfgs_batch_size])
                sub = train_b.subset(idx)

                def fun(params, data=sub):
                    return full_fun(params, data)

                lb_state = fun(w)
            f, g = lb_state
            if not math.isfinite(f):
                raise DivergedError(epoch)
            w, f, g, info = lbfgs_step(fun, w, f, g, history)
            run.fallbacks += int(info.fell_back)
            lb_state = (f, g)
            train_l = f

        current = model.with_params(w)
        val_l, val_a = evaluator(current)
        if not (math.isfinite(train_l) and math.isfinite(val_l) and np.all(np.isfinite(w))):
            raise DivergedError(epoch)
        run.train_loss.append(float(train_l))
        run.val_loss.append(float(val_l))
        run.val_acc.append(float(val_a))
        if run.best_epoch == 0 or val_l < run.best_val_loss:
            run.best_epoch = epoch
            best_params = w.copy()
        if on_epoch is not None:
            on_epoch(epoch, train_l, val_l, val_a)
        log.debug("epoch %d train %.5f val %.5f acc %.4f", epoch, train_l, val_l, val_a)
        if epoch - run.best_epoch >= config.patience:
            break

    run.model = model.with_params(best_params)
    return run


def write_metrics_csv(run: TrainRun, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss", "val_acc"])
        for i, (tl, vl, va) in enumerate(zip(run.train_loss, run.val_loss, run.val_acc), 1):
            w.writerow([i, repr(tl), repr(vl), repr(va)])


# --- gradient check -------------------------------------------------------

def relative_error(a, b, guard: float = 1e-12):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), guard)


def numerical_gradient(model: LstmModel, data, step: float = 1e-5) -> np.ndarray:
    batch = _as_batch(data)
    w = model.params
    est = np.empty_like(w)
    for i in range(w.size):
        wp = w.copy()
        wp[i] += step
        wm = w.copy()
        wm[i] -= step
        est[i] = (batch_loss(model.with_params(wp), batch) - batch_loss(model.with_params(wm), batch)) / (2 * step)
    return est


def gradient_check(model: LstmModel, data, step: float = 1e-5) -> tuple[float, float]:
    """(max, mean) relative error between BPTT and central differences."""
    if not 1e-8 <= step <= 1e-3:
        log.warning("gradient_check step %g outside the recommended [1e-8, 1e-3]", step)
    analytic = bptt_gradient(model, data)
    rel = relative_error(analytic, numerical_gradient(model, data, step))
    return float(rel.max()), float(rel.mean())
