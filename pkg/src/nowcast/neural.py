"""Small feedforward and gated-recurrent regressors in plain numpy.

Both networks are trained on mean squared error plus an L2 penalty on the
weight matrices (biases unpenalized) using Adam, inverted dropout during
training only, and early stopping on a validation set. Gradients are written
out by hand; :func:`numerical_gradient` provides the finite-difference check.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .base import Learner


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainSchedule:
    max_epochs: int = 200
    patience: int = 30
    lr: float = 1e-3
    batch_size: int = 32
    seed: int = 42

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        # a single-epoch schedule is a fixed-length refit where patience is moot
        if self.patience < 1 or (self.max_epochs > 1 and self.patience >= self.max_epochs):
            raise ValueError("patience must lie in (0, max_epochs)")
        if self.lr <= 0 or self.batch_size < 1:
            raise ValueError("lr must be positive and batch_size >= 1")


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _dropout_mask(rng, shape, rate: float):
    if rate <= 0 or rng is None:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


# -- MLP -------------------------------------------------------------------


class MlpNet:
    """ReLU multilayer perceptron with a linear scalar output."""

    def __init__(self, n_inputs: int, hidden: tuple[int, ...] = (32,), dropout_rate: float = 0.0,
                 l2_reg: float = 0.0, seed: int = 42):
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        self.widths = (int(n_inputs), *map(int, hidden), 1)
        self.dropout_rate = float(dropout_rate)
        self.l2_reg = float(l2_reg)
        self.epochs_trained = 0
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        for i, (a, b) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            self.params[f"W{i}"] = _uniform(rng, a, (a, b))
            self.params[f"b{i}"] = _uniform(rng, a, (b,))

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def forward(self, X, rng: np.random.Generator | None = None):
        """Output ``(n,)`` and a cache; dropout applies only when ``rng`` is given."""
        a = np.asarray(X, dtype=float)
        cache = []
        for i in range(self.n_layers):
            W, b = self.params[f"W{i}"], self.params[f"b{i}"]
            z = a @ W + b
            if i == self.n_layers - 1:
                cache.append((a, None, None))
                return z[:, 0], cache
            h = np.maximum(z, 0.0)
            mask = _dropout_mask(rng, h.shape, self.dropout_rate)
            cache.append((a, z, mask))
            a = h if mask is None else h * mask
        raise AssertionError("unreachable")

    def backward(self, cache, dout) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Gradients of ``sum(dout * output)`` w.r.t. the parameters and the input."""
        grads = {}
        da = np.asarray(dout, dtype=float)[:, None]
        for i in reversed(range(self.n_layers)):
            a, z, mask = cache[i]
            if z is not None:
                if mask is not None:
                    da = da * mask
                da = da * (z > 0)
            grads[f"W{i}"] = a.T @ da
            grads[f"b{i}"] = da.sum(axis=0)
            da = da @ self.params[f"W{i}"].T
        return grads, da

    def predict(self, X) -> np.ndarray:
        return self.forward(X)[0]

    def input_gradient(self, X) -> np.ndarray:
        out, cache = self.forward(X)
        return self.backward(cache, np.ones_like(out))[1]


# -- GRU -------------------------------------------------------------------


def gru_cell(h_prev, x_t, p: dict[str, np.ndarray]):
    """One GRU step; returns ``h_t`` and the intermediates needed for BPTT."""
    z = _sigmoid(x_t @ p["Wz"] + h_prev @ p["Uz"] + p["bz"])
    r = _sigmoid(x_t @ p["Wr"] + h_prev @ p["Ur"] + p["br"])
    rh = r * h_prev
    hh = np.tanh(x_t @ p["Wh"] + rh @ p["Uh"] + p["bh"])
    h = (1.0 - z) * h_prev + z * hh
    return h, (x_t, h_prev, z, r, rh, hh)


_GATES = ("z", "r", "h")


class GruNet:
    """Stacked GRU over ``(n, T, p)`` windows; a linear head reads the last state."""

    def __init__(self, n_inputs: int, hidden_dim: int = 16, num_layers: int = 1,
                 dropout_rate: float = 0.0, l2_reg: float = 0.0, seed: int = 42):
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        self.n_inputs, self.hidden_dim, self.num_layers = int(n_inputs), int(hidden_dim), int(num_layers)
        self.dropout_rate = float(dropout_rate)
        self.l2_reg = float(l2_reg)
        self.epochs_trained = 0
        rng = np.random.default_rng(seed)
        H = self.hidden_dim
        self.params = {}
        for layer in range(self.num_layers):
            d = self.n_inputs if layer == 0 else H
            for g in _GATES:
                self.params[f"L{layer}.W{g}"] = _uniform(rng, d, (d, H))
                self.params[f"L{layer}.U{g}"] = _uniform(rng, H, (H, H))
                self.params[f"L{layer}.b{g}"] = _uniform(rng, H, (H,))
        self.params["Wo"] = _uniform(rng, H, (H, 1))
        self.params["bo"] = _uniform(rng, H, (1,))

    def _layer(self, layer: int) -> dict[str, np.ndarray]:
        pre = f"L{layer}."
        return {k[len(pre):]: v for k, v in self.params.items() if k.startswith(pre)}

    def forward(self, X, rng: np.random.Generator | None = None):
        seq = np.asarray(X, dtype=float)
        if seq.ndim != 3:
            raise ValueError("GRU input must be (n, T, p)")
        n, T, _ = seq.shape
        caches = []
        for layer in range(self.num_layers):
            p = self._layer(layer)
            h = np.zeros((n, self.hidden_dim))
            outs, steps = [], []
            for t in range(T):
                h, c = gru_cell(h, seq[:, t], p)
                outs.append(h)
                steps.append(c)
            out = np.stack(outs, axis=1)
            mask = _dropout_mask(rng, (n, 1, self.hidden_dim), self.dropout_rate)
            caches.append((steps, mask))
            seq = out if mask is None else out * mask
        last = seq[:, -1]
        y = (last @ self.params["Wo"] + self.params["bo"])[:, 0]
        return y, (caches, last, T)

    def backward(self, cache, dout):
        caches, last, T = cache
        dout = np.asarray(dout, dtype=float)[:, None]
        grads = {"Wo": last.T @ dout, "bo": dout.sum(axis=0)}
        n = last.shape[0]
        dseq = np.zeros((n, T, self.hidden_dim))
        dseq[:, -1] = dout @ self.params["Wo"].T
        for layer in reversed(range(self.num_layers)):
            steps, mask = caches[layer]
            if mask is not None:
                dseq = dseq * mask
            p = self._layer(layer)
            g = {k: np.zeros_like(v) for k, v in p.items()}
            d_in = steps[0][0].shape[1]
            dx = np.zeros((n, T, d_in))
            dh_next = np.zeros((n, self.hidden_dim))
            for t in reversed(range(T)):
                x_t, h_prev, z, r, rh, hh = steps[t]
                dh = dseq[:, t] + dh_next
                dah = dh * z * (1.0 - hh**2)
                daz = dh * (hh - h_prev) * z * (1.0 - z)
                dh_prev = dh * (1.0 - z)
                drh = dah @ p["Uh"].T
                dar = drh * h_prev * r * (1.0 - r)
                dh_prev += drh * r + daz @ p["Uz"].T + dar @ p["Ur"].T
                for gate, da in (("h", dah), ("z", daz), ("r", dar)):
                    g[f"W{gate}"] += x_t.T @ da
                    g[f"b{gate}"] += da.sum(axis=0)
                    dx[:, t] += da @ p[f"W{gate}"].T
                g["Uh"] += rh.T @ dah
                g["Uz"] += h_prev.T @ daz
                g["Ur"] += h_prev.T @ dar
                dh_next = dh_prev
            for k, v in g.items():
                grads[f"L{layer}.{k}"] = v
            dseq = dx
        return grads, dseq

    def predict(self, X) -> np.ndarray:
        return self.forward(X)[0]

    def input_gradient(self, X) -> np.ndarray:
        out, cache = self.forward(X)
        return self.backward(cache, np.ones_like(out))[1]


# -- loss, gradient checks, training ---------------------------------------


def _is_weight(name: str) -> bool:
    return "W" in name or "U" in name


def loss_and_grad(net, X, y, rng: np.random.Generator | None = None):
    """Penalized MSE and its parameter gradients for one batch."""
    y = np.asarray(y, dtype=float)
    out, cache = net.forward(X, rng)
    resid = out - y
    loss = float(np.mean(resid**2))
    grads, _ = net.backward(cache, 2.0 * resid / y.size)
    if net.l2_reg:
        for k, w in net.params.items():
            if _is_weight(k):
                loss += net.l2_reg * float(np.sum(w**2))
                grads[k] = grads[k] + 2.0 * net.l2_reg * w
    return loss, grads


def numerical_gradient(net, X, y, eps: float = 1e-6) -> dict[str, np.ndarray]:
    """Central finite differences of :func:`loss_and_grad` with dropout off."""
    out = {}
    for k, w in net.params.items():
        g = np.zeros_like(w)
        it = np.nditer(w, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = w[i]
            w[i] = old + eps
            up = loss_and_grad(net, X, y)[0]
            w[i] = old - eps
            down = loss_and_grad(net, X, y)[0]
            w[i] = old
            g[i] = (up - down) / (2 * eps)
        out[k] = g
    return out


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1, c2 = 1 - self.b1**self.t, 1 - self.b2**self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based; 0 means no epoch completed
    stopped_early: bool = False


def train_epochs(net, X, y, schedule: TrainSchedule, X_val=None, y_val=None,
                 history: TrainHistory | None = None) -> Iterator[float]:
    """Train ``net`` in place, yielding one monitored loss per epoch.

    With a validation set the monitored loss is the validation MSE, training
    stops after ``patience`` epochs without improvement and the best weights
    are restored when the generator finishes. Without one, all
    ``max_epochs`` run and the training loss is reported.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    hist = history if history is not None else TrainHistory()
    has_val = X_val is not None and y_val is not None and len(y_val) > 0
    rng = np.random.default_rng([schedule.seed, 1])
    opt = _Adam(net.params, schedule.lr)
    best, best_params, stale = np.inf, copy.deepcopy(net.params), 0
    n = y.size
    for epoch in range(1, schedule.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, schedule.batch_size):
            idx = order[s : s + schedule.batch_size]
            loss, grads = loss_and_grad(net, X[idx], y[idx], rng)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}; lr={schedule.lr}, l2={net.l2_reg}")
            opt.step(net.params, grads)
            total += loss * idx.size
        hist.train_loss.append(total / n)
        monitored = float(np.mean((net.predict(X_val) - y_val) ** 2)) if has_val else total / n
        if not np.isfinite(monitored):
            raise TrainingError(f"non-finite monitored loss at epoch {epoch}")
        if has_val:
            hist.val_loss.append(monitored)
        net.epochs_trained = epoch
        if monitored < best:
            best, stale, hist.best_epoch = monitored, 0, epoch
            best_params = copy.deepcopy(net.params)
        else:
            stale += 1
        yield monitored
        if has_val and stale >= schedule.patience:
            hist.stopped_early = True
            break
    if has_val:
        net.params = best_params
        net.epochs_trained = hist.best_epoch


def train(net, X, y, schedule: TrainSchedule, X_val=None, y_val=None) -> TrainHistory:
    hist = TrainHistory()
    for _ in train_epochs(net, X, y, schedule, X_val, y_val, hist):
        pass
    return hist


def mlp_train(X, y, schedule: TrainSchedule | None = None, X_val=None, y_val=None, **hyper) -> MlpNet:
    schedule = schedule or TrainSchedule()
    net = MlpNet(np.asarray(X).shape[1], seed=schedule.seed, **hyper)
    train(net, X, y, schedule, X_val, y_val)
    return net


def gru_train(X, y, schedule: TrainSchedule | None = None, X_val=None, y_val=None, **hyper) -> GruNet:
    schedule = schedule or TrainSchedule()
    net = GruNet(np.asarray(X).shape[2], seed=schedule.seed, **hyper)
    train(net, X, y, schedule, X_val, y_val)
    return net


# -- attribution -----------------------------------------------------------


def integrated_gradients(grad_fn: Callable[[np.ndarray], np.ndarray], x, baseline=None, steps: int = 50) -> np.ndarray:
    """Right-Riemann integrated gradients along the straight path ``b -> x``.

    ``grad_fn`` maps a batch of inputs (leading axis) to the gradient of the
    scalar output w.r.t. each input. ``x`` is a single input of any shape.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    x = np.asarray(x, dtype=float)
    b = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=float)
    alphas = np.arange(1, steps + 1) / steps
    path = b[None] + alphas.reshape((-1,) + (1,) * x.ndim) * (x - b)[None]
    return (x - b) * grad_fn(path).mean(axis=0)


def mean_attribution(net, X, baseline=None, steps: int = 50) -> np.ndarray:
    """Integrated gradients averaged over rows; sequence inputs are summed over time."""
    X = np.asarray(X, dtype=float)
    att = np.stack([integrated_gradients(net.input_gradient, x, baseline, steps) for x in X])
    if att.ndim == 3:
        att = att.sum(axis=1)
    return att.mean(axis=0)


# -- learner wrappers ------------------------------------------------------


class _NeuralLearner(Learner):
    """Shared fitting logic; subclasses build the network."""

    def __init__(self, dropout_rate: float = 0.1, l2_reg: float = 1e-4, lr: float = 1e-3,
                 batch_size: int = 16, max_epochs: int = 200, patience: int = 30,
                 ig_steps: int = 50, seed: int = 42, **kw):
        super().__init__(**kw)
        self.dropout_rate = float(dropout_rate)
        self.l2_reg = float(l2_reg)
        self.ig_steps = int(ig_steps)
        max_epochs = int(max_epochs)
        self.schedule = TrainSchedule(max_epochs, max(1, min(int(patience), max_epochs - 1)),
                                      float(lr), int(batch_size), int(seed))
        self.explain_X = None

    def _build(self, X) -> MlpNet | GruNet:
        raise NotImplementedError

    def fit_epochs(self, X, y, X_val=None, y_val=None) -> Iterator[float]:
        """Generator form of :meth:`fit` yielding the monitored loss per epoch."""
        self.net_ = self._build(np.asarray(X, dtype=float))
        self.history_ = TrainHistory()
        self._train_X = np.asarray(X, dtype=float)
        self._fitted = True
        yield from train_epochs(self.net_, X, y, self.schedule, X_val, y_val, self.history_)

    def fit(self, X, y, X_val=None, y_val=None):
        for _ in self.fit_epochs(X, y, X_val, y_val):
            pass
        return self

    @property
    def epochs_trained(self) -> int:
        self._check_fitted()
        return self.net_.epochs_trained

    def predict(self, X):
        self._check_fitted()
        return self.net_.predict(X)

    def set_explain_data(self, X) -> None:
        self.explain_X = np.asarray(X, dtype=float)

    def importance(self):
        self._check_fitted()
        X = self._train_X if self.explain_X is None else self.explain_X
        return self._named(mean_attribution(self.net_, X, steps=self.ig_steps))


class MLP(_NeuralLearner):
    name = "MLP"

    def __init__(self, hidden_dim: int = 32, num_layers: int = 1, **kw):
        super().__init__(**kw)
        self.hidden_dim = int(hidden_dim)
        self.num_layers = int(num_layers)

    def _build(self, X):
        return MlpNet(X.shape[1], (self.hidden_dim,) * self.num_layers, self.dropout_rate,
                      self.l2_reg, self.schedule.seed)


class GRU(_NeuralLearner):
    name = "GRU"
    view = "sequence"

    def __init__(self, hidden_dim: int = 16, num_layers: int = 1, **kw):
        super().__init__(**kw)
        self.hidden_dim = int(hidden_dim)
        self.num_layers = int(num_layers)

    def _build(self, X):
        return GruNet(X.shape[2], self.hidden_dim, self.num_layers, self.dropout_rate,
                      self.l2_reg, self.schedule.seed)
