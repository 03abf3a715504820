"""Secure mini-batch SGD for small sequential networks.

The loss is half the squared error between the logits and one-hot
targets, so the output gradient is simply ``logits - targets`` and the
backward pass needs only multiplications, DReLU, DMaxpool and DDropout.
The learning rate is 2^-lr_shift (``None`` for zero) and is folded into
the truncation of the weight gradients.

``PlainModel`` repeats exactly the same integer fixed-point arithmetic in
the clear, with floor truncation in place of probabilistic truncation. It
serves as the reference run for agreement checks.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import material, nn
from .material import Dealer
from . import numtheory as nt
from .fixedpoint import FxParams, fx_encode, signed, trunc_pr
from .comparison import gez
from .sharing import mac_check, matmul_beaver, mul_beaver, open_many, share_input
from .runtime.session import SessionResult, run_networked, run_simulated
from .shares import Share, as_obj


# ---- architecture -----------------------------------------------------------------

@dataclass
class LayerSpec:
    kind: str  # linear | relu | dropout | conv2d | maxpool | flatten
    args: tuple = ()


def parse_layers(text: str) -> list[LayerSpec]:
    """Parse 'linear 16 8; relu; linear 8 2' style layer lists."""
    specs = []
    for chunk in text.replace("\n", ";").split(";"):
        parts = chunk.split()
        if not parts:
            continue
        kind = parts[0].lower()
        if kind not in {"linear", "relu", "dropout", "conv2d", "maxpool", "flatten"}:
            raise ValueError(f"unknown layer {kind!r}")
        args = tuple(float(a) if kind == "dropout" else int(a) for a in parts[1:])
        specs.append(LayerSpec(kind, args))
    return specs


@dataclass
class TrainConfig:
    layers: list[LayerSpec]
    epochs: int = 5
    batch_size: int = 20
    lr_shift: int | None = 5  # None freezes the weights (learning rate 0)
    seed: int = 0
    init_scale: float = 1.0

    def init_weights(self) -> list[tuple[np.ndarray, np.ndarray] | None]:
        """Public initial weights (float) drawn from the config seed."""
        rng = np.random.default_rng(self.seed)
        out = []
        for spec in self.layers:
            if spec.kind == "linear":
                fan_in, fan_out = spec.args
                lim = self.init_scale / np.sqrt(fan_in)
                out.append((rng.uniform(-lim, lim, (fan_in, fan_out)), np.zeros(fan_out)))
            elif spec.kind == "conv2d":
                cin, cout, k = spec.args[:3]
                lim = self.init_scale / np.sqrt(cin * k * k)
                out.append((rng.uniform(-lim, lim, (cout, cin, k, k)), np.zeros(cout)))
            else:
                out.append(None)
        return out


def batches(n_samples: int, batch_size: int):
    for start in range(0, n_samples, batch_size):
        yield np.arange(start, min(start + batch_size, n_samples))


def grad_bits(params: FxParams, batch: int) -> int:
    """Signed bit length of a batch-summed double-precision gradient."""
    return params.k + params.f + nt.ceil_log2(max(batch, 2))


def _conv_args(spec: LayerSpec) -> tuple[int, int, int, int, int]:
    cin, cout, k = spec.args[:3]
    stride = spec.args[3] if len(spec.args) > 3 else 1
    pad = spec.args[4] if len(spec.args) > 4 else 0
    return cin, cout, k, stride, pad


def _col2im(cols: np.ndarray, shape, kernel, stride: int, padding: int, t: int) -> np.ndarray:
    """Scatter-add columns back into a (C, H, W) array modulo t."""
    C, H, W = shape
    c, rows, colidx, _ = nn.im2col_indices(shape, kernel, stride, padding)
    out = np.empty((C, H + 2 * padding, W + 2 * padding), dtype=object)
    out.fill(0)
    np.add.at(out, (np.broadcast_to(c, rows.shape), rows, colidx), cols)
    out = out[:, padding:padding + H, padding:padding + W]
    return out % t if t else out


# ---- secure model ------------------------------------------------------------------

class SecureModel:
    """Weights held as shares; forward and backward run as protocols."""

    def __init__(self, party, config: TrainConfig, params: FxParams, owner: int = 0,
                 weights: list | None = None):
        """``weights`` optionally gives encoded (W, b) residues to share instead
        of the seeded initialisation; only ``owner`` needs real values."""
        self.party, self.config, self.params = party, config, params
        self.weights: list = []
        Q = params.Q
        if weights is None:
            weights = [None if w is None else (fx_encode(w[0], params), fx_encode(w[1], params))
                       for w in config.init_weights()]
        for w in weights:
            if w is None:
                self.weights.append(None)
                continue
            W, b = (as_obj(v) for v in w)
            mine = party.pid == owner
            self.weights.append([share_input(party, owner, W if mine else None, Q, W.shape),
                                 share_input(party, owner, b if mine else None, Q, b.shape)])
        self.cache: list = [None] * len(config.layers)

    def forward(self, x: Share, train: bool = True) -> Share:
        p, P = self.party, self.params
        for i, spec in enumerate(self.config.layers):
            if spec.kind == "linear":
                W, b = self.weights[i]
                self.cache[i] = x
                x = nn.linear_forward(p, x, W, P) + b
            elif spec.kind == "relu":
                x, s = nn.relu(p, x, P)
                self.cache[i] = s
            elif spec.kind == "dropout":
                if train and spec.args[0] > 0:
                    mask = nn.dropout_mask(p, x.shape, spec.args[0], P)
                    x = nn.dropout(p, x, mask, P)
                    self.cache[i] = mask
                else:
                    self.cache[i] = None
            elif spec.kind == "conv2d":
                W, b = self.weights[i]
                _, _, _, stride, pad = _conv_args(spec)
                self.cache[i] = x
                y = nn.conv2d_forward(p, x, W, P, stride, pad)
                x = y + Share(y.modulus, b.values[None, :, None, None],
                              None if b.macs is None else b.macs[None, :, None, None])
            elif spec.kind == "maxpool":
                (size,) = spec.args
                win = nn.pool_windows(x, size)
                x, trace = nn.maxpool(p, win, P)
                self.cache[i] = (trace, size)
            elif spec.kind == "flatten":
                self.cache[i] = x.shape
                x = x.reshape(x.shape[0], -1)
        return x

    def backward(self, g: Share, batch: int) -> None:
        p, P = self.party, self.params
        shift = self.config.lr_shift
        gb = grad_bits(P, batch)
        for i in range(len(self.config.layers) - 1, -1, -1):
            spec = self.config.layers[i]
            if spec.kind == "linear":
                W, b = self.weights[i]
                x = self.cache[i]
                with p.scope("linear_backward"):
                    dW = matmul_beaver(p, x.T, g, material.matrix_triple(
                        p, g.modulus, (x.shape[1], x.shape[0], g.shape[1])))
                    gx = None
                    if i > 0:
                        gx = matmul_beaver(p, g, W.T, material.matrix_triple(
                            p, g.modulus, (g.shape[0], g.shape[1], W.shape[0])))
                with p.scope("rescale"):
                    if shift is not None:
                        dW = trunc_pr(p, dW, P.f + shift, gb)
                        db = trunc_pr(p, g.sum(axis=0), shift, gb - P.f)
                        self.weights[i] = [W - dW, b - db]
                    if gx is not None:
                        gx = trunc_pr(p, gx, P.f, P.k + P.f)
                g = gx
            elif spec.kind == "relu":
                g = nn.drelu(p, g, self.cache[i])
            elif spec.kind == "dropout":
                if self.cache[i] is not None:
                    g = nn.ddropout(p, g, self.cache[i], P)
            elif spec.kind == "conv2d":
                g = self._conv_backward(i, spec, g, gb, shift, need_input=i > 0)
            elif spec.kind == "maxpool":
                trace, size = self.cache[i]
                ind = nn.dmaxpool(p, trace)
                with p.scope("maxpool_backward"):
                    gw = Share(g.modulus, np.broadcast_to(g.values[..., None], ind.shape).copy(),
                               None if g.macs is None else
                               np.broadcast_to(g.macs[..., None], ind.shape).copy())
                    g = nn.unpool_windows(mul_beaver(p, gw, ind, material.triples(
                        p, g.modulus, ind.shape)), size)
            elif spec.kind == "flatten":
                g = g.reshape(self.cache[i])
            if g is None:
                break

    def _conv_backward(self, i, spec, g: Share, gb: int, shift: int, need_input: bool):
        p, P = self.party, self.params
        W, b = self.weights[i]
        x = self.cache[i]
        cin, cout, k, stride, pad = _conv_args(spec)
        B = x.shape[0]
        t = x.modulus
        cols_v, cols_m = [], []
        for bi in range(B):
            cv, _ = nn.im2col(x.values[bi], (k, k), stride, pad)
            cols_v.append(cv)
            if x.macs is not None:
                cols_m.append(nn.im2col(x.macs[bi], (k, k), stride, pad)[0])
        cols = Share(t, np.concatenate(cols_v, axis=1),
                     None if x.macs is None else np.concatenate(cols_m, axis=1))
        Ho, Wo = g.shape[2], g.shape[3]
        gmat = g.transpose(1, 0, 2, 3).reshape(cout, B * Ho * Wo)
        Wmat = W.reshape(cout, cin * k * k)
        with p.scope("conv2d_backward"):
            dW = matmul_beaver(p, gmat, cols.T, material.matrix_triple(
                p, t, (cout, B * Ho * Wo, cin * k * k)))
            gcols = None
            if need_input:
                gcols = matmul_beaver(p, Wmat.T, gmat, material.matrix_triple(
                    p, t, (cin * k * k, cout, B * Ho * Wo)))
        with p.scope("rescale"):
            if shift is not None:
                dW = trunc_pr(p, dW, P.f + shift, gb)
                db = trunc_pr(p, gmat.sum(axis=1), shift, gb - P.f)
                self.weights[i] = [W - dW.reshape(W.shape), b - db]
            if gcols is not None:
                gcols = trunc_pr(p, gcols, P.f, P.k + P.f)
        if gcols is None:
            return None
        L = Ho * Wo
        vals = np.stack([_col2im(gcols.values[:, bi * L:(bi + 1) * L], x.shape[1:], (k, k),
                                 stride, pad, t) for bi in range(B)])
        macs = None
        if gcols.macs is not None:
            macs = np.stack([_col2im(gcols.macs[:, bi * L:(bi + 1) * L], x.shape[1:], (k, k),
                                     stride, pad, t) for bi in range(B)])
        return Share(t, vals, macs)

    def predict(self, x: Share) -> np.ndarray:
        """Open predicted classes (argmax of the logits) only."""
        p, P = self.party, self.params
        logits = self.forward(x, train=False)
        with p.scope("predict"):
            if logits.shape[1] == 2:
                bit = gez(p, logits[:, 1] - logits[:, 0], P.k + 1)
                (opened,) = open_many(p, [bit])
                return np.array([int(v) for v in opened])
            best, trace = nn.maxpool(p, logits, P)
            ind = nn.dmaxpool(p, trace)
            (opened,) = open_many(p, [ind])
        return np.array([int(np.argmax([int(v) for v in row])) for row in opened])

    def open_weights(self) -> list:
        out = []
        for w in self.weights:
            if w is None:
                out.append(None)
            else:
                W, b = open_many(self.party, [w[0], w[1]])
                out.append((W, b))
        return out


def train_secure(party, X: np.ndarray | None, Y: np.ndarray | None, n_samples: int,
                 n_features, n_classes: int, config: TrainConfig, params: FxParams,
                 owner: int = 0, log=None) -> tuple[SecureModel, list[dict]]:
    """Run SGD; X (float features) and Y (int labels) are known to ``owner`` only.

    Returns the model and per-epoch metric records. Labels are used in the
    clear only by the owner-side evaluation harness, which compares them
    against opened predictions.
    """
    Q = params.Q
    feat_shape = (n_features,) if isinstance(n_features, int) else tuple(n_features)
    xs = fx_encode(X, params) if party.pid == owner else None
    ys = None
    if party.pid == owner:
        ys = fx_encode(np.eye(n_classes)[np.asarray(Y)], params)
    Xs = share_input(party, owner, xs, Q, (n_samples,) + feat_shape)
    Ys = share_input(party, owner, ys, Q, (n_samples, n_classes))
    model = SecureModel(party, config, params, owner)
    metrics = []
    start = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        loss = 0
        for idx in batches(n_samples, config.batch_size):
            out = model.forward(Xs[idx])
            g = out - Ys[idx]
            with party.scope("loss"):
                sq = mul_beaver(party, g, g, material.triples(party, Q, g.shape)).sum()
                (opened,) = open_many(party, [sq])
            loss += nt.centered(int(opened), Q) / 2.0 ** (2 * params.f)
            model.backward(g, len(idx))
        mac_check(party)
        preds = model.predict(Xs)
        mac_check(party)
        rec = {"epoch": epoch, "loss": loss / n_samples,
               "rounds": party.counters.rounds(),
               "bytes": party.counters.tallies["total"].bytes_sent,
               "seconds": round(time.perf_counter() - start, 3),
               "predictions": preds.tolist()}
        if Y is not None:
            rec["accuracy"] = float(np.mean(preds == np.asarray(Y)))
        metrics.append(rec)
        if log is not None:
            log(rec)
    return model, metrics


# ---- plaintext fixed-point reference ---------------------------------------------------

def _floor_shift(v: np.ndarray, m: int) -> np.ndarray:
    return np.vectorize(lambda z: int(z) >> m, otypes=[object])(v) if m else v


class PlainModel:
    """The secure model's integer arithmetic, evaluated in the clear."""

    def __init__(self, config: TrainConfig, params: FxParams):
        self.config, self.params = config, params
        self.weights = []
        for w in config.init_weights():
            if w is None:
                self.weights.append(None)
            else:
                self.weights.append([signed(fx_encode(w[0], params), params.Q),
                                     signed(fx_encode(w[1], params), params.Q)])
        self.cache: list = [None] * len(config.layers)

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        f = self.params.f
        for i, spec in enumerate(self.config.layers):
            if spec.kind == "linear":
                W, b = self.weights[i]
                self.cache[i] = x
                x = _floor_shift(np.dot(x, W), f) + b
            elif spec.kind == "relu":
                s = np.vectorize(lambda z: 1 if z >= 0 else 0, otypes=[object])(x)
                self.cache[i] = s
                x = x * s
            elif spec.kind == "dropout":
                self.cache[i] = None
            elif spec.kind == "conv2d":
                W, b = self.weights[i]
                cin, cout, k, stride, pad = _conv_args(spec)
                self.cache[i] = x
                outs = []
                for bi in range(x.shape[0]):
                    cols, (Ho, Wo) = nn.im2col(x[bi], (k, k), stride, pad)
                    y = _floor_shift(np.dot(W.reshape(cout, -1), cols), f)
                    outs.append(y.reshape(cout, Ho, Wo) + b[:, None, None])
                x = np.stack(outs)
            elif spec.kind == "maxpool":
                (size,) = spec.args
                B, C, H, W_ = x.shape
                win = x.reshape(B, C, H // size, size, W_ // size, size).transpose(
                    0, 1, 2, 4, 3, 5).reshape(B, C, H // size, W_ // size, size * size)
                arg, best = _tournament_arg(win)
                self.cache[i] = (arg, size, x.shape)
                x = best
            elif spec.kind == "flatten":
                self.cache[i] = x.shape
                x = x.reshape(x.shape[0], -1)
        return x

    def backward(self, g: np.ndarray, batch: int) -> None:
        P = self.params
        shift = self.config.lr_shift
        for i in range(len(self.config.layers) - 1, -1, -1):
            spec = self.config.layers[i]
            if spec.kind == "linear":
                W, b = self.weights[i]
                x = self.cache[i]
                gx = _floor_shift(np.dot(g, W.T), P.f) if i > 0 else None
                if shift is not None:
                    dW = _floor_shift(np.dot(x.T, g), P.f + shift)
                    db = _floor_shift(g.sum(axis=0), shift)
                    self.weights[i] = [W - dW, b - db]
                g = gx
            elif spec.kind == "relu":
                g = g * self.cache[i]
            elif spec.kind == "conv2d":
                W, b = self.weights[i]
                x = self.cache[i]
                cin, cout, k, stride, pad = _conv_args(spec)
                B = x.shape[0]
                cols = np.concatenate([nn.im2col(x[bi], (k, k), stride, pad)[0]
                                       for bi in range(B)], axis=1)
                Ho, Wo = g.shape[2], g.shape[3]
                gmat = g.transpose(1, 0, 2, 3).reshape(cout, -1)
                gx = None
                if i > 0:
                    gcols = _floor_shift(np.dot(W.reshape(cout, -1).T, gmat), P.f)
                    L = Ho * Wo
                    gx = np.stack([_col2im(gcols[:, bi * L:(bi + 1) * L], x.shape[1:], (k, k),
                                           stride, pad, 0) for bi in range(B)])
                if shift is not None:
                    dW = _floor_shift(np.dot(gmat, cols.T), P.f + shift)
                    db = _floor_shift(gmat.sum(axis=1), shift)
                    self.weights[i] = [W - dW.reshape(W.shape), b - db]
                g = gx
            elif spec.kind == "maxpool":
                arg, size, shape = self.cache[i]
                B, C, H, W_ = shape
                win = np.zeros(arg.shape + (size * size,), dtype=object)
                np.put_along_axis(win, arg[..., None], g[..., None], axis=-1)
                g = win.reshape(B, C, H // size, W_ // size, size, size).transpose(
                    0, 1, 2, 4, 3, 5).reshape(shape)
            elif spec.kind == "flatten":
                g = g.reshape(self.cache[i])
            if g is None:
                break

    def predict(self, x: np.ndarray) -> np.ndarray:
        logits = self.forward(x, train=False)
        if logits.shape[1] == 2:
            return np.array([1 if int(r[1]) - int(r[0]) >= 0 else 0 for r in logits])
        return _tournament_arg(logits)[0]


def _tournament_arg(win: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """argmax/max by the secure tournament's pairing (left wins ties)."""
    s = win.shape[-1]
    width = 1
    while width < s:
        width *= 2
    idx = np.broadcast_to(np.arange(width), win.shape[:-1] + (width,)).copy()
    vals = np.empty(win.shape[:-1] + (width,), dtype=object)
    vals.fill(-(2**200))
    vals[..., :s] = win
    while vals.shape[-1] > 1:
        left, right = vals[..., 0::2], vals[..., 1::2]
        take_left = np.vectorize(lambda a, b: a - b >= 0, otypes=[bool])(left, right)
        vals = np.where(take_left, left, right)
        idx = np.where(take_left, idx[..., 0::2], idx[..., 1::2])
    return idx[..., 0], vals[..., 0]


def train_plain(X: np.ndarray, Y: np.ndarray, n_classes: int, config: TrainConfig,
                params: FxParams) -> tuple[PlainModel, list[dict]]:
    xs = signed(fx_encode(X, params), params.Q)
    ys = signed(fx_encode(np.eye(n_classes)[np.asarray(Y)], params), params.Q)
    model = PlainModel(config, params)
    metrics = []
    for epoch in range(1, config.epochs + 1):
        loss = 0
        for idx in batches(len(X), config.batch_size):
            out = model.forward(xs[idx])
            g = out - ys[idx]
            loss += int((g * g).sum()) / 2.0 ** (2 * params.f)
            model.backward(g, len(idx))
        preds = model.predict(xs)
        metrics.append({"epoch": epoch, "loss": loss / len(X), "predictions": preds.tolist(),
                        "accuracy": float(np.mean(preds == np.asarray(Y)))})
    return model, metrics


def separable_dataset(n_samples: int = 200, n_features: int = 16, seed: int = 0,
                      margin: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Two linearly separable classes with features in [-1, 1]."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=n_features)
    w /= np.linalg.norm(w)
    X, Y = [], []
    while len(X) < n_samples:
        x = rng.uniform(-1, 1, n_features)
        score = float(x @ w)
        if abs(score) < margin:
            continue
        X.append(x)
        Y.append(int(score > 0))
    return np.array(X), np.array(Y)


# ---- sessions --------------------------------------------------------------------

def training_job(X, Y, n_classes: int, config: TrainConfig, params: FxParams, owner: int = 0,
                 log=None):
    """The per-party training job; returns (metrics, opened weights)."""
    n_samples = len(X)
    feat = X.shape[1:]

    def job(party):
        mine = party.pid == owner
        model, metrics = train_secure(party, X if mine else None, Y if mine else None,
                                      n_samples, feat, n_classes, config, params, owner,
                                      log=log if mine else None)
        weights = model.open_weights()
        mac_check(party)
        return metrics, weights

    return job


def train_session(X, Y, n_classes: int, config: TrainConfig, params: FxParams, *, n: int = 3,
                  seed=0, transport: str = "sim", dealer: Dealer | None = None, sources=None,
                  mac_keys=None, latency: float = 0.0, log=None
                  ) -> tuple[SessionResult, list[dict], list]:
    """Train with ``n`` parties; party 0 owns the data.

    Returns the session, party 0's metrics, and the opened weight residues.
    """
    if dealer is None and sources is None:
        dealer = Dealer(n, seed=("train", seed), mac_modulus=params.Q)
    runner = run_simulated if transport == "sim" else run_networked
    res = runner(n, training_job(np.asarray(X), np.asarray(Y), n_classes, config, params,
                                 log=log),
                 seed=seed, dealer=dealer, sources=sources, mac_keys=mac_keys,
                 mac_modulus=params.Q, kappa=params.kappa, latency=latency)
    metrics, weights = res.outputs[0]
    return res, metrics, weights


def predict_session(X, weights: list, config: TrainConfig, params: FxParams, *, n: int = 3,
                    seed=0, dealer: Dealer | None = None) -> np.ndarray:
    """Secure inference: party 0 shares the model and the inputs, predictions are opened."""
    X = np.asarray(X, dtype=float)
    if dealer is None:
        dealer = Dealer(n, seed=("predict", seed), mac_modulus=params.Q)

    def job(party):
        mine = party.pid == 0
        model = SecureModel(party, config, params, 0, weights)
        enc = fx_encode(X, params) if mine else None
        xs = share_input(party, 0, enc, params.Q, X.shape)
        preds = model.predict(xs)
        mac_check(party)
        return preds

    res = run_simulated(n, job, seed=seed, dealer=dealer, mac_modulus=params.Q,
                        kappa=params.kappa)
    return res.outputs[0]
