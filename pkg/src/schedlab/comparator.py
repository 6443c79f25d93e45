"""Shared-weight antisymmetric comparator network (cmpNN with four hidden layers).

Every layer owns two weight blocks and one bias.  With inputs ``(x, y)`` a
layer computes::

    h_x = act(W1 x + W2 y + b)
    h_y = act(W1 y + W2 x + b)

and the output layer applies the same tying with a single unit, giving logits
``(o_x, o_y)`` and ``softmax -> (P[x > y], P[y > x])``.  Swapping the inputs
swaps every pair of activations, so ``f(x, x) = (0.5, 0.5)`` and
``f(y, x)`` is the swap of ``f(x, y)`` by construction.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from typing import BinaryIO, Callable, Sequence, TypeVar

import numpy as np

MODEL_HEADER = "schedlab-cmpnet v1"

T = TypeVar("T")


def first_layer_width(x_dim: int) -> int:
    """``2 ** (ceil(lg x_dim) + 6)``."""
    if x_dim < 1:
        raise ValueError("x_dim must be positive")
    return 2 ** ((x_dim - 1).bit_length() + 6)


def layer_widths(x_dim: int, depth: int = 4, cap: int | None = None) -> list[int]:
    h1 = first_layer_width(x_dim)
    if cap is not None:
        h1 = min(h1, cap)
    return [max(h1 >> k, 1) for k in range(depth)]


def default_activations(depth: int) -> list[str]:
    return ["tanh" if k < 2 else "relu" for k in range(depth)]


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 40
    init_scale: float = 1.0
    val_split: float = 0.2
    patience: int = 6
    seed: int = 0
    optimizer: str = "momentum"
    max_seconds: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("learning_rate and batch_size must be positive, epochs non-negative")
        if not 0.0 <= self.val_split < 1.0:
            raise ValueError("val_split must lie in [0, 1)")
        if self.optimizer not in ("momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    initial_val_loss: float = math.nan
    final_val_loss: float = math.nan
    val_accuracy: float = math.nan
    seconds: float = 0.0


class ComparatorNet:
    def __init__(
        self,
        x_dim: int,
        widths: Sequence[int] | None = None,
        activations: Sequence[str] | None = None,
        seed: int = 0,
        init_scale: float = 1.0,
        width_cap: int | None = 512,
        depth: int = 4,
    ):
        self.x_dim = int(x_dim)
        self.widths = list(widths) if widths is not None else layer_widths(x_dim, depth, width_cap)
        self.activations = list(activations) if activations is not None else default_activations(len(self.widths))
        if len(self.activations) != len(self.widths):
            raise ValueError("one activation per hidden layer")
        if any(a not in ("tanh", "relu") for a in self.activations):
            raise ValueError(f"unsupported activation in {self.activations}")
        self.meta: dict[str, str] = {}
        self.feature_hash = ""
        rng = np.random.default_rng(seed)
        dims = [self.x_dim] + self.widths + [1]
        self.layers: list[dict[str, np.ndarray]] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = init_scale / math.sqrt(2 * fan_in)
            self.layers.append(
                {
                    "W1": rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                    "W2": rng.uniform(-bound, bound, size=(fan_out, fan_in)),
                    "b": np.zeros(fan_out),
                }
            )

    # parameters -----------------------------------------------------------

    def params(self) -> list[np.ndarray]:
        return [layer[k] for layer in self.layers for k in ("W1", "W2", "b")]

    def num_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "ComparatorNet":
        other = ComparatorNet.__new__(ComparatorNet)
        other.x_dim = self.x_dim
        other.widths = list(self.widths)
        other.activations = list(self.activations)
        other.meta = dict(self.meta)
        other.feature_hash = self.feature_hash
        other.layers = [{k: v.copy() for k, v in layer.items()} for layer in self.layers]
        return other

    # forward / backward ---------------------------------------------------

    def _check(self, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.shape != Y.shape or X.shape[-1] != self.x_dim:
            raise ValueError(f"expected inputs of dimension {self.x_dim}, got {X.shape} and {Y.shape}")
        return np.atleast_2d(X), np.atleast_2d(Y)

    def logits(self, X: np.ndarray, Y: np.ndarray, keep: list | None = None) -> np.ndarray:
        hx, hy = self._check(X, Y)
        n_hidden = len(self.widths)
        for k, layer in enumerate(self.layers):
            W1, W2, b = layer["W1"], layer["W2"], layer["b"]
            zx = hx @ W1.T + hy @ W2.T + b
            zy = hy @ W1.T + hx @ W2.T + b
            if k < n_hidden:
                if self.activations[k] == "tanh":
                    ax, ay = np.tanh(zx), np.tanh(zy)
                else:
                    ax, ay = np.maximum(zx, 0.0), np.maximum(zy, 0.0)
            else:
                ax, ay = zx, zy
            if keep is not None:
                keep.append((hx, hy, zx, zy, ax, ay))
            hx, hy = ax, ay
        return np.concatenate([hx, hy], axis=1)

    def predict(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Rows of ``(P[x > y], P[y > x])``."""
        return _softmax(self.logits(X, Y))

    def forward(self, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
        p = self.predict(x, y)[0]
        return float(p[0]), float(p[1])

    def loss_and_grads(self, X, Y, labels) -> tuple[float, list[np.ndarray]]:
        """Mean categorical cross-entropy and its gradient per parameter.

        ``labels[k] = 0`` means ``X[k]`` should win, 1 means ``Y[k]`` should.
        """
        keep: list = []
        logits = self.logits(X, Y, keep)
        labels = np.asarray(labels, dtype=np.int64)
        p = _softmax(logits)
        B = logits.shape[0]
        loss = float(-np.mean(np.log(np.clip(p[np.arange(B), labels], 1e-300, None))))
        d = p.copy()
        d[np.arange(B), labels] -= 1.0
        d /= B
        dzx, dzy = d[:, :1], d[:, 1:]
        grads: list[np.ndarray] = []
        n_hidden = len(self.widths)
        for k in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[k]
            hx, hy, zx, zy, ax, ay = keep[k]
            if k < n_hidden:
                if self.activations[k] == "tanh":
                    dzx = dzx * (1.0 - ax * ax)
                    dzy = dzy * (1.0 - ay * ay)
                else:
                    dzx = dzx * (zx > 0)
                    dzy = dzy * (zy > 0)
            W1, W2 = layer["W1"], layer["W2"]
            gW1 = dzx.T @ hx + dzy.T @ hy
            gW2 = dzx.T @ hy + dzy.T @ hx
            gb = dzx.sum(axis=0) + dzy.sum(axis=0)
            grads[:0] = [gW1, gW2, gb]
            if k > 0:
                dhx = dzx @ W1 + dzy @ W2
                dhy = dzy @ W1 + dzx @ W2
                dzx, dzy = dhx, dhy
        return loss, grads

    def loss(self, X, Y, labels) -> float:
        p = self.predict(X, Y)
        labels = np.asarray(labels, dtype=np.int64)
        return float(-np.mean(np.log(np.clip(p[np.arange(len(labels)), labels], 1e-300, None))))

    def accuracy(self, X, Y, labels) -> float:
        p = self.predict(X, Y)
        return float(np.mean((p[:, 1] > p[:, 0]).astype(np.int64) == np.asarray(labels)))

    # persistence ----------------------------------------------------------

    def save(self, fh: BinaryIO, binary: bool = False) -> None:
        flat = np.concatenate([p.ravel() for p in self.params()])
        lines = [
            MODEL_HEADER,
            f"x_dim {self.x_dim}",
            f"widths {' '.join(map(str, self.widths))}",
            f"activations {' '.join(self.activations)}",
            f"features {self.feature_hash or '-'}",
        ]
        for key in sorted(self.meta):
            value = str(self.meta[key]).replace("\n", " ")
            lines.append(f"meta {key} {value}")
        lines.append(f"params {flat.size} {'binary' if binary else 'text'}")
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        if binary:
            fh.write(flat.astype("<f8").tobytes())
        else:
            fh.write(("\n".join(repr(float(x)) for x in flat) + "\n").encode("ascii"))

    def save_path(self, path, binary: bool = False) -> None:
        with open(path, "wb") as fh:
            self.save(fh, binary=binary)

    @classmethod
    def load(cls, fh: BinaryIO) -> "ComparatorNet":
        header = fh.readline().decode("ascii").strip()
        if header != MODEL_HEADER:
            raise ValueError(f"not a comparator model (header {header!r})")
        fields: dict[str, str] = {}
        meta: dict[str, str] = {}
        while True:
            line = fh.readline().decode("ascii")
            if not line:
                raise ValueError("truncated model file")
            key, _, rest = line.rstrip("\n").partition(" ")
            if key == "meta":
                mk, _, mv = rest.partition(" ")
                meta[mk] = mv
                continue
            fields[key] = rest
            if key == "params":
                break
        count_s, encoding = fields["params"].split()
        count = int(count_s)
        net = cls(int(fields["x_dim"]), [int(w) for w in fields["widths"].split()], fields["activations"].split())
        net.feature_hash = "" if fields.get("features", "-") == "-" else fields["features"]
        net.meta = meta
        if encoding == "binary":
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError("truncated binary parameter block")
            flat = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        elif encoding == "text":
            flat = np.array([float(fh.readline()) for _ in range(count)])
        else:
            raise ValueError(f"unknown parameter encoding {encoding!r}")
        if flat.size != net.num_params():
            raise ValueError(f"parameter count {flat.size} does not match architecture ({net.num_params()})")
        offset = 0
        for p in net.params():
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        return net

    @classmethod
    def load_path(cls, path) -> "ComparatorNet":
        with open(path, "rb") as fh:
            return cls.load(fh)

    def to_bytes(self, binary: bool = True) -> bytes:
        buf = io.BytesIO()
        self.save(buf, binary=binary)
        return buf.getvalue()


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train(net: ComparatorNet, X, Y, labels, cfg: TrainConfig | None = None) -> TrainResult:
    """Mini-batch training with early stopping on validation cross-entropy.

    The parameters returned are those of the best validation epoch (epoch 0
    being the untrained net), so validation loss never ends above its initial
    value.  Zero epochs leave ``net`` untouched.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("no training samples")
    net._check(X[:1], Y[:1])
    result = TrainResult()
    if cfg.epochs == 0:
        return result

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(X))
    n_val = int(round(cfg.val_split * len(X)))
    if cfg.val_split > 0 and len(X) > 1:
        n_val = min(max(n_val, 1), len(X) - 1)
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    Xv, Yv, Lv = X[val_idx], Y[val_idx], labels[val_idx]
    Xt, Yt, Lt = X[tr_idx], Y[tr_idx], labels[tr_idx]

    def val_metrics():
        if n_val == 0:
            return net.loss(Xt, Yt, Lt), net.accuracy(Xt, Yt, Lt)
        return net.loss(Xv, Yv, Lv), net.accuracy(Xv, Yv, Lv)

    start = time.perf_counter()
    v_loss, v_acc = val_metrics()
    result.initial_val_loss = v_loss
    result.history.append({"epoch": 0, "train_loss": math.nan, "val_loss": v_loss, "val_accuracy": v_acc})
    best = (v_loss, 0, [p.copy() for p in net.params()], v_acc)
    state = [np.zeros_like(p) for p in net.params()]
    state2 = [np.zeros_like(p) for p in net.params()]
    step = 0
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(Xt))
        # pairs are presented in a random orientation; the net is antisymmetric
        flip = rng.random(len(Xt)) < 0.5
        losses = []
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            f = flip[idx]
            bx = np.where(f[:, None], Yt[idx], Xt[idx])
            by = np.where(f[:, None], Xt[idx], Yt[idx])
            bl = np.where(f, 1 - Lt[idx], Lt[idx])
            loss, grads = net.loss_and_grads(bx, by, bl)
            if not math.isfinite(loss):
                norms = ", ".join(f"{np.linalg.norm(p):.3g}" for p in net.params())
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}; lr={cfg.learning_rate}; parameter norms [{norms}]"
                )
            losses.append(loss)
            step += 1
            for p, g, m1, m2 in zip(net.params(), grads, state, state2):
                if cfg.optimizer == "momentum":
                    m1 *= cfg.momentum
                    m1 -= cfg.learning_rate * g
                    p += m1
                else:
                    m1 *= 0.9
                    m1 += 0.1 * g
                    m2 *= 0.999
                    m2 += 0.001 * g * g
                    mhat = m1 / (1 - 0.9**step)
                    vhat = m2 / (1 - 0.999**step)
                    p -= cfg.learning_rate * mhat / (np.sqrt(vhat) + 1e-8)
        v_loss, v_acc = val_metrics()
        if not math.isfinite(v_loss):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}; lr={cfg.learning_rate}")
        result.history.append(
            {"epoch": epoch, "train_loss": float(np.mean(losses)), "val_loss": v_loss, "val_accuracy": v_acc}
        )
        if v_loss < best[0]:
            best = (v_loss, epoch, [p.copy() for p in net.params()], v_acc)
            stale = 0
        else:
            stale += 1
        if cfg.patience and stale >= cfg.patience:
            break
        if cfg.max_seconds is not None and time.perf_counter() - start > cfg.max_seconds:
            break
    for p, saved in zip(net.params(), best[2]):
        p[...] = saved
    result.best_epoch = best[1]
    result.final_val_loss = best[0]
    result.val_accuracy = best[3]
    result.seconds = time.perf_counter() - start
    return result


def numeric_gradients(net: ComparatorNet, X, Y, labels, eps: float = 1e-5) -> list[np.ndarray]:
    out = []
    for p in net.params():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = net.loss(X, Y, labels)
            flat[k] = orig - eps
            down = net.loss(X, Y, labels)
            flat[k] = orig
            gflat[k] = (up - down) / (2 * eps)
        out.append(g)
    return out


def grad_check(net: ComparatorNet, X, Y, labels, eps: float = 1e-5, floor: float = 1e-6) -> float:
    """Max relative error between backprop and central differences.

    Relative error is ``|a - n| / max(|a| + |n|, floor)`` per parameter.
    """
    _, analytic = net.loss_and_grads(X, Y, labels)
    numeric = numeric_gradients(net, X, Y, labels, eps)
    worst = 0.0
    for a, n in zip(analytic, numeric):
        rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)
        worst = max(worst, float(rel.max(initial=0.0)))
    return worst


def rank_top(candidates: Sequence[T], prefer: Callable[[T, T], float]) -> T:
    """One bubble pass: the champion is replaced only when a challenger wins with p > 0.5."""
    if not candidates:
        raise ValueError("rank_top needs at least one candidate")
    champion = candidates[0]
    for challenger in candidates[1:]:
        if prefer(challenger, champion) > 0.5:
            champion = challenger
    return champion
