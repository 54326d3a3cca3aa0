"""Reduced residual convolutional network, implemented directly on numpy.

Architecture: stem 3x3 convolution (stride 2) -> 2x average pool ->
three residual blocks (conv 3x3, ReLU, conv 3x3, identity shortcut,
2x average pool) -> global average pool -> dense 4-way -> softmax.
All weights are float64; everything is deterministic for a fixed seed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

INPUT_SIZE = 128
N_CLASSES = 4
MAGIC = b"MGRD01"


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _im2col(x: np.ndarray, k: int, stride: int, pad: int):
    """(N, C, H, W) -> (N, C*k*k, OH*OW) patch matrix."""
    n, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, k, k, oh, ow), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = xp[:, :, i:i + stride * oh:stride,
                                  j:j + stride * ow:stride]
    return cols.reshape(n, c * k * k, oh * ow), oh, ow


def _col2im(dcols: np.ndarray, x_shape, k: int, stride: int, pad: int):
    n, c, h, w = x_shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    dcols = dcols.reshape(n, c, k, k, oh, ow)
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += \
                dcols[:, :, i, j]
    if pad:
        return dxp[:, :, pad:-pad, pad:-pad]
    return dxp


class Conv2d:
    def __init__(self, c_in: int, c_out: int, k: int = 3, stride: int = 1,
                 pad: int = 1, rng=None):
        scale = np.sqrt(2.0 / (c_in * k * k))  # Kaiming fan-in
        rng = rng or np.random.default_rng(0)
        self.w = rng.normal(0.0, scale, size=(c_out, c_in * k * k))
        self.b = np.zeros(c_out)
        self.k, self.stride, self.pad = k, stride, pad

    @property
    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        cols, oh, ow = _im2col(x, self.k, self.stride, self.pad)
        out = np.matmul(self.w, cols)
        out += self.b[None, :, None]
        self._cache = (x.shape, cols)
        return out.reshape(x.shape[0], -1, oh, ow)

    def backward(self, dout):
        x_shape, cols = self._cache
        n = dout.shape[0]
        dflat = dout.reshape(n, dout.shape[1], -1)
        dw = np.matmul(dflat, cols.transpose(0, 2, 1)).sum(axis=0)
        db = dflat.sum(axis=(0, 2))
        dcols = np.matmul(self.w.T, dflat)
        dx = _col2im(dcols, x_shape, self.k, self.stride, self.pad)
        return dx, [dw, db]


class ReLU:
    params: list = []

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask, []


class AvgPool2:
    """2x2 average pool, stride 2; odd trailing rows/cols are dropped."""
    params: list = []

    def forward(self, x):
        n, c, h, w = x.shape
        self._shape = x.shape
        x = x[:, :, :h - h % 2, :w - w % 2]
        return x.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(self, dout):
        n, c, h, w = self._shape
        dx = np.zeros(self._shape, dtype=dout.dtype)
        up = np.repeat(np.repeat(dout, 2, axis=2), 2, axis=3) / 4.0
        dx[:, :, :2 * dout.shape[2], :2 * dout.shape[3]] = up
        return dx, []


class ResidualBlock:
    """x + conv2(relu(conv1(x))), then a 2x downsample."""

    def __init__(self, channels: int, rng):
        self.conv1 = Conv2d(channels, channels, rng=rng)
        self.relu = ReLU()
        self.conv2 = Conv2d(channels, channels, rng=rng)
        self.pool = AvgPool2()

    @property
    def params(self):
        return self.conv1.params + self.conv2.params

    def forward(self, x):
        h = self.conv2.forward(self.relu.forward(self.conv1.forward(x)))
        return self.pool.forward(x + h)

    def backward(self, dout):
        dsum, _ = self.pool.backward(dout)
        dh, g2 = self.conv2.backward(dsum)
        dh, _ = self.relu.backward(dh)
        dx, g1 = self.conv1.backward(dh)
        return dsum + dx, g1 + g2


class Dense:
    def __init__(self, n_in: int, n_out: int, rng):
        self.w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_out, n_in))
        self.b = np.zeros(n_out)

    @property
    def params(self):
        return [self.w, self.b]

    def forward(self, x):
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, dout):
        dw = dout.T @ self._x
        db = dout.sum(axis=0)
        return dout @ self.w, [dw, db]


class CnnModel:
    """Stem conv -> 3 residual blocks -> global average pool -> dense softmax."""

    def __init__(self, channels: int = 16, n_blocks: int = 3,
                 input_size: int = INPUT_SIZE, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.input_size = input_size
        self.channels = channels
        self.stem = Conv2d(3, channels, stride=2, rng=rng)
        self.stem_relu = ReLU()
        self.stem_pool = AvgPool2()
        self.blocks = [ResidualBlock(channels, rng) for _ in range(n_blocks)]
        self.head = Dense(channels, N_CLASSES, rng)

    # -- parameter plumbing -------------------------------------------------
    @property
    def layers_with_params(self):
        return [self.stem] + [b.conv1 for b in self.blocks] + \
               [b.conv2 for b in self.blocks] + [self.head]

    def get_params(self) -> list[np.ndarray]:
        out = []
        out += self.stem.params
        for b in self.blocks:
            out += b.params
        out += self.head.params
        return out

    def set_params(self, params) -> None:
        for dst, src in zip(self.get_params(), params):
            dst[...] = src

    def n_params(self) -> int:
        return sum(p.size for p in self.get_params())

    # -- forward / backward -------------------------------------------------
    def logits(self, x: np.ndarray) -> np.ndarray:
        """x: (N, 3, H, W) in [0, 1]."""
        h = self.stem_pool.forward(self.stem_relu.forward(self.stem.forward(x)))
        for b in self.blocks:
            h = b.forward(h)
        self._gap_shape = h.shape
        pooled = h.mean(axis=(2, 3))
        return self.head.forward(pooled)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        """Mean cross-entropy over the batch and gradients in get_params order."""
        n = x.shape[0]
        probs = softmax(self.logits(x))
        loss = float(-np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None))))
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n

        dpooled, ghead = self.head.backward(dlogits)
        _, c, hh, ww = self._gap_shape
        dh = np.broadcast_to(dpooled[:, :, None, None] / (hh * ww),
                             self._gap_shape).copy()
        grads_blocks = []
        for b in reversed(self.blocks):
            dh, g = b.backward(dh)
            grads_blocks = g + grads_blocks
        dh, _ = self.stem_pool.backward(dh)
        dh, _ = self.stem_relu.backward(dh)
        _, gstem = self.stem.backward(dh)
        return loss, gstem + grads_blocks + ghead


def preprocess(pixels: np.ndarray, size: int = INPUT_SIZE) -> np.ndarray:
    """(H, W, 3) uint8 -> (3, size, size) float64 in [0, 1] via area-average
    downsampling."""
    h, w = pixels.shape[:2]
    x = pixels.astype(np.float64) / 255.0
    if h == size and w == size:
        pass
    elif h % size == 0 and w % size == 0:
        fh, fw = h // size, w // size
        x = x.reshape(size, fh, size, fw, 3).mean(axis=(1, 3))
    else:
        from PIL import Image
        img = Image.fromarray(pixels, mode="RGB").resize((size, size), Image.BOX)
        x = np.asarray(img, dtype=np.float64) / 255.0
    return np.transpose(x, (2, 0, 1))


@dataclass
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 2
    epochs: int = 30
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainResult:
    model: CnnModel
    train_losses: list = field(default_factory=list)   # per epoch
    val_accuracies: list = field(default_factory=list)
    best_epoch: int = -1


def _accuracy(model: CnnModel, x: np.ndarray, y: np.ndarray,
              chunk: int = 32) -> float:
    correct = 0
    for i in range(0, len(y), chunk):
        probs = model.forward(x[i:i + chunk])
        correct += int(np.sum(np.argmax(probs, axis=1) == y[i:i + chunk]))
    return correct / len(y)


def cnn_train(train_x, train_y, cfg: TrainConfig, val_x=None, val_y=None,
              model: CnnModel | None = None, verbose: bool = False) -> TrainResult:
    """Mini-batch gradient descent (with momentum) on cross-entropy.

    Returns the weights with the best validation accuracy; ties keep the
    earlier epoch. Without a validation set the final weights are kept."""
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    if train_x.shape[0] == 0:
        raise ValueError("empty training set")
    model = model or CnnModel(seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    params = model.get_params()
    velocity = [np.zeros_like(p) for p in params]
    result = TrainResult(model=model)
    best_acc = -1.0
    best_params = None
    n = train_x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = model.loss_and_grads(train_x[idx], train_y[idx])
            epoch_loss += loss
            n_batches += 1
            for p, v, g in zip(params, velocity, grads):
                v *= cfg.momentum
                v -= cfg.learning_rate * g
                p += v
        result.train_losses.append(epoch_loss / max(n_batches, 1))
        if val_x is not None and len(val_y):
            acc = _accuracy(model, np.asarray(val_x, dtype=np.float64),
                            np.asarray(val_y, dtype=np.int64))
            result.val_accuracies.append(acc)
            if acc > best_acc:
                best_acc = acc
                best_params = [p.copy() for p in params]
                result.best_epoch = epoch
            if verbose:
                print(f"epoch {epoch + 1}/{cfg.epochs}  "
                      f"loss {result.train_losses[-1]:.4f}  val acc {acc:.3f}")
        elif verbose:
            print(f"epoch {epoch + 1}/{cfg.epochs}  loss {result.train_losses[-1]:.4f}")
    if best_params is not None:
        model.set_params(best_params)
    return result


# -- checkpoint container ---------------------------------------------------

def save_checkpoint(model: CnnModel, path) -> None:
    """Versioned binary container: magic, config, shape table, row-major
    float64 weights."""
    params = model.get_params()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<iii", model.channels, len(model.blocks),
                             model.input_size))
        fh.write(struct.pack("<i", len(params)))
        for p in params:
            fh.write(struct.pack("<i", p.ndim))
            fh.write(struct.pack(f"<{p.ndim}i", *p.shape))
        for p in params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> CnnModel:
    with open(path, "rb") as fh:
        if fh.read(6) != MAGIC:
            raise ValueError("not a model checkpoint (bad magic)")
        channels, n_blocks, input_size = struct.unpack("<iii", fh.read(12))
        (n_params,) = struct.unpack("<i", fh.read(4))
        shapes = []
        for _ in range(n_params):
            (ndim,) = struct.unpack("<i", fh.read(4))
            shapes.append(struct.unpack(f"<{ndim}i", fh.read(4 * ndim)))
        model = CnnModel(channels=channels, n_blocks=n_blocks,
                         input_size=input_size, seed=0)
        params = []
        for shape in shapes:
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
            params.append(arr)
        model.set_params(params)
    return model
