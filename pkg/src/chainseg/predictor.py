"""Convolutional radial regressor: image batch -> 2*n_v chain radii.

A small numpy network with explicit forward and reverse passes. The trunk is
a stack of ``[3x3 conv, ReLU, 2x2 max-pool]`` blocks followed by a
fully-connected head. The last layer emits ``2 * n_v`` logits that are mapped
into ``(0, r_max)``; the first ``n_v`` outputs are lumen radii, the remaining
``n_v`` are media radii.

Tensors are NHWC (``batch, height, width, channels``).
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    BadMagic,
    InvalidDescriptor,
    ShapeMismatch,
    StaleCache,
    TruncatedFile,
    VersionMismatch,
)

MAGIC = b"PCSG"
FORMAT_VERSION = 1
INIT_STD = 0.01
INIT_BIAS = 1.0


@dataclass(frozen=True)
class Descriptor:
    """Architecture of a regressor.

    ``channels`` may be empty (no conv trunk) and ``hidden`` may be 0 (no
    hidden FC layer); together they give the single linear layer used by the
    least-squares probes. ``frontend`` is reserved for a subband
    decomposition stage and must currently be ``None``.
    """

    input_size: int = 64
    in_channels: int = 3
    n_v: int = 32
    channels: tuple = (16, 32, 64, 128)
    kernel_sizes: tuple = (3, 3, 3, 3)
    hidden: int = 256
    r_max: float = 45.254833995939045
    frontend: Optional[str] = None
    version: str = "chainseg-regressor/1"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "kernel_sizes", tuple(int(k) for k in self.kernel_sizes))
        self.validate()

    def validate(self):
        if self.input_size < 1 or self.in_channels < 1:
            raise InvalidDescriptor("input_size and in_channels must be positive")
        if self.n_v < 1:
            raise InvalidDescriptor("n_v must be >= 1")
        if len(self.kernel_sizes) != len(self.channels):
            raise InvalidDescriptor("one kernel size per conv block is required")
        if any(k < 1 or k % 2 == 0 for k in self.kernel_sizes):
            raise InvalidDescriptor("kernel sizes must be odd and positive")
        if any(c < 1 for c in self.channels) or self.hidden < 0:
            raise InvalidDescriptor("channel and hidden widths must be positive")
        if self.input_size % (2 ** len(self.channels)):
            raise InvalidDescriptor(
                f"input_size {self.input_size} not divisible by 2**{len(self.channels)}"
            )
        if not self.r_max > 0:
            raise InvalidDescriptor("r_max must be positive")
        if self.frontend is not None:
            raise InvalidDescriptor("frontend slot is reserved; only None is supported")

    @property
    def n_out(self):
        return 2 * self.n_v

    def flat_size(self):
        side = self.input_size // (2 ** len(self.channels))
        depth = self.channels[-1] if self.channels else self.in_channels
        return side * side * depth

    def to_json(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["kernel_sizes"] = list(self.kernel_sizes)
        return d

    @classmethod
    def from_json(cls, d):
        return cls(**d)


def reference_descriptor(input_size=64, n_v=32):
    """The 4-block (16, 32, 64, 128) network with r_max = half image diagonal."""
    return Descriptor(input_size=input_size, n_v=n_v,
                      r_max=float(np.hypot(input_size, input_size) / 2))


@dataclass
class RegressorState:
    descriptor: Descriptor
    # [{"kind": "conv"|"dense", "W": ndarray, "b": ndarray}, ...] in forward order
    layers: list
    generation: int = 0

    @property
    def dtype(self):
        return self.layers[0]["W"].dtype

    def parameters(self):
        """Flat list of parameter arrays in the declared (checkpoint) order."""
        out = []
        for layer in self.layers:
            out.append(layer["W"])
            out.append(layer["b"])
        return out

    def copy(self):
        layers = [{"kind": l["kind"], "W": l["W"].copy(), "b": l["b"].copy()} for l in self.layers]
        return RegressorState(self.descriptor, layers, self.generation)


def _layer_shapes(desc):
    shapes = []
    cin = desc.in_channels
    for cout, k in zip(desc.channels, desc.kernel_sizes):
        shapes.append(("conv", (k, k, cin, cout), (cout,)))
        cin = cout
    width = desc.flat_size()
    if desc.hidden:
        shapes.append(("dense", (width, desc.hidden), (desc.hidden,)))
        width = desc.hidden
    shapes.append(("dense", (width, desc.n_out), (desc.n_out,)))
    return shapes


def init(descriptor, seed=0, dtype=np.float32):
    """Weights ~ N(0, 0.01^2), biases = 1, deterministic in ``seed``."""
    if not isinstance(descriptor, Descriptor):
        raise InvalidDescriptor(f"expected Descriptor, got {type(descriptor).__name__}")
    descriptor.validate()
    rng = np.random.default_rng(seed)
    layers = []
    for kind, wshape, bshape in _layer_shapes(descriptor):
        W = rng.normal(0.0, INIT_STD, size=wshape).astype(dtype)
        b = np.full(bshape, INIT_BIAS, dtype=dtype)
        layers.append({"kind": kind, "W": W, "b": b})
    return RegressorState(descriptor, layers)


# --------------------------------------------------------------------------
# layer primitives


def _conv_forward(x, W, b):
    k = W.shape[0]
    p = k // 2
    B, H, Wd, C = x.shape
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    # (B, H, W, C, k, k) -> (B*H*W, k*k*C) with kernel axes outermost
    win = sliding_window_view(xp, (k, k), axis=(1, 2))
    cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(B * H * Wd, k * k * C)
    out = cols @ W.reshape(k * k * C, -1) + b
    return out.reshape(B, H, Wd, -1), cols


def _conv_backward(dout, cols, x_shape, W, need_dx=True):
    k = W.shape[0]
    F = W.shape[-1]
    d2 = dout.reshape(-1, F)
    dW = (cols.T @ d2).reshape(W.shape)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dW, db
    # input gradient is a 'same' correlation of dout with the flipped kernel
    Wf = W[::-1, ::-1].transpose(0, 1, 3, 2)
    dx, _ = _conv_forward(dout, Wf, 0)
    return dx, dW, db


def _pool_forward(x):
    q = (x[:, 0::2, 0::2], x[:, 0::2, 1::2], x[:, 1::2, 0::2], x[:, 1::2, 1::2])
    out = np.maximum(np.maximum(q[0], q[1]), np.maximum(q[2], q[3]))
    # route each window's gradient to its first maximal element only
    taken = q[0] == out
    masks = [taken]
    for quad in q[1:3]:
        m = (quad == out) & ~taken
        masks.append(m)
        taken = taken | m
    masks.append(~taken)
    return out, masks


def _pool_backward(dout, masks, x_shape):
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, 0::2, 0::2] = dout * masks[0]
    dx[:, 0::2, 1::2] = dout * masks[1]
    dx[:, 1::2, 0::2] = dout * masks[2]
    dx[:, 1::2, 1::2] = dout * masks[3]
    return dx


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                    np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z)))).astype(z.dtype)


# --------------------------------------------------------------------------
# model passes


@dataclass
class Cache:
    generation: int
    steps: list = field(default_factory=list)
    out_sig: Optional[np.ndarray] = None


def forward(state, batch):
    """Predict radii for a batch.

    Args:
        state: RegressorState.
        batch: array of shape (B, S, S, C) matching the descriptor.

    Returns:
        (radii, cache) with radii of shape (B, 2*n_v), every entry in
        (0, r_max). The output map is ``r_max * (1 - exp(-softplus(z)))``,
        which is algebraically ``r_max * sigmoid(z)``.
    """
    desc = state.descriptor
    x = np.asarray(batch)
    expected = (desc.input_size, desc.input_size, desc.in_channels)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise ShapeMismatch(f"expected (B, {expected[0]}, {expected[1]}, {expected[2]}), got {x.shape}")
    x = x.astype(state.dtype, copy=False)
    cache = Cache(state.generation)
    n_conv = len(desc.channels)
    for li, layer in enumerate(state.layers):
        if layer["kind"] == "conv":
            z, cols = _conv_forward(x, layer["W"], layer["b"])
            a = np.maximum(z, 0)
            y, arg = _pool_forward(a)
            cache.steps.append(("conv", x.shape, cols, z > 0, a.shape, arg))
            x = y
        else:
            if li == n_conv:
                cache.steps.append(("flatten", x.shape))
                x = x.reshape(x.shape[0], -1)
            z = x @ layer["W"] + layer["b"]
            last = li == len(state.layers) - 1
            if last:
                cache.steps.append(("dense", x, None))
                x = z
            else:
                cache.steps.append(("dense", x, z > 0))
                x = np.maximum(z, 0)
    sig = _sigmoid(x)
    cache.out_sig = sig
    return (desc.r_max * sig).astype(state.dtype, copy=False), cache


def backward(state, cache, d_radii):
    """Reverse pass: gradients of ``sum(d_radii * radii)`` w.r.t. parameters.

    Returns a list of arrays aligned with ``state.parameters()``.
    """
    if cache.generation != state.generation:
        raise StaleCache(
            f"cache from generation {cache.generation}, state is at {state.generation}"
        )
    d = np.asarray(d_radii, dtype=state.dtype)
    if d.shape != cache.out_sig.shape:
        raise ShapeMismatch(f"d_radii shape {d.shape} != output shape {cache.out_sig.shape}")
    sig = cache.out_sig
    d = d * (state.descriptor.r_max * sig * (1 - sig))
    grads = [None] * (2 * len(state.layers))
    steps = list(cache.steps)
    for li in range(len(state.layers) - 1, -1, -1):
        layer = state.layers[li]
        if layer["kind"] == "dense":
            _, x_in, mask = steps.pop()
            if mask is not None:
                d = d * mask
            grads[2 * li] = x_in.T @ d
            grads[2 * li + 1] = d.sum(axis=0)
            d = d @ layer["W"].T
            if steps and steps[-1][0] == "flatten":
                _, shape = steps.pop()
                d = d.reshape(shape)
        else:
            _, x_shape, cols, mask, a_shape, arg = steps.pop()
            d = _pool_backward(d, arg, a_shape) * mask
            d, dW, db = _conv_backward(d, cols, x_shape, layer["W"], need_dx=li > 0)
            grads[2 * li] = dW
            grads[2 * li + 1] = db
    return grads


# --------------------------------------------------------------------------
# optimizers


@dataclass
class OptimizerState:
    """Adam or SGD-with-momentum state.

    Adam uses beta1 0.9, beta2 0.999, eps 1e-8; SGD uses momentum 0.9 and
    weight decay 5e-4. Both start at lr 0.01.
    """

    kind: str = "adam"
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.9
    weight_decay: float = 0.0
    step_count: int = 0
    m: Optional[list] = None
    v: Optional[list] = None

    @classmethod
    def adam(cls, lr=0.01, **kw):
        return cls(kind="adam", lr=lr, **kw)

    @classmethod
    def sgd(cls, lr=0.01, momentum=0.9, weight_decay=5e-4):
        return cls(kind="sgd", lr=lr, momentum=momentum, weight_decay=weight_decay)


def step(state, opt, grads):
    """Apply one optimizer update in place and bump the state generation."""
    params = state.parameters()
    if len(grads) != len(params):
        raise ShapeMismatch(f"{len(grads)} gradients for {len(params)} parameters")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ShapeMismatch(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
    if opt.m is None:
        opt.m = [np.zeros_like(p) for p in params]
        if opt.kind == "adam":
            opt.v = [np.zeros_like(p) for p in params]
    opt.step_count += 1
    t = opt.step_count
    if opt.kind == "adam":
        c1 = 1 - opt.beta1 ** t
        c2 = 1 - opt.beta2 ** t
        for p, g, m, v in zip(params, grads, opt.m, opt.v):
            g = g + opt.weight_decay * p if opt.weight_decay else g
            m *= opt.beta1
            m += (1 - opt.beta1) * g
            v *= opt.beta2
            v += (1 - opt.beta2) * g * g
            p -= (opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)).astype(p.dtype)
    elif opt.kind == "sgd":
        # v <- mu*v - lr*(g + wd*w); w <- w + v
        for p, g, m in zip(params, grads, opt.m):
            m *= opt.momentum
            m -= (opt.lr * (g + opt.weight_decay * p)).astype(p.dtype)
            p += m
    else:
        raise ValueError(f"unknown optimizer kind {opt.kind!r}")
    state.generation += 1
    return state


# --------------------------------------------------------------------------
# checkpoints


def save(state, path):
    """Write ``PCSG`` checkpoint: magic, u32 version, u32 JSON length, JSON,
    then every parameter as little-endian float32 in declared order."""
    desc = json.dumps(state.descriptor.to_json(), sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, len(desc)))
    buf.write(desc)
    for p in state.parameters():
        buf.write(np.ascontiguousarray(p, dtype="<f4").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load(path):
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TruncatedFile(f"{path}: header incomplete")
    if data[:4] != MAGIC:
        raise BadMagic(f"{path}: bad magic {data[:4]!r}")
    version, n = struct.unpack("<II", data[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(data) < 12 + n:
        raise TruncatedFile(f"{path}: descriptor block incomplete")
    desc = Descriptor.from_json(json.loads(data[12:12 + n]))
    offset = 12 + n
    layers = []
    for kind, wshape, bshape in _layer_shapes(desc):
        arrs = []
        for shape in (wshape, bshape):
            nbytes = 4 * int(np.prod(shape))
            if len(data) < offset + nbytes:
                raise TruncatedFile(f"{path}: parameter data incomplete")
            arrs.append(np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=offset)
                        .reshape(shape).astype(np.float32))
            offset += nbytes
        layers.append({"kind": kind, "W": arrs[0], "b": arrs[1]})
    if offset != len(data):
        raise TruncatedFile(f"{path}: {len(data) - offset} trailing bytes")
    return RegressorState(desc, layers)
