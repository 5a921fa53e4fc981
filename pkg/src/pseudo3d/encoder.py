"""A small trainable convolutional encoder for 3-channel coordinate maps.

Architecture: Conv(3 -> 16, 3x3, stride 2, pad 1) -> ReLU ->
Conv(16 -> C, 3x3, stride 2, pad 1), so an (3, H, W) coordinate map
becomes a (ceil(H/4), ceil(W/4), C) channels-last feature map.

Everything is plain numpy with an analytic backward pass
(:func:`encode_backward`) that is validated against central finite
differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .cloud import CoordinateMap
from .errors import BadChannelsError, ParamsIoError, ShapeMismatchError, TooSmallError

HIDDEN_CHANNELS = 16
KERNEL = 3
STRIDE = 2
PAD = 1
MIN_SIDE = 4

_MAGIC = b"PENC"
_VERSION = 1


@dataclass(frozen=True)
class EncoderParams:
    """Weights and biases of the two conv layers, all float64."""

    w1: np.ndarray  # (16, 3, 3, 3)
    b1: np.ndarray  # (16,)
    w2: np.ndarray  # (C, 16, 3, 3)
    b2: np.ndarray  # (C,)

    def __post_init__(self) -> None:
        w1 = np.asarray(self.w1, dtype=np.float64)
        b1 = np.asarray(self.b1, dtype=np.float64)
        w2 = np.asarray(self.w2, dtype=np.float64)
        b2 = np.asarray(self.b2, dtype=np.float64)
        if w1.shape != (HIDDEN_CHANNELS, 3, KERNEL, KERNEL):
            raise ShapeMismatchError(f"w1 must be (16, 3, 3, 3), got {w1.shape}")
        if b1.shape != (HIDDEN_CHANNELS,):
            raise ShapeMismatchError(f"b1 must be (16,), got {b1.shape}")
        if w2.ndim != 4 or w2.shape[1:] != (HIDDEN_CHANNELS, KERNEL, KERNEL) or w2.shape[0] < 1:
            raise ShapeMismatchError(f"w2 must be (C, 16, 3, 3), got {w2.shape}")
        if b2.shape != (w2.shape[0],):
            raise ShapeMismatchError(f"b2 must be ({w2.shape[0]},), got {b2.shape}")
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def out_channels(self) -> int:
        return self.w2.shape[0]


def init_params(out_channels: int, seed: int) -> EncoderParams:
    """Seeded initialization: uniform +-1/sqrt(fan_in) weights, zero biases.

    Uses :class:`numpy.random.default_rng` so the same seed yields the
    same parameters on every platform.
    """
    if out_channels < 1:
        raise ValueError(f"out_channels must be >= 1, got {out_channels}")
    rng = np.random.default_rng(seed)
    bound1 = 1.0 / np.sqrt(3 * KERNEL * KERNEL)
    bound2 = 1.0 / np.sqrt(HIDDEN_CHANNELS * KERNEL * KERNEL)
    w1 = rng.uniform(-bound1, bound1, size=(HIDDEN_CHANNELS, 3, KERNEL, KERNEL))
    w2 = rng.uniform(-bound2, bound2, size=(out_channels, HIDDEN_CHANNELS, KERNEL, KERNEL))
    return EncoderParams(
        w1=w1,
        b1=np.zeros(HIDDEN_CHANNELS),
        w2=w2,
        b2=np.zeros(out_channels),
    )


def _as_planar(grid: CoordinateMap | np.ndarray) -> np.ndarray:
    if isinstance(grid, CoordinateMap):
        arr = grid.data
    else:
        arr = np.asarray(grid, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeMismatchError(f"encoder input must be (3, H, W), got {arr.shape}")
        if arr.shape[0] != 3:
            raise BadChannelsError(
                f"encoder input must have exactly 3 channels, got {arr.shape[0]}"
            )
    _, h, w = arr.shape
    if h < MIN_SIDE or w < MIN_SIDE:
        raise TooSmallError(f"encoder needs at least {MIN_SIDE}x{MIN_SIDE}, got {h}x{w}")
    return arr


def _conv_s2p1(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 stride-2 pad-1 convolution; x (Ci, H, W) -> (Co, ceil(H/2), ceil(W/2))."""
    ci, h, wd = x.shape
    ho = (h - 1) // STRIDE + 1
    wo = (wd - 1) // STRIDE + 1
    xp = np.zeros((ci, h + 2 * PAD, wd + 2 * PAD), dtype=np.float64)
    xp[:, PAD:PAD + h, PAD:PAD + wd] = x
    out = np.zeros((w.shape[0], ho, wo), dtype=np.float64)
    for k in range(KERNEL):
        for l in range(KERNEL):
            patch = xp[:, k:k + 2 * ho - 1:STRIDE, l:l + 2 * wo - 1:STRIDE]
            out += np.einsum("oi,ihw->ohw", w[:, :, k, l], patch)
    return out + b[:, np.newaxis, np.newaxis]


def _conv_s2p1_backward(
    x: np.ndarray, w: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of the stride-2 conv: returns (dx, dw, db) for upstream g."""
    ci, h, wd = x.shape
    _, ho, wo = g.shape
    xp = np.zeros((ci, h + 2 * PAD, wd + 2 * PAD), dtype=np.float64)
    xp[:, PAD:PAD + h, PAD:PAD + wd] = x
    dw = np.zeros_like(w)
    dxp = np.zeros_like(xp)
    for k in range(KERNEL):
        for l in range(KERNEL):
            patch = xp[:, k:k + 2 * ho - 1:STRIDE, l:l + 2 * wo - 1:STRIDE]
            dw[:, :, k, l] = np.einsum("ohw,ihw->oi", g, patch)
            dxp[:, k:k + 2 * ho - 1:STRIDE, l:l + 2 * wo - 1:STRIDE] += np.einsum(
                "oi,ohw->ihw", w[:, :, k, l], g
            )
    db = g.sum(axis=(1, 2))
    dx = dxp[:, PAD:PAD + h, PAD:PAD + wd]
    return dx, dw, db


def encode(grid: CoordinateMap | np.ndarray, params: EncoderParams) -> np.ndarray:
    """Run the encoder; returns a channels-last (H', W', C) feature map."""
    x = _as_planar(grid)
    z1 = _conv_s2p1(x, params.w1, params.b1)
    a1 = np.maximum(z1, 0.0)
    z2 = _conv_s2p1(a1, params.w2, params.b2)
    return np.ascontiguousarray(z2.transpose(1, 2, 0))


def output_shape(height: int, width: int, out_channels: int) -> tuple[int, int, int]:
    """Feature-map shape for an (3, height, width) input."""
    h1 = (height - 1) // STRIDE + 1
    w1 = (width - 1) // STRIDE + 1
    return ((h1 - 1) // STRIDE + 1, (w1 - 1) // STRIDE + 1, out_channels)


@dataclass(frozen=True)
class EncoderGradients:
    """Analytic gradients of a scalar loss with respect to every input."""

    dx: np.ndarray   # (3, H, W) gradient w.r.t. the coordinate map
    dw1: np.ndarray
    db1: np.ndarray
    dw2: np.ndarray
    db2: np.ndarray


def encode_backward(
    grid: CoordinateMap | np.ndarray,
    params: EncoderParams,
    grad_out: np.ndarray,
) -> EncoderGradients:
    """Backpropagate ``grad_out`` (channels-last, matching :func:`encode`).

    Recomputes the forward pass internally, so callers never manage
    intermediate activations.
    """
    x = _as_planar(grid)
    g = np.asarray(grad_out, dtype=np.float64)
    expected = output_shape(x.shape[1], x.shape[2], params.out_channels)
    if g.shape != expected:
        raise ShapeMismatchError(
            f"grad_out shape {g.shape} does not match encoder output {expected}"
        )
    z1 = _conv_s2p1(x, params.w1, params.b1)
    a1 = np.maximum(z1, 0.0)
    g2 = np.ascontiguousarray(g.transpose(2, 0, 1))
    da1, dw2, db2 = _conv_s2p1_backward(a1, params.w2, g2)
    dz1 = da1 * (z1 > 0.0)
    dx, dw1, db1 = _conv_s2p1_backward(x, params.w1, dz1)
    return EncoderGradients(dx=dx, dw1=dw1, db1=db1, dw2=dw2, db2=db2)


def normalize_coordinate_map(
    cmap: CoordinateMap,
) -> tuple[CoordinateMap, tuple[bool, bool, bool]]:
    """Standardize each coordinate channel to zero mean, unit spread.

    Uses the population standard deviation.  A channel with zero spread
    (for example Z on a constant-depth wall) is passed through untouched;
    the returned flags mark which channels were constant so callers can
    see the skip rather than silently dividing by zero.
    """
    data = cmap.data
    out = np.empty_like(data)
    flags = []
    for c in range(3):
        channel = data[c]
        mean = channel.mean()
        std = channel.std()
        if std == 0.0:
            out[c] = channel
            flags.append(True)
        else:
            out[c] = (channel - mean) / std
            flags.append(False)
    return CoordinateMap(out), (flags[0], flags[1], flags[2])


def save_params(path: str, params: EncoderParams) -> None:
    """Serialize parameters as a little-endian binary blob."""
    c = params.out_channels
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", _VERSION, c))
            for arr in (params.w1, params.b1, params.w2, params.b2):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    except OSError as exc:
        raise ParamsIoError(f"{path}: cannot write: {exc}") from exc


def load_params(path: str) -> EncoderParams:
    """Inverse of :func:`save_params`; validates magic, version, and size."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ParamsIoError(f"{path}: cannot read: {exc}") from exc
    head = len(_MAGIC) + 8
    if len(data) < head or data[:4] != _MAGIC:
        raise ParamsIoError(f"{path}: not an encoder parameter file")
    version, c = struct.unpack("<II", data[4:head])
    if version != _VERSION:
        raise ParamsIoError(f"{path}: unsupported version {version}")
    if c < 1:
        raise ParamsIoError(f"{path}: invalid channel count {c}")
    sizes = {
        "w1": HIDDEN_CHANNELS * 3 * KERNEL * KERNEL,
        "b1": HIDDEN_CHANNELS,
        "w2": c * HIDDEN_CHANNELS * KERNEL * KERNEL,
        "b2": c,
    }
    expected = head + 8 * sum(sizes.values())
    if len(data) != expected:
        raise ParamsIoError(
            f"{path}: blob is {len(data)} bytes, expected {expected} for C={c}"
        )
    offset = head
    arrays = {}
    for name, count in sizes.items():
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
    return EncoderParams(
        w1=arrays["w1"].reshape(HIDDEN_CHANNELS, 3, KERNEL, KERNEL),
        b1=arrays["b1"],
        w2=arrays["w2"].reshape(c, HIDDEN_CHANNELS, KERNEL, KERNEL),
        b2=arrays["b2"],
    )
