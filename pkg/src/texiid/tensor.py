"""Planar image tensors and the elementwise / finite-difference kernels
shared by every solver.

Data is stored channel-major as a float64 array of shape ``(C, H, W)`` so
per-channel FFTs and TV sweeps run over contiguous planes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import NumericalError, ParameterError, ShapeError

DEFAULT_FLOOR = 1e-4

Boundary = Literal["periodic", "neumann"]


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """Immutable ``(channels, height, width)`` float64 image.

    Values are nominally in [0, 1] but are not clamped; every tensor must be
    finite.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise ShapeError(f"expected a (C, H, W) array, got ndim={arr.ndim}")
        c, h, w = arr.shape
        if c not in (1, 3):
            raise ShapeError(f"channels must be 1 or 3, got {c}")
        if h < 1 or w < 1:
            raise ShapeError(f"empty image {h}x{w}")
        if not np.isfinite(arr).all():
            raise NumericalError("image tensor contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_hwc(cls, arr) -> "ImageTensor":
        """Build from an interleaved ``(H, W)`` or ``(H, W, C)`` array."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            return cls(arr[None])
        return cls(np.moveaxis(arr, -1, 0))

    @classmethod
    def full(cls, height: int, width: int, channels: int, value: float) -> "ImageTensor":
        return cls(np.full((channels, height, width), float(value)))

    def to_hwc(self) -> np.ndarray:
        """Interleaved ``(H, W, C)`` copy (``(H, W)`` for one channel)."""
        if self.channels == 1:
            return self.data[0].copy()
        return np.ascontiguousarray(np.moveaxis(self.data, 0, -1))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def size(self) -> tuple[int, int]:
        """Spatial ``(height, width)``."""
        return self.data.shape[1:]

    def replicate(self, channels: int = 3) -> "ImageTensor":
        """Repeat a single-channel tensor across ``channels`` planes."""
        if self.channels == channels:
            return self
        if self.channels != 1:
            raise ShapeError(f"cannot replicate {self.channels} channels to {channels}")
        return ImageTensor(np.repeat(self.data, channels, axis=0))

    def __repr__(self):
        return f"ImageTensor(channels={self.channels}, height={self.height}, width={self.width})"


@dataclass(frozen=True)
class GradientPair:
    """Horizontal and vertical difference fields of one image."""

    gx: ImageTensor
    gy: ImageTensor

    def __post_init__(self):
        if self.gx.shape != self.gy.shape:
            raise ShapeError(f"gx {self.gx.shape} and gy {self.gy.shape} differ")

    @property
    def shape(self):
        return self.gx.shape

    def squared_magnitude(self, pooled: bool = True) -> np.ndarray:
        """Per-pixel ``gx**2 + gy**2``; summed over channels when ``pooled``."""
        sq = self.gx.data ** 2 + self.gy.data ** 2
        if pooled:
            return sq.sum(axis=0)
        return sq


def _broadcast_operand(a: ImageTensor, b: ImageTensor) -> np.ndarray:
    if a.shape == b.shape:
        return b.data
    if b.channels == 1 and a.channels == 3 and a.size == b.size:
        return b.data  # numpy broadcasts the leading axis
    raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}")


def hadamard(a: ImageTensor, b: ImageTensor) -> ImageTensor:
    """Elementwise product; a 1-channel ``b`` is broadcast over ``a``'s channels."""
    return ImageTensor(a.data * _broadcast_operand(a, b))


def safe_divide(a: ImageTensor, b: ImageTensor, floor: float = DEFAULT_FLOOR) -> ImageTensor:
    """``a / max(b, floor)`` elementwise."""
    if not floor > 0:
        raise ParameterError(f"division floor must be positive, got {floor}")
    return ImageTensor(a.data / np.maximum(_broadcast_operand(a, b), floor))


def forward_diff(src: ImageTensor, boundary: Boundary = "periodic") -> GradientPair:
    """Forward differences ``src[i, j+1] - src[i, j]`` and ``src[i+1, j] - src[i, j]``.

    ``periodic`` wraps the last row/column around to the first; ``neumann``
    replicates the edge so the last difference is zero.
    """
    u = src.data
    if boundary == "periodic":
        gx = np.roll(u, -1, axis=2) - u
        gy = np.roll(u, -1, axis=1) - u
    elif boundary == "neumann":
        gx = np.zeros_like(u)
        gy = np.zeros_like(u)
        gx[:, :, :-1] = u[:, :, 1:] - u[:, :, :-1]
        gy[:, :-1, :] = u[:, 1:, :] - u[:, :-1, :]
    else:
        raise ParameterError(f"unknown boundary {boundary!r}")
    return GradientPair(ImageTensor(gx), ImageTensor(gy))


def channel_mean(src: ImageTensor) -> ImageTensor:
    if src.channels == 1:
        return ImageTensor(src.data)
    # offset form: identical channels reproduce the channel bit-for-bit
    base = src.data[:1]
    return ImageTensor(base + (src.data[1:] - base).sum(axis=0, keepdims=True) / src.channels)


def channel_max(src: ImageTensor) -> ImageTensor:
    return ImageTensor(src.data.max(axis=0, keepdims=True))


def clamp_unit(src: ImageTensor) -> ImageTensor:
    return ImageTensor(np.clip(src.data, 0.0, 1.0))
