"""L0 gradient minimization by half-quadratic splitting.

One pass alternates a hard threshold on the gradient field with an exact
quadratic solve that is diagonal in the Fourier domain under periodic
boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .errors import ParameterError, ShapeError
from .tensor import GradientPair, ImageTensor, clamp_unit, forward_diff


@dataclass(frozen=True)
class L0Params:
    """``beta`` weighs the L0 count, ``mu`` the splitting penalty."""

    beta: float = 0.01
    mu: float = 1.0
    pooled: bool = True  # threshold on the magnitude summed over channels

    def __post_init__(self):
        if not self.mu > 0 or not np.isfinite(self.mu):
            raise ParameterError(f"mu must be positive and finite, got {self.mu}")
        if not self.beta >= 0 or not np.isfinite(self.beta):
            raise ParameterError(f"beta must be non-negative and finite, got {self.beta}")

    @property
    def threshold(self) -> float:
        return self.beta / self.mu


def hard_threshold(grad: GradientPair, threshold: float, pooled: bool = True) -> GradientPair:
    """Zero every gradient whose squared magnitude is ``<= threshold``.

    With ``pooled`` the magnitude is summed over channels, so all channels of
    a pixel are kept or dropped together.
    """
    mag = grad.squared_magnitude(pooled=pooled)
    keep = mag > threshold
    if pooled:
        keep = keep[None]
    return GradientPair(ImageTensor(np.where(keep, grad.gx.data, 0.0)),
                        ImageTensor(np.where(keep, grad.gy.data, 0.0)))


def threshold_gradients(r: ImageTensor, p: L0Params) -> GradientPair:
    """G-step: the exact minimizer of ``beta*|G|_0 + mu*|G - grad R|^2``."""
    return hard_threshold(forward_diff(r, "periodic"), p.threshold, pooled=p.pooled)


@lru_cache(maxsize=32)
def _spectra(height: int, width: int, mu: float):
    # transfer functions of the periodic forward differences on the rfft grid
    fx = np.exp(2j * np.pi * np.arange(width // 2 + 1) / width) - 1.0
    fy = np.exp(2j * np.pi * np.arange(height) / height) - 1.0
    denom = 1.0 + mu * (np.abs(fx[None, :]) ** 2 + np.abs(fy[:, None]) ** 2)
    for arr in (fx, fy, denom):
        arr.setflags(write=False)
    return fx, fy, denom


def fft_solve(target: ImageTensor, g: GradientPair, p: L0Params) -> ImageTensor:
    """R-step: minimize ``|R - target|^2 + mu*|G - grad R|^2`` exactly.

    Solves ``(I + mu D^T D) R = target + mu D^T G`` per channel, where D is
    the periodic forward-difference operator.
    """
    if g.shape != target.shape:
        raise ShapeError(f"gradient shape {g.shape} does not match target {target.shape}")
    h, w = target.size
    fx, fy, denom = _spectra(h, w, float(p.mu))
    num = sfft.rfft2(target.data)
    num += p.mu * (np.conj(fx)[None, None, :] * sfft.rfft2(g.gx.data)
                   + np.conj(fy)[None, :, None] * sfft.rfft2(g.gy.data))
    return ImageTensor(sfft.irfft2(num / denom, s=(h, w)))


def l0_smooth(target: ImageTensor, p: L0Params, passes: int = 1,
              start: ImageTensor | None = None, clamp: bool = False) -> ImageTensor:
    """Run ``passes`` threshold/solve rounds against a fixed data term.

    The iterate starts at ``start`` (``target`` by default). With ``clamp``
    each solve is followed by clamping to [0, 1], which is what the
    decomposition loop does to its reflectance.
    """
    if passes < 1:
        raise ParameterError(f"passes must be >= 1, got {passes}")
    r = target if start is None else start
    for _ in range(passes):
        r = fft_solve(target, threshold_gradients(r, p), p)
        if clamp:
            r = clamp_unit(r)
    return r


def splitting_energy(r: ImageTensor, g: GradientPair, target: ImageTensor, p: L0Params) -> float:
    """``|R - target|^2 + beta*|G|_0 + mu*|G - grad R|^2`` (L0 count per pixel when pooled)."""
    d = forward_diff(r, "periodic")
    nonzero = g.squared_magnitude(pooled=p.pooled) > 0
    coupling = ((g.gx.data - d.gx.data) ** 2 + (g.gy.data - d.gy.data) ** 2).sum()
    fidelity = ((r.data - target.data) ** 2).sum()
    return float(fidelity + p.beta * nonzero.sum() + p.mu * coupling)
