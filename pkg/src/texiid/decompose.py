"""Alternating reflectance/shading solver driven by precomputed priors.

Each outer iteration runs one L0 threshold + FFT solve for reflectance
(with the fixed reflectance prior as its data term), the closed-form
quadratic shading update, a projection onto ``I <= S``, and a TV denoise of
the shading toward the shading prior.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import NumericalError, ShapeError
from .imageio import hsv_value
from .l0grad import l0_smooth
from .metrics import energy
from .params import SolverParams
from .tensor import ImageTensor, channel_max, channel_mean, clamp_unit, safe_divide
from .tvdenoise import tv_denoise

__all__ = [
    "DecompositionResult", "PriorBundle", "Residual", "SolverParams",
    "build_priors", "project_constraint", "run", "update_shading",
]


@dataclass(frozen=True)
class PriorBundle:
    r_prior: ImageTensor
    s_prior: ImageTensor


class Residual(NamedTuple):
    eps_r: float
    eps_s: float


@dataclass
class DecompositionResult:
    reflectance: ImageTensor
    shading: ImageTensor
    iterations: int
    residual_trace: list[Residual] = field(default_factory=list)
    energy_trace: list[float] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def converged_residual(self) -> Residual:
        return self.residual_trace[-1]


def build_priors(i: ImageTensor, r_prior_file: ImageTensor, multichannel: bool = True,
                 floor: float = 1e-4) -> PriorBundle:
    """Clamp the reflectance prior and derive the shading prior from it.

    The shading prior is the HSV value of ``I / R'``, replicated to three
    channels when ``multichannel``.
    """
    if r_prior_file.size != i.size:
        raise ShapeError(f"prior is {r_prior_file.height}x{r_prior_file.width}, "
                         f"image is {i.height}x{i.width}")
    if r_prior_file.channels != 3 or i.channels != 3:
        raise ShapeError("image and reflectance prior must both be RGB")
    r_prior = clamp_unit(r_prior_file)
    s_prior = hsv_value(safe_divide(i, r_prior, floor))
    if multichannel:
        s_prior = s_prior.replicate(3)
    return PriorBundle(r_prior, s_prior)


def _shading_data(i: ImageTensor, r: ImageTensor, channels: int, floor: float,
                  reduce: str = "mean") -> ImageTensor:
    ratio = safe_divide(i, r, floor)
    if channels == 1:
        if reduce == "sum":
            return ImageTensor(ratio.data.sum(axis=0, keepdims=True))
        return channel_mean(ratio)
    return ratio


def update_shading(i: ImageTensor, r: ImageTensor, h: ImageTensor, p: SolverParams) -> ImageTensor:
    """``S = (I/R + sigma*H + gamma*S0) / (sigma + gamma + 1)``.

    A single-channel ``h`` selects gray shading, for which ``I/R`` is
    averaged over channels first.
    """
    data = _shading_data(i, r, h.channels, p.division_floor)
    return ImageTensor((data.data + p.sigma * h.data + p.gamma * p.s0) / (p.sigma + p.gamma + 1.0))


def project_constraint(s: ImageTensor, i: ImageTensor) -> ImageTensor:
    """Raise ``s`` to satisfy ``I <= S`` (against the channel max for gray ``s``)."""
    if s.channels == 1:
        return ImageTensor(np.maximum(s.data, channel_max(i).data))
    if s.shape != i.shape:
        raise ShapeError(f"shading {s.shape} and image {i.shape} differ")
    return ImageTensor(np.maximum(s.data, i.data))


def _relative_change(new: ImageTensor, old: ImageTensor) -> float:
    diff = float(np.linalg.norm(new.data - old.data))
    ref = float(np.linalg.norm(old.data))
    return diff / ref if ref > 0 else diff


def run(i: ImageTensor, priors: PriorBundle, p: SolverParams = SolverParams(),
        callback: Callable[[int, ImageTensor, ImageTensor], None] | None = None
        ) -> DecompositionResult:
    """Decompose ``i`` into reflectance and shading.

    Stops when both relative changes ``|X_k - X_{k-1}| / |X_{k-1}|`` drop to
    ``p.eps`` or after ``p.max_iters`` iterations. ``callback(k, R, S)`` sees
    every iterate.
    """
    if i.channels != 3:
        raise ShapeError(f"input image must be RGB, got {i.channels} channels")
    if priors.r_prior.shape != i.shape:
        raise ShapeError(f"reflectance prior {priors.r_prior.shape} does not match image {i.shape}")
    if priors.s_prior.size != i.size:
        raise ShapeError(f"shading prior {priors.s_prior.shape} does not match image {i.shape}")

    start = time.perf_counter()
    channels = 3 if p.multichannel_shading else 1
    s_prior = priors.s_prior
    if s_prior.channels != channels:
        s_prior = s_prior.replicate(3) if channels == 3 else channel_mean(s_prior)
    l0p, tvp = p.l0(), p.tv()

    r = i
    ratio = safe_divide(i, r, p.division_floor)
    s = _shading_data(i, r, 1, p.division_floor, reduce=p.shading_init).replicate(channels)
    h = ratio if channels == 3 else channel_mean(ratio)

    residuals: list[Residual] = []
    energies: list[float] = []
    k = 0
    for k in range(1, p.max_iters + 1):
        stage = "R"
        try:
            r_new = l0_smooth(priors.r_prior, l0p, p.l0_passes, start=r, clamp=True)
            stage = "S"
            s_new = project_constraint(update_shading(i, r_new, h, p), i)
            stage = "H"
            h = tv_denoise(s_new, s_prior, tvp)
        except NumericalError as exc:
            raise NumericalError(f"non-finite {stage} at iteration {k}") from exc
        residuals.append(Residual(_relative_change(r_new, r), _relative_change(s_new, s)))
        energies.append(energy(i, r_new, s_new, s_prior, p))
        r, s = r_new, s_new
        if not all(np.isfinite(residuals[-1])) or not np.isfinite(energies[-1]):
            raise NumericalError(f"non-finite residual or energy at iteration {k}")
        if callback is not None:
            callback(k, r, s)
        if residuals[-1].eps_r <= p.eps and residuals[-1].eps_s <= p.eps:
            break

    return DecompositionResult(r, s, k, residuals, energies, time.perf_counter() - start)


def decompose(i: ImageTensor, r_prior_file: ImageTensor, p: SolverParams = SolverParams()
              ) -> DecompositionResult:
    """Build priors from a raw reflectance prior and run the solver."""
    priors = build_priors(i, r_prior_file, p.multichannel_shading, p.division_floor)
    return run(i, priors, p)
