from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Literal

from .errors import ParameterError
from .l0grad import L0Params
from .tensor import DEFAULT_FLOOR
from .tvdenoise import TvParams


@dataclass(frozen=True)
class SolverParams:
    """Every scalar knob of the decomposition.

    Defaults are the published settings (mu=1, beta=0.01, sigma=1, gamma=1,
    alpha=2, S0=0.5, eps=1e-5). ``alpha`` and ``sigma`` also drive the TV
    denoiser; ``tv_iters``/``tv_tol`` are its inner iteration cap and dual
    tolerance.
    """

    alpha: float = 2.0
    beta: float = 0.01
    gamma: float = 1.0
    mu: float = 1.0
    sigma: float = 1.0
    s0: float = 0.5
    eps: float = 1e-5
    max_iters: int = 20
    multichannel_shading: bool = True
    tv_iters: int = 40
    tv_tol: float = 1e-4
    division_floor: float = DEFAULT_FLOOR
    l0_passes: int = 1
    l0_pooled: bool = True
    shading_init: Literal["mean", "sum"] = "mean"

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            if not getattr(self, name) >= 0:
                raise ParameterError(f"{name} must be non-negative, got {getattr(self, name)}")
        for name in ("mu", "sigma", "eps", "division_floor"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.s0 <= 1:
            raise ParameterError(f"s0 must lie in (0, 1], got {self.s0}")
        if self.max_iters < 1 or self.tv_iters < 1 or self.l0_passes < 1:
            raise ParameterError("iteration counts must be >= 1")
        if self.shading_init not in ("mean", "sum"):
            raise ParameterError(f"shading_init must be 'mean' or 'sum', got {self.shading_init!r}")

    def l0(self) -> L0Params:
        return L0Params(beta=self.beta, mu=self.mu, pooled=self.l0_pooled)

    def tv(self) -> TvParams:
        return TvParams(alpha=self.alpha, sigma=self.sigma,
                        inner_iters=self.tv_iters, dual_tol=self.tv_tol)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]
