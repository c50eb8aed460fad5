"""WHDR against IIW judgments, the ensemble energy, and reconstruction error."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import EvaluationError, ParameterError
from .imageio import JudgmentSet
from .params import SolverParams
from .tensor import ImageTensor, forward_diff, hadamard
from .tvdenoise import total_variation

L0_COUNT_TOL = 1e-9
LIGHTNESS_FLOOR = 1e-10


@dataclass(frozen=True)
class WhdrReport:
    whdr: float
    total_weight: float
    disagreement_weight: float
    delta: float
    n_comparisons: int

    def to_dict(self) -> dict:
        return asdict(self)


def predict_labels(r: ImageTensor, judgments: JudgmentSet, delta: float = 0.10) -> np.ndarray:
    """Algorithm's ``"1" / "2" / "E"`` label for every comparison."""
    if not delta > 0:
        raise ParameterError(f"delta must be positive, got {delta}")
    if not judgments.comparisons:
        return np.empty(0, dtype="<U1")
    pts = np.array([(c.point1, c.point2) for c in judgments.comparisons])  # (n, 2, 2)
    if (pts[..., 0] >= r.height).any() or (pts[..., 1] >= r.width).any() or (pts < 0).any():
        raise EvaluationError("judgment points fall outside the reflectance image")
    # explicit left-to-right channel sum, then divide
    light = r.data[:, pts[..., 0], pts[..., 1]].sum(axis=0) / r.channels
    light = np.maximum(light, LIGHTNESS_FLOOR)
    l1, l2 = light[:, 0], light[:, 1]
    labels = np.full(len(pts), "E", dtype="<U1")
    labels[l2 / l1 > 1.0 + delta] = "1"
    labels[l1 / l2 > 1.0 + delta] = "2"
    return labels


def whdr(r: ImageTensor, judgments: JudgmentSet, delta: float = 0.10) -> WhdrReport:
    """Weighted human disagreement rate of reflectance ``r``.

    Lightness is the channel mean of ``r``; a ratio above ``1 + delta``
    means one point is darker, anything else means "about equal".
    """
    labels = predict_labels(r, judgments, delta)
    human = np.array([c.darker for c in judgments.comparisons], dtype="<U1")
    weights = np.array([c.weight for c in judgments.comparisons], dtype=np.float64)
    wrong = np.where(labels != human, weights, 0.0)
    # sequential sums: reproducible against a plain accumulation loop
    total = float(np.cumsum(weights)[-1]) if len(weights) else 0.0
    if not total > 0:
        raise EvaluationError("total judgment weight is zero; WHDR undefined")
    bad = float(np.cumsum(wrong)[-1])
    return WhdrReport(bad / total, total, bad, delta, len(weights))


def reconstruction_error(i: ImageTensor, r: ImageTensor, s: ImageTensor) -> float:
    """``|I - R*S|^2`` summed over all elements."""
    return float(((i.data - hadamard(r, s).data) ** 2).sum())


def l0_count(r: ImageTensor) -> int:
    """Pixels whose channel-pooled periodic gradient magnitude exceeds 1e-9."""
    mag = np.sqrt(forward_diff(r, "periodic").squared_magnitude(pooled=True))
    return int((mag > L0_COUNT_TOL).sum())


def energy_terms(i: ImageTensor, r: ImageTensor, s: ImageTensor, s_prior: ImageTensor,
                 p: SolverParams) -> dict[str, float]:
    """The four weighted terms of the ensemble energy, keyed by name."""
    return {
        "fidelity": reconstruction_error(i, r, s),
        "shading_tv": p.alpha * total_variation(ImageTensor(s.data - s_prior.data)),
        "reflectance_l0": p.beta * l0_count(r),
        "scale": p.gamma * float(((s.data - p.s0) ** 2).sum()),
    }


def energy(i: ImageTensor, r: ImageTensor, s: ImageTensor, s_prior: ImageTensor,
           p: SolverParams) -> float:
    return float(sum(energy_terms(i, r, s, s_prior, p).values()))
