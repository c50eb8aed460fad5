"""Low-light enhancement and reflectance recoloring on top of a decomposition."""
from __future__ import annotations

import numpy as np

from .errors import ParameterError, ShapeError
from .tensor import ImageTensor, channel_mean, clamp_unit, hadamard


def gamma_shading(s: ImageTensor, gamma: float = 2.2) -> ImageTensor:
    """``S ** (1/gamma)``; brightens for ``gamma > 1``."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    return ImageTensor(np.power(np.maximum(s.data, 0.0), 1.0 / gamma))


def enhance(r: ImageTensor, s: ImageTensor, gamma: float = 2.2) -> ImageTensor:
    return clamp_unit(hadamard(r, gamma_shading(s, gamma)))


def parse_color(text: str) -> tuple[float, float, float] | None:
    """``"#rrggbb"`` or ``"r,g,b"`` (floats in [0, 1]); None if neither."""
    text = text.strip()
    if text.startswith("#") and len(text) == 7:
        try:
            return tuple(int(text[k:k + 2], 16) / 255.0 for k in (1, 3, 5))
        except ValueError:
            return None
    parts = text.split(",")
    if len(parts) == 3:
        try:
            return tuple(float(v) for v in parts)
        except ValueError:
            return None
    return None


def swatch_field(swatch, height: int, width: int) -> ImageTensor:
    """Expand an RGB triple or tile a texture tensor to ``height x width``."""
    if isinstance(swatch, ImageTensor):
        tex = swatch.replicate(3).data
        reps = (1, -(-height // tex.shape[1]), -(-width // tex.shape[2]))
        return ImageTensor(np.tile(tex, reps)[:, :height, :width])
    color = np.asarray(swatch, dtype=np.float64).reshape(3, 1, 1)
    return ImageTensor(np.broadcast_to(color, (3, height, width)))


def recolor(r: ImageTensor, s: ImageTensor, mask: ImageTensor, swatch) -> ImageTensor:
    """Alpha-blend a new material into the reflectance and re-shade it.

    ``mask`` (gray, [0, 1]) is the blend weight of ``swatch`` over ``r``.
    """
    if mask.size != r.size:
        raise ShapeError(f"mask is {mask.height}x{mask.width}, image is {r.height}x{r.width}")
    alpha = np.clip(channel_mean(mask).data, 0.0, 1.0)
    new = swatch_field(swatch, r.height, r.width).data
    blended = ImageTensor((1.0 - alpha) * r.data + alpha * new)
    return clamp_unit(hadamard(blended, s))
