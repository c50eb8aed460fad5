"""Image decode/encode, the HSV value channel, and IIW judgment parsing."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import cv2
import numpy as np

from .errors import FormatError, IntegrityError, ShapeError
from .tensor import ImageTensor, clamp_unit

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
DARKER_LABELS = ("1", "2", "E")

Rescale = Literal["clip", "minmax"]


def _read_ppm(raw: bytes) -> tuple[np.ndarray, int]:
    # header: magic, width, height, maxval, each separated by whitespace/comments
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte before the raster
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"bad PPM header: {tokens!r}") from exc
    if not 0 < maxval < 65536 or width < 1 or height < 1:
        raise FormatError(f"bad PPM header values {width}x{height} maxval={maxval}")
    channels = 3 if raw[:2] == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    if len(raw) - pos < count * dtype.itemsize:
        raise FormatError("truncated PPM raster")
    arr = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).reshape(height, width, channels)
    if channels == 1:
        arr = arr[:, :, 0]
    return arr, maxval


def load_image(path) -> ImageTensor:
    """Read an 8/16-bit gray or RGB PNG, or a binary PPM/PGM.

    Values are integer codes divided by the maximum code; no gamma
    linearization is applied.
    """
    path = Path(path)
    raw = path.read_bytes()  # FileNotFoundError / OSError propagate
    if raw.startswith(PNG_MAGIC):
        arr = cv2.imdecode(np.frombuffer(raw, np.uint8), cv2.IMREAD_UNCHANGED)
        if arr is None:
            raise FormatError(f"{path}: undecodable PNG")
        if arr.dtype == np.uint8:
            maxval = 255
        elif arr.dtype == np.uint16:
            maxval = 65535
        else:
            raise FormatError(f"{path}: unsupported sample type {arr.dtype}")
        if arr.ndim == 3:
            if arr.shape[2] == 4:
                arr = arr[:, :, :3]
            elif arr.shape[2] == 2:
                arr = arr[:, :, 0]
            if arr.ndim == 3:
                arr = arr[:, :, ::-1]  # BGR -> RGB
    elif raw[:2] in (b"P6", b"P5"):
        arr, maxval = _read_ppm(raw)
    else:
        raise FormatError(f"{path}: not a PNG or binary PPM file")
    return ImageTensor.from_hwc(arr.astype(np.float64) / maxval)


def quantize(t: ImageTensor, rescale: Rescale = "clip") -> np.ndarray:
    """8-bit ``(H, W[, 3])`` codes for display."""
    if rescale == "clip":
        data = clamp_unit(t).data
    elif rescale == "minmax":
        lo, hi = float(t.data.min()), float(t.data.max())
        if hi > lo:
            data = (t.data - lo) / (hi - lo)
        else:
            data = np.full_like(t.data, 0.5)
    else:
        raise ValueError(f"unknown rescale mode {rescale!r}")
    codes = np.floor(data * 255.0 + 0.5).astype(np.uint8)
    return codes[0] if t.channels == 1 else np.moveaxis(codes, 0, -1)


def write_atomic(path, payload: bytes) -> None:
    """Write ``payload`` to a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_png(t: ImageTensor, rescale: Rescale = "clip") -> bytes:
    codes = quantize(t, rescale)
    if codes.ndim == 3:
        codes = np.ascontiguousarray(codes[:, :, ::-1])
    ok, buf = cv2.imencode(".png", codes, [cv2.IMWRITE_PNG_COMPRESSION, 6])
    if not ok:
        raise OSError("PNG encoding failed")
    return buf.tobytes()


def save_image(t: ImageTensor, path, rescale: Rescale = "clip") -> None:
    """Write an 8-bit PNG, either clipped to [0, 1] or min-max stretched."""
    write_atomic(path, encode_png(t, rescale))


def hsv_value(rgb: ImageTensor) -> ImageTensor:
    """The V channel of HSV, i.e. the per-pixel channel maximum."""
    if rgb.channels != 3:
        raise ShapeError(f"hsv_value needs 3 channels, got {rgb.channels}")
    return ImageTensor(rgb.data.max(axis=0, keepdims=True))


@dataclass(frozen=True)
class Comparison:
    point1: tuple[int, int]  # (row, col)
    point2: tuple[int, int]
    darker: str
    weight: float


@dataclass
class JudgmentSet:
    """Pairwise reflectance judgments bound to an image of ``height x width``."""

    height: int
    width: int
    comparisons: list[Comparison] = field(default_factory=list)

    def __len__(self):
        return len(self.comparisons)

    def __iter__(self):
        return iter(self.comparisons)


def to_pixel(coord: float, dim: int) -> int:
    """Nearest pixel index for a normalized coordinate: round(coord*(dim-1)), clamped."""
    idx = int(np.floor(coord * (dim - 1) + 0.5))
    return min(max(idx, 0), dim - 1)


def parse_judgments(doc, height: int, width: int) -> JudgmentSet:
    """Bind an already-decoded IIW judgment document to an image size.

    Comparisons whose label or score is null, or that reference a
    non-opaque point, are dropped as in the IIW reference evaluation.
    """
    if not isinstance(doc, dict):
        raise FormatError("judgment document must be a JSON object")
    try:
        points = doc["intrinsic_points"]
        records = doc["intrinsic_comparisons"]
    except KeyError as exc:
        raise FormatError(f"judgment document lacks {exc.args[0]!r}") from None
    table = {}
    for p in points:
        try:
            table[p["id"]] = (to_pixel(float(p["y"]), height), to_pixel(float(p["x"]), width),
                              bool(p.get("opaque", True)))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad point record {p!r}") from exc

    out = []
    for rec in records:
        try:
            id1, id2 = rec["point1"], rec["point2"]
            darker, score = rec["darker"], rec["darker_score"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"bad comparison record {rec!r}") from exc
        if id1 not in table or id2 not in table:
            missing = id1 if id1 not in table else id2
            raise IntegrityError(f"comparison references unknown point {missing!r}")
        if darker is None or score is None:
            continue
        if darker not in DARKER_LABELS:
            raise IntegrityError(f"darker label {darker!r} not in {DARKER_LABELS}")
        weight = float(score)
        if not weight >= 0:
            raise IntegrityError(f"negative or NaN darker_score {score!r}")
        p1, p2 = table[id1], table[id2]
        if not (p1[2] and p2[2]):
            continue
        out.append(Comparison(p1[:2], p2[:2], darker, weight))
    return JudgmentSet(height, width, out)


def load_judgments(path, height: int, width: int) -> JudgmentSet:
    """Read an IIW judgment JSON file and bind it to ``height x width`` pixels."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed JSON ({exc.msg})") from exc
    return parse_judgments(doc, height, width)
