import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


def mondrian(height=64, width=64, seed=0):
    """4x4 blocks of random colors and a horizontal shading ramp in [0.3, 0.9]."""
    rng = np.random.default_rng(seed)
    colors = rng.uniform(0.2, 0.9, size=(3, 4, 4))
    refl = np.repeat(np.repeat(colors, height // 4, axis=1), width // 4, axis=2)
    ramp = np.linspace(0.3, 0.9, width)[None, None, :] * np.ones((1, height, 1))
    return refl, ramp


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


WHDR_CODES = {(0, 0): 51, (0, 3): 204, (3, 0): 128, (3, 3): 133}


def whdr_reflectance_codes():
    """4x4 RGB 8-bit codes used with the judgments_*.json fixtures."""
    codes = np.full((4, 4, 3), 90, dtype=np.uint8)
    for (r, c), v in WHDR_CODES.items():
        codes[r, c] = v
    return codes


@pytest.fixture
def whdr_png(tmp_path):
    import cv2
    path = tmp_path / "refl.png"
    cv2.imwrite(str(path), whdr_reflectance_codes()[:, :, ::-1])
    return path


# criterion number -> (title, {part: (passed, note)}), filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, parts = ACCEPTANCE[number]
        ok = all(passed for passed, _ in parts.values())
        notes = "; ".join(f"{part}: {'ok' if passed else 'FAILED'} ({note})" if note else
                          f"{part}: {'ok' if passed else 'FAILED'}"
                          for part, (passed, note) in parts.items())
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title} | {notes}")
