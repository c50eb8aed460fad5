"""Acceptance criteria, one pass/fail line each in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py`` (or ``python3
tests/test_acceptance.py``). Tolerances below are fixed; the two pinned by
a first solver run are marked as such.
"""
import json
import sys
import time
from contextlib import contextmanager
from types import SimpleNamespace

import cv2
import numpy as np
import pytest

from conftest import ACCEPTANCE, mondrian
from oracles import brute_whdr, dense_l0_step, taut_string_tv1d
from texiid.apps import enhance, gamma_shading, recolor
from texiid.cli import main, read_bench_csv
from texiid.decompose import SolverParams, decompose, project_constraint, update_shading
from texiid.imageio import Comparison, JudgmentSet, encode_png, load_image
from texiid.l0grad import L0Params, fft_solve, threshold_gradients
from texiid.metrics import whdr
from texiid.tensor import GradientPair, ImageTensor, channel_max, clamp_unit, hadamard
from texiid.tvdenoise import TvParams, tv_denoise, tv_objective

FFT_REL_TOL = 1e-8
FFT_TIME_LIMIT_S = 1.0
TV_ORACLE_TOL = 1e-3
TV_ORACLE_ITERS = 400
DESCENT_SLACK = 1e-10
SHADING_TOL = 1e-15
MONDRIAN_EPS = 1e-5
MONDRIAN_MAX_ITERS = 10
# pinned from the first solver run at the criterion's settings (64x64, seed 0,
# 10 iterations): MAE 1.316e-4, rounded up for platform FFT differences
MONDRIAN_DELTA_R = 2e-4
PERF_LIMIT_S = 10.0
GAMMA_TOL = 1e-4


@contextmanager
def criterion(number, title, part):
    """Record the outcome of one part of an acceptance criterion."""
    entry = ACCEPTANCE.setdefault(number, (title, {}))[1]
    note = SimpleNamespace(text="")
    try:
        yield note
    except BaseException:
        entry[part] = (False, note.text)
        raise
    entry[part] = (True, note.text)


def _save_rgb(path, arr):
    codes = np.clip(np.floor(arr * 255 + 0.5), 0, 255).astype(np.uint8)
    assert cv2.imwrite(str(path), np.moveaxis(codes, 0, -1)[:, :, ::-1])


def _synthetic_judgments(refl, rng, n=40, delta=0.10):
    """IIW-style document labelled from ground-truth reflectance, plus the pixel pairs."""
    _, h, w = refl.shape
    light = refl.mean(axis=0)
    points, comps, pairs = [], [], []
    for k in range(n):
        (r1, c1), (r2, c2) = [(int(rng.integers(h)), int(rng.integers(w))) for _ in range(2)]
        for pid, (r, c) in ((2 * k, (r1, c1)), (2 * k + 1, (r2, c2))):
            points.append({"id": pid, "x": c / (w - 1), "y": r / (h - 1), "opaque": True})
        ratio = light[r1, c1] / light[r2, c2]
        label = "2" if ratio > 1 + delta else "1" if 1 / ratio > 1 + delta else "E"
        if rng.random() < 0.2:
            label = str(rng.choice(["1", "2", "E"]))  # human noise
        weight = float(rng.uniform(0.1, 1.0))
        comps.append({"id": k, "point1": 2 * k, "point2": 2 * k + 1, "darker": label,
                      "darker_score": weight})
        pairs.append(SimpleNamespace(point1=(r1, c1), point2=(r2, c2), darker=label,
                                     weight=weight))
    return {"intrinsic_points": points, "intrinsic_comparisons": comps}, pairs


def test_c1_fft_solve_matches_dense_oracle():
    with criterion(1, "FFT solve vs dense oracle", "25 instances") as note:
        rng = np.random.default_rng(101)
        p = L0Params(beta=0.01, mu=1.0)
        worst, elapsed = 0.0, 0.0
        for k in range(25):
            n = 8 if k % 2 == 0 else 16
            t = ImageTensor(rng.random((3, n, n)))
            g = GradientPair(ImageTensor(rng.normal(size=t.shape)),
                             ImageTensor(rng.normal(size=t.shape)))
            start = time.perf_counter()
            got = fft_solve(t, g, p).data
            elapsed += time.perf_counter() - start
            want = dense_l0_step(t.data, (g.gx.data, g.gy.data), 1.0)
            worst = max(worst, np.linalg.norm(got - want) / np.linalg.norm(want))
        note.text = f"max rel err {worst:.1e}, {elapsed * 1e3:.1f} ms"
        assert worst <= FFT_REL_TOL
        assert elapsed < FFT_TIME_LIMIT_S


def test_c2_threshold_partition():
    with criterion(2, "Threshold partition", "1e5 pixels") as note:
        rng = np.random.default_rng(102)
        r = rng.normal(0.5, 0.04, size=(3, 100, 1000))
        out = threshold_gradients(ImageTensor(r), L0Params(beta=0.01, mu=1.0))
        gx = np.roll(r, -1, axis=2) - r
        gy = np.roll(r, -1, axis=1) - r
        mag = (gx ** 2 + gy ** 2).sum(axis=0)
        zeroed = mag <= 0.01
        note.text = f"{zeroed.mean():.1%} zeroed"
        assert 0.05 < zeroed.mean() < 0.95
        for got, grad in ((out.gx.data, gx), (out.gy.data, gy)):
            assert (got[:, zeroed] == 0.0).all()
            assert (got[:, ~zeroed] == grad[:, ~zeroed]).all()


def test_c3_tv_matches_taut_string():
    with criterion(3, "TV denoise vs taut string", "1x64 oracle") as note:
        rng = np.random.default_rng(103)
        p = TvParams(inner_iters=TV_ORACLE_ITERS, dual_tol=0.0)
        worst = 0.0
        for _ in range(50):
            s, prior = rng.random(64), rng.random(64)
            h = tv_denoise(ImageTensor(s[None, None]), ImageTensor(prior[None, None]), p)
            want = prior + np.asarray(taut_string_tv1d(s - prior, p.alpha / p.sigma))
            worst = max(worst, float(np.abs(h.data[0, 0] - want).max()))
        note.text = (f"max abs err {worst:.2e} at {TV_ORACLE_ITERS} iterations, "
                     f"bound {TV_ORACLE_TOL}")
        assert worst <= TV_ORACLE_TOL


def test_c3_tv_descent_every_inner_iteration():
    with criterion(3, "TV denoise vs taut string", "2-D descent") as note:
        rng = np.random.default_rng(104)
        p = TvParams(inner_iters=TV_ORACLE_ITERS, dual_tol=0.0)
        worst_rise = -np.inf
        for case in range(20):
            shape = (3 if case % 2 else 1, int(rng.integers(4, 20)), int(rng.integers(4, 20)))
            s = ImageTensor(rng.random(shape))
            prior = ImageTensor(rng.random(shape))
            values = []
            tv_denoise(s, prior, p, lambda k, h: values.append(tv_objective(h, s, prior, p)))
            rises = np.diff(values[1:])
            worst_rise = max(worst_rise, float(rises.max()))
        note.text = f"largest step change {worst_rise:.1e}"
        assert worst_rise <= DESCENT_SLACK


def test_c4_whdr_oracle_equivalence():
    with criterion(4, "WHDR vs brute force", "1000 sets + scaling") as note:
        rng = np.random.default_rng(105)
        for _ in range(1000):
            h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
            r = rng.uniform(0.01, 1.0, size=(3, h, w))
            comps = [Comparison((int(rng.integers(h)), int(rng.integers(w))),
                                (int(rng.integers(h)), int(rng.integers(w))),
                                str(rng.choice(["1", "2", "E"])), float(rng.uniform(0.05, 1)))
                     for _ in range(int(rng.integers(1, 40)))]
            js = JudgmentSet(h, w, comps)
            value = whdr(ImageTensor(r), js).whdr
            assert value == brute_whdr(r, js)
            for c in (0.1, 1.0, 7.0):
                assert whdr(ImageTensor(c * r), js).whdr == value
        note.text = "exact"


def test_c5_shading_step_and_projection():
    with criterion(5, "Closed-form shading step", "fixture + projection fuzz") as note:
        ones = ImageTensor.full(4, 4, 3, 1.0)
        s = update_shading(ImageTensor.full(4, 4, 3, 0.6), ones, ImageTensor.full(4, 4, 3, 0.4),
                           SolverParams())
        err = float(np.abs(s.data - 0.5).max())
        assert err <= SHADING_TOL
        rng = np.random.default_rng(106)
        for _ in range(500):
            shape = (int(rng.integers(1, 10)), int(rng.integers(1, 10)))
            i = ImageTensor(rng.random((3, *shape)))
            for channels in (1, 3):
                cand = ImageTensor(rng.uniform(-0.5, 1.5, (channels, *shape)))
                out = project_constraint(cand, i)
                # per pixel: the brightest image channel never exceeds the shading there
                assert (channel_max(i).data <= channel_max(out).data).all()
                if channels == 3:
                    assert (i.data <= out.data).all()
        note.text = f"fixture err {err:.0e}"


@pytest.fixture(scope="module")
def mondrian_run():
    refl, ramp = mondrian(64, 64, seed=0)
    i = ImageTensor(refl * ramp)
    res = decompose(i, ImageTensor(refl), SolverParams(eps=MONDRIAN_EPS,
                                                       max_iters=MONDRIAN_MAX_ITERS))
    return refl, res


def test_c6_mondrian_reflectance_error(mondrian_run):
    refl, res = mondrian_run
    with criterion(6, "Synthetic Mondrian", "MAE") as note:
        mae = float(np.abs(res.reflectance.data - refl).mean())
        note.text = f"MAE {mae:.2e} <= {MONDRIAN_DELTA_R:.0e}"
        assert mae <= MONDRIAN_DELTA_R


def test_c6_mondrian_converges_within_ten(mondrian_run):
    _, res = mondrian_run
    with criterion(6, "Synthetic Mondrian", "convergence") as note:
        last = res.residual_trace[-1]
        note.text = (f"{res.iterations} iterations, eps_R {last.eps_r:.1e}, "
                     f"eps_S {last.eps_s:.1e}")
        assert res.iterations <= MONDRIAN_MAX_ITERS
        assert last.eps_r <= MONDRIAN_EPS and last.eps_s <= MONDRIAN_EPS


@pytest.mark.slow
def test_c7_performance_512x384(tmp_path):
    with criterion(7, "512x384 in <= 10 s", "bench CSV") as note:
        rng = np.random.default_rng(107)
        data, priors = tmp_path / "data", tmp_path / "priors"
        data.mkdir()
        priors.mkdir()
        refl = rng.uniform(0.05, 1.0, (3, 384, 512))
        _save_rgb(data / "perf.png", refl * rng.uniform(0.2, 1.0, (1, 384, 512)))
        _save_rgb(priors / "perf.png", refl)
        doc, _ = _synthetic_judgments(refl, rng)
        (data / "perf.json").write_text(json.dumps(doc))
        out = tmp_path / "bench.csv"
        assert main(["bench", str(data), str(priors), "--out", str(out)]) == 0
        (entry,), _ = read_bench_csv(out.read_text())
        note.text = f"{entry.wall_time:.2f} s, {entry.iterations} iterations"
        assert entry.iterations == SolverParams().max_iters
        assert entry.wall_time <= PERF_LIMIT_S


def test_c8_bench_harness_matches_brute_whdr(tmp_path):
    with criterion(8, "Bench harness on fixture corpus", "3 images") as note:
        rng = np.random.default_rng(108)
        data, priors = tmp_path / "data", tmp_path / "priors"
        data.mkdir()
        priors.mkdir()
        expected = {}
        for k in range(3):
            refl, ramp = mondrian(32, 32, seed=10 + k)
            name = f"scene{k}"
            _save_rgb(data / f"{name}.png", refl * ramp)
            _save_rgb(priors / f"{name}.png", refl)
            doc, pairs = _synthetic_judgments(refl, rng)
            (data / f"{name}.json").write_text(json.dumps(doc))
            res = decompose(load_image(data / f"{name}.png"), load_image(priors / f"{name}.png"))
            expected[name] = brute_whdr(res.reflectance.data, pairs)
        out = tmp_path / "bench.csv"
        assert main(["bench", str(data), str(priors), "--out", str(out)]) == 0
        entries, mean = read_bench_csv(out.read_text())
        got = {e.image_id: e.whdr for e in entries}
        note.text = ", ".join(f"{k}={v:.4f}" for k, v in got.items())
        assert got == expected
        assert mean.whdr == sum(e.whdr for e in entries) / 3


def test_c9_decompose_is_deterministic(tmp_path):
    with criterion(9, "Deterministic decompose outputs", "byte-identical") as note:
        refl, ramp = mondrian(32, 32, seed=5)
        _save_rgb(tmp_path / "in.png", refl * ramp)
        _save_rgb(tmp_path / "prior.png", refl)
        base = ["decompose", "--input", str(tmp_path / "in.png"),
                "--prior", str(tmp_path / "prior.png"), "--trace"]
        for run_name in ("a", "b"):
            assert main(base + ["--out", str(tmp_path / run_name), "--omit-timing"]) == 0
        for run_name in ("c", "d"):
            assert main(base + ["--out", str(tmp_path / run_name)]) == 0
        for name in ("reflectance.png", "shading.png", "trace.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
            assert (tmp_path / "a" / name).read_bytes() != b""
        timed = [json.loads((tmp_path / r / "trace.json").read_text()) for r in ("c", "d")]
        for doc in timed:
            doc.pop("wall_time_s")
        assert timed[0] == timed[1]
        note.text = "PNGs and trace identical"


def test_c10_applications(tmp_path):
    with criterion(10, "Enhancement and recoloring", "identities + gamma fixture") as note:
        refl, ramp = mondrian(32, 32, seed=6)
        _save_rgb(tmp_path / "in.png", refl * ramp)
        _save_rgb(tmp_path / "prior.png", refl)
        mask = tmp_path / "mask.png"
        cv2.imwrite(str(mask), np.zeros((32, 32), np.uint8))
        io = ["--input", str(tmp_path / "in.png"), "--prior", str(tmp_path / "prior.png"),
              "--out", str(tmp_path / "out")]
        assert main(["enhance", *io, "--gamma", "1"]) == 0
        assert main(["recolor", *io, "--mask", str(mask), "--swatch", "#ff00ff"]) == 0

        res = decompose(load_image(tmp_path / "in.png"), load_image(tmp_path / "prior.png"))
        r, s = res.reflectance, res.shading
        plain = clamp_unit(hadamard(r, s))
        assert (enhance(r, s, 1.0).data == plain.data).all()
        zero = ImageTensor.full(32, 32, 1, 0.0)
        assert (recolor(r, s, zero, (1.0, 0.0, 1.0)).data == plain.data).all()
        png = encode_png(plain)
        assert (tmp_path / "out" / "enhanced.png").read_bytes() == png
        assert (tmp_path / "out" / "recolored.png").read_bytes() == png

        corrected = gamma_shading(ImageTensor.full(1, 1, 1, 0.25), 2.2).data.item()
        note.text = f"0.25 -> {corrected:.4f}"
        assert abs(corrected - 0.5325) <= GAMMA_TOL


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
