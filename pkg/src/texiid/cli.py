"""Command-line interface: decompose, enhance, recolor, eval-whdr, bench.

Exit codes: 0 success, 1 numerical failure, 2 invalid input (shape, format,
parameters), 3 I/O failure, 4 undefined evaluation (zero judgment weight,
empty dataset).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import apps
from .decompose import DecompositionResult, decompose
from .errors import (EvaluationError, FormatError, IntegrityError, NumericalError, ParameterError,
                     ShapeError)
from .imageio import encode_png, load_image, load_judgments, write_atomic
from .metrics import whdr
from .params import SolverParams

log = logging.getLogger("texiid")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT, EXIT_IO, EXIT_EVAL = 0, 1, 2, 3, 4

# flag name -> (SolverParams field, converter)
PARAM_FLAGS = {
    "alpha": ("alpha", float),
    "beta": ("beta", float),
    "gamma-weight": ("gamma", float),
    "mu": ("mu", float),
    "sigma": ("sigma", float),
    "s0": ("s0", float),
    "eps": ("eps", float),
    "max-iters": ("max_iters", int),
    "tv-iters": ("tv_iters", int),
    "tv-tol": ("tv_tol", float),
    "floor": ("division_floor", float),
    "l0-passes": ("l0_passes", int),
    "shading-init": ("shading_init", str),
}
IMAGE_SUFFIXES = (".png", ".ppm")
BENCH_HEADER = ["image_id", "whdr", "wall_time_s", "iterations"]


class ConfigError(ValueError):
    pass


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment; keys use flag spelling."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.lstrip("-").replace("_", "-")] = value
    return out


def _merged(args: argparse.Namespace) -> dict:
    """Flag values over config-file values; unset entries are absent."""
    values = {}
    if getattr(args, "config", None):
        values.update(read_config(args.config))
    for key, val in vars(args).items():
        flag = key.replace("_", "-")
        if val is not None and val is not False:
            values[flag] = val
    return values


def solver_params(values: dict) -> SolverParams:
    kwargs = {}
    for flag, (name, conv) in PARAM_FLAGS.items():
        if flag in values:
            try:
                kwargs[name] = conv(values[flag])
            except ValueError as exc:
                raise ConfigError(f"bad value for {flag}: {values[flag]!r}") from exc
    if "gray-shading" in values:
        gray = values["gray-shading"]
        kwargs["multichannel_shading"] = not (gray if isinstance(gray, bool) else _to_bool(gray))
    return SolverParams(**kwargs)


def _flag(values: dict, name: str) -> bool:
    val = values.get(name, False)
    return val if isinstance(val, bool) else _to_bool(val)


@dataclass
class RunConfig:
    input: Path
    r_prior: Path
    output_dir: Path
    params: SolverParams
    display_rescale: str = "clip"
    emit_trace: bool = False
    omit_timing: bool = False

    @classmethod
    def from_values(cls, values: dict) -> "RunConfig":
        for key in ("input", "prior", "out"):
            if key not in values:
                raise ConfigError(f"missing required setting --{key}")
        rescale = values.get("rescale", "clip")
        if rescale not in ("clip", "minmax"):
            raise ConfigError(f"rescale must be clip or minmax, got {rescale!r}")
        return cls(Path(values["input"]), Path(values["prior"]), Path(values["out"]),
                   solver_params(values), rescale, _flag(values, "trace"),
                   _flag(values, "omit-timing"))


def trace_json(result: DecompositionResult, omit_timing: bool = False) -> str:
    doc = {
        "iterations": result.iterations,
        "residuals": [{"eps_R": r.eps_r, "eps_S": r.eps_s} for r in result.residual_trace],
        "energy": list(result.energy_trace),
        "wall_time_s": None if omit_timing else result.wall_time,
    }
    return json.dumps(doc, indent=2) + "\n"


def _run_decomposition(cfg: RunConfig):
    image = load_image(cfg.input)
    prior = load_image(cfg.r_prior)
    if image.size != prior.size:
        raise ShapeError(f"prior {cfg.r_prior} is {prior.height}x{prior.width} but input "
                         f"{cfg.input} is {image.height}x{image.width}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    result = decompose(image, prior, cfg.params)
    if cfg.emit_trace:
        write_atomic(cfg.output_dir / "trace.json", trace_json(result, cfg.omit_timing).encode())
    return image, result


def cmd_decompose(cfg: RunConfig) -> int:
    _, result = _run_decomposition(cfg)
    out = cfg.output_dir
    write_atomic(out / "reflectance.png", encode_png(result.reflectance, cfg.display_rescale))
    write_atomic(out / "shading.png", encode_png(result.shading, cfg.display_rescale))
    if cfg.emit_trace:
        for mode in ("clip", "minmax"):
            write_atomic(out / f"reflectance_{mode}.png", encode_png(result.reflectance, mode))
            write_atomic(out / f"shading_{mode}.png", encode_png(result.shading, mode))
    log.info("decomposed %s in %d iterations (%.2fs)", cfg.input, result.iterations,
             result.wall_time)
    return EXIT_OK


def cmd_enhance(cfg: RunConfig, gamma: float = 2.2) -> int:
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    _, result = _run_decomposition(cfg)
    enhanced = apps.enhance(result.reflectance, result.shading, gamma)
    write_atomic(cfg.output_dir / "enhanced.png", encode_png(enhanced, "clip"))
    return EXIT_OK


def cmd_recolor(cfg: RunConfig, mask: Path, swatch: str) -> int:
    mask_img = load_image(mask)
    image = load_image(cfg.input)
    if mask_img.size != image.size:
        raise ShapeError(f"mask {mask} is {mask_img.height}x{mask_img.width} but input "
                         f"is {image.height}x{image.width}")
    color = apps.parse_color(swatch)
    patch = color if color is not None else load_image(swatch)
    _, result = _run_decomposition(cfg)
    out = apps.recolor(result.reflectance, result.shading, mask_img, patch)
    write_atomic(cfg.output_dir / "recolored.png", encode_png(out, "clip"))
    return EXIT_OK


def cmd_eval_whdr(pred: Path, judgments: Path, delta: float = 0.10, stream=None) -> int:
    refl = load_image(pred)
    judged = load_judgments(judgments, refl.height, refl.width)
    report = whdr(refl, judged, delta)
    print(json.dumps(report.to_dict()), file=stream or sys.stdout)
    return EXIT_OK


@dataclass(frozen=True)
class BenchEntry:
    image_id: str
    whdr: float
    wall_time: float
    iterations: int


def _bench_one(image_path: Path, prior_path: Path, judgment_path: Path,
               params: SolverParams) -> BenchEntry:
    image = load_image(image_path)
    prior = load_image(prior_path)
    judged = load_judgments(judgment_path, image.height, image.width)
    result = decompose(image, prior, params)
    report = whdr(result.reflectance, judged)
    return BenchEntry(image_path.stem, report.whdr, result.wall_time, result.iterations)


def _find_with_suffix(directory: Path, stem: str) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        cand = directory / f"{stem}{suffix}"
        if cand.is_file():
            return cand
    return None


def bench_jobs(dataset_dir: Path, priors_dir: Path) -> list[tuple[Path, Path, Path]]:
    """(image, prior, judgments) triples sorted by basename.

    Images missing a prior or a judgment file are logged and skipped.
    """
    if not dataset_dir.is_dir():
        raise FileNotFoundError(f"dataset directory {dataset_dir} not found")
    jobs = []
    for img in sorted(p for p in dataset_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
        judgment = dataset_dir / f"{img.stem}.json"
        prior = _find_with_suffix(priors_dir, img.stem)
        if prior is None:
            log.warning("skipping %s: no prior in %s", img.stem, priors_dir)
            continue
        if not judgment.is_file():
            log.warning("skipping %s: no judgment file %s", img.stem, judgment.name)
            continue
        jobs.append((img, prior, judgment))
    return jobs


def bench_csv(entries: list[BenchEntry]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    for e in entries:
        writer.writerow([e.image_id, repr(e.whdr), repr(e.wall_time), e.iterations])
    n = len(entries)
    writer.writerow(["mean", repr(sum(e.whdr for e in entries) / n),
                     repr(sum(e.wall_time for e in entries) / n),
                     repr(sum(e.iterations for e in entries) / n)])
    return buf.getvalue()


def read_bench_csv(text: str) -> tuple[list[BenchEntry], BenchEntry]:
    """Parse :func:`bench_csv` output into per-image rows and the mean row."""
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != BENCH_HEADER:
        raise FormatError(f"unexpected bench header {rows[0]}")
    entries = [BenchEntry(r[0], float(r[1]), float(r[2]), int(r[3])) for r in rows[1:-1]]
    last = rows[-1]
    return entries, BenchEntry(last[0], float(last[1]), float(last[2]), float(last[3]))


def cmd_bench(dataset_dir: Path, priors_dir: Path, params: SolverParams, out: Path,
              workers: int = 1, stream=None) -> int:
    jobs = bench_jobs(Path(dataset_dir), Path(priors_dir))
    if not jobs:
        raise EvaluationError(f"no usable images in {dataset_dir}")
    entries = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_bench_one, *job, params) for job in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_bench_one(*job, params) for job in jobs]
    entries = sorted(results, key=lambda e: e.image_id)
    text = bench_csv(entries)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_atomic(out, text.encode())
    mean = text.strip().splitlines()[-1].split(",")
    print(f"images={len(entries)} mean_whdr={mean[1]} mean_wall_time_s={mean[2]}",
          file=stream or sys.stdout)
    return EXIT_OK


def _add_param_flags(sp: argparse.ArgumentParser) -> None:
    defaults = SolverParams()
    for flag, (name, _) in PARAM_FLAGS.items():
        sp.add_argument(f"--{flag}", default=None, help=f"default {getattr(defaults, name)}")


def _add_solver_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key = value file; flags override it")
    sp.add_argument("--input", help="input RGB image (PNG/PPM)")
    sp.add_argument("--prior", help="precomputed reflectance prior R' (same size)")
    sp.add_argument("--out", help="output directory")
    _add_param_flags(sp)
    sp.add_argument("--gray-shading", action="store_true", default=None,
                    help="single-channel shading instead of RGB shading")
    sp.add_argument("--rescale", choices=("clip", "minmax"), default=None)
    sp.add_argument("--trace", action="store_true", default=None,
                    help="write trace.json and both clip/minmax renderings")
    sp.add_argument("--omit-timing", action="store_true", default=None,
                    help="write wall_time_s as null so traces are byte-reproducible")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="texiid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_solver_flags(sub.add_parser("decompose", help="write reflectance.png and shading.png"))

    sp = sub.add_parser("enhance", help="low-light enhancement by gamma on the shading")
    _add_solver_flags(sp)
    sp.add_argument("--gamma", type=float, default=2.2)

    sp = sub.add_parser("recolor", help="replace material color/texture under a mask")
    _add_solver_flags(sp)
    sp.add_argument("--mask", required=True)
    sp.add_argument("--swatch", required=True,
                    help="'#rrggbb', 'r,g,b' in [0,1], or a texture image")

    sp = sub.add_parser("eval-whdr", help="WHDR of a reflectance image against IIW judgments")
    sp.add_argument("pred")
    sp.add_argument("judgments")
    sp.add_argument("--delta", type=float, default=0.10)

    sp = sub.add_parser("bench", help="run the pipeline over a dataset and tabulate WHDR")
    sp.add_argument("dataset_dir")
    sp.add_argument("priors_dir")
    sp.add_argument("--out", default="bench.csv", help="CSV path")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--config")
    _add_param_flags(sp)
    sp.add_argument("--gray-shading", action="store_true", default=None)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "eval-whdr":
        return cmd_eval_whdr(Path(args.pred), Path(args.judgments), args.delta)
    values = _merged(args)
    if args.command == "bench":
        return cmd_bench(Path(args.dataset_dir), Path(args.priors_dir), solver_params(values),
                         Path(args.out), args.workers)
    cfg = RunConfig.from_values(values)
    if args.command == "decompose":
        return cmd_decompose(cfg)
    if args.command == "enhance":
        return cmd_enhance(cfg, args.gamma)
    return cmd_recolor(cfg, Path(args.mask), args.swatch)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return _dispatch(args)
    except (ShapeError, FormatError, IntegrityError, ParameterError, ConfigError) as exc:
        code, message = EXIT_INPUT, str(exc)
    except EvaluationError as exc:
        code, message = EXIT_EVAL, str(exc)
    except OSError as exc:
        code, message = EXIT_IO, str(exc)
    except NumericalError as exc:
        code, message = EXIT_NUMERIC, str(exc)
    print(f"texiid: error: {message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
