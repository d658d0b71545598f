"""Command-line interface: ``scsa reconstruct|enhance|metrics|optimize|batch``.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .color import luminance, rgb_to_hsv
from .enhance import EnhanceConfig, cluster_value, enhance, prepare
from .imageio import SUPPORTED_SUFFIXES, box_downsample, list_images, read_image, write_image
from .metrics import METRIC_NAMES, compute_metrics, mse, psnr_from_mse, ssim
from .optimize import GaConfig, asf_select, run_nsga2
from .reconstruct import reconstruct_with_field

log = logging.getLogger("scsa")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

REPORT_COLUMNS = ("image",) + METRIC_NAMES + ("h", "gammas", "k")

DEFAULTS = {
    "h": "auto",
    "gammas": "auto",
    "k": "auto",
    "seed": 0,
    "max_dim": 512,
    "population": 20,
    "generations": 10,
    "crossover_prob": 0.2,
    "mutation_prob": 0.5,
    "eta_c": 15.0,
    "eta_m": 20.0,
    "weights": [0.5, 0.5],
    "k_min": 2,
    "k_max": 6,
    "jobs": None,
}


class UsageError(Exception):
    pass


# -- helpers -------------------------------------------------------------------

def _jsonable(value):
    """Make floats JSON-safe: infinities and NaN become the strings 'inf', '-inf', 'nan'."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, np.integer):
        return int(value)
    return value


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _parse_gammas(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(g) for g in text]
    if str(text).strip().lower() == "auto":
        return "auto"
    try:
        return [float(g) for g in str(text).replace(";", ",").split(",") if g.strip()]
    except ValueError as exc:
        raise UsageError(f"invalid gamma list {text!r}") from exc


def _parse_k(text):
    if text is None:
        return None
    if str(text).strip().lower() == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError as exc:
        raise UsageError(f"--k must be an integer or 'auto', got {text!r}") from exc
    if k < 1:
        raise UsageError("--k must be positive")
    return k


def _parse_h(text):
    if text is None:
        return None
    if str(text).strip().lower() == "auto":
        return "auto"
    try:
        h = float(text)
    except ValueError as exc:
        raise UsageError(f"--h must be a number or 'auto', got {text!r}") from exc
    if not h > 0:
        raise UsageError("--h must be positive")
    return h


def effective_config(args) -> dict:
    """Defaults, overridden by ``--config`` JSON, overridden by explicit flags."""
    config = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        config.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    config["h"] = _parse_h(config["h"])
    config["gammas"] = _parse_gammas(config["gammas"])
    config["k"] = _parse_k(config["k"])
    if (config["h"] == "auto") != (config["gammas"] == "auto"):
        raise UsageError("--h and --gammas must both be given, or both left as 'auto'")
    if config["k"] != "auto" and config["gammas"] != "auto":
        if len(config["gammas"]) != config["k"]:
            raise UsageError(f"{len(config['gammas'])} gammas given for k={config['k']}")
    return config


def _enhance_config(cfg: dict) -> EnhanceConfig:
    ga = GaConfig(population_size=int(cfg["population"]), generations=int(cfg["generations"]),
                  crossover_prob=float(cfg["crossover_prob"]),
                  mutation_prob=float(cfg["mutation_prob"]),
                  eta_c=float(cfg["eta_c"]), eta_m=float(cfg["eta_m"]), seed=int(cfg["seed"]))
    return EnhanceConfig(h=cfg["h"], gammas=cfg["gammas"], k=cfg["k"], seed=int(cfg["seed"]),
                         k_min=int(cfg["k_min"]), k_max=int(cfg["k_max"]), ga=ga,
                         weights=tuple(cfg["weights"]))


def _check_output(path) -> Path:
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise UsageError(f"output {path} must end in one of {', '.join(SUPPORTED_SUFFIXES)}")
    return path


def _load(path, max_dim):
    image, gray = read_image(path)
    image, factor = box_downsample(image, max_dim)
    return image, gray, factor


def value_histograms(before_rgb, after_rgb) -> np.ndarray:
    """256-bin histograms of the 8-bit V channel; columns (bin, before, after)."""
    out = np.zeros((256, 3), dtype=np.int64)
    out[:, 0] = np.arange(256)
    for col, rgb in ((1, before_rgb), (2, after_rgb)):
        v = np.rint(np.clip(rgb_to_hsv(np.clip(rgb, 0, 1)).v, 0, 1) * 255).astype(int)
        out[:, col] = np.bincount(v.ravel(), minlength=256)
    return out


def _write_histogram_csv(path: Path, hist: np.ndarray):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin", "count_before", "count_after"])
        writer.writerows(hist.tolist())


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ("inf" if value > 0 else ("-inf" if value < 0 else "nan"))
    return str(value)


# -- commands ------------------------------------------------------------------

def cmd_reconstruct(args) -> int:
    image, gray, factor = _load(args.input, args.max_dim)
    potential = np.rint(np.clip(luminance(image), 0.0, 1.0) * 255.0)
    if args.h is None or not args.h > 0:
        raise UsageError("--h must be a positive number")
    gammas = args.gamma or [4.0]
    if any(g < 0 for g in gammas):
        raise UsageError("--gamma must be non-negative")
    out = _check_output(args.output)
    results = []
    for gamma in gammas:
        rec = reconstruct_with_field(potential, args.h, np.full(potential.shape, float(gamma)),
                                     require_square=False)
        if not np.all(np.isfinite(rec)):
            raise FloatingPointError("reconstruction produced non-finite values")
        target = out if len(gammas) == 1 else out.with_name(f"{out.stem}_g{gamma:g}{out.suffix}")
        write_image(target, rec / 255.0, gray=True)
        written = np.clip(np.rint(rec), 0, 255)
        m = mse(potential, written)
        results.append({"output": str(target), "h": args.h, "gamma": gamma, "mse": m,
                        "psnr": psnr_from_mse(m), "ssim": ssim(potential, written),
                        "downsample_factor": factor})
    for row in results:
        print(json.dumps(_jsonable(row), sort_keys=True))
    return EXIT_OK


def _sidecar(input_path, output_path, cfg, factor, image, result, gray) -> dict:
    model = result.cluster_model
    return {
        "input": str(input_path),
        "output": str(output_path) if output_path else None,
        "config": cfg,
        "downsample_factor": factor,
        "shape": list(image.shape[:2]),
        "grayscale": gray,
        "degenerate": result.degenerate,
        "h": result.h,
        "gammas": list(result.gammas),
        "k": model.k if model else None,
        "cluster_centers": model.centers.tolist() if model else [],
        "silhouette": [[k, s] for k, s in result.silhouette.candidates] if result.silhouette else None,
        "metrics": result.metrics.as_dict() if result.metrics else None,
        "pareto_front": result.front.to_dict()["members"] if result.front is not None else None,
    }


def _enhance_file(input_path, output_path, cfg):
    image, gray, factor = _load(input_path, cfg["max_dim"])
    result = enhance(image, _enhance_config(cfg))
    return image, gray, factor, result


def cmd_enhance(args) -> int:
    cfg = effective_config(args)
    out = _check_output(args.output)
    image, gray, factor, result = _enhance_file(args.input, out, cfg)
    write_image(out, result.image, gray=gray)
    hist_path = out.with_name(out.stem + "_hist.csv")
    _write_histogram_csv(hist_path, value_histograms(image if not gray else np.stack([image] * 3, -1),
                                                     result.image))
    sidecar = _sidecar(args.input, out, cfg, factor, image, result, gray)
    sidecar["histogram_csv"] = str(hist_path)
    sidecar_path = Path(args.report) if args.report else out.with_suffix(".json")
    sidecar_path.write_text(_dump_json(sidecar))
    summary = {"output": str(out), "sidecar": str(sidecar_path), "h": result.h,
               "gammas": list(result.gammas), "degenerate": result.degenerate}
    if result.metrics:
        summary.update(result.metrics.as_dict())
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return EXIT_OK


def cmd_metrics(args) -> int:
    ref, _ = read_image(args.reference)
    test, _ = read_image(args.test)
    if ref.shape != test.shape:
        raise UsageError(f"image sizes differ: {ref.shape} vs {test.shape}")
    report = compute_metrics(np.rint(ref * 255), np.rint(test * 255)).as_dict()
    print(json.dumps(_jsonable(report), sort_keys=True))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_NAMES)
    writer.writerow([_fmt(report[name]) for name in METRIC_NAMES])
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = effective_config(args)
    image, _, factor = _load(args.input, cfg["max_dim"])
    prepared = prepare(image)
    if prepared.degenerate:
        raise FloatingPointError("constant value channel: nothing to optimise")
    econf = _enhance_config(cfg)
    model, report = cluster_value(prepared, econf.k, econf.seed, econf.k_min, econf.k_max)
    front = run_nsga2(prepared, model, econf.ga)
    chosen, objectives = asf_select(front, econf.weights)
    payload = {
        "input": str(args.input),
        "config": cfg,
        "downsample_factor": factor,
        "k": model.k,
        "cluster_centers": model.centers.tolist(),
        "front": front.to_dict(),
        "selected": dict(chosen.as_dict(), j1=objectives.j1, j2=objectives.j2),
    }
    text = _dump_json(payload)
    if args.report:
        Path(args.report).write_text(text)
        print(json.dumps(_jsonable(payload["selected"]), sort_keys=True))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _batch_one(path: str, cfg: dict, output_dir):
    try:
        image, gray, factor, result = _enhance_file(path, None, cfg)
        if output_dir:
            write_image(Path(output_dir) / (Path(path).stem + ".png"), result.image, gray=gray)
        if result.degenerate:
            return {"image": Path(path).name, "error": "degenerate: constant value channel"}
        row = {"image": Path(path).name, **result.metrics.as_dict(), "h": result.h,
               "gammas": ";".join(repr(float(g)) for g in result.gammas),
               "k": result.cluster_model.k, "downsample_factor": factor}
        return row
    except OSError as exc:
        return {"image": Path(path).name, "error": f"io: {exc}"}
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return {"image": Path(path).name, "error": f"numeric: {exc}"}


def batch_report(rows: list) -> dict:
    """Per-image rows plus an arithmetic-mean row over the metric columns."""
    ok = [r for r in rows if "error" not in r]
    mean = {"image": "mean"}
    for name in METRIC_NAMES:
        mean[name] = float(np.mean([r[name] for r in ok])) if ok else math.nan
    return {"rows": ok, "mean": mean, "failures": [r for r in rows if "error" in r]}


def write_batch_csv(path: Path, report: dict):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in report["rows"] + [report["mean"]]:
            writer.writerow([_fmt(row.get(col)) for col in REPORT_COLUMNS])


def cmd_batch(args) -> int:
    cfg = effective_config(args)
    directory = Path(args.dataset)
    if not directory.is_dir():
        raise OSError(f"{directory} is not a directory")
    paths = [str(p) for p in list_images(directory)]
    if not paths:
        raise OSError(f"no PNG/PPM/PGM images in {directory}")
    jobs = cfg["jobs"] or os.cpu_count() or 1
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(paths))) as pool:
            rows = list(pool.map(_batch_one, paths, [cfg] * len(paths), [args.output] * len(paths)))
    else:
        rows = [_batch_one(p, cfg, args.output) for p in paths]
    for r in rows:
        if "error" in r:
            log.warning("skipped %s: %s", r["image"], r["error"])

    report = batch_report(rows)
    report["config"] = cfg
    base = Path(args.report) if args.report else directory / "scsa_report"
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    write_batch_csv(csv_path, report)
    json_path.write_text(_dump_json(report))
    print(json.dumps({"csv": str(csv_path), "json": str(json_path), "processed": len(report["rows"]),
                      "failed": len(report["failures"])}, sort_keys=True))
    if not report["rows"]:
        io_only = all(r["error"].startswith("io:") for r in report["failures"])
        return EXIT_IO if io_only else EXIT_NUMERIC
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _add_common(p, *, ga=True):
    p.add_argument("--config", help="JSON file with defaults for any flag")
    p.add_argument("--seed", type=int, help="seed for clustering and the genetic search")
    p.add_argument("--max-dim", dest="max_dim", type=int,
                   help="box-downsample so the longer side is at most N (default 512)")
    p.add_argument("--k", help="cluster count or 'auto' (silhouette)")
    p.add_argument("--k-min", dest="k_min", type=int)
    p.add_argument("--k-max", dest="k_max", type=int)
    if ga:
        p.add_argument("--population", type=int, help="NSGA-II population size")
        p.add_argument("--generations", type=int, help="NSGA-II generations")
        p.add_argument("--crossover-prob", dest="crossover_prob", type=float)
        p.add_argument("--mutation-prob", dest="mutation_prob", type=float)
        p.add_argument("--eta-c", dest="eta_c", type=float)
        p.add_argument("--eta-m", dest="eta_m", type=float)
        p.add_argument("--weights", type=lambda s: [float(x) for x in s.split(",")],
                       help="ASF weights for (SSIM, entropy), e.g. 0.5,0.5")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scsa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="uniform-gamma 2D-SCSA reconstruction of a gray image")
    p.add_argument("input")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--gamma", "--gammas", dest="gamma", type=float, nargs="+",
                   help="one or more gamma values; several write one image each")
    p.add_argument("--output", required=True)
    p.add_argument("--max-dim", dest="max_dim", type=int, default=512)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("enhance", help="gamma-SCSA contrast enhancement")
    p.add_argument("input")
    p.add_argument("--output", required=True)
    p.add_argument("--report", help="sidecar JSON path (default: <output>.json)")
    p.add_argument("--h", help="semi-classical parameter or 'auto'")
    p.add_argument("--gammas", "--gamma", dest="gammas",
                   help="comma-separated per-cluster gammas or 'auto'")
    _add_common(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("metrics", help="print the eight quality metrics")
    p.add_argument("reference")
    p.add_argument("test")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("optimize", help="NSGA-II search, print the Pareto front")
    p.add_argument("input")
    p.add_argument("--report", help="write the front JSON here instead of stdout")
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("batch", help="enhance every image in a directory")
    p.add_argument("dataset")
    p.add_argument("--report", help="report path prefix (writes .csv and .json)")
    p.add_argument("--output", help="directory for enhanced images")
    p.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    p.add_argument("--h")
    p.add_argument("--gammas", "--gamma", dest="gammas")
    _add_common(p)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"scsa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"scsa: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"scsa: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
