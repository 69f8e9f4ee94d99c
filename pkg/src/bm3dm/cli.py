"""Command-line entry point: ``bm3dm gen|denoise|bench|eval``.

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import shutil
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics
from .image import (ImageFormatError, central_crop, find_image, load_dataset,
                    load_image, make_dataset, save_dataset, save_image)
from .pipelines import METHODS, Bm3dParams, run_method

log = logging.getLogger("bm3dm")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    threads: int = 1
    methods: list[str] = field(default_factory=list)
    overrides: dict[str, str] = field(default_factory=dict)
    out: Path | None = None

    def params(self) -> Bm3dParams:
        try:
            return Bm3dParams().with_overrides(self.overrides)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


def _parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--param expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _check_method(m: str) -> str:
    if m not in METHODS:
        raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    return m


# ---------------------------------------------------------------------------
# gen


def cmd_gen(clean_path, sigma: float, L: int, seed: int, out_dir, source_id: str | None = None) -> Path:
    if L < 1:
        raise UsageError(f"--frames must be >= 1, got {L}")
    if not sigma > 0:
        raise UsageError(f"--sigma must be positive, got {sigma}")
    clean = load_image(find_image(str(clean_path)))
    sid = source_id or Path(clean_path).stem
    stack = make_dataset(clean, sigma, L, seed, sid)
    out = save_dataset(stack, out_dir)
    log.info("wrote %d frames to %s", L, out)
    return out


# ---------------------------------------------------------------------------
# denoise


def cmd_denoise(dataset_dir, method: str, params: Bm3dParams, out_path, threads: int = 1,
                results_csv=None) -> metrics.EvalRecord | None:
    """Denoise a dataset directory; writes PFM + preview PGM and appends a CSV record."""
    _check_method(method)
    stack = load_dataset(dataset_dir)
    out_path = Path(out_path)
    if out_path.suffix.lower() != ".pfm":
        out_path = out_path.with_suffix(".pfm")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    img, meta = run_method(method, stack, params, threads=threads)
    for w in meta["warnings"]:
        log.warning(w)
    if method == "BM3D-3":
        for i, o in enumerate(meta["outputs"]):
            save_image(o, out_path.with_name(f"{out_path.stem}_ref{i:03d}.pfm"))
        best = out_path.with_name(f"{out_path.stem}_ref{meta['ref_index']:03d}.pfm")
        shutil.copyfile(best, out_path)
    else:
        save_image(img, out_path)
    save_image(img, out_path.with_suffix(".pgm"), mode="pgm8-clamped")
    if stack.clean is None:
        return None
    rec = metrics.EvalRecord.from_mse(stack.source_id, method, stack.sigma, stack.L, stack.seed,
                                      metrics.mse(img, stack.clean), meta["wall_time"])
    csv_path = Path(results_csv) if results_csv else out_path.parent / "results.csv"
    metrics.write_records([rec], csv_path, append=True)
    return rec


# ---------------------------------------------------------------------------
# bench


@dataclass
class BenchConfig:
    images: list[str]
    sigmas: list[float]
    frames: list[int]
    seeds: list[int]
    methods: list[str]
    crop: int | None = None
    overrides: dict[str, str] = field(default_factory=dict)


def _split(value: str) -> list[str]:
    return [v for v in value.replace(",", " ").split() if v]


def read_bench_config(path) -> BenchConfig:
    """Parse an INI-style bench config (``[bench]`` and optional ``[params]`` sections)."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with path.open() as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"{path}: cannot read config ({exc.strerror})") from None
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    if "bench" not in cp:
        raise UsageError(f"{path}: missing [bench] section")
    b = cp["bench"]
    try:
        cfg = BenchConfig(
            images=[str(_resolve(i, path.parent)) for i in _split(b.get("images", ""))],
            sigmas=[float(s) for s in _split(b.get("sigmas", ""))],
            frames=[int(s) for s in _split(b.get("frames", ""))],
            seeds=[int(s) for s in _split(b.get("seeds", "0"))],
            methods=[_check_method(m) for m in _split(b.get("methods", ""))],
            crop=int(b["crop"]) if b.get("crop") else None,
            overrides=dict(cp["params"]) if "params" in cp else {},
        )
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    for name in ("images", "sigmas", "frames", "seeds", "methods"):
        if not getattr(cfg, name):
            raise UsageError(f"{path}: empty {name} list")
    if any(L < 1 for L in cfg.frames):
        raise UsageError(f"{path}: frame counts must be >= 1")
    return cfg


def _resolve(name: str, base: Path) -> str:
    p = base / name
    return str(p) if p.is_file() else name


def cmd_bench(config_path, out_dir, threads: int = 1, extra_overrides=None) -> tuple[list, int]:
    """Run the bench grid; returns (records, number of failed cells)."""
    cfg = read_bench_config(config_path)
    overrides = {**cfg.overrides, **(extra_overrides or {})}
    try:
        params = Bm3dParams().with_overrides(overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, failed = [], 0
    for image in cfg.images:
        try:
            clean = load_image(find_image(image))
            if cfg.crop:
                clean = central_crop(clean, cfg.crop)
        except (OSError, ValueError) as exc:
            log.error("image %s: %s", image, exc)
            failed += len(cfg.sigmas) * len(cfg.frames) * len(cfg.seeds) * len(cfg.methods)
            continue
        sid = Path(image).stem
        for sigma in cfg.sigmas:
            for L in cfg.frames:
                for seed in cfg.seeds:
                    stack = make_dataset(clean, sigma, L, seed, sid)
                    for method in cfg.methods:
                        try:
                            img, meta = run_method(method, stack, params, threads=threads)
                        except Exception as exc:  # one bad cell must not stop the grid
                            log.error("%s sigma=%g L=%d seed=%d %s failed: %s",
                                      sid, sigma, L, seed, method, exc)
                            failed += 1
                            continue
                        rec = metrics.EvalRecord.from_mse(sid, method, sigma, L, seed,
                                                          metrics.mse(img, clean), meta["wall_time"])
                        log.info("%s sigma=%g L=%d seed=%d %s mse=%.2f (%.1fs)",
                                 sid, sigma, L, seed, method, rec.mse, rec.wall_time)
                        records.append(rec)
    metrics.write_records(records, out_dir / "records.csv")
    metrics.write_pivot(records, out_dir / "summary.csv", out_dir / "summary.md", cfg.methods)
    return records, failed


# ---------------------------------------------------------------------------
# eval


def cmd_eval(a_path, b_path) -> tuple[float, float]:
    a = load_image(a_path)
    b = load_image(b_path)
    err = metrics.mse(a, b)
    return err, metrics.psnr_from_mse(err)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads (default: machine parallelism)")
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="override a parameter, e.g. step1.lambda3d=2.7 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bm3dm", description="Multi-frame BM3D denoising")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a noisy multi-frame dataset")
    g.add_argument("clean", help="clean image (PGM/PFM path or bundled name)")
    g.add_argument("sigma_pos", nargs="?", type=float, help=argparse.SUPPRESS)
    g.add_argument("frames_pos", nargs="?", type=int, help=argparse.SUPPRESS)
    g.add_argument("seed_pos", nargs="?", type=int, help=argparse.SUPPRESS)
    g.add_argument("--sigma", type=float)
    g.add_argument("--frames", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--source-id")
    g.add_argument("--out", required=True, help="output dataset directory")

    d = sub.add_parser("denoise", parents=[common], help="denoise a dataset directory")
    d.add_argument("dataset")
    d.add_argument("--method", required=True)
    d.add_argument("--out", required=True, help="output PFM path")
    d.add_argument("--results", help="CSV to append the evaluation record to")

    b = sub.add_parser("bench", parents=[common], help="run a benchmark grid from a config file")
    b.add_argument("config")
    b.add_argument("--out", required=True, help="output directory")

    e = sub.add_parser("eval", parents=[common], help="MSE/PSNR between two images")
    e.add_argument("a")
    e.add_argument("b")
    return p


def _pick(opt, pos, name):
    if opt is not None and pos is not None and opt != pos:
        raise UsageError(f"{name} given twice with different values")
    value = opt if opt is not None else pos
    if value is None:
        raise UsageError(f"missing {name}")
    return value


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = RunConfig(args.command, threads=args.threads, overrides=_parse_overrides(args.param))
        if args.command == "gen":
            cmd_gen(args.clean, _pick(args.sigma, args.sigma_pos, "sigma"),
                    _pick(args.frames, args.frames_pos, "frames"),
                    _pick(args.seed, args.seed_pos, "seed"), args.out, args.source_id)
        elif args.command == "denoise":
            rec = cmd_denoise(args.dataset, _check_method(args.method), cfg.params(), args.out,
                              cfg.threads, args.results)
            if rec is not None:
                print(f"{rec.method}: mse={rec.mse:.4f} psnr={rec.psnr:.3f} dB time={rec.wall_time:.2f}s")
        elif args.command == "bench":
            records, failed = cmd_bench(args.config, args.out, cfg.threads, cfg.overrides)
            print((Path(args.out) / "summary.md").read_text(), end="")
            if failed:
                print(f"{failed} cell(s) failed", file=sys.stderr)
                return 1
        elif args.command == "eval":
            err, db = cmd_eval(args.a, args.b)
            print(f"mse={err:.6f} psnr={db:.4f}")
    except UsageError as exc:
        print(f"bm3dm: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ImageFormatError, ValueError) as exc:
        print(f"bm3dm: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
