"""MSE / PSNR and benchmark records."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, astuple, dataclass, fields
from pathlib import Path

import numpy as np

PEAK = 255.0


def mse(a, b) -> float:
    """Mean squared error over pixels, computed on unclamped floats."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(err: float, peak: float = PEAK) -> float:
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak**2 / err)


def psnr(a, b, peak: float = PEAK) -> float:
    """PSNR in dB with peak 255; identical images give ``inf``."""
    return psnr_from_mse(mse(a, b), peak)


@dataclass
class EvalRecord:
    source_id: str
    method: str
    sigma: float
    L: int
    seed: int
    mse: float
    psnr: float
    wall_time: float

    def __post_init__(self):
        if self.mse < 0:
            raise ValueError("mse must be non-negative")

    @classmethod
    def from_mse(cls, source_id, method, sigma, L, seed, err, wall_time=0.0) -> "EvalRecord":
        return cls(source_id, method, float(sigma), int(L), int(seed), float(err),
                   psnr_from_mse(err), float(wall_time))


CSV_HEADER = [f.name for f in fields(EvalRecord)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    return str(v)


def write_records(records, path, append: bool = False) -> None:
    """Write EvalRecords as CSV (header written unless appending to a non-empty file)."""
    path = Path(path)
    need_header = not (append and path.exists() and path.stat().st_size > 0)
    with path.open("a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if need_header:
            w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_records(path) -> list[EvalRecord]:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(EvalRecord(row["source_id"], row["method"], float(row["sigma"]),
                                  int(row["L"]), int(row["seed"]), float(row["mse"]),
                                  float(row["psnr"]), float(row["wall_time"])))
    return out


def pivot(records, methods=None) -> tuple[list[str], list[list]]:
    """Table-1 style pivot: rows ``image (sigma)`` per L, columns methods, cells mean MSE over seeds."""
    methods = list(methods or dict.fromkeys(r.method for r in records))
    cells: dict[tuple, dict[str, list[float]]] = {}
    for r in records:
        row = (r.source_id, r.sigma, r.L)
        cells.setdefault(row, {}).setdefault(r.method, []).append(r.mse)
    header = ["image", "L"] + methods
    rows = []
    for (src, sigma, L), per in cells.items():
        label = f"{src} ({sigma:g})"
        rows.append([label, L] + [float(np.mean(per[m])) if m in per else None for m in methods])
    return header, rows


def write_pivot(records, csv_path, md_path, methods=None) -> None:
    header, rows = pivot(records, methods)
    with Path(csv_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (f"{v:.2f}" if isinstance(v, float) else v) for v in row])
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in rows:
        vals = [v for v in row[2:] if v is not None]
        best = min(vals) if vals else None
        cells = []
        for v in row[2:]:
            if v is None:
                cells.append("")
            elif v == best:
                cells.append(f"**{v:.2f}**")
            else:
                cells.append(f"{v:.2f}")
        lines.append("| " + " | ".join([str(row[0]), str(row[1])] + cells) + " |")
    Path(md_path).write_text("\n".join(lines) + "\n")


def record_dict(r: EvalRecord) -> dict:
    return asdict(r)
