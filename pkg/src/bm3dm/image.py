"""Images, PGM/PFM I/O, seeded AWGN and multi-frame datasets.

Images are 2D ``float64`` numpy arrays indexed ``[row, col]``; intensities are
nominally in [0, 255] but never clamped in memory.

Noise generation is fixed so datasets are bit-reproducible:

* uniform doubles come from numpy's PCG64 bit generator (``Generator.random``),
* Gaussian samples use the Box-Muller transform on consecutive uniform pairs,
* frame ``i`` of a dataset uses the sub-seed ``splitmix64(seed + (i + 1) * GOLDEN)``.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"noise sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class FrameStack:
    """L registered noisy observations of one scene, shape (L, H, W)."""

    frames: np.ndarray
    sigma: float
    seed: int = 0
    source_id: str = ""
    clean: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 2:
            frames = frames[None]
        if frames.ndim != 3 or frames.shape[0] < 1:
            raise ValueError(f"frames must be a non-empty (L, H, W) array, got shape {frames.shape}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "frames", np.ascontiguousarray(frames))

    @property
    def L(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames.shape[1:]

    def __len__(self) -> int:
        return self.L

    def __getitem__(self, i):
        return self.frames[i]

    def permuted(self, order) -> "FrameStack":
        return FrameStack(self.frames[list(order)], self.sigma, self.seed, self.source_id, self.clean)


def splitmix64(x: int) -> int:
    x = (x + GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def subseed(seed: int, index: int) -> int:
    """Deterministic 64-bit seed for frame ``index`` of a dataset seeded with ``seed``."""
    return splitmix64((int(seed) + (int(index) + 1) * GOLDEN) & _MASK64)


def gaussian_field(shape, seed: int) -> np.ndarray:
    """Standard normal samples via Box-Muller on PCG64 uniforms."""
    n = int(np.prod(shape))
    m = (n + 1) // 2
    rng = np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
    u = rng.random(2 * m)
    u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
    u2 = u[1::2]
    rad = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = rad * np.cos(2.0 * np.pi * u2)
    z[1::2] = rad * np.sin(2.0 * np.pi * u2)
    return z[:n].reshape(shape)


def add_awgn(img, spec: NoiseSpec) -> np.ndarray:
    """Return ``img`` plus i.i.d. N(0, sigma^2) noise (unclamped)."""
    img = np.asarray(img, dtype=np.float64)
    return img + spec.sigma * gaussian_field(img.shape, spec.seed)


def make_dataset(clean, sigma: float, L: int, seed: int, source_id: str = "") -> FrameStack:
    """L independently corrupted copies of ``clean``."""
    if L < 1:
        raise ValueError(f"number of frames must be >= 1, got {L}")
    clean = np.asarray(clean, dtype=np.float64)
    frames = np.stack([add_awgn(clean, NoiseSpec(sigma, subseed(seed, i))) for i in range(L)])
    return FrameStack(frames, sigma, seed, source_id, clean)


# ---------------------------------------------------------------------------
# file I/O


class ImageFormatError(OSError):
    pass


def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace separated header tokens, skipping # comments."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= n:
            break
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def _read_pgm(data: bytes, path) -> np.ndarray:
    tokens, pos = _pgm_tokens(data, 4)
    if len(tokens) < 4 or pos >= len(data):
        raise ImageFormatError(f"{path}: malformed PGM header")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed PGM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 256:
        raise ImageFormatError(f"{path}: unsupported PGM header (need 8-bit, got maxval {maxval})")
    pos += 1  # single whitespace byte before the raster
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise ImageFormatError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).astype(np.float64)


def _read_pfm(data: bytes, path) -> np.ndarray:
    lines = data.split(b"\n", 3)
    if len(lines) < 4:
        raise ImageFormatError(f"{path}: malformed PFM header")
    if lines[0].strip() == b"PF":
        raise ImageFormatError(f"{path}: colour PFM is not supported")
    try:
        width, height = (int(t) for t in lines[1].split())
        scale = float(lines[2])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed PFM header") from None
    if width <= 0 or height <= 0 or scale == 0:
        raise ImageFormatError(f"{path}: malformed PFM header")
    dtype = "<f4" if scale < 0 else ">f4"
    raster = lines[3]
    if len(raster) < 4 * width * height:
        raise ImageFormatError(f"{path}: truncated PFM raster")
    img = np.frombuffer(raster[: 4 * width * height], dtype=dtype).reshape(height, width)
    # PFM stores rows bottom-to-top
    return np.flipud(img).astype(np.float64)


def load_image(path) -> np.ndarray:
    """Load a binary 8-bit PGM (P5) or grayscale PFM (Pf) as a float64 image."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"{path}: cannot read image ({exc.strerror})") from exc
    magic = data[:2]
    if magic == b"P5":
        img = _read_pgm(data, path)
    elif magic in (b"Pf", b"PF"):
        img = _read_pfm(data, path)
    else:
        raise ImageFormatError(f"{path}: unsupported image format (expected P5 PGM or Pf PFM)")
    if not np.all(np.isfinite(img)):
        raise ImageFormatError(f"{path}: image contains non-finite values")
    return img


def to_uint8(img) -> np.ndarray:
    """Round half away from zero and clamp to [0, 255]."""
    img = np.asarray(img, dtype=np.float64)
    rounded = np.sign(img) * np.floor(np.abs(img) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def save_image(img, path, mode: str = "pfm-float") -> None:
    """Write ``img`` as ``pgm8-clamped`` (visualization) or ``pfm-float`` (lossless float32)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {img.shape}")
    height, width = img.shape
    if mode == "pgm8-clamped":
        payload = f"P5\n{width} {height}\n255\n".encode() + to_uint8(img).tobytes()
    elif mode == "pfm-float":
        payload = (f"Pf\n{width} {height}\n-1.0\n".encode()
                   + np.flipud(img).astype("<f4").tobytes())
    else:
        raise ValueError(f"unknown save mode {mode!r}")
    Path(path).write_bytes(payload)


# ---------------------------------------------------------------------------
# dataset directories

_FRAME_RE = re.compile(r"frame_(\d{3,})\.pfm$")


def frame_name(i: int) -> str:
    return f"frame_{i:03d}.pfm"


def save_dataset(stack: FrameStack, directory) -> Path:
    """Write ``clean.pfm``, ``frame_XXX.pfm`` and ``meta.txt`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if stack.clean is not None:
        save_image(stack.clean, directory / "clean.pfm")
    for i, frame in enumerate(stack.frames):
        save_image(frame, directory / frame_name(i))
    meta = {"source_id": stack.source_id, "sigma": repr(float(stack.sigma)),
            "L": str(stack.L), "seed": str(int(stack.seed))}
    (directory / "meta.txt").write_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    return directory


def read_meta(path) -> dict[str, str]:
    meta = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ImageFormatError(f"{path}: malformed line {line!r}")
        meta[key.strip()] = value.strip()
    return meta


def load_dataset(directory) -> FrameStack:
    """Read a dataset directory written by :func:`save_dataset`."""
    directory = Path(directory)
    meta_path = directory / "meta.txt"
    if not meta_path.is_file():
        raise ImageFormatError(f"{meta_path}: missing dataset metadata")
    meta = read_meta(meta_path)
    try:
        L = int(meta["L"])
        sigma = float(meta["sigma"])
        seed = int(meta.get("seed", 0))
    except (KeyError, ValueError) as exc:
        raise ImageFormatError(f"{meta_path}: bad or missing key {exc}") from None
    frames = []
    for i in range(L):
        p = directory / frame_name(i)
        if not p.is_file():
            raise ImageFormatError(f"{p}: missing frame {i} of {L}")
        frames.append(load_image(p))
    clean_path = directory / "clean.pfm"
    clean = load_image(clean_path) if clean_path.is_file() else None
    return FrameStack(np.stack(frames), sigma, seed, meta.get("source_id", ""), clean)


def central_crop(img, size: int) -> np.ndarray:
    img = np.asarray(img)
    h, w = img.shape[-2:]
    if size > min(h, w):
        raise ValueError(f"crop {size} larger than image {h}x{w}")
    r0 = (h - size) // 2
    c0 = (w - size) // 2
    return img[..., r0:r0 + size, c0:c0 + size].copy()



# ---------------------------------------------------------------------------
# bundled / user-supplied test images

DATA_DIR = Path(__file__).parent / "data"
DATA_ENV = "BM3DM_DATA"


def find_image(name: str) -> Path:
    """Locate a test image by path or by name (``"lena"``, ``"house"``...).

    Names are looked up as ``<name>.pgm``, ``<name>256.pgm`` or ``.pfm`` in the
    directories listed in ``$BM3DM_DATA`` (``os.pathsep`` separated) and then in
    the bundled data directory.
    """
    p = Path(name)
    if p.suffix and p.is_file():
        return p
    dirs = [Path(d) for d in os.environ.get(DATA_ENV, "").split(os.pathsep) if d]
    dirs.append(DATA_DIR)
    stem = p.stem.lower()
    for d in dirs:
        for cand in (f"{stem}.pgm", f"{stem}256.pgm", f"{stem}.pfm", f"{stem}256.pfm"):
            if (d / cand).is_file():
                return d / cand
    raise FileNotFoundError(
        f"test image {name!r} not found; put {stem}.pgm in a directory listed in ${DATA_ENV}")


def load_named(name: str) -> np.ndarray:
    return load_image(find_image(name))
