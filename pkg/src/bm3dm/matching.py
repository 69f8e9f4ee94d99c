"""Block matching: ranking candidate patches and assembling 3D groups."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

SCOPES = ("reference-frame-only", "all-frames")


class PatchRef(NamedTuple):
    frame: int
    row: int
    col: int


@dataclass(frozen=True)
class SearchParams:
    """Block-matching parameters.

    ``window`` is the side of the square of candidate top-left positions
    centred on the reference position; it is clipped at the image borders.
    """

    k: int = 8
    K_max: int = 16
    window: int = 39
    step: int = 3
    scope: str = "reference-frame-only"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"patch size must be positive, got {self.k}")
        if self.window < self.k:
            raise ValueError(f"search window ({self.window}) must be >= patch size ({self.k})")
        if self.step < 1:
            raise ValueError(f"reference step must be >= 1, got {self.step}")
        if self.K_max < 1 or self.K_max & (self.K_max - 1):
            raise ValueError(f"K_max must be a power of two, got {self.K_max}")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}, got {self.scope!r}")

    @property
    def half(self) -> int:
        return self.window // 2


class Group3D:
    """An ordered stack of K similar patches and where they came from.

    ``refs`` has shape (K, 3) holding (frame, row, col); ``patches`` has shape
    (K, k, k).  Member 0 is the reference patch.
    """

    __slots__ = ("refs", "patches", "distances")

    def __init__(self, refs, patches, distances=None):
        refs = np.asarray(refs, dtype=np.int64).reshape(-1, 3)
        patches = np.asarray(patches, dtype=np.float64)
        if patches.ndim != 3 or patches.shape[1] != patches.shape[2]:
            raise ValueError(f"patches must have shape (K, k, k), got {patches.shape}")
        if refs.shape[0] != patches.shape[0]:
            raise ValueError("refs and patches disagree on group size")
        K = refs.shape[0]
        if K < 1 or K & (K - 1):
            raise ValueError(f"group size must be a power of two, got {K}")
        self.refs = refs
        self.patches = patches
        self.distances = None if distances is None else np.asarray(distances, dtype=np.float64)

    @property
    def K(self) -> int:
        return self.patches.shape[0]

    @property
    def k(self) -> int:
        return self.patches.shape[1]

    def members(self) -> list[tuple[PatchRef, np.ndarray]]:
        return [(PatchRef(*map(int, r)), p) for r, p in zip(self.refs, self.patches)]

    def __len__(self) -> int:
        return self.K

    def __repr__(self) -> str:
        return f"Group3D(K={self.K}, k={self.k}, ref={tuple(self.refs[0])})"


def patch_distance(p, q) -> float:
    """Normalized squared L2 distance ``||p - q||^2 / k^2``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"patch shapes differ: {p.shape} vs {q.shape}")
    return float(np.sum((p - q) ** 2) / p.size)


def enumerate_references(height: int, width: int, k: int, step: int) -> np.ndarray:
    """Reference top-left positions on a ``step`` grid covering the whole image.

    The last valid row/column (``dim - k``) is always included.  Returns an
    (N, 2) array of (row, col) in row-major order.
    """
    if height < k or width < k:
        raise ValueError(f"image {height}x{width} is smaller than the patch size {k}")
    rows = _axis_positions(height, k, step)
    cols = _axis_positions(width, k, step)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1).astype(np.int64)


def _axis_positions(n: int, k: int, step: int) -> np.ndarray:
    last = n - k
    pos = list(range(0, last + 1, step))
    if pos[-1] != last:
        pos.append(last)
    return np.asarray(pos, dtype=np.int64)


@numba.njit(cache=True, nogil=True)
def _search_kernel(stack, f0, r0, c0, k, half, kmax, all_frames, out_refs, out_ssd):
    """Fill out_refs[:K] / out_ssd[:K] with the group for one reference; return K.

    Distances of a whole window row are accumulated together (same per-candidate
    summation order as a plain double loop).  Candidates are visited in
    lexicographic (frame, row, col) order and inserted with a strict
    comparison, so ties keep the earliest candidate.
    """
    L, H, W = stack.shape
    r_lo = max(0, r0 - half)
    r_hi = min(H - k, r0 + half)
    c_lo = max(0, c0 - half)
    c_hi = min(W - k, c0 + half)
    nc = c_hi - c_lo + 1
    n_frames = L if all_frames else 1
    n_cand = n_frames * (r_hi - r_lo + 1) * nc
    K = 1
    while K * 2 <= min(kmax, n_cand):
        K *= 2
    cap = K - 1

    out_refs[0, 0] = f0
    out_refs[0, 1] = r0
    out_refs[0, 2] = c0
    out_ssd[0] = 0.0
    if cap == 0:
        return K
    best_d = out_ssd[1:]
    best_r = out_refs[1:]
    filled = 0

    ref = stack[f0, r0:r0 + k, c0:c0 + k]
    acc = np.empty(nc)
    for fi in range(n_frames):
        f = fi if all_frames else f0
        img = stack[f]
        for r in range(r_lo, r_hi + 1):
            acc[:] = 0.0
            for i in range(k):
                row = img[r + i]
                for j in range(k):
                    v = ref[i, j]
                    base = c_lo + j
                    for c in range(nc):
                        t = row[base + c] - v
                        acc[c] += t * t
            for ci in range(nc):
                c = c_lo + ci
                if f == f0 and r == r0 and c == c0:
                    continue
                d = acc[ci]
                if filled == cap:
                    if d >= best_d[cap - 1]:
                        continue
                    pos = cap - 1
                else:
                    pos = filled
                    filled += 1
                # insert keeping ascending order; equal keys stay ahead
                while pos > 0 and best_d[pos - 1] > d:
                    best_d[pos] = best_d[pos - 1]
                    best_r[pos, 0] = best_r[pos - 1, 0]
                    best_r[pos, 1] = best_r[pos - 1, 1]
                    best_r[pos, 2] = best_r[pos - 1, 2]
                    pos -= 1
                best_d[pos] = d
                best_r[pos, 0] = f
                best_r[pos, 1] = r
                best_r[pos, 2] = c
    return K


def _as_stack(images) -> np.ndarray:
    stack = np.asarray(images, dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[None]
    if stack.ndim != 3:
        raise ValueError(f"expected an image or a (L, H, W) stack, got shape {stack.shape}")
    return np.ascontiguousarray(stack)


def search_group(images, ref, params: SearchParams) -> Group3D:
    """Group of the most similar patches to ``ref``.

    ``images`` is a single image or an (L, H, W) stack of registered frames.
    No distance threshold is applied: the group holds the largest power of two
    not exceeding ``min(K_max, #candidates)`` patches, reference first.
    """
    stack = _as_stack(images)
    L, H, W = stack.shape
    f, r, c = (int(x) for x in ref)
    k = params.k
    if not (0 <= f < L and 0 <= r <= H - k and 0 <= c <= W - k):
        raise ValueError(f"reference {tuple(ref)} does not fit a {k}x{k} patch in a {L}x{H}x{W} stack")
    out_refs = np.zeros((params.K_max, 3), dtype=np.int64)
    out_ssd = np.zeros(params.K_max)
    K = _search_kernel(stack, f, r, c, k, params.half, params.K_max,
                       params.scope == "all-frames", out_refs, out_ssd)
    refs = out_refs[:K].copy()
    patches = extract_patches(stack, refs, k)
    return Group3D(refs, patches, out_ssd[:K] / (k * k))


def extract_patches(stack, refs, k: int) -> np.ndarray:
    """Gather (K, k, k) patches at (frame, row, col) positions of a stack."""
    stack = _as_stack(stack)
    refs = np.asarray(refs, dtype=np.int64).reshape(-1, 3)
    out = np.empty((refs.shape[0], k, k))
    for i, (f, r, c) in enumerate(refs):
        out[i] = stack[f, r:r + k, c:c + k]
    return out
