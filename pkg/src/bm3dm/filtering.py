"""Collaborative filtering of 3D groups and weighted aggregation."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .matching import Group3D
from .transforms import inverse_transform_patches, spatial_matrices, transform_patches, wht_matrix

KAISER_BETA = 2.0
WIENER_NORM_FLOOR = 1e-12


def kaiser_window(k: int, beta: float = KAISER_BETA) -> np.ndarray:
    """Separable k x k Kaiser taper used to weight patch contributions."""
    w = np.kaiser(k, beta)
    return np.outer(w, w)


@dataclass
class FilteredGroup:
    group: Group3D
    weight: float

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"group weight must be positive, got {self.weight}")


def hard_threshold_filter(group: Group3D, sigma: float, lambda3d: float,
                          spatial: str = "bior15") -> FilteredGroup:
    """Hard-threshold the 3D spectrum of ``group``.

    Coefficients with magnitude below ``lambda3d * sigma`` are zeroed, except
    the DC coefficient (spatial index 0, WHT index 0).  The weight is
    ``1 / (sigma^2 * N_ret)`` with ``N_ret`` the number of non-zero retained
    coefficients, or ``1 / sigma^2`` if nothing survives.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    coeffs = transform_patches(group.patches, spatial)
    keep = np.abs(coeffs) >= lambda3d * sigma
    keep[0, 0, 0] = True
    coeffs = np.where(keep, coeffs, 0.0)
    n_ret = int(np.count_nonzero(coeffs))
    weight = 1.0 / (sigma**2 * n_ret) if n_ret >= 1 else 1.0 / sigma**2
    out = Group3D(group.refs, inverse_transform_patches(coeffs, spatial))
    return FilteredGroup(out, weight)


def wiener_filter(noisy: Group3D, pilot: Group3D, sigma: float,
                  spatial: str = "dct") -> FilteredGroup:
    """Empirical Wiener shrinkage of ``noisy`` driven by the ``pilot`` spectrum."""
    if noisy.patches.shape != pilot.patches.shape or not np.array_equal(noisy.refs, pilot.refs):
        raise ValueError("noisy and pilot groups must share shape and member positions")
    p = transform_patches(pilot.patches, spatial)
    p2 = p * p
    omega = p2 / (p2 + sigma**2)
    shrunk = omega * transform_patches(noisy.patches, spatial)
    norm = max(float(np.sum(omega * omega)), WIENER_NORM_FLOOR)
    out = Group3D(noisy.refs, inverse_transform_patches(shrunk, spatial))
    return FilteredGroup(out, 1.0 / (sigma**2 * norm))


class AggregationBuffer:
    """Per-pixel numerator/denominator accumulators.

    ``n_frames == 1`` gives a single-image buffer; more frames give a
    per-frame buffer set.  Pushes commute, so sharded buffers may be merged
    with :meth:`merge`.
    """

    def __init__(self, height: int, width: int, n_frames: int = 1):
        self.numerator = np.zeros((n_frames, height, width))
        self.denominator = np.zeros((n_frames, height, width))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.numerator.shape

    def merge(self, other: "AggregationBuffer") -> None:
        self.numerator += other.numerator
        self.denominator += other.denominator


def aggregate_push(buf: AggregationBuffer, fg: FilteredGroup, target: str = "single-image",
                   window: np.ndarray | None = None) -> None:
    """Accumulate the members of a filtered group into ``buf``.

    ``target="single-image"`` pools every member into buffer 0 whatever frame
    it came from; ``"per-frame"`` sends each member to its own frame's buffer.
    """
    if target not in ("single-image", "per-frame"):
        raise ValueError(f"unknown aggregation target {target!r}")
    g = fg.group
    k = g.k
    if window is None:
        window = kaiser_window(k)
    n_frames, H, W = buf.shape
    per_frame = target == "per-frame"
    for (f, r, c), patch in zip(g.refs, g.patches):
        b = f if per_frame else 0
        if not (0 <= b < n_frames and 0 <= r <= H - k and 0 <= c <= W - k):
            raise ValueError(f"patch ({f}, {r}, {c}) is outside the aggregation domain")
        wk = fg.weight * window
        buf.numerator[b, r:r + k, c:c + k] += wk * patch
        buf.denominator[b, r:r + k, c:c + k] += wk


def finalize(buf: AggregationBuffer, fallback) -> tuple[np.ndarray, int]:
    """Divide numerator by denominator; uncovered pixels take ``fallback``.

    Returns the image (or (L, H, W) stack for a per-frame buffer) and the
    number of fallback pixels.
    """
    fallback = np.broadcast_to(np.asarray(fallback, dtype=np.float64), buf.shape)
    covered = buf.denominator > 0
    out = np.where(covered, buf.numerator / np.where(covered, buf.denominator, 1.0), fallback)
    n_fallback = int(np.count_nonzero(~covered))
    if buf.shape[0] == 1:
        out = out[0]
    return out, n_fallback


# ---------------------------------------------------------------------------
# numba kernels used by the pipelines; they mirror the functions above


def wht_bank(K_max: int) -> np.ndarray:
    """Stack of WHT matrices for K = 1, 2, 4, ..., K_max, zero padded."""
    n = K_max.bit_length()
    bank = np.zeros((n, K_max, K_max))
    for i in range(n):
        K = 1 << i
        bank[i, :K, :K] = wht_matrix(K)
    return bank


def operators(k: int, spatial: str, K_max: int):
    fwd, inv = spatial_matrices(k, spatial)
    return np.ascontiguousarray(fwd.T), np.ascontiguousarray(inv.T), wht_bank(K_max)


@numba.njit(cache=True, nogil=True)
def _log2(K):
    n = 0
    while (1 << n) < K:
        n += 1
    return n


@numba.njit(cache=True, nogil=True)
def _forward3d(patches, fwdT, H):
    # patches (K, k*k) -> coefficients (K, k*k)
    return H @ (patches @ fwdT)


@numba.njit(cache=True, nogil=True)
def _inverse3d(coeffs, invT, H):
    return (H @ coeffs) @ invT


@numba.njit(cache=True, nogil=True)
def ht_kernel(patches, fwdT, invT, whts, thr, sigma, out):
    """Hard-threshold one group given as (K, k*k); writes ``out`` and returns the weight."""
    K = patches.shape[0]
    H = np.ascontiguousarray(whts[_log2(K), :K, :K])
    c = _forward3d(patches, fwdT, H)
    n_ret = 0
    for i in range(K):
        for j in range(c.shape[1]):
            v = c[i, j]
            if (i == 0 and j == 0) or abs(v) >= thr:
                if v != 0.0:
                    n_ret += 1
            else:
                c[i, j] = 0.0
    out[:, :] = _inverse3d(c, invT, H)
    if n_ret >= 1:
        return 1.0 / (sigma * sigma * n_ret)
    return 1.0 / (sigma * sigma)


@numba.njit(cache=True, nogil=True)
def wiener_kernel(noisy, pilot, fwdT, invT, whts, sigma, out):
    """Empirical Wiener filter of one (K, k*k) group; writes ``out`` and returns the weight."""
    K = noisy.shape[0]
    H = np.ascontiguousarray(whts[_log2(K), :K, :K])
    p = _forward3d(pilot, fwdT, H)
    c = _forward3d(noisy, fwdT, H)
    s2 = sigma * sigma
    norm = 0.0
    for i in range(K):
        for j in range(c.shape[1]):
            p2 = p[i, j] * p[i, j]
            w = p2 / (p2 + s2)
            c[i, j] *= w
            norm += w * w
    out[:, :] = _inverse3d(c, invT, H)
    return 1.0 / (s2 * max(norm, 1e-12))


@numba.njit(cache=True, nogil=True)
def aggregate_kernel(num, den, refs, counts, patches, weights, window, dest):
    """Push a batch of filtered groups into (n_buffers, H, W) accumulators, in order.

    ``dest >= 0`` sends every member to buffer ``dest``; ``dest < 0`` sends each
    member to the buffer of its own frame.
    """
    k = window.shape[0]
    for g in range(refs.shape[0]):
        w = weights[g]
        for m in range(counts[g]):
            f = refs[g, m, 0] if dest < 0 else dest
            r = refs[g, m, 1]
            c = refs[g, m, 2]
            for i in range(k):
                for j in range(k):
                    wk = w * window[i, j]
                    num[f, r + i, c + j] += wk * patches[g, m, i * k + j]
                    den[f, r + i, c + j] += wk
