"""Two-step BM3D and its multi-frame variants BM3D-1/2/3/M.

All variants share one engine.  Each step loops over reference patches on one
or more frames; per-reference work (matching + filtering) is computed in chunks
that may run on a thread pool, and the results are always aggregated in the
same canonical order, so the output does not depend on the thread count.
"""
from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numba
import numpy as np

from . import metrics
from .filtering import aggregate_kernel, ht_kernel, kaiser_window, operators, wiener_kernel
from .image import FrameStack
from .matching import _search_kernel, enumerate_references

METHODS = ("BM3D", "BM3D-1", "BM3D-2", "BM3D-3", "BM3D-M")
CHUNK = 512


@dataclass(frozen=True)
class StepParams:
    k: int = 8
    K_max: int = 16
    window: int = 39
    step: int = 3
    lambda3d: float = 2.7

    def validate(self, spatial: str) -> None:
        if self.k < 2:
            raise ValueError(f"patch size must be >= 2, got {self.k}")
        if spatial == "bior15" and self.k & (self.k - 1):
            raise ValueError(f"the wavelet step needs a power-of-two patch size, got {self.k}")
        if self.K_max < 1 or self.K_max & (self.K_max - 1):
            raise ValueError(f"K_max must be a power of two, got {self.K_max}")
        if self.window < self.k:
            raise ValueError(f"window ({self.window}) must be >= patch size ({self.k})")
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")


@dataclass(frozen=True)
class Bm3dParams:
    """Parameters of both steps.  ``sigma=None`` means "use the stack's sigma"."""

    step1: StepParams = field(default_factory=StepParams)
    step2: StepParams = field(default_factory=lambda: StepParams(K_max=32))
    sigma: float | None = None

    def with_overrides(self, overrides: dict[str, str | float | int]) -> "Bm3dParams":
        """Apply dotted-path overrides such as ``{"step1.lambda3d": "2.8"}``."""
        out = self
        for key, value in overrides.items():
            parts = key.split(".")
            if len(parts) == 1 and parts[0] == "sigma":
                out = replace(out, sigma=float(value))
                continue
            if len(parts) != 2 or parts[0] not in ("step1", "step2"):
                raise ValueError(f"unknown parameter {key!r}")
            sub = getattr(out, parts[0])
            types = {f.name: f.type for f in fields(StepParams)}
            if parts[1] not in types:
                raise ValueError(f"unknown parameter {key!r}")
            cast = float if types[parts[1]] in (float, "float") else int
            out = replace(out, **{parts[0]: replace(sub, **{parts[1]: cast(value)})})
        return out


# ---------------------------------------------------------------------------
# numba chunk kernels


@numba.njit(cache=True, nogil=True)
def _ht_chunk(stack, f0, refs, k, half, kmax, all_frames, fwdT, invT, whts, thr, sigma,
              out_refs, counts, out_patches, weights):
    ssd = np.empty(kmax)
    kk = k * k
    grp = np.empty((kmax, kk))
    for n in range(refs.shape[0]):
        K = _search_kernel(stack, f0, refs[n, 0], refs[n, 1], k, half, kmax, all_frames,
                           out_refs[n], ssd)
        counts[n] = K
        for m in range(K):
            f, r, c = out_refs[n, m, 0], out_refs[n, m, 1], out_refs[n, m, 2]
            for i in range(k):
                for j in range(k):
                    grp[m, i * k + j] = stack[f, r + i, c + j]
        weights[n] = ht_kernel(grp[:K], fwdT, invT, whts, thr, sigma, out_patches[n, :K])


@numba.njit(cache=True, nogil=True)
def _wiener_chunk(pilot_stack, noisy_stack, f0, refs, k, half, kmax, all_frames, fwdT, invT,
                  whts, sigma, out_refs, counts, out_patches, weights):
    ssd = np.empty(kmax)
    kk = k * k
    noisy = np.empty((kmax, kk))
    pilot = np.empty((kmax, kk))
    for n in range(refs.shape[0]):
        K = _search_kernel(pilot_stack, f0, refs[n, 0], refs[n, 1], k, half, kmax, all_frames,
                           out_refs[n], ssd)
        counts[n] = K
        for m in range(K):
            f, r, c = out_refs[n, m, 0], out_refs[n, m, 1], out_refs[n, m, 2]
            for i in range(k):
                for j in range(k):
                    pilot[m, i * k + j] = pilot_stack[f, r + i, c + j]
                    noisy[m, i * k + j] = noisy_stack[f, r + i, c + j]
        weights[n] = wiener_kernel(noisy[:K], pilot[:K], fwdT, invT, whts, sigma,
                                   out_patches[n, :K])


# ---------------------------------------------------------------------------
# engine


def _run_step(kind, match_stack, noisy_stack, ref_frames, all_frames, per_ref, sp: StepParams,
              sigma, threads):
    """One BM3D step over the reference grids of ``ref_frames``.

    ``match_stack`` is searched for similar patches (and supplies Wiener pilots);
    ``noisy_stack`` supplies the values that are filtered.  With ``per_ref`` the
    groups of each reference frame are aggregated into that frame's own
    estimate, otherwise everything is pooled into one image.  Returns the
    finalized (n_buffers, H, W) estimate.
    """
    spatial = "bior15" if kind == "ht" else "dct"
    sp.validate(spatial)
    L, H, W = match_stack.shape
    k = sp.k
    if H < k or W < k:
        raise ValueError(f"image {H}x{W} is smaller than the patch size {k}")
    fwdT, invT, whts = operators(k, spatial, sp.K_max)
    window = kaiser_window(k)
    n_buf = len(ref_frames) if per_ref else 1
    num = np.zeros((n_buf, H, W))
    den = np.zeros((n_buf, H, W))
    half = sp.window // 2

    def work(job):
        _, f0, refs = job
        n = refs.shape[0]
        out_refs = np.zeros((n, sp.K_max, 3), dtype=np.int64)
        counts = np.zeros(n, dtype=np.int64)
        out_patches = np.zeros((n, sp.K_max, k * k))
        weights = np.zeros(n)
        if kind == "ht":
            _ht_chunk(match_stack, f0, refs, k, half, sp.K_max, all_frames, fwdT, invT, whts,
                      sp.lambda3d * sigma, sigma, out_refs, counts, out_patches, weights)
        else:
            _wiener_chunk(match_stack, noisy_stack, f0, refs, k, half, sp.K_max, all_frames,
                          fwdT, invT, whts, sigma, out_refs, counts, out_patches, weights)
        return out_refs, counts, out_patches, weights

    grid = enumerate_references(H, W, k, sp.step)
    jobs = [(b if per_ref else 0, f0, grid[i:i + CHUNK])
            for b, f0 in enumerate(ref_frames) for i in range(0, len(grid), CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for job, res in zip(jobs, pool.map(work, jobs)):
                aggregate_kernel(num, den, *res, window, job[0])
    else:
        for job in jobs:
            aggregate_kernel(num, den, *work(job), window, job[0])

    if per_ref:
        fallback = noisy_stack[list(ref_frames)]
    else:
        fallback = noisy_stack[ref_frames[0]][None]
    covered = den > 0
    return np.where(covered, num / np.where(covered, den, 1.0), fallback)


def _as_stack(images) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(images, dtype=np.float64).reshape((-1,) + np.shape(images)[-2:]))


def _sigma(params: Bm3dParams, default: float | None) -> float:
    sigma = params.sigma if params.sigma is not None else default
    if sigma is None or not sigma > 0:
        raise ValueError("a positive noise sigma is required")
    return float(sigma)


def _single_input(noisy, params, sigma):
    noisy = np.asarray(noisy, dtype=np.float64)
    if noisy.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {noisy.shape}")
    return _as_stack(noisy), _sigma(params, sigma)


def basic_estimate(noisy, params: Bm3dParams | None = None, sigma: float | None = None,
                   threads: int = 1) -> np.ndarray:
    """First (hard-thresholding) step of BM3D on a single image."""
    params = params or Bm3dParams()
    stack, s = _single_input(noisy, params, sigma)
    return _run_step("ht", stack, stack, [0], False, False, params.step1, s, threads)[0]


def bm3d_single(noisy, params: Bm3dParams | None = None, sigma: float | None = None,
                threads: int = 1) -> np.ndarray:
    """Two-step BM3D of a single image."""
    params = params or Bm3dParams()
    stack, s = _single_input(noisy, params, sigma)
    basic = _run_step("ht", stack, stack, [0], False, False, params.step1, s, threads)
    return _run_step("wiener", basic, stack, [0], False, False, params.step2, s, threads)[0]


def _stack_and_sigma(stack, params, sigma):
    if isinstance(stack, FrameStack):
        return stack.frames, _sigma(params, stack.sigma if sigma is None else sigma)
    return _as_stack(stack), _sigma(params, sigma)


def bm3d_1(stack, params: Bm3dParams | None = None, sigma: float | None = None,
           threads: int = 1) -> np.ndarray:
    """Average the frames, then denoise the mean with sigma / sqrt(L)."""
    params = params or Bm3dParams()
    frames, s = _stack_and_sigma(stack, params, sigma)
    mean = frames.mean(axis=0)
    eff = s / np.sqrt(frames.shape[0])
    return bm3d_single(mean, replace(params, sigma=eff), threads=threads)


def bm3d_2(stack, params: Bm3dParams | None = None, sigma: float | None = None,
           threads: int = 1) -> np.ndarray:
    """Denoise every frame on its own, then average the results."""
    params = params or Bm3dParams()
    frames, s = _stack_and_sigma(stack, params, sigma)
    p = replace(params, sigma=s)
    return np.mean([bm3d_single(f, p, threads=threads) for f in frames], axis=0)


def bm3d_3(stack, ref_index: int = 0, params: Bm3dParams | None = None,
           sigma: float | None = None, threads: int = 1) -> np.ndarray:
    """Reference-frame BM3D whose first-step groups draw patches from every frame."""
    params = params or Bm3dParams()
    frames, s = _stack_and_sigma(stack, params, sigma)
    L = frames.shape[0]
    if not 0 <= ref_index < L:
        raise ValueError(f"reference index {ref_index} out of range for {L} frames")
    basic = _run_step("ht", frames, frames, [ref_index], True, False, params.step1, s, threads)
    ref = np.ascontiguousarray(frames[ref_index:ref_index + 1])
    return _run_step("wiener", basic, ref, [0], False, False, params.step2, s, threads)[0]


def bm3d_m(stack, params: Bm3dParams | None = None, sigma: float | None = None,
           threads: int = 1) -> np.ndarray:
    """Multi-frame BM3D with cross-frame grouping in both steps and pooled aggregation.

    Step 1 runs the cross-frame grouping once per frame and aggregates each
    frame's groups into that frame's own basic estimate.  Step 2 groups on the stack
    of basic estimates, filters the co-located noisy patches and pools every
    filtered patch from every frame into a single output image.
    """
    params = params or Bm3dParams()
    frames, s = _stack_and_sigma(stack, params, sigma)
    ids = list(range(frames.shape[0]))
    basic = _run_step("ht", frames, frames, ids, True, True, params.step1, s, threads)
    return _run_step("wiener", basic, frames, ids, True, False, params.step2, s, threads)[0]


def run_method(method: str, stack: FrameStack, params: Bm3dParams | None = None,
               threads: int = 1, clean=None) -> tuple[np.ndarray, dict]:
    """Dispatch ``method`` on ``stack``; returns (image, metadata).

    For BM3D-3 every frame is tried as the reference and the one with the
    lowest MSE against ``clean`` (or ``stack.clean``) is returned; without a
    clean image frame 0 is used.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    params = params or Bm3dParams()
    if clean is None:
        clean = stack.clean
    meta: dict = {"method": method, "L": stack.L, "warnings": []}
    t0 = time.perf_counter()
    if method == "BM3D":
        if stack.L > 1:
            msg = f"BM3D is a single-image method; using frame 0 of {stack.L}"
            meta["warnings"].append(msg)
            warnings.warn(msg, stacklevel=2)
        out = bm3d_single(stack.frames[0], params, sigma=stack.sigma, threads=threads)
    elif method == "BM3D-1":
        out = bm3d_1(stack, params, threads=threads)
    elif method == "BM3D-2":
        out = bm3d_2(stack, params, threads=threads)
    elif method == "BM3D-M":
        out = bm3d_m(stack, params, threads=threads)
    else:
        refs = range(stack.L) if clean is not None else [0]
        outs = [bm3d_3(stack, i, params, threads=threads) for i in refs]
        if clean is not None:
            errs = [metrics.mse(o, clean) for o in outs]
            best = int(np.argmin(errs))
            meta["ref_mse"] = errs
        else:
            best = 0
        meta["ref_index"] = best
        meta["outputs"] = outs
        out = outs[best]
    meta["wall_time"] = time.perf_counter() - t0
    return out, meta
