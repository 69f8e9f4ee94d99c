"""Fixed analysis/synthesis transforms applied to 3D patch groups.

Every transform is materialized once as a dense matrix and applied by matrix
multiplication.  Spatial operators act on a flattened ``k*k`` patch (row-major),
the Walsh-Hadamard operator acts along the group axis.

Conventions
-----------
* ``wht_matrix(K)`` is the orthonormal (Sylvester ordered) Walsh-Hadamard matrix.
* ``dct_matrix(k)`` is the orthonormal DCT-II matrix; its transpose is DCT-III.
* ``bior15_matrix(k)`` is the separable 2D bi-orthogonal 1.5 spline wavelet with
  periodic extension and a full dyadic (Mallat) decomposition of ``log2(k)``
  levels.  Coefficients use the usual pyramid layout: the single approximation
  coefficient sits at index ``(0, 0)``, the finest details occupy the outer
  quadrants.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

SPATIAL_TRANSFORMS = ("bior15", "dct")

_S = np.sqrt(2.0) / 2.0
# bior1.5 filter bank, taps scaled by 1/128
BIOR15_DEC_LO = _S * np.array([3, -3, -22, 22, 128, 128, 22, -22, -3, 3]) / 128.0
BIOR15_DEC_HI = _S * np.array([0, 0, 0, 0, -128, 128, 0, 0, 0, 0]) / 128.0
BIOR15_REC_LO = _S * np.array([0, 0, 0, 0, 128, 128, 0, 0, 0, 0]) / 128.0
BIOR15_REC_HI = _S * np.array([3, 3, -22, -22, 128, -128, 22, 22, -3, -3]) / 128.0

# periodized filter-bank alignment (matches the common "periodization" mode)
_ANALYSIS_SHIFT = 5
_SYNTHESIS_SHIFT = -4


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_pow2(n: int, what: str) -> None:
    if not _is_pow2(int(n)):
        raise ValueError(f"{what} must be a power of two, got {n}")


@lru_cache(maxsize=None)
def _wht(K: int) -> np.ndarray:
    H = np.ones((1, 1))
    while H.shape[0] < K:
        H = np.block([[H, H], [H, -H]])
    H = H / np.sqrt(K)
    H.setflags(write=False)
    return H


def wht_matrix(K: int) -> np.ndarray:
    """Orthonormal K x K Walsh-Hadamard matrix (symmetric, self-inverse)."""
    _check_pow2(K, "WHT length")
    return _wht(int(K))


def wht_1d(v, direction: str = "forward") -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform of a vector whose length is a power of two.

    The orthonormal WHT is its own inverse, so ``direction`` only validates input.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("wht_1d expects a 1D vector")
    _check_direction(direction)
    return wht_matrix(v.shape[0]) @ v


@lru_cache(maxsize=None)
def _dct(k: int) -> np.ndarray:
    n = np.arange(k)
    C = np.cos(np.pi * (2 * n[None, :] + 1) * n[:, None] / (2 * k))
    C[0] *= np.sqrt(1.0 / k)
    C[1:] *= np.sqrt(2.0 / k)
    C.setflags(write=False)
    return C


def dct_matrix(k: int) -> np.ndarray:
    """Orthonormal k x k DCT-II matrix."""
    if k < 1:
        raise ValueError(f"DCT size must be positive, got {k}")
    return _dct(int(k))


def _analysis_level(n: int) -> np.ndarray:
    """One periodized analysis level for length n: rows [lowpass; highpass]."""
    h = n // 2
    A = np.zeros((n, n))
    for i in range(h):
        for j in range(BIOR15_DEC_LO.size):
            m = (2 * i + _ANALYSIS_SHIFT - j) % n
            A[i, m] += BIOR15_DEC_LO[j]
            A[h + i, m] += BIOR15_DEC_HI[j]
    return A


def _synthesis_level(n: int) -> np.ndarray:
    """Inverse of :func:`_analysis_level`, built from the synthesis taps."""
    h = n // 2
    S = np.zeros((n, n))
    for i in range(h):
        for j in range(BIOR15_REC_LO.size):
            m = (2 * i + j + _SYNTHESIS_SHIFT) % n
            S[m, i] += BIOR15_REC_LO[j]
            S[m, h + i] += BIOR15_REC_HI[j]
    return S


def _embed(M: np.ndarray, n: int) -> np.ndarray:
    """Act with M on the leading block of a length-n vector, identity elsewhere."""
    out = np.eye(n)
    out[: M.shape[0], : M.shape[1]] = M
    return out


@lru_cache(maxsize=None)
def _bior15(k: int) -> tuple[np.ndarray, np.ndarray]:
    # Mallat pyramid: each level transforms rows and columns of the current
    # approximation block only.
    fwd = np.eye(k * k)
    inv = np.eye(k * k)
    n = k
    while n > 1:
        A1 = _analysis_level(n)
        S1 = _synthesis_level(n)
        level_fwd = np.zeros((k, k, k, k))
        level_inv = np.zeros((k, k, k, k))
        Ae = _embed(A1, k)
        Se = _embed(S1, k)
        # 2D operator on the n x n corner: X -> Ae X Ae^T, identity outside it
        for r in range(k):
            for c in range(k):
                E = np.zeros((k, k))
                E[r, c] = 1.0
                if r < n and c < n:
                    level_fwd[:, :, r, c] = Ae @ E @ Ae.T
                    level_inv[:, :, r, c] = Se @ E @ Se.T
                else:
                    level_fwd[:, :, r, c] = E
                    level_inv[:, :, r, c] = E
        fwd = level_fwd.reshape(k * k, k * k) @ fwd
        inv = inv @ level_inv.reshape(k * k, k * k)
        n //= 2
    fwd.setflags(write=False)
    inv.setflags(write=False)
    return fwd, inv


def bior15_matrices(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense (forward, inverse) k^2 x k^2 operators of the 2D bior1.5 wavelet."""
    _check_pow2(k, "bior1.5 patch size")
    if k < 2:
        raise ValueError("bior1.5 patch size must be at least 2")
    return _bior15(int(k))


@lru_cache(maxsize=None)
def _dct2(k: int) -> tuple[np.ndarray, np.ndarray]:
    C = _dct(k)
    fwd = np.kron(C, C)
    inv = np.ascontiguousarray(fwd.T)
    fwd.setflags(write=False)
    inv.setflags(write=False)
    return fwd, inv


def spatial_matrices(k: int, spatial: str) -> tuple[np.ndarray, np.ndarray]:
    """Dense (forward, inverse) operators for a flattened k x k patch."""
    if spatial == "bior15":
        return bior15_matrices(k)
    if spatial == "dct":
        if k < 2:
            raise ValueError(f"DCT patch size must be >= 2, got {k}")
        return _dct2(int(k))
    raise ValueError(f"unknown spatial transform {spatial!r}; expected one of {SPATIAL_TRANSFORMS}")


def _check_direction(direction: str) -> None:
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def _apply_2d(p, k_check, spatial: str, direction: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"expected a square patch, got shape {p.shape}")
    k = p.shape[0]
    k_check(k)
    _check_direction(direction)
    fwd, inv = spatial_matrices(k, spatial)
    M = fwd if direction == "forward" else inv
    return (M @ p.reshape(-1)).reshape(k, k)


def bior15_2d(p, direction: str = "forward") -> np.ndarray:
    """2D bior1.5 wavelet transform (or its inverse) of a square power-of-two patch."""
    return _apply_2d(p, lambda k: bior15_matrices(k), "bior15", direction)


def dct_2d(p, direction: str = "forward") -> np.ndarray:
    """Separable orthonormal DCT-II (forward) / DCT-III (inverse) of a square patch."""

    def check(k):
        if k < 2:
            raise ValueError(f"DCT patch size must be >= 2, got {k}")

    return _apply_2d(p, check, "dct", direction)


def transform_patches(patches: np.ndarray, spatial: str) -> np.ndarray:
    """3D transform of a stack of K patches, shape (K, k, k) -> (K, k, k).

    The spatial transform is applied to every patch, then the WHT runs along
    the group axis at each coefficient position.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 3 or patches.shape[1] != patches.shape[2]:
        raise ValueError(f"expected a (K, k, k) stack, got shape {patches.shape}")
    K, k, _ = patches.shape
    fwd, _ = spatial_matrices(k, spatial)
    flat = patches.reshape(K, k * k) @ fwd.T
    return (wht_matrix(K) @ flat).reshape(K, k, k)


def inverse_transform_patches(coeffs: np.ndarray, spatial: str) -> np.ndarray:
    """Inverse of :func:`transform_patches`."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 3 or coeffs.shape[1] != coeffs.shape[2]:
        raise ValueError(f"expected a (K, k, k) stack, got shape {coeffs.shape}")
    K, k, _ = coeffs.shape
    _, inv = spatial_matrices(k, spatial)
    flat = wht_matrix(K) @ coeffs.reshape(K, k * k)
    return (flat @ inv.T).reshape(K, k, k)


def transform_group(group, spatial: str):
    """Forward 3D transform of a :class:`~bm3dm.matching.Group3D`.

    Returns a :class:`TransformedGroup`.
    """
    return TransformedGroup(coeffs=transform_patches(group.patches, spatial), spatial=spatial)


def inverse_transform_group(tg: "TransformedGroup", refs):
    """Back-transform coefficients into a Group3D attached to ``refs``."""
    from .matching import Group3D

    return Group3D(refs=np.asarray(refs), patches=inverse_transform_patches(tg.coeffs, tg.spatial))


class TransformedGroup:
    """Coefficients of a 3D group, shape (K, k, k)."""

    __slots__ = ("coeffs", "spatial")

    def __init__(self, coeffs: np.ndarray, spatial: str):
        coeffs = np.asarray(coeffs, dtype=np.float64)
        _check_pow2(coeffs.shape[0], "group size")
        self.coeffs = coeffs
        self.spatial = spatial

    @property
    def K(self) -> int:
        return self.coeffs.shape[0]

    @property
    def k(self) -> int:
        return self.coeffs.shape[1]
