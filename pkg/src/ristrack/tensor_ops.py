"""Complex dense linear-algebra kernels used by the estimators.

Conventions fixed here and relied on everywhere else:

* ``vec`` is column-major.
* ``khatri_rao(a, b)`` stacks ``kron(a[:, k], b[:, k])`` columnwise, so the
  row index runs over ``(row_of_a, row_of_b)`` with the second factor fastest.
* A slot observation is the ``n_rx x n_pilot x n_profiles`` tensor whose
  frontal slice ``l`` is the block received under phase profile ``l``; the
  three unfoldings below are the unique layouts satisfying

  ``unfold_mode1(t) == g @ khatri_rao(phi, z.T).T``
  ``unfold_mode2(t) == z.T @ khatri_rao(phi, g).T``
  ``unfold_mode3(t) == phi @ khatri_rao(z.T, g).T``

  for a noiseless tensor with slices ``g @ diag(phi[l]) @ z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError


@dataclass(frozen=True)
class SlotTensor:
    """One slot of received pilot blocks, shape (n_rx, n_pilot, n_profiles)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ConfigError(f"slot tensor must be 3-D with positive dims, got shape {arr.shape}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr, dtype=complex))

    @property
    def n_rx(self) -> int:
        return self.data.shape[0]

    @property
    def n_pilot(self) -> int:
        return self.data.shape[1]

    @property
    def n_profiles(self) -> int:
        return self.data.shape[2]

    def slice(self, l: int) -> np.ndarray:
        """Frontal slice l, the n_rx x n_pilot block of profile l."""
        return self.data[:, :, l]

    @property
    def frontal_slices(self) -> list[np.ndarray]:
        return [self.data[:, :, l] for l in range(self.n_profiles)]


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Columnwise Kronecker product of a (J x K) and b (I x K), giving (J*I) x K."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ConfigError("khatri_rao expects two matrices")
    if a.shape[1] != b.shape[1]:
        raise ConfigError(f"column count mismatch: {a.shape} vs {b.shape}")
    j, k = a.shape
    i = b.shape[0]
    return (a[:, None, :] * b[None, :, :]).reshape(j * i, k)


def unfold_mode1(t: SlotTensor) -> np.ndarray:
    """Mode-1 unfolding [Y_1 ... Y_L], shape n_rx x (n_profiles * n_pilot)."""
    n, s, l = t.data.shape
    return t.data.transpose(0, 2, 1).reshape(n, l * s)


def unfold_mode2(t: SlotTensor) -> np.ndarray:
    """Mode-2 unfolding [Y_1^T ... Y_L^T], shape n_pilot x (n_profiles * n_rx)."""
    n, s, l = t.data.shape
    return t.data.transpose(1, 2, 0).reshape(s, l * n)


def unfold_mode3(t: SlotTensor) -> np.ndarray:
    """Mode-3 unfolding with row l = vec(Y_l)^T (column-major vec)."""
    n, s, l = t.data.shape
    return t.data.transpose(2, 1, 0).reshape(l, s * n)


def pseudo_inverse(a: np.ndarray, rel_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``rel_tol * sigma_max`` are treated as zero.
    Defaults to the numerical-rank convention eps * max(rows, cols).
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ConfigError("pseudo_inverse expects a matrix")
    if not np.all(np.isfinite(a)):
        raise ConfigError("pseudo_inverse requires finite entries")
    if rel_tol is None:
        rel_tol = np.finfo(float).eps * max(a.shape)
    try:
        return np.linalg.pinv(a, rcond=rel_tol)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed in pseudo_inverse for shape {a.shape}: {exc}") from exc


def dft_matrix(n: int, normalized: bool = False) -> np.ndarray:
    """n x n DFT matrix, entry (p, q) = exp(-2j*pi*p*q/n), 1/sqrt(n)-scaled if normalized."""
    if n < 1:
        raise ConfigError("dft_matrix needs n >= 1")
    idx = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(idx, idx) / n)
    return w / np.sqrt(n) if normalized else w
