"""Slot-by-slot tracking of the received-pilot factor z over a coherence period.

Two modes share a state initialized from the first-slot estimates:

* ``track_direct`` applies the pseudo-inverse of f = khatri_rao(phi, g),
  computed once per coherence period, to each new slot.
* ``track_recursive`` is the exponentially-weighted recursion: solve for the
  new z through the cached K x K Gram of f, then refresh f from rank-updated
  correlation accumulators.  No factorization of size n_rx * n_profiles ever
  happens per slot; every solve is K x K.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import PhaseProfileMatrix
from .errors import ConfigError, NumericError
from .tensor_ops import SlotTensor, khatri_rao, pseudo_inverse, unfold_mode2

# relative ridge applied to every K x K solve; rescues early-slot rank deficiency
_RIDGE_F = 1e-10
_RIDGE_Z = 1e-12


@dataclass(frozen=True)
class TrackerState:
    """Tracker state: current f estimate, its Gram cache, and the
    exponentially-weighted correlation accumulators.

    ``corr_zz`` stays Hermitian positive semidefinite under updates (it is a
    forgetting-weighted sum of Gram matrices).  ``f_struct`` is the current f
    projected back onto the Khatri-Rao structure phi (x) g that f has by
    definition; the per-slot z solve goes through it because the projection
    averages the refresh noise over all profiles.  ``f_pinv_cache`` belongs
    to the fixed-f direct mode and is invalidated by recursive updates.
    """

    f_hat: np.ndarray  # (n_profiles * n_rx) x K
    corr_zz: np.ndarray  # K x K
    corr_yz: np.ndarray  # (n_profiles * n_rx) x K
    forgetting: float
    slot: int
    phi_matrix: np.ndarray  # L x K, known phase profiles
    g_ref: np.ndarray  # n_rx x K, period-initial G estimate fixing the diagonal gauge
    g_struct: np.ndarray  # n_rx x K, current G belief in the reference gauge
    f_struct: np.ndarray  # (n_profiles * n_rx) x K, structured projection of f_hat
    f_gram: np.ndarray  # K x K, cached f_struct^H f_struct
    f_pinv_cache: np.ndarray | None = None


def _project_structure(f: np.ndarray, phi_m: np.ndarray, g_ref: np.ndarray):
    """Columnwise LS projection of f onto {khatri_rao(phi, g)}, with the
    per-column complex scale re-anchored to the reference g.

    The diagonal scale of f is unobservable from (y, z) pairs (it trades off
    against the z rows), so any scale movement in the refresh is noise; the
    gauge is pinned to the period-initial estimate."""
    l, k = phi_m.shape
    n_rx = g_ref.shape[0]
    blocks = f.reshape(l, n_rx, k)
    g = np.einsum("lnk,lk->nk", blocks, phi_m.conj()) / l
    d = np.einsum("nk,nk->k", g_ref.conj(), g) / np.maximum(
        np.einsum("nk,nk->k", g_ref.conj(), g_ref).real, 1e-300
    )
    d = np.where(np.abs(d) < 1e-12, 1.0, d)
    g = g / d[None, :]
    return g, khatri_rao(phi_m, g)


def tracker_init(
    g_hat: np.ndarray,
    z1_hat: np.ndarray,
    phi: PhaseProfileMatrix,
    forgetting: float,
) -> TrackerState:
    """Seed the tracker from first-slot estimates.

    corr_yz is seeded as f @ corr_zz, the value consistent with a slot that
    exactly fits the model, so the first f refresh is a no-op on clean data.
    """
    if not (0.0 < forgetting <= 1.0):
        raise ConfigError(f"forgetting must satisfy 0 < lambda <= 1, got {forgetting}")
    g_hat = np.asarray(g_hat, dtype=complex)
    z1_hat = np.asarray(z1_hat, dtype=complex)
    if g_hat.ndim != 2 or z1_hat.ndim != 2 or g_hat.shape[1] != z1_hat.shape[0]:
        raise ConfigError(f"factor shapes not conformable: {g_hat.shape} vs {z1_hat.shape}")
    if phi.matrix.shape[1] != g_hat.shape[1]:
        raise ConfigError(f"phi width {phi.matrix.shape[1]} != g columns {g_hat.shape[1]}")
    f = khatri_rao(phi.matrix, g_hat)
    corr_zz = z1_hat @ z1_hat.conj().T
    return TrackerState(
        f_hat=f,
        corr_zz=corr_zz,
        corr_yz=f @ corr_zz,
        forgetting=float(forgetting),
        slot=1,
        phi_matrix=phi.matrix,
        g_ref=g_hat,
        g_struct=g_hat,
        f_struct=f,
        f_gram=f.conj().T @ f,
        f_pinv_cache=pseudo_inverse(f),
    )


def tracker_init_from_tensor(
    g_hat: np.ndarray,
    phi: PhaseProfileMatrix,
    t1: SlotTensor,
    forgetting: float,
) -> tuple[TrackerState, np.ndarray]:
    """Initialize from a g estimate alone: z1 is the LS solve on slot 1."""
    f = khatri_rao(phi.matrix, np.asarray(g_hat, dtype=complex))
    z1 = pseudo_inverse(f) @ unfold_mode2(t1).T
    return tracker_init(g_hat, z1, phi, forgetting), z1


def _solve_hermitian(a: np.ndarray, b_h: np.ndarray, context: str) -> np.ndarray:
    """Solve x @ a = b for x with Hermitian a, i.e. x = (a \\ b^H)^H."""
    try:
        x = np.linalg.solve(a, b_h).conj().T
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"{context}: singular system", condition_number=float(np.linalg.cond(a))
        ) from exc
    if not np.all(np.isfinite(x)):
        raise NumericError(
            f"{context}: non-finite solution", condition_number=float(np.linalg.cond(a))
        )
    return x


def track_direct(state: TrackerState, t_next: SlotTensor) -> np.ndarray:
    """Estimate z for the next slot through the cached pseudo-inverse of f.

    The cache is computed once per coherence period; the caller must
    re-initialize after the slow channel is redrawn.
    """
    y2t = unfold_mode2(t_next).T
    if y2t.shape[0] != state.f_hat.shape[0]:
        raise ConfigError(
            f"tensor size {y2t.shape[0]} != tracker size {state.f_hat.shape[0]}"
        )
    f_pinv = state.f_pinv_cache
    if f_pinv is None:
        f_pinv = pseudo_inverse(state.f_hat)
    return f_pinv @ y2t


def track_recursive(state: TrackerState, t_next: SlotTensor) -> tuple[np.ndarray, TrackerState]:
    """One exponentially-weighted recursive update.

    (a) z for the new slot from the current f via the cached K x K Gram;
    (b) rank-S updates of the correlation accumulators and the f refresh
        f = corr_yz @ inv(corr_zz + eps*I), the exact minimizer of the
        forgetting-weighted squared error over the stored z history.
    """
    y2t = unfold_mode2(t_next).T
    k = state.f_hat.shape[1]
    if y2t.shape[0] != state.f_hat.shape[0]:
        raise ConfigError(
            f"tensor size {y2t.shape[0]} != tracker size {state.f_hat.shape[0]}"
        )
    lam = state.forgetting

    gram = state.f_gram
    eps_z = _RIDGE_Z * np.trace(gram).real / k
    rhs = state.f_struct.conj().T @ y2t
    try:
        z = np.linalg.solve(gram + eps_z * np.eye(k), rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "tracker z-step: singular Gram", condition_number=float(np.linalg.cond(gram))
        ) from exc

    corr_zz = lam * state.corr_zz + z @ z.conj().T
    corr_yz = lam * state.corr_yz + y2t @ z.conj().T
    eps_f = _RIDGE_F * np.trace(corr_zz).real / k
    a = corr_zz + eps_f * np.eye(k)
    # incremental form of corr_yz @ inv(a): equals the exact minimizer in the
    # directions the z history determines and keeps the previous f where the
    # forgetting-weighted history is rank deficient (S < K with small lambda);
    # the innovation lies in the history row space, so nothing hits 1/eps
    innovation = corr_yz - state.f_hat @ corr_zz
    f = state.f_hat + _solve_hermitian(a, innovation.conj().T, "tracker f-refresh")
    g_struct, f_struct = _project_structure(f, state.phi_matrix, state.g_ref)

    new_state = replace(
        state,
        f_hat=f,
        corr_zz=corr_zz,
        corr_yz=corr_yz,
        slot=state.slot + 1,
        g_struct=g_struct,
        f_struct=f_struct,
        f_gram=f_struct.conj().T @ f_struct,
        f_pinv_cache=None,
    )
    return z, new_state
