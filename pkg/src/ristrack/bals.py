"""Initial-slot estimation by bilinear alternating least squares.

With the phase-profile factor known, the slot tensor is a rank-``n_ris``
three-way array with unknown factors ``g`` and ``z``; BALS alternates the two
exact LS solves

    g <- Y_(1) @ pinv(khatri_rao(phi, z.T).T)
    z <- pinv(khatri_rao(phi, g)) @ Y_(2).T

until the reconstruction residual stops changing.  The result carries a
per-column diagonal scaling ambiguity; ``resolve_scaling`` removes it either
blindly (unit-norm columns) or against the true g (simulation only).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import PhaseProfileMatrix, SystemConfig
from .errors import AmbiguityError, ConfigError, DivergenceError
from .tensor_ops import SlotTensor, khatri_rao, pseudo_inverse, unfold_mode1, unfold_mode2


class Verdict(enum.Enum):
    FULL_COLUMN_RANK = "full_column_rank"
    GENERIC_UNIQUE = "generic_unique"
    NOT_GUARANTEED = "not_guaranteed"


@dataclass(frozen=True)
class Identifiability:
    """Uniqueness diagnosis for a scenario's decomposition problem."""

    verdict: Verdict
    n_profiles: int
    pilot_len: int
    n_ris: int


def check_identifiability(cfg: SystemConfig) -> Identifiability:
    """Sufficient uniqueness conditions: full column rank of the profile
    matrix when L >= K, else the generic condition L + S - 2 >= K.

    These are sufficient, not necessary; ``NOT_GUARANTEED`` does not forbid
    running the estimator.
    """
    l, s, k = cfg.n_profiles, cfg.pilot_len, cfg.n_ris
    if l >= k:
        verdict = Verdict.FULL_COLUMN_RANK
    elif l + s - 2 >= k:
        verdict = Verdict.GENERIC_UNIQUE
    else:
        verdict = Verdict.NOT_GUARANTEED
    return Identifiability(verdict=verdict, n_profiles=l, pilot_len=s, n_ris=k)


@dataclass
class BalsOptions:
    max_iters: int = 200
    rel_tol: float = 1e-6
    init_mode: str = "random"  # "random" | "provided"
    init_g: np.ndarray | None = None
    init_z: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ConfigError("rel_tol must be > 0")
        if self.init_mode not in ("random", "provided"):
            raise ConfigError(f"unknown init_mode {self.init_mode!r}")
        if self.init_mode == "provided" and self.init_z is None:
            raise ConfigError("init_mode='provided' requires init_z")


@dataclass
class FactorEstimate:
    """BALS output: factor estimates plus the residual trace."""

    g_hat: np.ndarray
    z_hat: np.ndarray
    residual_history: list[float] = field(default_factory=list)
    iters_used: int = 0


def bals(
    t: SlotTensor,
    phi: PhaseProfileMatrix,
    opts: BalsOptions | None = None,
    rng: np.random.Generator | None = None,
) -> FactorEstimate:
    """Estimate (g, z) from one slot tensor with known phase profiles.

    The residual ``||Y - reconstruction||_F`` is recorded after every full
    alternation and is non-increasing because each half-step is an exact LS
    solve.  Returned factors carry the usual diagonal ambiguity.
    """
    opts = opts or BalsOptions()
    pm = phi.matrix
    if pm.shape[0] != t.n_profiles:
        raise ConfigError(f"profile count mismatch: tensor has {t.n_profiles}, phi has {pm.shape[0]}")
    k = pm.shape[1]
    y1 = unfold_mode1(t)
    y2t = unfold_mode2(t).T
    norm_y = np.linalg.norm(y1)

    if opts.init_mode == "provided":
        z = np.array(opts.init_z, dtype=complex)
        if z.shape != (k, t.n_pilot):
            raise ConfigError(f"init_z must be {k} x {t.n_pilot}, got {z.shape}")
    else:
        if rng is None:
            rng = np.random.default_rng()
        z = (rng.standard_normal((k, t.n_pilot)) + 1j * rng.standard_normal((k, t.n_pilot))) / np.sqrt(2.0)

    g = opts.init_g
    residuals: list[float] = []
    prev = np.inf
    iters = 0
    for iters in range(1, opts.max_iters + 1):
        b = khatri_rao(pm, z.T)  # (L*S) x K
        g = y1 @ pseudo_inverse(b).T
        c = khatri_rao(pm, g)  # (L*N_r) x K
        z = pseudo_inverse(c) @ y2t
        res = float(np.linalg.norm(y2t - c @ z))
        if not np.isfinite(res):
            raise DivergenceError("BALS residual became non-finite", last_estimate=(g, z))
        residuals.append(res)
        if res <= 1e-14 * norm_y:
            break
        if np.isfinite(prev) and abs(prev - res) <= opts.rel_tol * max(prev, 1e-300):
            break
        prev = res
    return FactorEstimate(g_hat=g, z_hat=z, residual_history=residuals, iters_used=iters)


def ls_krf(kr_estimate: np.ndarray, n_rx: int) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares Khatri-Rao factorization of an (S*N_r) x K matrix.

    Column k is reshaped (column-major) to an N_r x S matrix and replaced by
    its best rank-1 fit g_k z_k^T via the dominant singular triplet.  Returns
    (g, z_t) with z_t holding z_k as columns; each pair is determined up to a
    per-column unit-modulus scale.  Zero columns yield zero factors and a
    warning.
    """
    kr_estimate = np.asarray(kr_estimate, dtype=complex)
    if kr_estimate.ndim != 2:
        raise ConfigError("ls_krf expects a matrix")
    sn, k = kr_estimate.shape
    if n_rx < 1 or sn % n_rx != 0:
        raise ConfigError(f"row count {sn} is not a multiple of n_rx={n_rx}")
    s = sn // n_rx
    g = np.zeros((n_rx, k), dtype=complex)
    z_t = np.zeros((s, k), dtype=complex)
    for j in range(k):
        block = kr_estimate[:, j].reshape((n_rx, s), order="F")
        if not block.any():
            warnings.warn(f"ls_krf: column {j} is zero, returning zero factors", RuntimeWarning)
            continue
        u, sv, vh = np.linalg.svd(block, full_matrices=False)
        scale = np.sqrt(sv[0])
        g[:, j] = scale * u[:, 0]
        z_t[:, j] = scale * vh[0, :]  # row of vh is v^H, i.e. conj of the right vector
    return g, z_t


def resolve_scaling(
    g_hat: np.ndarray,
    z_hat: np.ndarray,
    g_true: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Remove the diagonal scaling ambiguity of a (g, z) factor pair.

    Blind mode scales each column of g to unit norm with its first nonzero
    entry made real-positive and applies the inverse scaling to the rows of
    z, leaving every composite product unchanged.  Genie mode (g_true given,
    simulation only) fits the per-column diagonal d minimizing
    ||g_true @ diag(d) - g_hat||_F and applies d / 1/d.
    """
    g_hat = np.asarray(g_hat, dtype=complex)
    z_hat = np.asarray(z_hat, dtype=complex)
    if g_hat.shape[1] != z_hat.shape[0]:
        raise ConfigError(f"factor shapes not conformable: {g_hat.shape} vs {z_hat.shape}")
    k = g_hat.shape[1]
    d = np.empty(k, dtype=complex)
    if g_true is None:
        for j in range(k):
            col = g_hat[:, j]
            norm = np.linalg.norm(col)
            if norm == 0.0:
                raise AmbiguityError(f"zero column {j} in g estimate: scaling unresolvable")
            first = col[np.flatnonzero(np.abs(col) > 0)[0]]
            d[j] = norm * first / np.abs(first)
    else:
        g_true = np.asarray(g_true, dtype=complex)
        if g_true.shape != g_hat.shape:
            raise ConfigError(f"g_true shape {g_true.shape} != estimate shape {g_hat.shape}")
        for j in range(k):
            denom = np.vdot(g_true[:, j], g_true[:, j])
            if denom == 0.0:
                raise AmbiguityError(f"zero column {j} in g_true: scaling unresolvable")
            d[j] = np.vdot(g_true[:, j], g_hat[:, j]) / denom
        if np.any(np.abs(d) == 0.0):
            raise AmbiguityError("estimated diagonal has a zero entry: scaling unresolvable")
    return g_hat / d[None, :], z_hat * d[:, None]
