"""Sparse recovery of the user channels from tracked pilot-signal estimates.

The per-slot estimate z ~= h @ x is mapped to the angular domain, where
geometric channels are compressible, and each angular-bin column is solved
as an independent generalized linear model by sum-product GAMP with a
Bernoulli-Gaussian prior and an additive-Gaussian output channel:

    z.T @ u  =  x.T @ h_a + noise,      h_a = h.T @ u.

Damping stabilizes the iteration on the deterministic DFT-submatrix pilots,
and optional per-column EM updates refine the sparsity level, signal power,
and noise power.  Columns whose final fit is inconsistent with their learned
noise level are restarted once from the minimum-norm LS solution (the EM
iteration can commit to a wrong support early).  Per-iteration work is
O(S*M) per column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PilotMatrix
from .errors import ConfigError, DivergenceError
from .tensor_ops import dft_matrix, pseudo_inverse

_TAU_FLOOR = 1e-30


@dataclass
class GampOptions:
    max_iters: int = 50
    tol: float = 1e-8
    damping: float = 0.9
    prior_sparsity: float = 0.1
    prior_var: float = 1.0
    noise_var: float = 0.0
    learn_hyperparams: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")
        if not (0.0 < self.damping <= 1.0):
            raise ConfigError("damping must lie in (0, 1]")
        if not (0.0 < self.prior_sparsity <= 1.0):
            raise ConfigError("prior_sparsity must lie in (0, 1]")
        if not self.prior_var > 0:
            raise ConfigError("prior_var must be > 0")
        if self.noise_var < 0:
            raise ConfigError("noise_var must be >= 0")


@dataclass
class GampDiagnostics:
    """Per-column convergence record of one gamp_solve call."""

    iterations: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    restarted: np.ndarray | None = None


def to_angular(h: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Angular-domain representation h.T @ u of a channel matrix."""
    h = np.asarray(h, dtype=complex)
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ConfigError(f"transform matrix must be square, got {u.shape}")
    if h.shape[0] != u.shape[0]:
        raise ConfigError(f"channel rows {h.shape[0]} != transform size {u.shape[0]}")
    return h.T @ u


def from_angular(h_a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Exact inverse of to_angular for unitary u: h = conj(u) @ h_a.T."""
    h_a = np.asarray(h_a, dtype=complex)
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ConfigError(f"transform matrix must be square, got {u.shape}")
    if h_a.shape[1] != u.shape[0]:
        raise ConfigError(f"angular columns {h_a.shape[1]} != transform size {u.shape[0]}")
    return u.conj() @ h_a.T


def _bg_posterior(r, tau_r, rho, var_x):
    """Posterior mixture weight, component mean, and component variance of a
    Bernoulli-Gaussian scalar under the pseudo-measurement r = x + CN(0, tau_r)."""
    gamma = (var_x / (var_x + tau_r)) * r
    nu = var_x * tau_r / (var_x + tau_r)
    with np.errstate(divide="ignore"):
        log_ratio = (
            np.log((1.0 - rho) / rho)
            + np.log((tau_r + var_x) / tau_r)
            - (np.abs(r) ** 2) * (1.0 / tau_r - 1.0 / (tau_r + var_x))
        )
    pi = 1.0 / (1.0 + np.exp(np.clip(log_ratio, -50.0, 50.0)))
    pi = np.where(rho >= 1.0, 1.0, pi)
    return pi, gamma, nu


def _gamp_iterate(a, b, opts: GampOptions, x_init=None, tau_init=None):
    """Damped sum-product GAMP over all columns of b; returns the estimate,
    per-column iteration counts / convergence flags, and learned noise."""
    s_dim, m_dim = a.shape
    k_dim = b.shape[1]
    theta = opts.damping

    abs2_a = np.abs(a) ** 2
    a_h = a.conj().T
    abs2_a_t = abs2_a.T

    rho = np.full(k_dim, opts.prior_sparsity)
    var_x = np.full(k_dim, opts.prior_var)
    var_w = np.full(k_dim, max(opts.noise_var, _TAU_FLOOR))

    if x_init is None:
        x_hat = np.zeros((m_dim, k_dim), dtype=complex)
    else:
        x_hat = np.array(x_init, dtype=complex)
    if tau_init is None:
        tau_x = np.broadcast_to(rho * var_x, (m_dim, k_dim)).copy()
    else:
        # warm start: the variance belief must match the init's confidence or
        # the first denoiser pass discards it
        tau_x = np.broadcast_to(np.maximum(tau_init, _TAU_FLOOR), (m_dim, k_dim)).copy()
    s_hat = np.zeros((s_dim, k_dim), dtype=complex)

    scale = max(float(np.linalg.norm(b)), 1.0)
    active = np.ones(k_dim, dtype=bool)
    iterations = np.zeros(k_dim, dtype=int)
    converged = np.zeros(k_dim, dtype=bool)

    for it in range(1, opts.max_iters + 1):
        x_prev = x_hat.copy()

        # output linear step
        tau_p = np.maximum(abs2_a @ tau_x, _TAU_FLOOR)
        p = a @ x_hat - tau_p * s_hat
        # additive-Gaussian output denoiser
        denom = tau_p + var_w[None, :]
        z_hat = (tau_p * b + var_w[None, :] * p) / denom
        tau_z = tau_p * var_w[None, :] / denom
        s_new = (b - p) / denom
        s_hat = np.where(active[None, :], theta * s_new + (1.0 - theta) * s_hat, s_hat)
        tau_s = (1.0 - tau_z / tau_p) / tau_p

        # input linear step
        tau_r = 1.0 / np.maximum(abs2_a_t @ tau_s, _TAU_FLOOR)
        r = x_hat + tau_r * (a_h @ s_hat)

        # Bernoulli-Gaussian input denoiser
        pi, gamma, nu = _bg_posterior(r, tau_r, rho[None, :], var_x[None, :])
        x_new = pi * gamma
        tau_new = pi * nu + pi * (1.0 - pi) * np.abs(gamma) ** 2
        x_hat = np.where(active[None, :], theta * x_new + (1.0 - theta) * x_hat, x_hat)
        tau_x = np.where(active[None, :], tau_new, tau_x)

        if opts.learn_hyperparams:
            pi_sum = np.maximum(pi.sum(axis=0), 1e-12)
            rho_new = np.clip(pi_sum / m_dim, 1e-8, 1.0)
            var_x_new = np.maximum(
                (pi * (np.abs(gamma) ** 2 + nu)).sum(axis=0) / pi_sum, 1e-14 * scale
            )
            var_w_new = np.maximum(
                np.mean(np.abs(b - z_hat) ** 2 + tau_z, axis=0), _TAU_FLOOR
            )
            rho = np.where(active, rho_new, rho)
            var_x = np.where(active, var_x_new, var_x)
            var_w = np.where(active, var_w_new, var_w)

        col_norm = np.linalg.norm(x_hat, axis=0)
        if np.any(col_norm[active] > 1e6 * scale):
            raise DivergenceError(
                f"GAMP diverged at iteration {it}", last_estimate=x_prev
            )

        delta = np.linalg.norm(x_hat - x_prev, axis=0)
        iterations[active] = it
        newly_done = active & (delta <= opts.tol * np.maximum(col_norm, 1e-300))
        converged |= newly_done
        active &= ~newly_done
        if not active.any():
            break

    residual = np.linalg.norm(b - a @ x_hat, axis=0)
    return x_hat, iterations, converged, residual, var_w


def gamp_solve(
    a: np.ndarray,
    b: np.ndarray,
    opts: GampOptions,
) -> tuple[np.ndarray, GampDiagnostics]:
    """Solve b ~= a @ x columnwise by sum-product GAMP.

    a is the shared S x M measurement matrix, b the S x K observations; the
    K columns are estimated independently (vectorized here, but with no
    cross-column coupling).  Returns the M x K posterior-mean estimate and
    per-column diagnostics.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ConfigError(f"incompatible shapes: a {a.shape}, b {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ConfigError("gamp_solve requires finite inputs")
    s_dim = a.shape[0]

    x_hat, iterations, converged, residual, var_w = _gamp_iterate(a, b, opts)

    # a column whose fit is far worse than its noise model is stuck in a bad
    # fixed point; with EM the learned noise absorbs the misfit, so compare
    # against the other columns (shared system, comparable noise) instead.
    # retry suspects once from the minimum-norm LS solution
    suspect = residual**2 > 9.0 * s_dim * var_w + 1e-20
    if opts.learn_hyperparams and var_w.size > 1:
        suspect |= var_w > 25.0 * np.median(var_w)
    restarted = suspect.copy()
    if np.any(suspect):
        x0 = pseudo_inverse(a) @ b[:, suspect]
        res0 = np.linalg.norm(b[:, suspect] - a @ x0, axis=0)
        a_col_power = float(np.mean(np.sum(np.abs(a) ** 2, axis=0)))
        tau0 = (res0**2 / s_dim + opts.noise_var) / max(a_col_power, _TAU_FLOOR)
        # dense-prior fixed-noise solve (the ridge-LS limit of GAMP): the EM
        # spiral that killed a live entry cannot re-enter
        dense = GampOptions(
            max_iters=opts.max_iters,
            tol=opts.tol,
            damping=opts.damping,
            prior_sparsity=1.0,
            prior_var=max(opts.prior_var * opts.prior_sparsity, 1e-12),
            noise_var=float(np.mean(res0**2) / s_dim + 1e-12),
            learn_hyperparams=False,
        )
        x_re, it_re, conv_re, res_re, _ = _gamp_iterate(
            a, b[:, suspect], dense, x_init=x0, tau_init=tau0[None, :]
        )
        better = res_re < residual[suspect]
        idx = np.flatnonzero(suspect)[better]
        x_hat[:, idx] = x_re[:, better]
        residual[idx] = res_re[better]
        iterations[idx] += it_re[better]
        converged[idx] = conv_re[better]

    return x_hat, GampDiagnostics(
        iterations=iterations, residual=residual, converged=converged, restarted=restarted
    )


def gamp_options_for(
    a: np.ndarray,
    b: np.ndarray,
    expected_density: float,
    **overrides,
) -> GampOptions:
    """Data-driven starting hyperparameters for gamp_solve.

    Sparsity defaults to the expected fraction of active angular bins; the
    noise floor assumes a 20 dB starting SNR and the signal power is matched
    to the observed energy.  EM refines all three when enabled.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    s_dim = a.shape[0]
    rho = float(np.clip(expected_density, 1e-4, 1.0))
    energy = float(np.mean(np.abs(b) ** 2)) if b.size else 0.0
    var_w = max(energy / 101.0, 1e-12)
    a_energy = float(np.sum(np.abs(a) ** 2))
    var_x = max(energy * s_dim / max(rho * a_energy, 1e-30), 1e-12)
    defaults = dict(
        max_iters=150,  # EM needs anneal room; per-iteration cost is O(S*M)
        prior_sparsity=rho,
        prior_var=var_x,
        noise_var=var_w,
        learn_hyperparams=True,
    )
    defaults.update(overrides)
    return GampOptions(**defaults)


def recover_h(
    z_hat: np.ndarray,
    x: PilotMatrix,
    opts: GampOptions | None = None,
    expected_density: float = 0.1,
) -> np.ndarray:
    """Recover the user channel matrix from a (scaling-resolved) z estimate.

    Forms the angular-domain GLM b = z.T @ u, a = x.T, solves it columnwise
    with GAMP, and maps the result back with the inverse angular transform.
    """
    z_hat = np.asarray(z_hat, dtype=complex)
    xm = x.matrix
    if z_hat.ndim != 2 or z_hat.shape[1] != xm.shape[1]:
        raise ConfigError(f"z estimate {z_hat.shape} incompatible with pilots {xm.shape}")
    k = z_hat.shape[0]
    u = dft_matrix(k, normalized=True)
    b = z_hat.T @ u
    a = xm.T
    if opts is None:
        opts = gamp_options_for(a, b, expected_density)
    h_a, _ = gamp_solve(a, b, opts)
    return from_angular(h_a, u)


def ls_orthogonal_baseline(z_hat: np.ndarray, x: PilotMatrix) -> np.ndarray:
    """Benchmark recovery h = z @ x^H, valid only for orthonormal pilot rows."""
    z_hat = np.asarray(z_hat, dtype=complex)
    xm = x.matrix
    m, s = xm.shape
    if s < m:
        raise ConfigError(f"orthogonal baseline needs pilot_len >= n_users ({s} < {m})")
    gram = xm @ xm.conj().T
    if np.max(np.abs(gram - np.eye(m))) > 1e-8:
        raise ConfigError("pilot rows are not orthonormal")
    if z_hat.shape[1] != s:
        raise ConfigError(f"z estimate {z_hat.shape} incompatible with pilots {xm.shape}")
    return z_hat @ xm.conj().T
