"""Geometric channel synthesis for the RIS-assisted multi-user uplink.

Generates the slow block-fading RIS-to-receiver channel ``G`` (redrawn every
``n_slots_coherence`` slots), the fast per-slot user-to-RIS channels ``H``,
deterministic truncated-DFT pilot and phase-profile matrices, and the noisy
per-slot observation tensor with frontal slices

    Y_l = G @ diag(phi[l]) @ Z + W_l,      Z = H @ X.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .tensor_ops import SlotTensor, dft_matrix

CONFIG_FIELDS = (
    "n_rx",
    "n_ris",
    "n_users",
    "pilot_len",
    "n_profiles",
    "n_slots",
    "snr_db",
    "forgetting",
    "n_paths_g",
    "n_paths_user",
    "rng_seed",
)


@dataclass(frozen=True)
class SystemConfig:
    """Scenario dimensions and algorithm hyperparameters.

    ``n_slots`` is the coherence period of the slow channel: G is redrawn at
    slot boundaries i = 1, n_slots + 1, 2*n_slots + 1, ... while H is redrawn
    every slot.
    """

    n_rx: int
    n_ris: int
    n_users: int
    pilot_len: int
    n_profiles: int
    n_slots: int
    snr_db: float
    forgetting: float = 0.5
    n_paths_g: int = 4
    n_paths_user: tuple[int, ...] = field(default=4)
    rng_seed: int = 0

    def __post_init__(self):
        counts = {
            "n_rx": self.n_rx,
            "n_ris": self.n_ris,
            "n_users": self.n_users,
            "pilot_len": self.pilot_len,
            "n_profiles": self.n_profiles,
            "n_slots": self.n_slots,
            "n_paths_g": self.n_paths_g,
        }
        for name, value in counts.items():
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a count >= 1, got {value!r}")
        if not (0.0 < self.forgetting <= 1.0):
            raise ConfigError(f"forgetting must satisfy 0 < lambda <= 1, got {self.forgetting}")
        paths = self.n_paths_user
        if isinstance(paths, (int, np.integer)):
            paths = (int(paths),) * self.n_users
        paths = tuple(int(j) for j in paths)
        if len(paths) != self.n_users:
            raise ConfigError(
                f"n_paths_user needs one entry per user ({self.n_users}), got {len(paths)}"
            )
        if any(j < 1 for j in paths):
            raise ConfigError("every n_paths_user entry must be >= 1")
        object.__setattr__(self, "n_paths_user", paths)
        if not np.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")

    def to_dict(self) -> dict:
        return {
            "n_rx": self.n_rx,
            "n_ris": self.n_ris,
            "n_users": self.n_users,
            "pilot_len": self.pilot_len,
            "n_profiles": self.n_profiles,
            "n_slots": self.n_slots,
            "snr_db": self.snr_db,
            "forgetting": self.forgetting,
            "n_paths_g": self.n_paths_g,
            "n_paths_user": list(self.n_paths_user),
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SystemConfig":
        if not isinstance(doc, dict):
            raise ConfigError("system config must be a JSON object")
        unknown = set(doc) - set(CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = {"n_rx", "n_ris", "n_users", "pilot_len", "n_profiles", "n_slots", "snr_db"} - set(doc)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        kwargs = dict(doc)
        if "n_paths_user" in kwargs and isinstance(kwargs["n_paths_user"], list):
            kwargs["n_paths_user"] = tuple(kwargs["n_paths_user"])
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SystemConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config JSON: {exc}") from exc
        return cls.from_dict(doc)

    def with_overrides(self, **kwargs) -> "SystemConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class PathParamsG:
    """Path gains and directional cosines of the RIS-to-receiver channel."""

    gains: np.ndarray
    dir_cos_rx: np.ndarray
    dir_cos_ris: np.ndarray


@dataclass(frozen=True)
class PathParamsUser:
    """Path gains and directional cosines of one user-to-RIS channel."""

    gains: np.ndarray
    dir_cos: np.ndarray


@dataclass(frozen=True)
class ChannelRealization:
    """Ground truth for one slot: G (n_rx x n_ris), H (n_ris x n_users)."""

    slot_index: int
    g: np.ndarray
    h: np.ndarray
    g_paths: PathParamsG
    h_paths: tuple[PathParamsUser, ...]


@dataclass(frozen=True)
class PhaseProfileMatrix:
    """RIS phase profiles, row l = profile used during block l. Unit modulus."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2:
            raise ConfigError("phase profile matrix must be 2-D")
        if np.max(np.abs(np.abs(m) - 1.0)) > 1e-12:
            raise ConfigError("phase profile entries must have unit modulus")
        object.__setattr__(self, "matrix", m)

    @property
    def phases(self) -> np.ndarray:
        """Element phases in [0, 2*pi)."""
        return np.mod(np.angle(self.matrix), 2 * np.pi)


@dataclass(frozen=True)
class PilotMatrix:
    """Pilot sequences, row m = sequence of user m (n_users x pilot_len)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2:
            raise ConfigError("pilot matrix must be 2-D")
        object.__setattr__(self, "matrix", m)


def steering_vector(n_elems: int, dir_cos: float) -> np.ndarray:
    """Uniform-linear-array steering vector, entry u = exp(-2j*pi*u*dir_cos)."""
    if n_elems < 1:
        raise ConfigError("steering_vector needs n_elems >= 1")
    return np.exp(-2j * np.pi * np.arange(n_elems) * dir_cos)


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. circular complex Gaussian entries with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def g_from_paths(paths: PathParamsG, n_rx: int, n_ris: int) -> np.ndarray:
    """Rebuild G from its path parameters (sum of rank-1 steering products)."""
    g = np.zeros((n_rx, n_ris), dtype=complex)
    for alpha, psi, omega in zip(paths.gains, paths.dir_cos_rx, paths.dir_cos_ris):
        g += alpha * np.outer(steering_vector(n_rx, psi), steering_vector(n_ris, omega).conj())
    return g


def h_column_from_paths(paths: PathParamsUser, n_ris: int) -> np.ndarray:
    """Rebuild one user channel column from its path parameters."""
    col = np.zeros(n_ris, dtype=complex)
    for beta, phi in zip(paths.gains, paths.dir_cos):
        col += beta * steering_vector(n_ris, phi)
    return col


def gen_g(cfg: SystemConfig, rng: np.random.Generator) -> tuple[PathParamsG, np.ndarray]:
    """Draw the RIS-to-receiver channel: standard complex Gaussian gains,
    directional cosines uniform on [-0.5, 0.5)."""
    p = cfg.n_paths_g
    paths = PathParamsG(
        gains=_complex_gaussian(rng, p),
        dir_cos_rx=rng.uniform(-0.5, 0.5, p),
        dir_cos_ris=rng.uniform(-0.5, 0.5, p),
    )
    return paths, g_from_paths(paths, cfg.n_rx, cfg.n_ris)


def gen_h(cfg: SystemConfig, rng: np.random.Generator) -> tuple[tuple[PathParamsUser, ...], np.ndarray]:
    """Draw all user-to-RIS channels for one slot (independent across slots)."""
    h = np.zeros((cfg.n_ris, cfg.n_users), dtype=complex)
    all_paths = []
    for m, j_m in enumerate(cfg.n_paths_user):
        paths = PathParamsUser(
            gains=_complex_gaussian(rng, j_m),
            dir_cos=rng.uniform(-0.5, 0.5, j_m),
        )
        all_paths.append(paths)
        h[:, m] = h_column_from_paths(paths, cfg.n_ris)
    return tuple(all_paths), h


def gen_phase_profiles(cfg: SystemConfig) -> PhaseProfileMatrix:
    """Truncated-DFT phase profiles: rows of the unnormalized n_ris-point DFT,
    repeated cyclically when n_profiles > n_ris."""
    w = dft_matrix(cfg.n_ris, normalized=False)
    rows = np.arange(cfg.n_profiles) % cfg.n_ris
    return PhaseProfileMatrix(matrix=w[rows, :])


def gen_pilots(cfg: SystemConfig) -> PilotMatrix:
    """Truncated-DFT pilots scaled to unit per-sequence energy; rows are
    orthonormal whenever pilot_len >= n_users."""
    n = max(cfg.n_users, cfg.pilot_len)
    w = dft_matrix(n, normalized=False)
    x = w[: cfg.n_users, : cfg.pilot_len] / np.sqrt(cfg.pilot_len)
    return PilotMatrix(matrix=x)


def synthesize_slot(
    chan: ChannelRealization,
    x: PilotMatrix,
    phi: PhaseProfileMatrix,
    noise_var: float,
    rng: np.random.Generator | None = None,
) -> SlotTensor:
    """Build the slot observation tensor, slice l = G diag(phi[l]) Z + W_l.

    Noise entries are i.i.d. circular complex Gaussian with variance
    ``noise_var`` per complex entry.
    """
    g, h = chan.g, chan.h
    if g.shape[1] != h.shape[0]:
        raise ConfigError(f"G/H dimension mismatch: {g.shape} vs {h.shape}")
    if h.shape[1] != x.matrix.shape[0]:
        raise ConfigError(f"H/X dimension mismatch: {h.shape} vs {x.matrix.shape}")
    if phi.matrix.shape[1] != g.shape[1]:
        raise ConfigError(f"phase profile width {phi.matrix.shape[1]} != n_ris {g.shape[1]}")
    if noise_var < 0:
        raise ConfigError("noise_var must be >= 0")
    z = h @ x.matrix
    data = np.einsum("nk,lk,ks->nsl", g, phi.matrix, z, optimize=True)
    if noise_var > 0:
        if rng is None:
            raise ConfigError("rng required when noise_var > 0")
        data = data + np.sqrt(noise_var) * _complex_gaussian(rng, data.shape)
    return SlotTensor(data)


def noise_var_for_snr(
    chan: ChannelRealization,
    x: PilotMatrix,
    phi: PhaseProfileMatrix,
    snr_db: float,
) -> float:
    """Noise variance giving the requested per-entry SNR for this realization.

    Signal power is measured empirically as the mean squared magnitude of the
    noiseless tensor entries.
    """
    if not np.isfinite(snr_db):
        raise ConfigError("snr_db must be finite")
    clean = synthesize_slot(chan, x, phi, 0.0)
    p_sig = float(np.mean(np.abs(clean.data) ** 2))
    if p_sig == 0.0:
        raise ConfigError("zero-signal channel: SNR is undefined")
    return p_sig / (10.0 ** (snr_db / 10.0))


def channel_sequence(cfg: SystemConfig, rng: np.random.Generator) -> list[ChannelRealization]:
    """Ground-truth channels for slots 1..n_slots of one Monte-Carlo run.

    G is held bitwise constant within each length-``n_slots`` coherence
    period of a longer run; this helper covers exactly one period, see
    :func:`channel_sequence_slots` for multi-period runs.
    """
    return channel_sequence_slots(cfg, cfg.n_slots, rng)


def channel_sequence_slots(
    cfg: SystemConfig, total_slots: int, rng: np.random.Generator
) -> list[ChannelRealization]:
    """Channels for slots 1..total_slots with G redrawn every cfg.n_slots slots."""
    out = []
    g_paths, g = None, None
    for i in range(1, total_slots + 1):
        if (i - 1) % cfg.n_slots == 0:
            g_paths, g = gen_g(cfg, rng)
        h_paths, h = gen_h(cfg, rng)
        out.append(ChannelRealization(slot_index=i, g=g, h=h, g_paths=g_paths, h_paths=h_paths))
    return out
