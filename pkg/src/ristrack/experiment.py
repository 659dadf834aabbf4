"""Monte-Carlo experiment driver: channel synthesis -> BALS -> tracking ->
recovery, with per-slot NMSE metrics, timing, and CSV output.

Each run streams slots through the selected algorithms.  The slow channel is
redrawn every ``n_slots`` slots (the coherence period); BALS-initialized
tracking re-estimates at every period boundary, random-initialized tracking
never does.  Channel draws are keyed by run index only, so sweep points of
one run share channel realizations (common random numbers); noise and
algorithm initializations get independent per-point streams.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from .bals import BalsOptions, bals, check_identifiability, resolve_scaling
from .channel import (
    CONFIG_FIELDS,
    PhaseProfileMatrix,
    PilotMatrix,
    SystemConfig,
    channel_sequence_slots,
    gen_phase_profiles,
    gen_pilots,
    synthesize_slot,
)
from .errors import ConfigError, NumericError, RistrackError
from .gamp import GampOptions, gamp_solve, from_angular, ls_orthogonal_baseline
from .rls import track_recursive, tracker_init, tracker_init_from_tensor
from .tensor_ops import SlotTensor, dft_matrix

FIGURE_IDS = ("snr_sweep", "convergence", "runtime", "pilot_sweep", "custom")
ALGORITHMS = ("bals_per_slot", "rls_random_init", "bals_rls", "gamp", "ls_orthogonal")
CSV_COLUMNS = (
    "figure_id",
    "run_index",
    "slot",
    "algorithm",
    "param_name",
    "param_value",
    "nmse_gz_db",
    "nmse_h_db",
    "runtime_ms",
    "seed",
    "diverged",
)

# floor for dB conversion so exact recoveries stay finite
_DB_FLOOR = 1e-40


def nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Squared-error ratio ||est - truth||_F^2 / ||truth||_F^2 for one realization."""
    estimate = np.asarray(estimate)
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise ConfigError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    denom = float(np.linalg.norm(truth) ** 2)
    if denom == 0.0:
        raise ConfigError("nmse undefined for zero truth")
    return float(np.linalg.norm(estimate - truth) ** 2) / denom


def to_db(value: float) -> float:
    return 10.0 * math.log10(max(value, _DB_FLOOR))


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a base scenario, a zipped parameter sweep, and the
    algorithm set to run per Monte-Carlo realization.

    Sweep entries advance together (all value lists must share one length);
    the first entry is the primary axis recorded in the CSV.  ``total_slots``
    defaults to one coherence period.
    """

    figure_id: str
    base: SystemConfig
    sweep: tuple = ()
    n_monte_carlo: int = 1
    algorithms: tuple = ("bals_per_slot",)
    total_slots: int | None = None
    record_slots: tuple | None = None
    measure_runtime: bool = True
    bals_max_iters: int = 200
    bals_rel_tol: float = 1e-6
    gamp_overrides: dict | None = None

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise ConfigError(f"unknown figure_id {self.figure_id!r}; expected one of {FIGURE_IDS}")
        if self.n_monte_carlo < 1:
            raise ConfigError("n_monte_carlo must be >= 1")
        sweep = tuple((str(name), tuple(values)) for name, values in self.sweep)
        for name, values in sweep:
            if name not in CONFIG_FIELDS:
                raise ConfigError(f"sweep parameter {name!r} is not a SystemConfig field")
            if not values:
                raise ConfigError(f"sweep parameter {name!r} has no values")
        lengths = {len(values) for _, values in sweep}
        if len(lengths) > 1:
            raise ConfigError(f"zipped sweep lists must share one length, got {sorted(lengths)}")
        object.__setattr__(self, "sweep", sweep)
        algs = tuple(self.algorithms)
        unknown = set(algs) - set(ALGORITHMS)
        if unknown:
            raise ConfigError(f"unknown algorithms: {sorted(unknown)}")
        if not algs:
            raise ConfigError("algorithms must be non-empty")
        object.__setattr__(self, "algorithms", algs)
        if self.total_slots is not None and self.total_slots < 1:
            raise ConfigError("total_slots must be >= 1")
        if self.record_slots is not None:
            rec = tuple(int(s) for s in self.record_slots)
            if any(s < 1 for s in rec):
                raise ConfigError("record_slots entries must be >= 1")
            object.__setattr__(self, "record_slots", rec)

    def to_dict(self) -> dict:
        doc = {
            "figure_id": self.figure_id,
            "base": self.base.to_dict(),
            "sweep": [[name, list(values)] for name, values in self.sweep],
            "n_monte_carlo": self.n_monte_carlo,
            "algorithms": list(self.algorithms),
            "measure_runtime": self.measure_runtime,
            "bals_max_iters": self.bals_max_iters,
            "bals_rel_tol": self.bals_rel_tol,
        }
        if self.total_slots is not None:
            doc["total_slots"] = self.total_slots
        if self.record_slots is not None:
            doc["record_slots"] = list(self.record_slots)
        if self.gamp_overrides is not None:
            doc["gamp_overrides"] = dict(self.gamp_overrides)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        if not isinstance(doc, dict):
            raise ConfigError("experiment spec must be a JSON object")
        known = {f.name for f in dc_fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown spec fields: {sorted(unknown)}")
        if "base" not in doc or "figure_id" not in doc:
            raise ConfigError("spec needs 'figure_id' and 'base'")
        kwargs = dict(doc)
        kwargs["base"] = SystemConfig.from_dict(doc["base"])
        if "sweep" in kwargs:
            kwargs["sweep"] = tuple((n, tuple(v)) for n, v in kwargs["sweep"])
        for key in ("algorithms", "record_slots"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid spec JSON: {exc}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class ExperimentRecord:
    figure_id: str
    run_index: int
    slot: int
    algorithm: str
    param_name: str
    param_value: str
    nmse_gz_db: float | None
    nmse_h_db: float | None
    runtime_ms: float | None
    seed: int
    diverged: bool
    sort_key: tuple = field(default=(), compare=False)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_csv(records, path) -> None:
    """Write records with the fixed column schema (RFC-4180, UTF-8)."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in records:
                writer.writerow(
                    [
                        rec.figure_id,
                        rec.run_index,
                        rec.slot,
                        rec.algorithm,
                        rec.param_name,
                        rec.param_value,
                        _fmt(rec.nmse_gz_db),
                        _fmt(rec.nmse_h_db),
                        _fmt(rec.runtime_ms),
                        rec.seed,
                        _fmt(rec.diverged),
                    ]
                )
    except OSError as exc:
        raise ConfigError(f"cannot write CSV to {path}: {exc}") from exc


class _Timer:
    """Monotonic stopwatch; returns None when timing is disabled."""

    def __init__(self, enabled: bool):
        self.enabled = enabled

    def __enter__(self):
        self._start = time.perf_counter() if self.enabled else None
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self._start) * 1e3 if self.enabled else None
        return False


def _gamp_options_for_run(a: np.ndarray, b: np.ndarray, cfg: SystemConfig, overrides: dict | None) -> GampOptions:
    """Build the recovery options used by the harness.

    Default behaviour treats only the dominant path coefficients as signal
    (sparsity = physical path density) with a conservative noise level; see
    the pilot-sweep preset notes in the README.
    """
    overrides = dict(overrides or {})
    energy = float(np.mean(np.abs(b) ** 2)) if b.size else 1.0
    rho = overrides.pop("prior_sparsity", sum(cfg.n_paths_user) / (cfg.n_users * cfg.n_ris))
    rho = float(np.clip(rho, 1e-4, 1.0))
    noise_var_rel = overrides.pop("noise_var_rel", None)
    if noise_var_rel is not None:
        noise_var = energy * float(noise_var_rel)
    else:
        noise_var = overrides.pop("noise_var", energy / 101.0)
    a_energy = float(np.sum(np.abs(a) ** 2))
    prior_var = overrides.pop("prior_var", energy * a.shape[0] / max(rho * a_energy, 1e-30))
    opts = dict(
        max_iters=50,
        tol=1e-9,
        damping=0.9,
        prior_sparsity=rho,
        prior_var=prior_var,
        noise_var=noise_var,
        learn_hyperparams=False,
    )
    opts.update(overrides)
    return GampOptions(**opts)


def _recovery_records(
    ctx: dict,
    slot: int,
    chan,
    t: SlotTensor,
    algorithms: tuple,
    emit,
) -> None:
    """Rows for the recovery algorithms: BALS + genie scaling feed GAMP / LS."""
    cfg: SystemConfig = ctx["cfg"]
    x: PilotMatrix = ctx["x"]
    phi: PhaseProfileMatrix = ctx["phi"]
    try:
        est = bals(t, phi, ctx["bals_opts"], ctx["rng_bals"])
        g_corr, z_corr = resolve_scaling(est.g_hat, est.z_hat, g_true=chan.g)
        z_true = chan.h @ x.matrix
        gz_db = to_db(nmse(est.g_hat @ est.z_hat, chan.g @ z_true))
    except RistrackError:
        for alg in algorithms:
            emit(alg, slot, None, None, None, diverged=True)
        return
    u = ctx["dft_u"]
    b = z_corr.T @ u
    a = x.matrix.T
    if "gamp" in algorithms:
        try:
            with _Timer(ctx["measure_runtime"]) as tm:
                opts = _gamp_options_for_run(a, b, cfg, ctx["gamp_overrides"])
                h_a, _ = gamp_solve(a, b, opts)
                h_gamp = from_angular(h_a, u)
            emit("gamp", slot, gz_db, to_db(nmse(h_gamp, chan.h)), tm.ms, diverged=False)
        except RistrackError:
            emit("gamp", slot, gz_db, None, None, diverged=True)
    if "ls_orthogonal" in algorithms and cfg.pilot_len >= cfg.n_users:
        try:
            with _Timer(ctx["measure_runtime"]) as tm:
                h_ls = ls_orthogonal_baseline(z_corr, x)
            emit("ls_orthogonal", slot, gz_db, to_db(nmse(h_ls, chan.h)), tm.ms, diverged=False)
        except RistrackError:
            emit("ls_orthogonal", slot, gz_db, None, None, diverged=True)


def _run_single(spec: ExperimentSpec, sweep_idx: int, run_idx: int, seed: int) -> list:
    """All records of one (sweep point, Monte-Carlo run) pair."""
    names = [name for name, _ in spec.sweep]
    values = [vals[sweep_idx] for _, vals in spec.sweep]
    overrides = dict(zip(names, values))
    if "n_paths_user" in overrides and isinstance(overrides["n_paths_user"], list):
        overrides["n_paths_user"] = tuple(overrides["n_paths_user"])
    cfg = spec.base.with_overrides(rng_seed=seed, **overrides)

    total = spec.total_slots or cfg.n_slots
    recorded = set(spec.record_slots) if spec.record_slots else set(range(1, total + 1))

    if names:
        param_name = names[0]
        param_value = _fmt(values[0])
    else:
        param_name, param_value = "", ""

    # channels keyed by run only: sweep points share realizations
    rng_chan = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0, run_idx)))
    rng_noise = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(1, run_idx, sweep_idx))
    )
    rng_bals = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(2, run_idx, sweep_idx))
    )
    rng_init = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(3, run_idx, sweep_idx))
    )

    chans = channel_sequence_slots(cfg, total, rng_chan)
    x = gen_pilots(cfg)
    phi = gen_phase_profiles(cfg)

    records: list[ExperimentRecord] = []

    def emit(alg, slot, gz_db, h_db, ms, diverged):
        records.append(
            ExperimentRecord(
                figure_id=spec.figure_id,
                run_index=run_idx,
                slot=slot,
                algorithm=alg,
                param_name=param_name,
                param_value=param_value,
                nmse_gz_db=gz_db,
                nmse_h_db=h_db,
                runtime_ms=ms,
                seed=seed,
                diverged=diverged,
                sort_key=(sweep_idx, run_idx, slot, alg),
            )
        )

    bals_opts = BalsOptions(max_iters=spec.bals_max_iters, rel_tol=spec.bals_rel_tol)
    ctx = {
        "cfg": cfg,
        "x": x,
        "phi": phi,
        "bals_opts": bals_opts,
        "rng_bals": rng_bals,
        "gamp_overrides": spec.gamp_overrides,
        "measure_runtime": spec.measure_runtime,
        "dft_u": dft_matrix(cfg.n_ris, normalized=True),
    }

    recovery_algs = tuple(a for a in spec.algorithms if a in ("gamp", "ls_orthogonal"))
    wants_bals = "bals_per_slot" in spec.algorithms
    wants_bals_rls = "bals_rls" in spec.algorithms
    wants_rls_rand = "rls_random_init" in spec.algorithms

    state_bals_rls = None
    g_bals_rls = None
    state_rand = None
    g_rand = None
    dead_bals_rls = False
    dead_rand = False

    for chan in chans:
        slot = chan.slot_index
        z_true = chan.h @ x.matrix
        truth_gz = chan.g @ z_true

        clean = synthesize_slot(chan, x, phi, 0.0)
        p_sig = float(np.mean(np.abs(clean.data) ** 2))
        noise_var = p_sig / (10.0 ** (cfg.snr_db / 10.0)) if p_sig > 0 else 0.0
        if noise_var > 0:
            w = (
                rng_noise.standard_normal(clean.data.shape)
                + 1j * rng_noise.standard_normal(clean.data.shape)
            ) / np.sqrt(2.0)
            t = SlotTensor(clean.data + np.sqrt(noise_var) * w)
        else:
            t = clean

        period_start = (slot - 1) % cfg.n_slots == 0

        if wants_bals and slot in recorded:
            try:
                with _Timer(spec.measure_runtime) as tm:
                    est = bals(t, phi, bals_opts, rng_bals)
                emit("bals_per_slot", slot, to_db(nmse(est.g_hat @ est.z_hat, truth_gz)), None, tm.ms, False)
            except RistrackError:
                emit("bals_per_slot", slot, None, None, None, True)

        if wants_bals_rls and not dead_bals_rls:
            try:
                if period_start or state_bals_rls is None:
                    with _Timer(spec.measure_runtime) as tm:
                        est = bals(t, phi, bals_opts, rng_bals)
                        state_bals_rls = tracker_init(est.g_hat, est.z_hat, phi, cfg.forgetting)
                    g_bals_rls = est.g_hat
                    z_est = est.z_hat
                else:
                    with _Timer(spec.measure_runtime) as tm:
                        z_est, state_bals_rls = track_recursive(state_bals_rls, t)
                if slot in recorded:
                    emit("bals_rls", slot, to_db(nmse(g_bals_rls @ z_est, truth_gz)), None, tm.ms, False)
            except RistrackError:
                dead_bals_rls = True
        if wants_bals_rls and dead_bals_rls and slot in recorded:
            emit("bals_rls", slot, None, None, None, True)

        if wants_rls_rand and not dead_rand:
            try:
                if state_rand is None:
                    with _Timer(spec.measure_runtime) as tm:
                        g_rand = (
                            rng_init.standard_normal((cfg.n_rx, cfg.n_ris))
                            + 1j * rng_init.standard_normal((cfg.n_rx, cfg.n_ris))
                        ) / np.sqrt(2.0)
                        state_rand, z_est = tracker_init_from_tensor(g_rand, phi, t, cfg.forgetting)
                else:
                    with _Timer(spec.measure_runtime) as tm:
                        z_est, state_rand = track_recursive(state_rand, t)
                if slot in recorded:
                    emit("rls_random_init", slot, to_db(nmse(g_rand @ z_est, truth_gz)), None, tm.ms, False)
            except RistrackError:
                dead_rand = True
        if wants_rls_rand and dead_rand and slot in recorded:
            emit("rls_random_init", slot, None, None, None, True)

        if recovery_algs and slot in recorded:
            _recovery_records(ctx, slot, chan, t, recovery_algs, emit)

    return records


def _run_task(args):
    spec_doc, sweep_idx, run_idx, seed = args
    spec = ExperimentSpec.from_dict(spec_doc)
    return _run_single(spec, sweep_idx, run_idx, seed)


def run_experiment(spec: ExperimentSpec, seed: int | None = None, jobs: int = 1) -> list:
    """Execute every (sweep point, run) pair and return sorted records.

    Deterministic for a fixed (spec, seed) regardless of ``jobs``.
    """
    seed = spec.base.rng_seed if seed is None else int(seed)
    n_points = len(spec.sweep[0][1]) if spec.sweep else 1
    tasks = [
        (spec.to_dict(), sweep_idx, run_idx, seed)
        for sweep_idx in range(n_points)
        for run_idx in range(spec.n_monte_carlo)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(task) for task in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: r.sort_key)
    return records


def mean_nmse_db(records, algorithm: str, slot=None, param_value=None, column: str = "nmse_gz_db"):
    """Average NMSE (linear-domain mean, reported in dB) over matching records."""
    vals = []
    for rec in records:
        if rec.algorithm != algorithm or rec.diverged:
            continue
        if slot is not None and rec.slot != slot:
            continue
        if param_value is not None and rec.param_value != _fmt(param_value):
            continue
        v = getattr(rec, column)
        if v is None:
            continue
        vals.append(10.0 ** (v / 10.0))
    if not vals:
        return None
    return to_db(float(np.mean(vals)))


def identifiability_report(cfg: SystemConfig) -> str:
    ident = check_identifiability(cfg)
    return (
        f"verdict: {ident.verdict.value}\n"
        f"n_profiles (L) = {ident.n_profiles}, pilot_len (S) = {ident.pilot_len}, "
        f"n_ris (K) = {ident.n_ris}"
    )
