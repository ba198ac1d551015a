"""End-to-end studies: closed-loop data collection against a simulated truth
plant, identification runs, model-reference cost evaluation, and Monte Carlo
campaigns."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .controller import ControllerStructure, build_controller
from .errors import OcituneError, UnstableInitialLoop
from .optimize import OptimOptions, OptimReport, default_init, minimize
from .predictor import FrozenEtaProblem, OCIProblem, Theta
from .refmodel import (
    RefModelSpec,
    build_refmodel,
    extract_nmp_zero,
    principal_unstable_zero,
)
from .signals import DataBatch, gaussian_noise, prbs, shape_noise, snr_db
from .statespace import closed_loop_poles, feedback_maps, ss_simulate
from .transfer import TransferMatrix, closed_loop

__all__ = [
    "ExcitationSettings",
    "EvaluationProtocol",
    "MonteCarloSettings",
    "ExperimentConfig",
    "IdentificationResult",
    "BoxStats",
    "McSummary",
    "collect_closed_loop",
    "run_oci",
    "evaluate_jmr",
    "internal_stability_check",
    "monte_carlo",
    "max_workers_from_env",
]

THREADS_ENV = "OCITUNE_THREADS"


@dataclass(frozen=True)
class ExcitationSettings:
    amplitude: float = 1.0
    hold: int = 20
    length: int = 1260


@dataclass(frozen=True)
class EvaluationProtocol:
    """Reference used to score tracking: unit step on channel 1 from the
    first sample, plus a unit step on each further channel from the second
    half of the horizon."""

    n_eval: int = 120

    def reference(self, channels: int) -> np.ndarray:
        r = np.zeros((channels, self.n_eval))
        r[0, :] = 1.0
        half = self.n_eval // 2
        for ch in range(1, channels):
            r[ch, half:] = 1.0
        return r


@dataclass(frozen=True)
class MonteCarloSettings:
    runs: int = 100
    base_seed: int = 12345


@dataclass
class ExperimentConfig:
    plant: TransferMatrix | None
    h0: TransferMatrix
    noise_cov: np.ndarray
    c0: TransferMatrix
    excitation: ExcitationSettings
    structure: ControllerStructure
    refspec: RefModelSpec
    optim: OptimOptions = OptimOptions()
    protocol: EvaluationProtocol = EvaluationProtocol()
    mc: MonteCarloSettings = MonteCarloSettings()
    seed: int = 0
    transient_skip: int = 0
    #: candidate NMP-zero locations for staged warm starts; empty means the
    #: plain default initialization only
    init_scan_zeros: tuple = ()
    label: str = ""

    def __post_init__(self):
        self.noise_cov = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        n = self.structure.n
        for name, tm in (("plant", self.plant), ("h0", self.h0), ("c0", self.c0)):
            if tm is not None and tm.n != n:
                raise ValueError(f"{name} dimension {tm.n} != controller dimension {n}")
        if self.refspec.n != n:
            raise ValueError("reference model dimension mismatch")
        if self.noise_cov.shape != (n, n):
            raise ValueError("noise covariance dimension mismatch")

    @property
    def noisy(self) -> bool:
        return bool(np.any(self.noise_cov != 0.0))


@dataclass
class IdentificationResult:
    theta: Theta
    controller: TransferMatrix
    refmodel: TransferMatrix
    nmp_zeros: list
    zhat: float | None
    cost: float
    optim: OptimReport
    jmr: float | None = None
    internally_stable: bool | None = None


@dataclass
class BoxStats:
    """Five-number box summary with 1.5*IQR whiskers."""

    q1: float
    median: float
    q3: float
    lo_whisker: float
    hi_whisker: float
    outliers: list
    count: int

    @classmethod
    def from_values(cls, values) -> "BoxStats":
        vals = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
        if vals.size == 0:
            nan = float("nan")
            return cls(nan, nan, nan, nan, nan, [], 0)
        q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
        iqr = q3 - q1
        inside = vals[(vals >= q1 - 1.5 * iqr) & (vals <= q3 + 1.5 * iqr)]
        outliers = vals[(vals < q1 - 1.5 * iqr) | (vals > q3 + 1.5 * iqr)]
        return cls(float(q1), float(med), float(q3),
                   float(np.min(inside)), float(np.max(inside)),
                   sorted(float(v) for v in outliers), int(vals.size))


@dataclass
class McSummary:
    records: list
    jmr: BoxStats
    zhat: BoxStats
    n_runs: int
    n_failed: int
    n_unstable: int


def collect_closed_loop(config: ExperimentConfig, seed: int | None = None) -> DataBatch:
    """Simulate the data-collection experiment: PRBS reference on the loop
    (plant, initial controller), shaped output noise added per the signal
    model, and the plant input reconstructed from the controller law."""
    if config.plant is None:
        raise ValueError("data collection needs a truth plant in the config")
    seed = config.seed if seed is None else int(seed)
    prbs_seed, noise_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(2))
    n = config.structure.n
    exc = config.excitation
    t_loop = closed_loop(config.plant, config.c0)
    stable, poles = t_loop.is_stable()
    if not stable:
        bad = poles[np.abs(poles) >= 1.0]
        raise UnstableInitialLoop(f"collection loop has poles {bad}")
    r = prbs(n, exc.amplitude, exc.hold, exc.length, prbs_seed)
    y_signal = t_loop.simulate(r)
    meta = {"seed": seed, "prbs_seed": prbs_seed, "noise_seed": noise_seed,
            "amplitude": exc.amplitude, "hold": exc.hold}
    if config.noisy:
        w = gaussian_noise(config.noise_cov, exc.length, noise_seed)
        v = shape_noise(config.h0, w)
        sens = TransferMatrix.identity(n) - t_loop
        y_noise = sens.simulate(v)
        meta["snr_db"] = snr_db(y_signal, y_noise).tolist()
    else:
        y_noise = np.zeros_like(y_signal)
    y = y_signal + y_noise
    u = config.c0.simulate(r - y)
    meta["y_signal"] = y_signal
    meta["y_noise"] = y_noise
    return DataBatch(r=r, u=u, y=y, meta=meta)


def evaluate_jmr(plant: TransferMatrix, c_hat: TransferMatrix,
                 td_hat: TransferMatrix, protocol: EvaluationProtocol) -> float:
    """Mean squared tracking mismatch between the reference model and the
    achieved closed loop over the evaluation reference; +inf when the
    candidate loop is unstable or cannot be formed.

    The achieved loop runs on the state-space interconnection: identified
    controllers are inexact, and chained rational reduction is not reliable
    there.
    """
    try:
        ss_ry, _ = feedback_maps(plant, c_hat)
    except OcituneError:
        return float("inf")
    if np.any(np.abs(ss_ry.poles()) >= 1.0):
        return float("inf")
    r = protocol.reference(plant.n)
    err = td_hat.simulate(r) - ss_simulate(ss_ry, r)
    return float(np.sum(err ** 2) / protocol.n_eval)


def internal_stability_check(plant: TransferMatrix,
                             c_hat: TransferMatrix) -> tuple[bool, np.ndarray]:
    """Internal stability of the loop, including modes hidden by
    plant/controller pole-zero cancellation.

    All four loop transfer matrices share the interconnection state matrix,
    and cancelled modes stay in it as hidden eigenvalues, so one eigenvalue
    sweep covers the gang of four.
    """
    try:
        poles = closed_loop_poles(plant, c_hat)
    except OcituneError:
        return False, np.array([], dtype=complex)
    offenders = poles[np.abs(poles) >= 1.0]
    return offenders.size == 0, offenders


def _nmp_seeded_eta(refspec: RefModelSpec, zero: float) -> np.ndarray:
    """Free slots at the default, except unit-gain slots placed so the
    template zero starts at the candidate location."""
    eta = np.zeros(refspec.n_eta)
    for m, (i, j, _) in enumerate(refspec.slots()):
        template = refspec.entries[i][j]
        if template.kind == "gain":
            eta[m] = template.unit_gain_value() / (1.0 - zero)
    return eta


def _best_identification(config: ExperimentConfig, problem: OCIProblem) -> OptimReport:
    """Default joint start plus the configured staged zero-scan starts;
    lowest final cost wins.  The landscape splits into basins on either
    side of the unit circle, so the scan seeds the reference-model zeros on
    the non-minimum-phase side, fits the controller block alone, and only
    then releases everything."""
    base = default_init(config.structure, config.refspec).vector()
    n_p = config.structure.n_params
    candidates = []
    errors = []
    try:
        candidates.append(minimize(problem, base, config.optim))
    except OcituneError as exc:
        errors.append(exc)
    for zero in config.init_scan_zeros:
        eta_star = _nmp_seeded_eta(config.refspec, zero)
        try:
            stage1 = minimize(FrozenEtaProblem(problem, eta_star), base[:n_p], config.optim)
            stage2 = minimize(problem, np.concatenate([stage1.theta, eta_star]),
                              replace(config.optim, sd_iters=0))
            candidates.append(stage2)
        except OcituneError as exc:
            errors.append(exc)
    if not candidates:
        raise errors[0]
    return min(candidates, key=lambda rep: rep.cost)


def run_oci(config: ExperimentConfig, batch: DataBatch) -> IdentificationResult:
    """Identify the controller and reference-model parameters from one batch."""
    problem = OCIProblem(config.structure, config.refspec, batch.u, batch.y,
                         transient_skip=config.transient_skip)
    report = _best_identification(config, problem)
    theta = problem.split(report.theta)
    c_hat = build_controller(config.structure, theta.p)
    td_hat = build_refmodel(config.refspec, theta.eta)
    zeros = extract_nmp_zero(config.refspec, theta.eta)
    result = IdentificationResult(
        theta=theta, controller=c_hat, refmodel=td_hat, nmp_zeros=zeros,
        zhat=principal_unstable_zero(zeros), cost=report.cost, optim=report,
    )
    if config.plant is not None:
        result.jmr = evaluate_jmr(config.plant, c_hat, td_hat, config.protocol)
        result.internally_stable = internal_stability_check(config.plant, c_hat)[0]
    return result


def _run_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))
               .generate_state(1)[0])


def _mc_single(args) -> dict:
    config, index = args
    seed = _run_seed(config.mc.base_seed, index)
    record = {"run": index, "seed": seed, "failed": False, "jmr": float("inf"),
              "zhat": float("nan"), "cost": float("nan"), "stable": False,
              "iterations": 0, "termination": "", "theta": []}
    try:
        batch = collect_closed_loop(config, seed=seed)
        result = run_oci(config, batch)
    except OcituneError as exc:
        record["failed"] = True
        record["termination"] = f"error: {exc}"
        return record
    record.update(
        jmr=result.jmr if result.jmr is not None else float("nan"),
        zhat=result.zhat if result.zhat is not None else float("nan"),
        cost=result.cost,
        stable=bool(result.internally_stable),
        iterations=result.optim.iterations,
        termination=result.optim.termination,
        theta=result.theta.vector().tolist(),
    )
    return record


def max_workers_from_env(default: int | None = None) -> int:
    raw = os.environ.get(THREADS_ENV, "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return default if default is not None else (os.cpu_count() or 1)


def monte_carlo(config: ExperimentConfig, runs: int | None = None,
                max_workers: int | None = None) -> McSummary:
    """Repeat the collection + identification pipeline with independent
    noise and PRBS realizations.  Failed runs are kept in the records with
    an infinite cost flag, never dropped silently."""
    runs = config.mc.runs if runs is None else int(runs)
    if runs < 1:
        raise ValueError("need at least one run")
    workers = max_workers_from_env(max_workers) if max_workers is None else max(1, max_workers)
    workers = min(workers, runs)
    tasks = [(config, i) for i in range(runs)]
    if workers == 1:
        records = [_mc_single(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_mc_single, tasks, chunksize=max(1, runs // (4 * workers))))
    records.sort(key=lambda rec: rec["run"])
    jmr_stats = BoxStats.from_values(rec["jmr"] for rec in records if not rec["failed"])
    zhat_stats = BoxStats.from_values(rec["zhat"] for rec in records if not rec["failed"])
    n_failed = sum(rec["failed"] for rec in records)
    n_unstable = sum((not rec["stable"]) and (not rec["failed"]) for rec in records)
    return McSummary(records=records, jmr=jmr_stats, zhat=zhat_stats,
                     n_runs=runs, n_failed=n_failed, n_unstable=n_unstable)
