"""Experiment orchestration: calibration, trial loops, and result emission.

Determinism contract: every experiment is a pure function of its config.
The generator for trial t is Philox keyed by `seed XOR t`; the replacement
request of trial t (and sequential request r) draws from key
`seed XOR t XOR REPLACEMENT_TAG XOR r`. Reruns with the same master seed
therefore produce byte-identical output files. Wall-clock timing is opt-in
(`timing=True`) because real timings would break that guarantee; timings
always go to the stderr log.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import d2d as _d2d
from . import pngd as _pngd
from .accountant import learn_epsilon0, rdp_to_dp
from .calibrate import (binary_search_sigma, converted_epsilon, find_min_k,
                        sequential_k_schedule)
from .constants import (INFINITE, NoiseSchedule, Preset, ProblemConstants,
                        default_c0, get_preset, regime_for)
from .data import SyntheticSpec, load_dataset, make_synthetic
from .errors import CertUnlearnError, ConfigError
from .objectives import (Dataset, UnlearningRequest, apply_request, evaluate,
                         logistic_objective, multiclass_objective)

log = logging.getLogger("certunlearn")

REPLACEMENT_TAG = 0x7265706C << 32  # ascii "repl", shifted clear of trial indices
_TEST_SPLIT_TAG = 0x74657374         # ascii "test"

METHODS = ("langevin", "d2d_thm9", "d2d_thm28", "retrain")


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of one experiment run.

    Either a named preset or an explicit constants bundle may drive the
    accountant; `constants` wins when both are set (the preset name then
    only selects the data source).
    """

    preset: str = "synthetic"
    method: str = "langevin"
    eps_targets: tuple[float, ...] = (1.0,)
    delta: float | None = None          # default 1/n of the preset
    sigma: float | None = None          # None -> calibrate per target
    k_budget: int = 1
    trials: int = 100
    seed: int = 0
    s_total: int = 1
    batch: int = 1
    n_iter: int = 10000
    sigma_grid: tuple[float, ...] = ()
    init_mean: float = 1000.0
    constants: ProblemConstants | None = None
    n_classes: int = 2
    data_path: str | None = None
    test_data_path: str | None = None
    out: str = "results.csv"
    timing: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.trials < 0:
            raise ConfigError("trials must be >= 0")
        if not self.eps_targets:
            raise ConfigError("need at least one eps target")
        if any(e <= 0 for e in self.eps_targets):
            raise ConfigError("eps targets must be positive")

    def resolved_preset(self) -> Preset:
        if self.constants is not None:
            return Preset(name="custom", pc=self.constants,
                          regime=regime_for(self.constants),
                          delta=1.0 / self.constants.n, n_classes=self.n_classes)
        return get_preset(self.preset)

    def resolved_delta(self) -> float:
        return self.delta if self.delta is not None else self.resolved_preset().delta


@dataclass
class TrialResult:
    """One aggregated result row (plus the raw per-trial accuracies)."""

    method: str
    sigma: float | None
    epsilon_target: float
    epsilon_achieved: float | None
    k_total: int | None
    acc_mean: float | None
    acc_std: float | None
    wall_ms: float | None
    seed: int
    per_trial_acc: list[float] = field(default_factory=list)
    error: str | None = None


def trial_seed(master_seed: int, trial: int) -> int:
    """Per-trial generator key: master seed XOR trial index."""
    return master_seed ^ trial


def replacement_seed(master_seed: int, trial: int, request: int = 0) -> int:
    return trial_seed(master_seed, trial) ^ REPLACEMENT_TAG ^ request


def _aggregate(accs: list[float]) -> tuple[float | None, float | None]:
    if not accs:
        return None, None
    arr = np.asarray(accs, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if len(accs) > 1 else 0.0
    return mean, std


def _load_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """(train, test) datasets for the configured source."""
    preset = cfg.resolved_preset()
    if cfg.data_path:
        train = load_dataset(cfg.data_path)
        test = load_dataset(cfg.test_data_path) if cfg.test_data_path else train
        if not cfg.test_data_path:
            log.info("no test data supplied; evaluating on the training set")
        return train, test
    if cfg.preset != "synthetic" and cfg.constants is None:
        raise ConfigError(
            f"preset {cfg.preset!r} needs a feature CSV (data=<path>); only the "
            "synthetic preset (or an explicit constants bundle) generates its own data")
    pc = preset.pc
    spec = SyntheticSpec(n=pc.n, d=pc.d, n_classes=preset.n_classes)
    train = make_synthetic(spec, cfg.seed)
    test = make_synthetic(replace(spec, n=max(200, pc.n // 4)),
                          cfg.seed ^ _TEST_SPLIT_TAG, geometry_seed=cfg.seed)
    return train, test


def _objective_for(preset: Preset, data: Dataset):
    if data.is_multiclass:
        return multiclass_objective(data, lam=preset.pc.lam, radius=preset.pc.R)
    return logistic_objective(data, lam=preset.pc.lam, radius=preset.pc.R)


def _single_request_indices(rng: np.random.Generator, n: int) -> tuple[int, ...]:
    return (int(rng.integers(0, n)),)


def _langevin_certificate(preset: Preset, ns: NoiseSchedule, S: int, K: int,
                          delta: float) -> float:
    return converted_epsilon(preset.pc, ns, preset.regime, S, K, delta)


def run_unlearn_one(cfg: ExperimentConfig) -> list[TrialResult]:
    """Single-point removal at a fixed fine-tuning budget, one row per target.

    Langevin rows calibrate the least noise meeting (eps, k_budget); retrain
    rows share that calibration but rebuild the model from scratch on the
    post-request data; the delete-to-descent rows use their closed-form
    noise at I = k_budget deterministic steps.
    """
    preset = cfg.resolved_preset()
    delta = cfg.resolved_delta()
    data, test = (None, None)
    if cfg.trials > 0:
        data, test = _load_data(cfg)
    rows: list[TrialResult] = []
    for eps_hat in cfg.eps_targets:
        t0 = time.perf_counter()
        try:
            rows.append(_unlearn_one_row(cfg, preset, delta, eps_hat, data, test))
        except CertUnlearnError as exc:
            log.error("target eps=%g: %s", eps_hat, exc)
            rows.append(TrialResult(cfg.method, None, eps_hat, None, None, None,
                                    None, None, cfg.seed, error=str(exc)))
        if cfg.timing and rows[-1].wall_ms is None:
            rows[-1].wall_ms = 1e3 * (time.perf_counter() - t0)
        log.info("unlearn-one eps=%g done in %.1f ms", eps_hat,
                 1e3 * (time.perf_counter() - t0))
    return rows


def _unlearn_one_row(cfg: ExperimentConfig, preset: Preset, delta: float,
                     eps_hat: float, data: Dataset | None,
                     test: Dataset | None) -> TrialResult:
    pc = preset.pc
    eta = preset.eta
    k_hat = int(cfg.k_budget)

    if cfg.method in ("langevin", "retrain"):
        if cfg.sigma is not None:
            sigma = cfg.sigma
        else:
            sigma = binary_search_sigma(eps_hat, delta, k_hat, pc, preset.regime,
                                        S=1, eta=eta)
        ns = NoiseSchedule(eta=eta, sigma=sigma, T=INFINITE, K=k_hat)
        if cfg.method == "langevin":
            eps_achieved = _langevin_certificate(preset, ns, 1, k_hat, delta)
            k_total = k_hat
        else:
            eps_achieved = 0.0  # retraining is exact removal
            k_total = cfg.n_iter
        unlearn_steps, d2d_cal = k_hat, None
    elif cfg.method == "d2d_thm9":
        sigma = _d2d.d2d_sigma_thm9(eps_hat, delta, k_hat, pc.M, pc.m, pc.n, pc.L)
        eps_achieved, k_total, unlearn_steps, d2d_cal = eps_hat, k_hat, k_hat, None
    else:  # d2d_thm28
        cal = _d2d.d2d_sigma_thm28(eps_hat, delta, pc.M, pc.m, pc.n, pc.L, pc.d)
        sigma = cal.sigma
        unlearn_steps = cal.iterations(1)
        eps_achieved, k_total, d2d_cal = eps_hat, unlearn_steps, cal

    accs: list[float] = []
    for t in range(cfg.trials):
        accs.append(_one_trial(cfg, preset, sigma, unlearn_steps, data, test, t))
    mean, std = _aggregate(accs)
    return TrialResult(cfg.method, sigma, eps_hat, eps_achieved, k_total,
                       mean, std, None, cfg.seed, per_trial_acc=accs)


def _one_trial(cfg: ExperimentConfig, preset: Preset, sigma: float,
               unlearn_steps: int, data: Dataset, test: Dataset, t: int) -> float:
    pc = preset.pc
    rng = _pngd.make_rng(trial_seed(cfg.seed, t))
    objective = _objective_for(preset, data)
    req = UnlearningRequest(indices=_single_request_indices(rng, data.n),
                            replacement_seed=replacement_seed(cfg.seed, t))
    updated = apply_request(data, req)
    updated_objective = _objective_for(preset, updated)

    if cfg.method in ("langevin", "retrain"):
        ns = NoiseSchedule(eta=preset.eta, sigma=sigma, T=cfg.n_iter, K=unlearn_steps)
        c0 = default_c0(pc, ns, preset.regime)
        init = _pngd.InitSpec(mean=cfg.init_mean, variance=c0)
        if cfg.method == "langevin":
            w = _pngd.train(objective, ns, init, rng)
            w = _pngd.unlearn(w, updated_objective, unlearn_steps, ns, rng)
        else:
            w = _pngd.train(updated_objective, ns, init, rng)
    else:
        shape = ((data.d, data.n_classes) if data.is_multiclass else (data.d,))
        init_w = _pngd.draw_init(_pngd.InitSpec(mean=cfg.init_mean, variance=1.0),
                                 shape, pc.R, rng)
        w = _d2d.d2d_train(objective, cfg.n_iter, init_w)
        w = _d2d.d2d_unlearn(w, updated_objective, unlearn_steps, sigma, rng)
    return evaluate(w, test)[1]


def run_sequential(cfg: ExperimentConfig) -> tuple[list[TrialResult], list[tuple]]:
    """Streamed removals: per-request step schedule plus cumulative cost.

    Returns (summary rows, plot points); plot points are (removed, cumulative
    iterations, 0) triples, one per request. Accuracy trials execute the
    full stream and run only when trials > 0.
    """
    preset = cfg.resolved_preset()
    delta = cfg.resolved_delta()
    pc = preset.pc
    eps_hat = cfg.eps_targets[0]
    if cfg.method == "langevin":
        if cfg.sigma is None:
            raise ConfigError("sequential langevin runs need an explicit sigma")
        schedule = sequential_k_schedule(eps_hat, delta, cfg.sigma, cfg.s_total,
                                         cfg.batch, pc, preset.regime, eta=preset.eta)
        sigma = cfg.sigma
        batch = cfg.batch
    elif cfg.method == "d2d_thm28":
        cal = _d2d.d2d_sigma_thm28(eps_hat, delta, pc.M, pc.m, pc.n, pc.L, pc.d)
        schedule = [cal.iterations(i) for i in range(1, cfg.s_total + 1)]
        sigma = cal.sigma
        batch = 1  # the baseline removes one point per request
    else:
        raise ConfigError(f"sequential supports langevin or d2d_thm28, not {cfg.method!r}")

    cum = np.cumsum(schedule)
    plot = [(min((i + 1) * batch, cfg.s_total), int(c), 0.0)
            for i, c in enumerate(cum)]

    accs: list[float] = []
    if cfg.trials > 0:
        data, test = _load_data(cfg)
        for t in range(cfg.trials):
            accs.append(_sequential_trial(cfg, preset, sigma, schedule, batch,
                                          data, test, t))
    mean, std = _aggregate(accs)
    row = TrialResult(cfg.method, sigma, eps_hat, eps_hat,
                      int(cum[-1]) if len(cum) else 0, mean, std, None, cfg.seed,
                      per_trial_acc=accs)
    return [row], plot


def _sequential_trial(cfg: ExperimentConfig, preset: Preset, sigma: float,
                      schedule: list[int], batch: int, data: Dataset,
                      test: Dataset, t: int) -> float:
    pc = preset.pc
    rng = _pngd.make_rng(trial_seed(cfg.seed, t))
    removal_order = rng.choice(data.n, size=cfg.s_total, replace=False)
    current = data
    objective = _objective_for(preset, current)
    if cfg.method == "langevin":
        ns = NoiseSchedule(eta=preset.eta, sigma=sigma, T=cfg.n_iter, K=0)
        c0 = default_c0(pc, ns, preset.regime)
        w = _pngd.train(objective, ns,
                        _pngd.InitSpec(mean=cfg.init_mean, variance=c0), rng)
    else:
        shape = ((data.d, data.n_classes) if data.is_multiclass else (data.d,))
        init_w = _pngd.draw_init(_pngd.InitSpec(mean=cfg.init_mean, variance=1.0),
                                 shape, pc.R, rng)
        w = _d2d.d2d_train(objective, cfg.n_iter, init_w)

    for r, steps in enumerate(schedule):
        lo, hi = r * batch, min((r + 1) * batch, cfg.s_total)
        idx = tuple(int(i) for i in removal_order[lo:hi])
        req = UnlearningRequest(indices=idx,
                                replacement_seed=replacement_seed(cfg.seed, t, r))
        current = apply_request(current, req)
        updated_objective = _objective_for(preset, current)
        if cfg.method == "langevin":
            ns = NoiseSchedule(eta=preset.eta, sigma=sigma, T=0, K=steps)
            w = _pngd.unlearn(w, updated_objective, steps, ns, rng)
        else:
            w = _d2d.d2d_unlearn(w, updated_objective, steps, sigma, rng)
    return evaluate(w, test)[1]


def run_tradeoff_sweep(cfg: ExperimentConfig) -> tuple[list[TrialResult], list[tuple]]:
    """Noise sweep at a fixed target: per sigma, the converted privacy loss
    of training alone, the least fine-tuning steps for the target, and
    (optionally) post-unlearning accuracy.

    Plot points are (sigma, converted initial epsilon, 0) triples.
    """
    if not cfg.sigma_grid:
        raise ConfigError("sweep needs a non-empty sigma grid")
    preset = cfg.resolved_preset()
    delta = cfg.resolved_delta()
    pc = preset.pc
    eps_hat = cfg.eps_targets[0]
    S = cfg.s_total

    rows: list[TrialResult] = []
    plot: list[tuple] = []
    data = test = None
    if cfg.trials > 0:
        data, test = _load_data(cfg)
    for sigma in cfg.sigma_grid:
        ns = NoiseSchedule(eta=preset.eta, sigma=sigma, T=INFINITE, K=0)
        try:
            eps0 = rdp_to_dp(learn_epsilon0(pc, ns, preset.regime, S=S), delta)[0]
            k = find_min_k(eps_hat, delta, pc, ns, preset.regime, S=S)
        except CertUnlearnError as exc:
            log.error("sigma=%g: %s", sigma, exc)
            rows.append(TrialResult(cfg.method, sigma, eps_hat, None, None, None,
                                    None, None, cfg.seed, error=str(exc)))
            continue
        accs: list[float] = []
        for t in range(cfg.trials):
            accs.append(_sweep_trial(cfg, preset, sigma, k, data, test, t))
        mean, std = _aggregate(accs)
        cert = converted_epsilon(pc, ns, preset.regime, S, k, delta)
        rows.append(TrialResult(cfg.method, sigma, eps_hat, cert, k, mean, std,
                                None, cfg.seed, per_trial_acc=accs))
        plot.append((sigma, eps0, 0.0))
    return rows, plot


def _sweep_trial(cfg: ExperimentConfig, preset: Preset, sigma: float, k: int,
                 data: Dataset, test: Dataset, t: int) -> float:
    pc = preset.pc
    rng = _pngd.make_rng(trial_seed(cfg.seed, t))
    objective = _objective_for(preset, data)
    ns = NoiseSchedule(eta=preset.eta, sigma=sigma, T=cfg.n_iter, K=k)
    c0 = default_c0(pc, ns, preset.regime)
    w = _pngd.train(objective, ns, _pngd.InitSpec(mean=cfg.init_mean, variance=c0), rng)
    removal = rng.choice(data.n, size=cfg.s_total, replace=False)
    req = UnlearningRequest(indices=tuple(int(i) for i in removal),
                            replacement_seed=replacement_seed(cfg.seed, t))
    updated = apply_request(data, req)
    w = _pngd.unlearn(w, _objective_for(preset, updated), k, ns, rng)
    return evaluate(w, test)[1]


def run_evaluate(cfg: ExperimentConfig) -> list[TrialResult]:
    """Train from scratch (no removal) and report test accuracy."""
    preset = cfg.resolved_preset()
    sigma = cfg.sigma if cfg.sigma is not None else 0.03
    data, test = _load_data(cfg)
    objective = _objective_for(preset, data)
    ns = NoiseSchedule(eta=preset.eta, sigma=sigma, T=cfg.n_iter, K=0)
    c0 = default_c0(preset.pc, ns, preset.regime)
    accs: list[float] = []
    for t in range(max(cfg.trials, 1)):
        rng = _pngd.make_rng(trial_seed(cfg.seed, t))
        w = _pngd.train(objective, ns,
                        _pngd.InitSpec(mean=cfg.init_mean, variance=c0), rng)
        accs.append(evaluate(w, test)[1])
    mean, std = _aggregate(accs)
    return [TrialResult("evaluate", sigma, cfg.eps_targets[0], None, cfg.n_iter,
                        mean, std, None, cfg.seed, per_trial_acc=accs)]


CSV_HEADER = "method,sigma,epsilon_target,epsilon_achieved,K_total,acc_mean,acc_std,wall_ms,seed"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def trials_log_path(path: str) -> str:
    return (path[:-4] if path.endswith(".csv") else path) + ".trials.csv"


def plot_data_path(path: str) -> str:
    return (path[:-4] if path.endswith(".csv") else path) + ".plot.csv"


def emit_results(table: list[TrialResult], path: str,
                 plot: list[tuple] | None = None) -> str:
    """Write the results CSV (stable column order), the raw per-trial log,
    and optionally a plot-data file of (x, y, yerr) triples."""
    if not table:
        raise ValueError("refusing to emit an empty result table")
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in table:
                fh.write(",".join([
                    row.method, _fmt(row.sigma), _fmt(row.epsilon_target),
                    _fmt(row.epsilon_achieved), _fmt(row.k_total),
                    _fmt(row.acc_mean), _fmt(row.acc_std), _fmt(row.wall_ms),
                    str(row.seed),
                ]) + "\n")
        if any(row.per_trial_acc for row in table):
            with open(trials_log_path(path), "w", encoding="ascii", newline="\n") as fh:
                fh.write("method,sigma,epsilon_target,trial,trial_seed,acc\n")
                for row in table:
                    for t, acc in enumerate(row.per_trial_acc):
                        fh.write(",".join([
                            row.method, _fmt(row.sigma), _fmt(row.epsilon_target),
                            str(t), str(trial_seed(row.seed, t)), _fmt(acc),
                        ]) + "\n")
        if plot:
            with open(plot_data_path(path), "w", encoding="ascii", newline="\n") as fh:
                fh.write("x,y,yerr\n")
                for x, y, yerr in plot:
                    fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(yerr)}\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path!r}: {exc}") from exc
    return path
