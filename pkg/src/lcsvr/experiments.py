"""Synthetic benchmarks: data generators with controlled noise, metrics,
cross-validated hyperparameter search and the four comparison scenarios."""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import nnls, pava_isotonic, sols
from .presets import Kind, fit, fit_projected, predict, project_simplex
from .problem import Hyperparameters, TrainingSet

DEFAULT_C_GRID = tuple(float(c) for c in np.logspace(-3, 3, 10))
DEFAULT_NU_GRID = tuple(float(v) for v in np.linspace(0.05, 1.0, 10))

SCENARIO_ESTIMATORS = {
    "nonneg": ("svr", "p-svr", "nnsvr", "nnls"),
    "simplex": ("cibersort", "sols", "ssvr"),
    "isotonic": ("isvr", "ir"),
    "trajectory": ("svr", "ssvr"),
}


# -- metrics -----------------------------------------------------------------

def _pair(beta_true, beta_hat):
    a = np.asarray(beta_true, dtype=float).ravel()
    b = np.asarray(beta_hat, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def rmse(beta_true, beta_hat) -> float:
    """``sqrt(||b* - b||^2 / p)``."""
    a, b = _pair(beta_true, beta_hat)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(beta_true, beta_hat) -> float:
    """``sum |b* - b| / p``."""
    a, b = _pair(beta_true, beta_hat)
    return float(np.mean(np.abs(a - b)))


# -- noise -------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    distribution: str = "gaussian"
    snr_db: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in ("gaussian", "laplacian"):
            raise ValueError(f"unknown noise distribution {self.distribution!r}")
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")


def noise_sigma_for_snr(y_clean, snr_db: float) -> float:
    """Noise standard deviation giving ``10 log10(Var(y) / sigma^2) = snr_db``."""
    var = float(np.var(np.asarray(y_clean, dtype=float)))
    if not var > 0:
        raise ValueError("clean signal is constant; SNR is undefined")
    return math.sqrt(var / 10.0 ** (snr_db / 10.0))


def laplace_scale(sigma: float) -> float:
    """Laplace scale with variance ``sigma^2``."""
    return sigma / math.sqrt(2.0)


def sample_laplacian(rng: np.random.Generator, scale: float, size: int) -> np.ndarray:
    """Inverse-CDF Laplace draws (a single uniform stream per sample)."""
    u = rng.random(size) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def add_noise(y_clean, spec: NoiseSpec) -> np.ndarray:
    """Noisy copy of ``y_clean`` at exactly the requested empirical SNR.

    The draw is rescaled so that its sample variance equals the target, which
    keeps the realized SNR equal to ``spec.snr_db`` at any sample size.
    """
    y_clean = np.asarray(y_clean, dtype=float)
    sigma = noise_sigma_for_snr(y_clean, spec.snr_db)
    rng = np.random.default_rng([spec.seed, 0x6E6F697365])
    if spec.distribution == "gaussian":
        e = rng.standard_normal(y_clean.size)
    else:
        e = sample_laplacian(rng, laplace_scale(1.0), y_clean.size)
    sd = float(np.std(e))
    if sd > 0:
        e *= sigma / sd
    return y_clean + e


def empirical_snr_db(y_clean, y_noisy) -> float:
    y_clean = np.asarray(y_clean, dtype=float)
    e = np.asarray(y_noisy, dtype=float) - y_clean
    return 10.0 * math.log10(float(np.var(y_clean)) / float(np.var(e)))


# -- generators --------------------------------------------------------------

def gen_nonneg(n: int, p: int, seed: int) -> tuple[TrainingSet, np.ndarray]:
    """Gaussian design, ``beta* = exp(N(0, 2^2))``, noiseless response."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.exp(rng.normal(0.0, 2.0, p))
    return TrainingSet(X, X @ beta), beta


def gen_simplex(n: int, p: int, seed: int) -> tuple[TrainingSet, np.ndarray]:
    """Gaussian design, ``beta*`` = uniform draws projected onto the simplex."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = project_simplex(rng.random(p))
    return TrainingSet(X, X @ beta), beta


def gen_isotonic(p: int, seed: int) -> tuple[TrainingSet, np.ndarray]:
    """Identity design and sorted standard normal coefficients."""
    rng = np.random.default_rng(seed)
    beta = np.sort(rng.standard_normal(p))
    return TrainingSet(np.eye(p), beta.copy()), beta


# -- estimators and CV -------------------------------------------------------

def fit_estimator(ts: TrainingSet, kind: str, hp: Hyperparameters):
    """Fit an SVR-family estimator; returns the fitted model."""
    if kind == "p-svr":
        return fit_projected(ts, hp, "positive_orthant")
    if kind == "cibersort":
        return fit_projected(ts, hp, "simplex")
    return fit(ts, Kind(kind), hp)


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng([seed, 0x6376]).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def grid_search_cv(ts: TrainingSet, kind: str, C_grid: Sequence[float] = DEFAULT_C_GRID,
                   nu_grid: Sequence[float] = DEFAULT_NU_GRID, folds: int = 5, seed: int = 0,
                   tau: float = 1e-3, return_scores: bool = False):
    """Pick ``(C, nu)`` by k-fold CV of the prediction RMSE on held-out ``y``.

    Ties go to the smaller ``C``, then the smaller ``nu``.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if not len(C_grid) or not len(nu_grid):
        raise ValueError("grids must be non-empty")
    parts = kfold_indices(ts.n, folds, seed)
    scores: dict[tuple[float, float], float] = {}
    best, best_err = None, math.inf
    for C in sorted(C_grid):
        for nu in sorted(nu_grid):
            hp = Hyperparameters(C=C, nu=nu, tau=tau)
            if len(C_grid) == 1 and len(nu_grid) == 1 and not return_scores:
                return hp
            errs = []
            for k in range(folds):
                test = parts[k]
                train = np.concatenate([parts[m] for m in range(folds) if m != k])
                sub = TrainingSet(ts.X[train], ts.y[train])
                model = fit_estimator(sub, kind, hp)
                resid = predict(model, ts.X[test]) - ts.y[test]
                errs.append(float(np.sqrt(np.mean(resid ** 2))))
            err = float(np.mean(errs))
            scores[(C, nu)] = err
            if err < best_err:
                best, best_err = hp, err
    return (best, scores) if return_scores else best


# -- scenarios ---------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario parameters. ``n`` is ignored by the isotonic scenario (``n = p``)."""

    n: int = 200
    p: int = 20
    snr: tuple[float, ...] = (10.0,)
    noise: str = "gaussian"
    reps: int = 20
    seed: int = 0
    C_grid: tuple[float, ...] = DEFAULT_C_GRID
    nu_grid: tuple[float, ...] = DEFAULT_NU_GRID
    folds: int = 5
    tau: float = 1e-3
    # fixed hyperparameters for the trajectory scenario
    C: float = 1.0
    nu: float = 0.5
    jobs: int = 1
    # subset of the scenario's estimators to run (all when empty)
    estimators: tuple[str, ...] = ()

    def selected(self, name: str) -> tuple[str, ...]:
        known = SCENARIO_ESTIMATORS[name]
        unknown = set(self.estimators) - set(known)
        if unknown:
            raise ValueError(f"estimators {sorted(unknown)} not part of scenario {name!r}")
        return tuple(e for e in known if not self.estimators or e in self.estimators)


@dataclass(frozen=True)
class RepetitionRecord:
    scenario: str
    rep: int
    seed: int
    noise: str
    snr_db: float
    estimator: str
    C: float
    nu: float
    rmse: float
    mae: float
    iterations: int = -1
    converged: bool = True


@dataclass
class ExperimentResult:
    scenario: str
    config: ScenarioConfig
    records: list[RepetitionRecord]
    trajectories: dict[str, list[tuple[int, float, float]]] = field(default_factory=dict)

    def values(self, estimator: str, metric: str = "rmse", snr: float | None = None,
               noise: str | None = None) -> list[float]:
        return [getattr(r, metric) for r in self.records
                if r.estimator == estimator and (snr is None or r.snr_db == snr)
                and (noise is None or r.noise == noise)]

    def mean(self, estimator: str, metric: str = "rmse", **kw) -> float:
        return statistics.fmean(self.values(estimator, metric, **kw))

    def std(self, estimator: str, metric: str = "rmse", **kw) -> float:
        v = self.values(estimator, metric, **kw)
        return statistics.stdev(v) if len(v) > 1 else 0.0

    def summary(self) -> list[dict]:
        keys = sorted({(r.noise, r.snr_db, r.estimator) for r in self.records},
                      key=lambda k: (k[0], k[1], SCENARIO_ESTIMATORS[self.scenario].index(k[2])))
        rows = []
        for noise, snr, est in keys:
            kw = {"snr": snr, "noise": noise}
            rows.append({
                "noise": noise, "snr_db": snr, "estimator": est,
                "reps": len(self.values(est, **kw)),
                "rmse_mean": self.mean(est, "rmse", **kw), "rmse_std": self.std(est, "rmse", **kw),
                "mae_mean": self.mean(est, "mae", **kw), "mae_std": self.std(est, "mae", **kw),
            })
        return rows


def _cv_or_fixed(ts, kind, cfg: ScenarioConfig, seed: int) -> Hyperparameters:
    return grid_search_cv(ts, kind, cfg.C_grid, cfg.nu_grid, cfg.folds, seed, cfg.tau)


def _record(name, rep, seed, noise, snr, est, hp, beta_true, beta_hat, iterations=-1, converged=True):
    C = hp.C if hp is not None else math.nan
    nu = hp.nu if hp is not None else math.nan
    return RepetitionRecord(name, rep, seed, noise, float(snr), est, C, nu,
                            rmse(beta_true, beta_hat), mae(beta_true, beta_hat),
                            iterations, converged)


def _run_rep(name: str, cfg: ScenarioConfig, rep: int):
    seed = cfg.seed + rep
    records: list[RepetitionRecord] = []
    trajs: dict[str, list] = {}
    if name == "trajectory":
        clean, beta = gen_simplex(cfg.n, cfg.p, seed)
        hp = Hyperparameters(C=cfg.C, nu=cfg.nu, tau=cfg.tau)
        levels = [("none", None)] + [(cfg.noise, s) for s in cfg.snr]
        for noise, snr in levels:
            if snr is None:
                ts = clean
            else:
                ts = TrainingSet(clean.X, add_noise(clean.y, NoiseSpec(noise, snr, seed)))
            for est in cfg.selected(name):
                m = fit(ts, Kind(est), hp, record_trajectory=True)
                tag = "none" if snr is None else f"{noise}_snr{_fmt(snr)}"
                trajs[f"{est}_{tag}_rep{rep}"] = m.report.trajectory
                records.append(_record(name, rep, seed, noise, math.inf if snr is None else snr,
                                       est, hp, beta, m.beta, m.report.iterations,
                                       m.report.converged))
        return records, trajs

    for snr in cfg.snr:
        if name == "isotonic":
            clean, beta = gen_isotonic(cfg.p, seed)
        elif name == "nonneg":
            clean, beta = gen_nonneg(cfg.n, cfg.p, seed)
        elif name == "simplex":
            clean, beta = gen_simplex(cfg.n, cfg.p, seed)
        else:
            raise ValueError(f"unknown scenario {name!r}")
        ts = TrainingSet(clean.X, add_noise(clean.y, NoiseSpec(cfg.noise, snr, seed)))
        for est in cfg.selected(name):
            hp = None
            its, conv = -1, True
            if est == "nnls":
                bh = nnls(ts.X, ts.y)
            elif est == "sols":
                bh = sols(ts.X, ts.y)
            elif est == "ir":
                bh = pava_isotonic(ts.y)
            else:
                hp = _cv_or_fixed(ts, est, cfg, seed)
                m = fit_estimator(ts, est, hp)
                bh = m.beta
                if name == "isotonic":
                    # with X = I the intercept is not identifiable from beta alone;
                    # the estimated sequence is the fitted values beta + beta0
                    bh = m.beta + m.beta0
                its, conv = m.report.iterations, m.report.converged
            records.append(_record(name, rep, seed, cfg.noise, snr, est, hp, beta, bh, its, conv))
    return records, trajs


def run_scenario(name: str, config: ScenarioConfig | None = None,
                 out_dir: str | os.PathLike | None = None) -> ExperimentResult:
    """Run every repetition of a scenario and optionally write its CSV artifacts.

    Repetition ``r`` uses seed ``config.seed + r``; results are gathered in
    repetition order whatever ``config.jobs`` is.
    """
    if name not in SCENARIO_ESTIMATORS:
        raise ValueError(f"unknown scenario {name!r}")
    cfg = config or ScenarioConfig()
    reps = range(cfg.reps)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outs = list(pool.map(_run_rep, [name] * cfg.reps, [cfg] * cfg.reps, reps))
    else:
        outs = [_run_rep(name, cfg, r) for r in reps]
    records = [r for recs, _ in outs for r in recs]
    trajs = {k: v for _, t in outs for k, v in t.items()}
    result = ExperimentResult(name, cfg, records, trajs)
    if out_dir is not None:
        write_artifacts(result, out_dir)
    return result


# -- artifacts ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a sibling temp file and rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


RESULT_COLUMNS = ("scenario", "rep", "seed", "noise", "snr_db", "estimator", "C", "nu",
                  "rmse", "mae", "iterations", "converged")
SUMMARY_COLUMNS = ("noise", "snr_db", "estimator", "reps", "rmse_mean", "rmse_std",
                   "mae_mean", "mae_std")
TRAJECTORY_COLUMNS = ("iteration", "objective", "delta")


def results_csv(result: ExperimentResult) -> str:
    return csv_text(RESULT_COLUMNS, ([getattr(r, c) for c in RESULT_COLUMNS] for r in result.records))


def summary_csv(result: ExperimentResult) -> str:
    return csv_text(SUMMARY_COLUMNS, ([row[c] for c in SUMMARY_COLUMNS] for row in result.summary()))


def trajectory_csv(traj) -> str:
    return csv_text(TRAJECTORY_COLUMNS, traj)


def write_artifacts(result: ExperimentResult, out_dir) -> list[Path]:
    out = Path(out_dir)
    written = []
    files = {f"{result.scenario}_results.csv": results_csv(result),
             f"{result.scenario}_summary.csv": summary_csv(result)}
    for key, traj in result.trajectories.items():
        files[f"trajectory_{key}.csv"] = trajectory_csv(traj)
    for fname, text in files.items():
        atomic_write(out / fname, text)
        written.append(out / fname)
    return written


def with_overrides(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
