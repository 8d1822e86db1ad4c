"""Benchmark experiment loop: Sobol initialization, fit/acquire/query/record
iterations, optimality-gap metrics, JSONL persistence, and case-study export.

A run is a pure function of (config, seed): random streams are split by
purpose from one master seed, so reruns reproduce records byte for byte.
Wall-clock timings are kept on the in-memory record for reporting but are
deliberately left out of the serialized form (and out of record equality) to
preserve that guarantee.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisitions import (
    OUTCOME_FIRST,
    AcqOptions,
    DuelQuery,
    argmax_posterior_mean,
    next_duel,
)
from .benchmarks import OracleConfig, TestFunction, calibrate_sigma, eval_fn, get_function, oracle_compare
from .gp import KernelHypers, default_hypers, default_priors
from .laplace import FitError, LaplacePosterior, PrefDataset, fit_hypers, fit_map
from .stats import FactorizationError, RandomSource, sobol_sample

__all__ = [
    "ExperimentConfig",
    "IterationRecord",
    "RunRecord",
    "run_experiment",
    "run_many",
    "summarize",
    "summary_to_csv",
    "export_case_study",
    "final_query_spread",
    "serialize_run",
    "parse_run",
    "save_run",
    "load_run",
]

NOISE_MODES = {"low": 0.10, "high": 0.30, "det": None}

# Stream keys for seed splitting, one per consumer.
_S_CAL, _S_INIT, _S_ORACLE, _S_ACQ, _S_HYP, _S_EST = range(6)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that defines a benchmark run apart from the seed."""

    function: str
    method: str
    noise: str = "low"
    iterations: int = 100
    init_pairs: int | None = None  # defaults to 4 * dim
    hyperfit_every: int = 5
    acq: AcqOptions = field(default_factory=AcqOptions)
    hyper_max_evals: int = 60

    def __post_init__(self):
        if self.method not in ("kg", "eubo", "logei", "random"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.noise not in NOISE_MODES:
            raise ValueError(f"unknown noise mode {self.noise!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        get_function(self.function)

    def resolved_init_pairs(self, dim: int) -> int:
        return 4 * dim if self.init_pairs is None else self.init_pairs


@dataclass
class IterationRecord:
    """State after one iteration; index 0 is the post-initialization state."""

    index: int
    duel: DuelQuery | None
    outcome: int | None
    xhat: np.ndarray
    gap: float
    wall_time: float = field(compare=False, default=0.0)


@dataclass
class RunRecord:
    """Full trace of one experiment run."""

    config: dict
    seed: int
    sigma_true: float
    iterations: list[IterationRecord]
    points: np.ndarray
    duels: np.ndarray
    hyper_trace: list[dict]
    error: str | None = None

    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.iterations])

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "sigma_true": self.sigma_true,
            "error": self.error,
            "iterations": [
                {
                    "index": r.index,
                    "duel": None
                    if r.duel is None
                    else {"x1": r.duel.x1.tolist(), "x2": r.duel.x2.tolist()},
                    "outcome": r.outcome,
                    "xhat": r.xhat.tolist(),
                    "gap": r.gap,
                }
                for r in self.iterations
            ],
            "points": self.points.tolist(),
            "duels": self.duels.tolist(),
            "hyper_trace": self.hyper_trace,
        }

    @staticmethod
    def from_dict(d: dict) -> "RunRecord":
        iters = [
            IterationRecord(
                index=r["index"],
                duel=None
                if r["duel"] is None
                else DuelQuery(np.array(r["duel"]["x1"]), np.array(r["duel"]["x2"])),
                outcome=r["outcome"],
                xhat=np.array(r["xhat"]),
                gap=r["gap"],
            )
            for r in d["iterations"]
        ]
        return RunRecord(
            config=d["config"],
            seed=d["seed"],
            sigma_true=d["sigma_true"],
            iterations=iters,
            points=np.array(d["points"]).reshape(len(d["points"]), -1),
            duels=np.array(d["duels"], dtype=int).reshape(len(d["duels"]), 2),
            hyper_trace=d["hyper_trace"],
            error=d["error"],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunRecord):
            return NotImplemented
        return serialize_run(self) == serialize_run(other)


def _config_dict(cfg: ExperimentConfig) -> dict:
    return {
        "function": cfg.function,
        "method": cfg.method,
        "noise": cfg.noise,
        "iterations": cfg.iterations,
        "init_pairs": cfg.init_pairs,
        "hyperfit_every": cfg.hyperfit_every,
        "hyper_max_evals": cfg.hyper_max_evals,
        "acq": {
            "lookahead_sigma": cfg.acq.lookahead_sigma,
            "n_raw": cfg.acq.n_raw,
            "n_starts": cfg.acq.n_starts,
            "max_evals": cfg.acq.max_evals,
            "simplex_rel": cfg.acq.simplex_rel,
            "logei_samples": cfg.acq.logei_samples,
            "logei_temp": cfg.acq.logei_temp,
        },
    }


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def serialize_run(record: RunRecord) -> str:
    """JSONL: a header line with the resolved config, then one line per
    iteration. Deterministic for a deterministic record."""
    d = record.to_dict()
    header = {
        "config": d["config"],
        "seed": d["seed"],
        "sigma_true": d["sigma_true"],
        "error": d["error"],
        "points": d["points"],
        "duels": d["duels"],
        "hyper_trace": d["hyper_trace"],
    }
    lines = [_dumps(header)]
    lines.extend(_dumps(r) for r in d["iterations"])
    return "\n".join(lines) + "\n"


def parse_run(text: str) -> RunRecord:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = json.loads(lines[0])
    header["iterations"] = [json.loads(ln) for ln in lines[1:]]
    return RunRecord.from_dict(header)


def save_run(record: RunRecord, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = record.config
    name = f"{cfg['function']}_{cfg['method']}_{cfg['noise']}_seed{record.seed}.jsonl"
    path = out_dir / name
    path.write_text(serialize_run(record), encoding="utf-8")
    return path


def load_run(path: str | Path) -> RunRecord:
    return parse_run(Path(path).read_text(encoding="utf-8"))


def _oracle_setup(t: TestFunction, cfg: ExperimentConfig, rng: RandomSource):
    target = NOISE_MODES[cfg.noise]
    if target is None:
        return OracleConfig(sigma_true=0.0, deterministic=True), 0.0
    sigma = calibrate_sigma(t, target, rng)
    return OracleConfig(sigma_true=sigma), sigma


def run_experiment(cfg: ExperimentConfig, seed: int) -> RunRecord:
    """Run one seeded experiment: Sobol-initialized duels, then one model-
    chosen duel per iteration, recording the estimated maximizer and its
    optimality gap after every step."""
    t = get_function(cfg.function)
    d = t.dim
    root = RandomSource(seed)
    oracle_cfg, sigma_true = _oracle_setup(t, cfg, root.child(_S_CAL))
    oracle_rng = root.child(_S_ORACLE)
    priors = default_priors()

    init_pairs = cfg.resolved_init_pairs(d)
    init_points = sobol_sample(2 * init_pairs, t.domain, root.child(_S_INIT))
    dataset = PrefDataset.empty(t.domain)
    for k in range(init_pairs):
        q = DuelQuery(init_points[2 * k], init_points[2 * k + 1])
        outcome = oracle_compare(t, oracle_cfg, q, oracle_rng)
        winner, loser = (q.x1, q.x2) if outcome == OUTCOME_FIRST else (q.x2, q.x1)
        dataset = dataset.add_duel(winner, loser)

    record = RunRecord(
        config=_config_dict(cfg),
        seed=seed,
        sigma_true=sigma_true,
        iterations=[],
        points=dataset.points,
        duels=dataset.duels,
        hyper_trace=[],
    )

    hypers = default_hypers(d)
    posterior: LaplacePosterior | None = None
    try:
        for i in range(cfg.iterations + 1):
            tic = time.perf_counter()
            duel = None
            outcome = None
            if i > 0:
                duel = next_duel(posterior, cfg.method, t.domain, root.child(_S_ACQ, i), cfg.acq)
                outcome = oracle_compare(t, oracle_cfg, duel, oracle_rng)
                winner, loser = (
                    (duel.x1, duel.x2) if outcome == OUTCOME_FIRST else (duel.x2, duel.x1)
                )
                dataset = dataset.add_duel(winner, loser)
            if i % cfg.hyperfit_every == 0:
                hypers = fit_hypers(
                    dataset,
                    priors,
                    root.child(_S_HYP, i),
                    current=hypers,
                    max_evals=cfg.hyper_max_evals,
                )
                record.hyper_trace.append(
                    {
                        "iteration": i,
                        "log_lengthscales": hypers.log_lengthscales.tolist(),
                        "log_outputscale": hypers.log_outputscale,
                    }
                )
            f0 = posterior.f_map if posterior is not None else None
            if f0 is not None and f0.size != dataset.n_points:
                f0 = np.concatenate([f0, np.zeros(dataset.n_points - f0.size)])
            posterior = fit_map(dataset, hypers, f0=f0)
            xhat = argmax_posterior_mean(posterior, t.domain, root.child(_S_EST, i), cfg.acq)
            gap = t.known_max - eval_fn(t, xhat)
            record.iterations.append(
                IterationRecord(
                    index=i,
                    duel=duel,
                    outcome=outcome,
                    xhat=xhat,
                    gap=float(gap),
                    wall_time=time.perf_counter() - tic,
                )
            )
    except (FitError, FactorizationError, FloatingPointError) as exc:
        record.error = f"{type(exc).__name__}: {exc}"
    record.points = dataset.points
    record.duels = dataset.duels
    return record


def _run_one(args) -> RunRecord:
    cfg, seed = args
    return run_experiment(cfg, seed)


def run_many(
    cfg: ExperimentConfig,
    seeds: list[int],
    out_dir: str | Path | None = None,
    jobs: int = 1,
) -> list[RunRecord]:
    """Run the config over seeds, optionally in parallel processes, saving
    each record to its own JSONL file."""
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, [(cfg, s) for s in seeds]))
    else:
        records = [run_experiment(cfg, s) for s in seeds]
    if out_dir is not None:
        for rec in records:
            save_run(rec, out_dir)
    return records


@dataclass
class SummaryTable:
    """Per-iteration gap quantiles across seeds of one config."""

    config: dict
    iterations: np.ndarray
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    n_runs: int


def summarize(records: list[RunRecord]) -> SummaryTable:
    """Median and interquartile band of the gap curves; records must share a
    config."""
    if not records:
        raise ValueError("no records to summarize")
    cfg0 = records[0].config
    for rec in records[1:]:
        if rec.config != cfg0:
            raise ValueError("summarize requires records sharing one config")
    n_iters = min(len(rec.iterations) for rec in records)
    gaps = np.array([rec.gaps()[:n_iters] for rec in records])
    return SummaryTable(
        config=cfg0,
        iterations=np.arange(n_iters),
        median=np.median(gaps, axis=0),
        q25=np.quantile(gaps, 0.25, axis=0),
        q75=np.quantile(gaps, 0.75, axis=0),
        n_runs=len(records),
    )


def summary_to_csv(summary: SummaryTable) -> str:
    lines = ["iteration,median_gap,q25_gap,q75_gap,n_runs"]
    for i in range(summary.iterations.size):
        lines.append(
            f"{int(summary.iterations[i])},{float(summary.median[i])!r},"
            f"{float(summary.q25[i])!r},{float(summary.q75[i])!r},{summary.n_runs}"
        )
    return "\n".join(lines) + "\n"


def final_query_spread(record: RunRecord, last: int = 10) -> float:
    """Mean distance between the two query points over the final duels; the
    collapse metric of the case study."""
    duels = [r.duel for r in record.iterations if r.duel is not None]
    tail = duels[-last:]
    if not tail:
        raise ValueError("record has no acquired duels")
    return float(np.mean([np.linalg.norm(q.x1 - q.x2) for q in tail]))


def export_case_study(record: RunRecord, grid_res: int = 64) -> dict:
    """Scatter-plus-heatmap artifact for a 2-D run: all query pairs flagged
    init vs acquired, the posterior-mean grid, and the final estimate."""
    t = get_function(record.config["function"])
    if t.dim != 2:
        raise ValueError("case-study export requires a 2-D function")
    init_pairs = record.config["init_pairs"]
    if init_pairs is None:
        init_pairs = 4 * t.dim
    init_duels = record.duels[:init_pairs]
    init_pts = [
        {"x1": record.points[w].tolist(), "x2": record.points[l].tolist()}
        for w, l in init_duels
    ]
    acquired = [
        {"x1": r.duel.x1.tolist(), "x2": r.duel.x2.tolist()}
        for r in record.iterations
        if r.duel is not None
    ]
    dataset = PrefDataset(t.domain, record.points, record.duels)
    if record.hyper_trace:
        h = record.hyper_trace[-1]
        hypers = KernelHypers(np.array(h["log_lengthscales"]), h["log_outputscale"])
    else:
        hypers = default_hypers(t.dim)
    posterior = fit_map(dataset, hypers)
    xs = np.linspace(t.domain.lower[0], t.domain.upper[0], grid_res)
    ys = np.linspace(t.domain.lower[1], t.domain.upper[1], grid_res)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    mean = posterior.predict_mean(nodes).reshape(grid_res, grid_res)
    xhat_final = record.iterations[-1].xhat
    return {
        "function": record.config["function"],
        "method": record.config["method"],
        "seed": record.seed,
        "init_queries": init_pts,
        "acquired_queries": acquired,
        "grid": {"xs": xs.tolist(), "ys": ys.tolist(), "mean": mean.tolist()},
        "xhat_final": xhat_final.tolist(),
    }
