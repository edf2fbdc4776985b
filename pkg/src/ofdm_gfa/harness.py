"""Monte-Carlo trials, parameter sweeps and timing benchmarks.

Each trial draws its pilots, activities, channel and noise from substreams
keyed by ``(root seed, trial index)`` (see :mod:`ofdm_gfa.signal_model`),
and every requested detector runs on the same sample covariance.  The
same trial seeds are reused at every sweep point, so neighbouring points
differ only in the swept parameter.
"""

from __future__ import annotations

import csv
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import mle_direct, mle_virtual
from .metrics import decide, error_rate, optimize_threshold
from .mle_direct import DetectOptions
from .signal_model import (Stream, SystemConfig, generate_noise, generate_pilots, generate_scene,
                           received_effective, sample_covariance, substream)

log = logging.getLogger(__name__)

SCHEMES = ("mle-direct", "mle-virtual", "bl-mle")
SWEEP_PARAMS = ("P", "L", "M", "N", "noise_var")
CSV_HEADER = ["sweep_param", "sweep_value", "scheme", "trials", "mean_error_rate",
              "stderr_error_rate", "threshold", "mean_seconds"]
RHO_GRID = (0.1, 1.0, 10.0)

PRESETS = {
    "desk": dict(base=dict(N=100, M=64, L=32, P=4, noise_var=0.1, activity_prob=0.07),
                 sweep_param="P", sweep_values=[1, 2, 4], trials=100),
    # mirrors the full-size setting; slow (hours single-threaded)
    "paper": dict(base=dict(N=1000, M=128, L=72, P=4, noise_var=0.1, activity_prob=0.07),
                  sweep_param="P", sweep_values=[1, 2, 4, 8], trials=1000),
}


@dataclass
class ExperimentSpec:
    base: SystemConfig
    sweep_param: str = "P"
    sweep_values: Sequence = (1, 2, 4)
    trials: int = 100
    schemes: Sequence[str] = SCHEMES
    seed: int = 0
    # "auto" (default weight), "sweep" (best of RHO_GRID x default) or a number
    rho: str | float = "auto"
    out: str | None = None
    threads: int = 1
    max_sweeps: int = 20
    tol: float = 1e-4

    def __post_init__(self):
        if self.sweep_param not in SWEEP_PARAMS:
            raise ValueError(f"unknown sweep parameter {self.sweep_param!r}; "
                             f"choose from {', '.join(SWEEP_PARAMS)}")
        if not self.schemes:
            raise ValueError("no schemes requested")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
        if int(self.trials) < 1:
            raise ValueError("trial count must be >= 1")
        if isinstance(self.rho, str) and self.rho not in ("auto", "sweep"):
            raise ValueError(f"rho must be 'auto', 'sweep' or a number, got {self.rho!r}")
        self.point_configs()  # validates every sweep point

    def point_configs(self) -> list[tuple[object, SystemConfig]]:
        out = []
        for value in self.sweep_values:
            cast = float(value) if self.sweep_param == "noise_var" else int(value)
            try:
                out.append((cast, self.base.replace(**{self.sweep_param: cast})))
            except ValueError as exc:
                raise ValueError(f"sweep point {self.sweep_param}={value}: {exc}") from None
        return out

    @property
    def options(self) -> DetectOptions:
        return DetectOptions(max_sweeps=self.max_sweeps, tol=self.tol, track_objective=False)


@dataclass
class SchemeResult:
    scores: np.ndarray
    seconds: float
    rho: float | None = None
    threshold: float = math.nan
    decisions: np.ndarray | None = None
    errors: int = 0


@dataclass
class TrialReport:
    trial: int
    seed: int
    truth: np.ndarray
    results: dict[str, SchemeResult] = field(default_factory=dict)


def simulate(config: SystemConfig, seed: int, trial: int = 0):
    """Pilots, scene and sample covariance of one trial."""
    pilots = generate_pilots(config, substream(seed, trial, Stream.PILOTS))
    scene = generate_scene(config, substream(seed, trial, Stream.ACTIVITY),
                           substream(seed, trial, Stream.CHANNEL), seed=seed)
    noise = generate_noise(config, substream(seed, trial, Stream.NOISE))
    sigma_hat = sample_covariance(received_effective(scene, pilots, config, noise))
    return pilots, scene, sigma_hat


def _variant_name(multiplier: float) -> str:
    return f"mle-virtual[x{multiplier:g}]"


def score_schemes(sigma_hat, pilots, config: SystemConfig, schemes: Iterable[str],
                  rho="auto", options: DetectOptions | None = None) -> dict[str, SchemeResult]:
    """Run the requested detectors on one sample covariance.

    With ``rho="sweep"`` the penalized detector is run once per weight in
    ``RHO_GRID`` and each run is reported under its own variant name.
    """
    opts = options or DetectOptions(track_objective=False)
    out: dict[str, SchemeResult] = {}
    for scheme in schemes:
        if scheme == "mle-direct":
            t0 = time.perf_counter()
            alpha, _ = mle_direct.detect(sigma_hat, pilots, config, opts)
            out[scheme] = SchemeResult(alpha, time.perf_counter() - t0)
            continue
        if scheme == "bl-mle":
            runs = [(scheme, 0.0)]
        elif rho == "auto":
            runs = [(scheme, mle_virtual.default_rho(sigma_hat))]
        elif rho == "sweep":
            base = mle_virtual.default_rho(sigma_hat)
            runs = [(_variant_name(m), m * base) for m in RHO_GRID]
        else:
            runs = [(scheme, float(rho))]
        for name, weight in runs:
            t0 = time.perf_counter()
            beta, _ = mle_virtual.detect(sigma_hat, pilots, config, rho=weight, options=opts)
            out[name] = SchemeResult(mle_virtual.map_to_alpha(beta, config.N, config.P),
                                     time.perf_counter() - t0, rho=weight)
    return out


def _apply_threshold(report: TrialReport, name: str, threshold: float) -> None:
    res = report.results[name]
    res.threshold = threshold
    res.decisions = decide(res.scores, threshold)
    res.errors = int(np.count_nonzero(res.decisions != report.truth))


def run_trial(config: SystemConfig, schemes: Sequence[str], seed: int, trial: int = 0,
              rho="auto", options: DetectOptions | None = None,
              thresholds: dict[str, float] | None = None) -> TrialReport:
    """One Monte-Carlo trial.

    Decisions use ``thresholds`` when given, otherwise a threshold tuned on
    this trial alone.
    """
    if not schemes:
        raise ValueError("no schemes requested")
    try:
        pilots, scene, sigma_hat = simulate(config, seed, trial)
        report = TrialReport(trial, seed, np.asarray(scene.activities, dtype=np.int8))
        report.results = score_schemes(sigma_hat, pilots, config, schemes, rho, options)
    except Exception as exc:
        raise RuntimeError(f"trial {trial}: {exc}") from exc
    for name, res in report.results.items():
        if thresholds is not None and name in thresholds:
            th = thresholds[name]
        else:
            th, _ = optimize_threshold([res.scores], [report.truth])
        _apply_threshold(report, name, th)
    return report


def _trial_worker(args):
    config, schemes, seed, trial, rho, options = args
    return run_trial(config, schemes, seed, trial, rho, options)


def run_trials(config: SystemConfig, schemes, seed: int, trials: int, rho="auto",
               options: DetectOptions | None = None, threads: int = 1) -> list[TrialReport]:
    """All trials of one configuration, returned in trial order."""
    jobs = [(config, tuple(schemes), seed, t, rho, options) for t in range(trials)]
    if threads <= 1 or trials == 1:
        return [_trial_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_trial_worker, jobs, chunksize=max(1, trials // (4 * threads))))


@dataclass
class SchemeSummary:
    scheme: str
    trials: int
    mean_error_rate: float
    stderr_error_rate: float
    threshold: float
    mean_seconds: float
    error_rates: np.ndarray
    rho_multiplier: float | None = None


def summarize(reports: list[TrialReport], schemes: Sequence[str]) -> list[SchemeSummary]:
    """Pool the trials: one threshold per scheme, then per-trial error rates.

    ``reports`` get their decisions rewritten with the pooled threshold.
    Penalty-weight variants are collapsed onto the best-performing one.
    """
    truths = [r.truth for r in reports]
    out = []
    for scheme in schemes:
        names = [n for n in reports[0].results if n == scheme or n.startswith(scheme + "[")]
        best = None
        for name in names:
            th, err = optimize_threshold([r.results[name].scores for r in reports], truths)
            if best is None or err < best[2]:
                best = (name, th, err)
        name, th, _ = best
        for r in reports:
            _apply_threshold(r, name, th)
        rates = np.array([error_rate(r.results[name].decisions, r.truth) for r in reports])
        T = len(reports)
        stderr = float(np.std(rates, ddof=1) / math.sqrt(T)) if T > 1 else 0.0
        mult = float(name.split("[x")[1].rstrip("]")) if "[x" in name else None
        out.append(SchemeSummary(
            scheme=scheme, trials=T, mean_error_rate=float(rates.mean()),
            stderr_error_rate=stderr, threshold=th,
            mean_seconds=float(np.mean([r.results[name].seconds for r in reports])),
            error_rates=rates, rho_multiplier=mult))
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def sweep(spec: ExperimentSpec, writer=None) -> list[list[str]]:
    """Run every sweep point and return CSV rows (header first).

    With ``spec.out`` set, rows are appended and flushed as each point
    completes so a failure keeps the finished points.
    """
    rows = [CSV_HEADER]
    fh = open(spec.out, "w", newline="") if spec.out else None
    try:
        w = csv.writer(fh, lineterminator="\n") if fh else None
        if w:
            w.writerow(CSV_HEADER)
            fh.flush()
        for value, config in spec.point_configs():
            log.info("sweep %s=%s: %d trials", spec.sweep_param, value, spec.trials)
            reports = run_trials(config, spec.schemes, spec.seed, spec.trials, spec.rho,
                                 spec.options, spec.threads)
            for s in summarize(reports, spec.schemes):
                row = [spec.sweep_param, _fmt(value), s.scheme, str(s.trials),
                       _fmt(s.mean_error_rate), _fmt(s.stderr_error_rate), _fmt(s.threshold),
                       _fmt(s.mean_seconds)]
                rows.append(row)
                if w:
                    w.writerow(row)
                    fh.flush()
    finally:
        if fh:
            fh.close()
    return rows


def _time_detector(scheme: str, sigma_hat, pilots, config, rho, options, reps: int):
    def once():
        t0 = time.perf_counter()
        if scheme == "mle-direct":
            _, diag = mle_direct.detect(sigma_hat, pilots, config, options)
        else:
            weight = 0.0 if scheme == "bl-mle" else rho
            _, diag = mle_virtual.detect(sigma_hat, pilots, config, rho=weight, options=options)
        return time.perf_counter() - t0, diag.sweeps

    once()  # warm-up: compiled-code loading and caches
    runs = [once() for _ in range(reps)]
    secs = statistics.median(r[0] for r in runs)
    sweeps = runs[0][1]
    return secs, sweeps, statistics.median(r[0] / r[1] for r in runs)


def bench_header(schemes: Sequence[str]) -> list[str]:
    head = ["sweep_param", "sweep_value", "repetitions"]
    for s in schemes:
        head += [f"{s}_seconds", f"{s}_sweeps", f"{s}_seconds_per_sweep"]
    if "mle-direct" in schemes and "mle-virtual" in schemes:
        head.append("time_ratio")
    return head


def bench(spec: ExperimentSpec, reps: int = 5) -> list[list[str]]:
    """Median wall time of full detector runs at each sweep point.

    ``time_ratio`` is mle-direct time over mle-virtual time and appears
    only when both are requested.  Trial 0 of the root seed supplies the
    data at every point.
    """
    if reps < 1:
        raise ValueError("need at least one repetition")
    rows = [bench_header(spec.schemes)]
    opts = spec.options
    for value, config in spec.point_configs():
        pilots, _, sigma_hat = simulate(config, spec.seed, 0)
        rho = (mle_virtual.default_rho(sigma_hat) if isinstance(spec.rho, str)
               else float(spec.rho))
        row = [spec.sweep_param, _fmt(value), str(reps)]
        secs = {}
        for s in spec.schemes:
            t, n_sweeps, per = _time_detector(s, sigma_hat, pilots, config, rho, opts, reps)
            secs[s] = t
            row += [_fmt(t), str(n_sweeps), _fmt(per)]
        if "mle-direct" in secs and "mle-virtual" in secs:
            row.append(_fmt(secs["mle-direct"] / secs["mle-virtual"]))
        rows.append(row)
    if spec.out:
        with open(spec.out, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    return rows
