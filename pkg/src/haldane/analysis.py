"""Monte Carlo experiment orchestration.

Fixation estimation with Wilson intervals and the 2s/rho^2 reference,
three-phase trajectory diagnostics, the sampling-duality evaluation of
fixation from ancestral-line counts, and the spiked-paintbox violation
check.

Trials are farmed over per-trial Philox streams keyed by (seed, trial
index) and merged with integer counters only, so results are
bit-identical for every worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

from .cannings import CanningsConfig, ConfigurationError, run_to_absorption
from .paintbox import SpikedSpec
from .streams import TrialStreams

DEFAULT_LEVEL = 0.99


def wilson_interval(successes: int, trials: int, level: float = DEFAULT_LEVEL):
    """Wilson score interval; stays honest at success probabilities near 0."""
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes {successes} outside [0, {trials}]")
    if not 0 < level < 1:
        raise ValueError(f"confidence level must be in (0,1), got {level}")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    n = trials
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    spread = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    # the score bounds hit 0 and 1 exactly at the boundary counts; snap
    # away the last-ulp float residue there
    lo = 0.0 if successes == 0 else max(0.0, center - spread)
    hi = 1.0 if successes == trials else min(1.0, center + spread)
    return lo, hi


def reference_variance(paintbox, N: int) -> float:
    """Offspring-variance denominator for the 2s/variance reference.

    Dirichlet-type sources use the asymptotic E[Y^2]/E[Y]^2; the spiked
    source has no N-free limit, so its exact N(N-1)E[W_1^2] is used.
    """
    if isinstance(paintbox, SpikedSpec):
        return N * (N - 1) * paintbox.single_weight_second_moment(N)
    return paintbox.rho_squared()


# ---------------------------------------------------------------------------
# Trial farming
# ---------------------------------------------------------------------------


@dataclass
class _Tally:
    """Order-insensitive integer aggregate of absorption trials."""

    trials: int = 0
    fixations: int = 0
    losses: int = 0
    truncated: int = 0
    tau_total: int = 0
    tau_max: int = 0
    threshold_hits: dict[int, int] = field(default_factory=dict)

    def merge(self, other: "_Tally") -> "_Tally":
        hits = dict(self.threshold_hits)
        for t, c in other.threshold_hits.items():
            hits[t] = hits.get(t, 0) + c
        return _Tally(
            self.trials + other.trials,
            self.fixations + other.fixations,
            self.losses + other.losses,
            self.truncated + other.truncated,
            self.tau_total + other.tau_total,
            max(self.tau_max, other.tau_max),
            hits,
        )


def _run_chunk(config, thresholds, seed, start, stop, cap):
    tally = _Tally(threshold_hits={t: 0 for t in thresholds})
    streams = TrialStreams(seed)
    for i in range(start, stop):
        rec = run_to_absorption(config, thresholds, streams.stream(i), cap=cap)
        tally.trials += 1
        if rec.outcome == "fixation":
            tally.fixations += 1
        elif rec.outcome == "loss":
            tally.losses += 1
        else:
            tally.truncated += 1
        tally.tau_total += rec.tau
        if rec.tau > tally.tau_max:
            tally.tau_max = rec.tau
        for t in rec.first_passage:
            tally.threshold_hits[t] += 1
    return tally


def _farm(config, thresholds, trials, seed, parallelism, cap=None) -> _Tally:
    thresholds = tuple(sorted(set(thresholds)))
    if parallelism <= 1:
        return _run_chunk(config, thresholds, seed, 0, trials, cap)
    n_chunks = min(trials, 4 * parallelism)
    bounds = [round(i * trials / n_chunks) for i in range(n_chunks + 1)]
    tally = _Tally(threshold_hits={t: 0 for t in thresholds})
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        futures = [
            pool.submit(_run_chunk, config, thresholds, seed, lo, hi, cap)
            for lo, hi in zip(bounds, bounds[1:])
            if hi > lo
        ]
        for fut in futures:
            tally = tally.merge(fut.result())
    return tally


# ---------------------------------------------------------------------------
# Fixation estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FixationEstimate:
    trials: int
    fixations: int
    truncated: int
    p_hat: float
    ci_low: float
    ci_high: float
    level: float
    s: float
    ref_variance: float
    haldane: float
    ratio: float | None
    mean_tau: float
    max_tau: int

    def __post_init__(self):
        assert 0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0
        assert self.fixations <= self.trials


def _estimate_from_tally(tally: _Tally, config, level) -> FixationEstimate:
    p_hat = tally.fixations / tally.trials
    lo, hi = wilson_interval(tally.fixations, tally.trials, level)
    rv = reference_variance(config.paintbox, config.N)
    s = config.s
    haldane = min(1.0, 2.0 * s / rv) if s > 0 else 0.0
    ratio = p_hat * rv / (2.0 * s) if s > 0 else None
    return FixationEstimate(
        trials=tally.trials,
        fixations=tally.fixations,
        truncated=tally.truncated,
        p_hat=p_hat,
        ci_low=lo,
        ci_high=hi,
        level=level,
        s=s,
        ref_variance=rv,
        haldane=haldane,
        ratio=ratio,
        mean_tau=tally.tau_total / tally.trials,
        max_tau=tally.tau_max,
    )


def estimate_fixation(
    config: CanningsConfig,
    trials: int,
    seed: int,
    parallelism: int = 1,
    level: float = DEFAULT_LEVEL,
    cap: int | None = None,
) -> FixationEstimate:
    """Fixation frequency over independent absorption runs.

    Trial i draws from the stream keyed by (seed, i); the aggregate is
    identical for any `parallelism`.
    """
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    tally = _farm(config, (), trials, seed, parallelism, cap)
    return _estimate_from_tally(tally, config, level)


# ---------------------------------------------------------------------------
# Phase diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseReport:
    threshold_1: int
    threshold_2: int
    trials: int
    reached_1: int
    reached_2: int
    fixations: int
    p1: float
    p2: float
    p3: float
    p1_ci: tuple[float, float]
    p2_ci: tuple[float, float]
    p3_ci: tuple[float, float]
    estimate: FixationEstimate


def phase_diagnostics(
    config: CanningsConfig,
    delta: float,
    eps: float,
    trials: int,
    seed: int,
    parallelism: int = 1,
    level: float = DEFAULT_LEVEL,
) -> PhaseReport:
    """Split the fixation event at ceil(N^(b+delta)) and floor(eps*N).

    p1 = reach the first level before 0, p2 = then reach the second,
    p3 = then fix; on one trial set p1*p2*p3 telescopes to the overall
    fixation frequency exactly.
    """
    b = config.exponent
    if b is None:
        raise ConfigurationError("phase thresholds need s > 0 (an exponent b)")
    if not b + delta < 0.5:
        raise ConfigurationError(f"need b + delta < 1/2, got {b + delta}")
    if not 0.0 < eps < 0.5:
        raise ConfigurationError(f"need 0 < eps < 1/2, got {eps}")
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    lvl1 = math.ceil(config.N ** (b + delta))
    lvl2 = math.floor(eps * config.N)
    if not config.initial_count < lvl1 < lvl2 < config.N:
        raise ConfigurationError(
            f"thresholds {lvl1}, {lvl2} do not separate "
            f"{config.initial_count} from N={config.N}"
        )
    tally = _farm(config, (lvl1, lvl2), trials, seed, parallelism)
    n1 = tally.threshold_hits[lvl1]
    n2 = tally.threshold_hits[lvl2]
    nfix = tally.fixations
    return PhaseReport(
        threshold_1=lvl1,
        threshold_2=lvl2,
        trials=tally.trials,
        reached_1=n1,
        reached_2=n2,
        fixations=nfix,
        p1=n1 / tally.trials,
        p2=n2 / n1 if n1 else float("nan"),
        p3=nfix / n2 if n2 else float("nan"),
        p1_ci=wilson_interval(n1, tally.trials, level),
        p2_ci=wilson_interval(n2, n1, level) if n1 else (0.0, 1.0),
        p3_ci=wilson_interval(nfix, n2, level) if n2 else (0.0, 1.0),
        estimate=_estimate_from_tally(tally, config, level),
    )


# ---------------------------------------------------------------------------
# Sampling duality
# ---------------------------------------------------------------------------


def duality_fixation(N: int, k: int, aeq_samples: Sequence[int]) -> float:
    """Fixation probability from k via ancestral-line counts.

    Averages 1 - (N-k)_A / (N)_A over the sampled line counts A, the
    falling factorials evaluated as log-gamma differences; a sample
    larger than N-k forces a zero factor, i.e. certain fixation for that
    draw.
    """
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    if not 0 <= k <= N:
        raise ValueError(f"beneficial count {k} outside [0, {N}]")
    samples = list(aeq_samples)
    if not samples:
        raise ValueError("need at least one ancestral-line sample")
    acc = 0.0
    for a in samples:
        if not 1 <= a <= N:
            raise ValueError(f"ancestral-line count {a} outside [1, {N}]")
        if a > N - k:
            continue  # avoidance impossible
        log_ratio = (
            math.lgamma(N - k + 1)
            - math.lgamma(N - k - a + 1)
            - math.lgamma(N + 1)
            + math.lgamma(N - a + 1)
        )
        acc += math.exp(log_ratio)
    return 1.0 - acc / len(samples)


def read_aeq_samples(path) -> list[int]:
    """Ancestral-line sample file: one nonnegative integer per line."""
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            try:
                samples.append(int(text))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not an integer: {text!r}") from None
    return samples


# ---------------------------------------------------------------------------
# Spiked-paintbox violation check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterexampleReport:
    p_hat: float
    ci_low: float
    ci_high: float
    naive_prediction: float
    neutral_floor: float
    violation: bool
    estimate: FixationEstimate


def counterexample_check(
    N: int,
    gamma: float,
    b: float,
    trials: int,
    seed: int,
    parallelism: int = 1,
    level: float = DEFAULT_LEVEL,
) -> CounterexampleReport:
    """Spiked weights versus the 2s/variance prediction.

    In the regime gamma < b/2 the prediction falls below the neutral
    floor 1/N, which no beneficial allele can undercut; the violation
    flag records the observed fixation frequency clearing twice the
    prediction with CI room.
    """
    if not gamma < b / 2:
        raise ConfigurationError(
            f"violation regime needs gamma < b/2, got gamma={gamma}, b={b}"
        )
    spec = SpikedSpec(gamma)
    config = CanningsConfig.from_exponent(N, b, spec, initial_count=1)
    est = estimate_fixation(config, trials, seed, parallelism, level)
    naive = 2.0 * config.s / (N * (N - 1) * spec.single_weight_second_moment(N))
    violation = est.ci_low > max(2.0 * naive, 0.0)
    return CounterexampleReport(
        p_hat=est.p_hat,
        ci_low=est.ci_low,
        ci_high=est.ci_high,
        naive_prediction=naive,
        neutral_floor=1.0 / N,
        violation=violation,
        estimate=est,
    )
