"""The selective Cannings frequency process.

Each generation a fresh paintbox W is drawn and every one of the N
children independently picks a beneficial parent with probability

    sum(W_i, i <= k) / (sum(W_i, i <= k) + (1-s) * sum(W_i, i > k)),

where k is the current number of beneficial individuals (exchangeability
lets them occupy the first k slots).  The next beneficial count is an
exact binomial draw; 0 and N absorb.

The one-generation kernel consumes only the beneficial/wildtype weight
sums, which `paintbox.block_weight_sums` draws exactly without building
the N-vector, so absorption runs stay cheap at N = 10^4 and beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .paintbox import (
    Deterministic,
    Gamma,
    PaintboxSource,
    SpikedSpec,
    TwoPoint,
    UnsupportedLawError,
    WeightVector,
    YLaw,
    block_weight_sums,
)

EXPONENT_TOL = 1e-12


class ConfigurationError(ValueError):
    """Invalid experiment configuration (CLI maps this to exit code 2)."""


@dataclass(frozen=True)
class CanningsConfig:
    """Population size, selection strength, paintbox and start count.

    Selection can be specified directly (s) or through the decay exponent
    b with s = N**-b; `exponent` recovers b = -ln(s)/ln(N).
    """

    N: int
    s: float
    paintbox: PaintboxSource
    initial_count: int
    b: float | None = None

    def __post_init__(self):
        if self.N < 2:
            raise ConfigurationError(f"need N >= 2, got {self.N}")
        if not 0.0 <= self.s < 1.0:
            raise ConfigurationError(f"need 0 <= s < 1, got {self.s}")
        if not 0 <= self.initial_count <= self.N:
            raise ConfigurationError(
                f"initial count {self.initial_count} outside [0, {self.N}]"
            )
        if self.b is not None:
            if self.s == 0.0:
                raise ConfigurationError("s = 0 has no finite exponent b")
            implied = -math.log(self.s) / math.log(self.N)
            if abs(implied - self.b) > EXPONENT_TOL:
                raise ConfigurationError(
                    f"s={self.s} does not match N^-b for b={self.b} (implied {implied})"
                )

    @classmethod
    def from_s(cls, N, s, paintbox, initial_count):
        return cls(N=N, s=float(s), paintbox=paintbox, initial_count=initial_count)

    @classmethod
    def from_exponent(cls, N, b, paintbox, initial_count):
        return cls(
            N=N,
            s=float(N) ** (-float(b)),
            paintbox=paintbox,
            initial_count=initial_count,
            b=float(b),
        )

    @property
    def exponent(self) -> float | None:
        """b with s = N**-b; None for s = 0."""
        if self.b is not None:
            return self.b
        if self.s == 0.0:
            return None
        return -math.log(self.s) / math.log(self.N)

    @property
    def moderately_strong(self) -> bool:
        """True when the decay exponent sits strictly inside (0, 1/2).

        Reported, never enforced: any s in [0, 1) simulates fine.
        """
        b = self.exponent
        return b is not None and 0.0 < b < 0.5

    @property
    def paintbox_conforming(self) -> bool:
        if isinstance(self.paintbox, SpikedSpec):
            return False
        return self.paintbox.conforming


@dataclass
class AbsorptionRecord:
    """One trajectory's outcome and phase instrumentation."""

    outcome: str  # 'fixation' | 'loss' | 'truncated'
    tau: int
    final_state: int
    max_count: int
    first_passage: dict[int, int] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# One-generation kernels
# ---------------------------------------------------------------------------


def success_probability(weights: WeightVector, k: int, s: float) -> float:
    """Chance a single child is beneficial, given the weights and count k."""
    N = len(weights)
    if not 0 <= k <= N:
        raise ValueError(f"beneficial count {k} outside [0, {N}]")
    if k == 0:
        return 0.0
    if k == N:
        return 1.0
    head = weights.head_sum(k)
    tail = float(np.add.reduce(weights.w[k:]))
    return head / (head + (1.0 - s) * tail)


def _kernel_deterministic(N: int, s: float) -> Callable:
    one_minus_s = 1.0 - s

    def kern(k, rng):
        return int(rng.binomial(N, k / (k + one_minus_s * (N - k))))

    return kern


def _kernel_gamma(N: int, s: float, kappa: float) -> Callable:
    one_minus_s = 1.0 - s

    def kern(k, rng):
        sg = rng.standard_gamma
        head = sg(k * kappa)
        tail = sg((N - k) * kappa)
        return int(rng.binomial(N, head / (head + one_minus_s * tail)))

    return kern


def _kernel_two_point(N: int, s: float, law: TwoPoint) -> Callable:
    a, b = law._ab
    p, one_minus_s = law.p, 1.0 - s

    def kern(k, rng):
        j = rng.binomial(k, p)
        head = j * a + (k - j) * b
        jr = rng.binomial(N - k, p)
        tail = jr * a + (N - k - jr) * b
        return int(rng.binomial(N, head / (head + one_minus_s * tail)))

    return kern


def _kernel_generic(N: int, s: float, law: YLaw) -> Callable:
    one_minus_s = 1.0 - s

    def kern(k, rng):
        head = float(law.sample(k, rng).sum())
        tail = float(law.sample(N - k, rng).sum())
        return int(rng.binomial(N, head / (head + one_minus_s * tail)))

    return kern


def _kernel_spiked(N: int, s: float, spec: SpikedSpec) -> Callable:
    ws = spec.spike_weight(N)
    wo = spec.other_weight(N)
    one_minus_s = 1.0 - s

    def kern(k, rng):
        if rng.integers(N) < k:
            head = ws + (k - 1) * wo
        else:
            head = k * wo
        return int(rng.binomial(N, head / (head + one_minus_s * (1.0 - head))))

    return kern


@lru_cache(maxsize=128)
def _step_kernel(paintbox: PaintboxSource, N: int, s: float) -> Callable:
    """Family-specialized transition kernel for interior states 0 < k < N."""
    if isinstance(paintbox, Deterministic):
        return _kernel_deterministic(N, s)
    if isinstance(paintbox, Gamma):
        return _kernel_gamma(N, s, paintbox.kappa)
    if isinstance(paintbox, TwoPoint):
        return _kernel_two_point(N, s, paintbox)
    if isinstance(paintbox, SpikedSpec):
        return _kernel_spiked(N, s, paintbox)
    return _kernel_generic(N, s, paintbox)


def step(k: int, config: CanningsConfig, rng: np.random.Generator) -> int:
    """One generation: fresh paintbox, then an exact binomial of N children."""
    if not 0 <= k <= config.N:
        raise ValueError(f"beneficial count {k} outside [0, {config.N}]")
    if k == 0 or k == config.N:
        return k
    return _step_kernel(config.paintbox, config.N, config.s)(k, rng)


def run_to_absorption(
    config: CanningsConfig,
    thresholds: Sequence[int] = (),
    rng: np.random.Generator | None = None,
    cap: int | None = None,
) -> AbsorptionRecord:
    """Iterate `step` until the count hits 0 or N.

    `thresholds` are levels whose first crossing generation is recorded
    (crossing = count >= level).  Absorption is a.s. finite, so there is
    no cap by default; when one is given and hit, the record comes back
    with outcome 'truncated' rather than being silently misclassified.
    """
    if rng is None:
        raise ValueError("an explicit random stream is required")
    N = config.N
    k = config.initial_count
    kern = _step_kernel(config.paintbox, N, config.s)
    first_passage = {t: 0 for t in thresholds if k >= t}
    pending = sorted(t for t in thresholds if t > k)
    g = 0
    max_count = k
    while 0 < k < N:
        if cap is not None and g >= cap:
            return AbsorptionRecord("truncated", g, k, max_count, first_passage)
        k = kern(k, rng)
        g += 1
        if k > max_count:
            max_count = k
        while pending and k >= pending[0]:
            first_passage[pending.pop(0)] = g
    outcome = "fixation" if k == N else "loss"
    return AbsorptionRecord(outcome, g, k, max_count, first_passage)


# ---------------------------------------------------------------------------
# Phase-2 comparison process
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QnEstimate:
    """Per-generation mean growth factor of the comparison process."""

    value: float
    stderr: float
    exact: bool


def _spiked_qn(spec: SpikedSpec, N: int, s: float, j0: int) -> float:
    # E[W_1 / (1 - s * tail)] over the uniform spike position; three cases:
    # spike at index 1, spike elsewhere in the head, spike in the tail.
    ws, wo = spec.spike_weight(N), spec.other_weight(N)
    tail_plain = (N - j0) * wo
    tail_spiked = (N - j0 - 1) * wo + ws
    val = (
        ws / (1.0 - s * tail_plain) / N
        + (j0 - 1) / N * wo / (1.0 - s * tail_plain)
        + (N - j0) / N * wo / (1.0 - s * tail_spiked)
    )
    return N * val


def growth_factor_qn(
    config: CanningsConfig,
    eps: float,
    trials: int,
    rng: np.random.Generator,
) -> QnEstimate:
    """q_N = N * E[W_1 / (1 - s * sum of weights past floor(eps*N))].

    Closed form for sourceless randomness (Deterministic, Spiked); Monte
    Carlo with a standard error otherwise.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0,1), got {eps}")
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    N, s = config.N, config.s
    j0 = int(math.floor(eps * N))
    if s == 0.0:
        return QnEstimate(1.0, 0.0, True)
    if j0 == 0:
        # discounted tail is the whole population: q_N = N E[W_1]/(1-s)
        return QnEstimate(1.0 / (1.0 - s), 0.0, True)
    if isinstance(config.paintbox, Deterministic):
        return QnEstimate(1.0 / (1.0 - s * (N - j0) / N), 0.0, True)
    if isinstance(config.paintbox, SpikedSpec):
        return QnEstimate(_spiked_qn(config.paintbox, N, s, j0), 0.0, True)
    law = config.paintbox
    y1 = law.sample(trials, rng)
    mid = law.sample_sum(j0 - 1, rng, size=trials) if j0 > 1 else np.zeros(trials)
    tail = law.sample_sum(N - j0, rng, size=trials)
    vals = N * y1 / (y1 + mid + tail - s * tail)
    return QnEstimate(
        float(vals.mean()),
        float(vals.std(ddof=1) / math.sqrt(trials)),
        False,
    )


def step_tilde(
    k: int,
    config: CanningsConfig,
    eps: float,
    rng: np.random.Generator,
    q_n: float | None = None,
) -> int:
    """One transition of the lower comparison process.

    Below floor(eps*N) the selection discount is frozen at the weight mass
    past that level: Bin(N, head / (1 - s * tail)).  Above it the process
    branches, each line leaving Pois(Y * q_N) offspring; pass a
    precomputed `q_n` there to keep repeated calls cheap and on one
    stream discipline (it is estimated from `rng` otherwise).
    """
    if k < 0:
        raise ValueError(f"count must be >= 0, got {k}")
    if k == 0:
        return 0
    N, s = config.N, config.s
    j0 = int(math.floor(eps * N))
    if k <= j0:
        sums = block_weight_sums(config.paintbox, N, (k, j0 - k, N - j0), rng)
        p = sums[0] / (1.0 - s * sums[2])
        return int(rng.binomial(N, p))
    if isinstance(config.paintbox, SpikedSpec):
        raise UnsupportedLawError(
            "the branching regime of the comparison process needs a Dirichlet-type paintbox"
        )
    if q_n is None:
        q_n = growth_factor_qn(config, eps, 4096, rng).value
    return int(rng.poisson(q_n * config.paintbox.sample_sum(k, rng)))
