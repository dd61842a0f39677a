"""Random reproductive-weight vectors (paintboxes) and their moments.

A paintbox is a random probability vector W = (W_1, ..., W_N) used to
assign parents: child j picks parent i with probability W_i.  Two
families are provided:

* Dirichlet-type weights W_i = Y_i / sum(Y), built from i.i.d. positive
  offspring-potential variables Y.  Supported Y laws: Deterministic
  (recovers Wright-Fisher), Gamma (Dirichlet weights), TwoPoint (cheap
  exact moments) and LogNormal (no exponential moment; admitted for
  exploration and flagged as non-conforming).
* Spiked weights: one uniformly placed index receives weight N**-gamma,
  the rest share the remainder equally.  This is the classic source of
  excess offspring variance that breaks the 2s/rho^2 rule.

All Y laws are normalized to mean 1 internally (weights are invariant
under scaling of Y); the constructor's original mean is recorded as
``scale``.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class UnsupportedLawError(ValueError):
    """Raised when an operation needs closed-form transforms the law lacks."""


# ---------------------------------------------------------------------------
# Offspring-potential laws
# ---------------------------------------------------------------------------


class YLaw(abc.ABC):
    """Law of the positive offspring-potential variable Y.

    Subclasses are frozen dataclasses; draws come out in the canonical
    mean-1 parameterization.  ``conforming`` is True when the law has an
    exponential moment (finite MGF on a right neighborhood of 0), the
    condition under which all weight moments behave.
    """

    conforming: bool = True

    @property
    @abc.abstractmethod
    def scale(self) -> float:
        """Mean of the law as originally parameterized."""

    @abc.abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. mean-1 draws, all strictly positive."""

    @abc.abstractmethod
    def sample_sum(self, n: int, rng: np.random.Generator, size: int | None = None):
        """Sum of n i.i.d. mean-1 draws; closed-form block law where one exists.

        With ``size`` given, returns an array of independent such sums.
        """

    @abc.abstractmethod
    def raw_moment(self, r: int) -> float:
        """E[Y^r] in the canonical mean-1 parameterization."""

    @abc.abstractmethod
    def mgf(self, t: float) -> float:
        """E[exp(t Y)] for the mean-1 law; UnsupportedLawError if not closed form."""

    def rho_squared(self) -> float:
        return self.raw_moment(2)

    @abc.abstractmethod
    def tag(self) -> str:
        """Compact `name:params` identifier used in CLI records."""


@dataclass(frozen=True)
class Deterministic(YLaw):
    """Point mass: every individual has the same potential (Wright-Fisher)."""

    value: float = 1.0

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError(f"Deterministic value must be > 0, got {self.value}")

    @property
    def scale(self) -> float:
        return self.value

    def sample(self, n, rng):
        return np.ones(n)

    def sample_sum(self, n, rng, size=None):
        if size is None:
            return float(n)
        return np.full(size, float(n))

    def raw_moment(self, r):
        return 1.0

    def mgf(self, t):
        return math.exp(t)

    def tag(self):
        return f"deterministic:{self.value:g}"


@dataclass(frozen=True)
class Gamma(YLaw):
    """Gamma(kappa) potential with unit scale; weights are Dirichlet(kappa,...,kappa)."""

    kappa: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"Gamma shape must be > 0, got {self.kappa}")

    @property
    def scale(self) -> float:
        return self.kappa

    def sample(self, n, rng):
        return rng.standard_gamma(self.kappa, size=n) / self.kappa

    def sample_sum(self, n, rng, size=None):
        # Gamma additivity: sum of n iid Gamma(kappa, 1/kappa) is Gamma(n*kappa, 1/kappa).
        if size is None:
            return float(rng.standard_gamma(n * self.kappa)) / self.kappa
        return rng.standard_gamma(n * self.kappa, size=size) / self.kappa

    def raw_moment(self, r):
        out = 1.0
        for j in range(r):
            out *= (self.kappa + j) / self.kappa
        return out

    def mgf(self, t):
        if t >= self.kappa:
            raise ValueError(f"Gamma MGF diverges at t={t} >= kappa={self.kappa}")
        return (1.0 - t / self.kappa) ** (-self.kappa)

    def tag(self):
        return f"gamma:{self.kappa:g}"


@dataclass(frozen=True)
class TwoPoint(YLaw):
    """Y = a with probability p, else b (after mean-1 rescaling)."""

    a: float = 0.5
    b: float = 1.5
    p: float = 0.5

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"TwoPoint values must be > 0, got a={self.a}, b={self.b}")
        if not 0 < self.p < 1:
            raise ValueError(f"TwoPoint probability must be in (0,1), got {self.p}")

    @property
    def scale(self) -> float:
        return self.p * self.a + (1 - self.p) * self.b

    @property
    def _ab(self) -> tuple[float, float]:
        m = self.scale
        return self.a / m, self.b / m

    def sample(self, n, rng):
        a, b = self._ab
        return np.where(rng.random(n) < self.p, a, b)

    def sample_sum(self, n, rng, size=None):
        a, b = self._ab
        j = rng.binomial(n, self.p, size=size)
        return j * a + (n - j) * b

    def raw_moment(self, r):
        a, b = self._ab
        return self.p * a**r + (1 - self.p) * b**r

    def mgf(self, t):
        a, b = self._ab
        return self.p * math.exp(t * a) + (1 - self.p) * math.exp(t * b)

    def tag(self):
        return f"two-point:{self.a:g},{self.b:g},{self.p:g}"


@dataclass(frozen=True)
class LogNormal(YLaw):
    """Lognormal potential; has all moments but no MGF, so it sits outside
    the conforming class.  Kept for robustness exploration only."""

    sigma: float = 1.0

    conforming = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"LogNormal sigma must be > 0, got {self.sigma}")

    @property
    def scale(self) -> float:
        return 1.0

    @property
    def _mu(self) -> float:
        # mean-1 location
        return -0.5 * self.sigma**2

    def sample(self, n, rng):
        return rng.lognormal(self._mu, self.sigma, size=n)

    def sample_sum(self, n, rng, size=None):
        if size is None:
            return float(rng.lognormal(self._mu, self.sigma, size=n).sum())
        return rng.lognormal(self._mu, self.sigma, size=(size, n)).sum(axis=1)

    def raw_moment(self, r):
        return math.exp(0.5 * (r * r - r) * self.sigma**2)

    def mgf(self, t):
        raise UnsupportedLawError("lognormal Y has no finite-closed-form MGF")

    def tag(self):
        return f"lognormal:{self.sigma:g}"


# ---------------------------------------------------------------------------
# Weight vectors
# ---------------------------------------------------------------------------

SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WeightVector:
    """One generation's normalized weights; entries >= 0, summing to 1."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-d vector")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = math.fsum(w.tolist())
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1 within {SUM_TOL}")

    def __len__(self) -> int:
        return self.w.size

    def head_sum(self, k: int) -> float:
        """Sum of the first k weights."""
        return float(np.add.reduce(self.w[:k]))


@dataclass(frozen=True)
class SpikedSpec:
    """One uniformly chosen index gets weight N**-gamma; the rest split evenly."""

    gamma: float

    def __post_init__(self):
        if not 0 < self.gamma < 0.5:
            raise ValueError(f"spike exponent must be in (0, 1/2), got {self.gamma}")

    def spike_weight(self, N: int) -> float:
        return N ** (-self.gamma)

    def other_weight(self, N: int) -> float:
        return (1.0 - self.spike_weight(N)) / (N - 1)

    def single_weight_second_moment(self, N: int) -> float:
        """Exact E[W_1^2]: the spike lands on a given index with probability 1/N."""
        ws = self.spike_weight(N)
        wo = self.other_weight(N)
        return ws**2 / N + (1.0 - 1.0 / N) * wo**2

    def tag(self) -> str:
        return f"spiked:{self.gamma:g}"


PaintboxSource = YLaw | SpikedSpec


# ---------------------------------------------------------------------------
# Sampling operations
# ---------------------------------------------------------------------------


def sample_y(law: YLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws of the offspring potential (mean-1 parameterization)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return law.sample(n, rng)


def weights_from_y(y: Sequence[float] | np.ndarray) -> WeightVector:
    """Normalize positive potentials into a weight vector: W_i = y_i / sum(y)."""
    arr = np.asarray(y, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot normalize an empty vector")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("all potentials must be finite and strictly positive")
    return WeightVector(arr / math.fsum(arr.tolist()))


def spiked_weights(N: int, spec: SpikedSpec, rng: np.random.Generator) -> WeightVector:
    """Spiked paintbox draw: the heavy index is uniform on 0..N-1."""
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    w = np.full(N, spec.other_weight(N))
    w[rng.integers(N)] = spec.spike_weight(N)
    return WeightVector(w)


def rho_squared(law: YLaw) -> float:
    """Asymptotic neutral offspring variance E[Y^2]/E[Y]^2."""
    return law.rho_squared()


def block_weight_sums(
    source: PaintboxSource,
    N: int,
    sizes: Sequence[int],
    rng: np.random.Generator,
) -> np.ndarray:
    """Sums of a fresh paintbox over consecutive index blocks of the given sizes.

    Only block sums of the weights enter the frequency-process transition
    law, and for every built-in source the joint law of the block sums is
    available without materializing N weights: for Dirichlet-type sources
    block sums of Y are closed-form (Gamma additivity, binomial counts,
    point masses), and for the spiked source the block holding the spike
    is categorical with probabilities sizes/N.  The result is exactly
    distributed as the block sums of ``spiked_weights``/``weights_from_y``
    output; sizes must be nonnegative and sum to N.
    """
    sizes = list(sizes)
    if any(n < 0 for n in sizes) or sum(sizes) != N:
        raise ValueError(f"block sizes {sizes} must be >= 0 and sum to N={N}")
    if isinstance(source, SpikedSpec):
        wo = source.other_weight(N)
        sums = np.array([n * wo for n in sizes])
        pos = int(rng.integers(N))
        cum = 0
        for j, n in enumerate(sizes):
            cum += n
            if pos < cum:
                sums[j] += source.spike_weight(N) - wo
                break
        return sums
    ysums = np.array([source.sample_sum(n, rng) if n else 0.0 for n in sizes])
    return ysums / ysums.sum()


# ---------------------------------------------------------------------------
# Monte Carlo weight moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightMomentEstimate:
    """Monte Carlo estimate of E[(W_1)^p] with its standard error."""

    value: float
    stderr: float
    trials: int
    N: int
    p: int


def estimate_weight_moment(
    law: YLaw,
    N: int,
    p: int,
    trials: int,
    rng: np.random.Generator,
) -> WeightMomentEstimate:
    """Unbiased estimate of the p-th moment of a single weight.

    One paintbox is drawn per trial and only W_1 is used (the estimator
    the moment asymptotics are stated for); W_1 = Y_1/(Y_1 + rest) needs
    just Y_1 and the block sum of the other N-1 potentials.
    """
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    if p not in (2, 3):
        raise ValueError(f"supported exponents are 2 and 3, got {p}")
    y1 = law.sample(trials, rng)
    rest = law.sample_sum(N - 1, rng, size=trials)
    vals = (y1 / (y1 + rest)) ** p
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    return WeightMomentEstimate(mean, stderr, trials, N, p)


def parse_source(text: str) -> PaintboxSource:
    """Parse a `name:params` tag (as emitted by .tag()) into a source."""
    name, _, params = text.partition(":")
    args = [float(x) for x in params.split(",")] if params else []
    try:
        if name == "deterministic":
            return Deterministic(*args) if args else Deterministic()
        if name == "gamma":
            return Gamma(*args) if args else Gamma()
        if name == "two-point":
            return TwoPoint(*args) if args else TwoPoint()
        if name == "lognormal":
            return LogNormal(*args) if args else LogNormal()
        if name == "spiked":
            return SpikedSpec(*args)
    except TypeError as exc:
        raise ValueError(f"bad parameters for paintbox {text!r}: {exc}") from None
    raise ValueError(f"unknown paintbox {text!r}")
