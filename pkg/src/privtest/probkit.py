"""Probability-simplex primitives and divergence kernels.

Everything in this module works on finite pmfs over a shared label set and
uses natural logarithms throughout, so all divergence values are in nats.

The three computational kernels are

* ``kl_divergence`` -- the Kullback-Leibler divergence with the usual
  ``0 * log 0 = 0`` convention,
* ``chernoff_information`` -- ``max_{0<=mu<=1} -log sum q1^mu q2^(1-mu)``,
  found by golden-section search on the concave objective,
* ``composite_chernoff`` -- the two-parameter generalization
  ``max -log sum q1^(mu+nu) q2^(1-mu) q3^(-nu)`` over the compact triangle
  ``{mu >= 0, nu >= 0, (1-mu) * D(q1||q2) / D(q1||q3) >= nu}``, which by
  duality equals ``min D(t||q2)`` over
  ``{t : D(t||q1) <= D(t||q2), D(t||q1) <= D(t||q3)}``.

``composite_chernoff_primal_oracle`` evaluates that primal minimum by brute force over a
simplex grid; it is deliberately independent of the dual maximization so the
two can cross-check each other.

All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import AlphabetError, NumericalError, SizeCapError, SupportError, ValidationError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

#: Sums more negative than this raise NumericalError instead of being clamped.
CLAMP_TOL = 1e-12

#: KL values below this are treated as an exact match (degenerate triangle).
_DEGENERATE_KL = 1e-14


@dataclass(frozen=True)
class Pmf:
    """A finite probability mass function on an ordered, labeled alphabet.

    Invariants enforced at construction: labels are distinct, every weight is
    nonnegative, and the weights sum to 1 within 1e-12.  Weights are stored as
    plain floats so equal inputs always produce bit-identical objects.
    """

    labels: tuple
    probs: tuple[float, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", probs)
        if len(labels) != len(probs):
            raise ValidationError(
                f"{len(labels)} labels but {len(probs)} weights"
            )
        if not labels:
            raise ValidationError("a pmf needs at least one symbol")
        if len(set(labels)) != len(labels):
            raise ValidationError("pmf labels must be distinct")
        for lab, p in zip(labels, probs):
            if not math.isfinite(p) or p < 0.0:
                raise ValidationError(f"weight of {lab!r} is {p!r}, expected >= 0")
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"weights sum to {total!r}, expected 1 within 1e-12")

    @property
    def full_support(self) -> bool:
        """True when every symbol carries strictly positive mass."""
        return all(p > 0.0 for p in self.probs)

    @property
    def size(self) -> int:
        return len(self.labels)

    def array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def prob(self, label) -> float:
        try:
            return self.probs[self.labels.index(label)]
        except ValueError:
            raise AlphabetError(f"symbol {label!r} not in alphabet") from None

    @classmethod
    def bernoulli(cls, theta: float) -> "Pmf":
        """Binary pmf on labels (0, 1) with mass ``theta`` at symbol 0."""
        theta = float(theta)
        if not 0.0 <= theta <= 1.0:
            raise ValidationError(f"bernoulli parameter {theta} outside [0, 1]")
        return cls(labels=(0, 1), probs=(theta, 1.0 - theta))

    @classmethod
    def uniform(cls, labels: Sequence) -> "Pmf":
        labels = tuple(labels)
        return cls(labels=labels, probs=(1.0 / len(labels),) * len(labels))

    @classmethod
    def from_weights(cls, labels: Sequence, weights: Sequence[float]) -> "Pmf":
        """Normalize nonnegative weights into a pmf."""
        w = [float(x) for x in weights]
        total = math.fsum(w)
        if total <= 0.0:
            raise ValidationError("weights must have positive total mass")
        return cls(labels=tuple(labels), probs=tuple(x / total for x in w))


@dataclass(frozen=True)
class DualPoint:
    """A point (mu, nu) in the dual plane of the composite maximization."""

    mu: float
    nu: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.nu)):
            raise ValidationError(f"dual point ({self.mu}, {self.nu}) must be finite")


def product_pmf(p: Pmf, k: int) -> Pmf:
    """The k-fold product extension of ``p``; labels become k-tuples."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    labels = []
    probs = []
    for combo in itertools.product(range(p.size), repeat=k):
        labels.append(tuple(p.labels[i] for i in combo))
        probs.append(math.prod(p.probs[i] for i in combo))
    return Pmf(labels=tuple(labels), probs=tuple(probs))


def _common_alphabet(*pmfs: Pmf) -> None:
    first = pmfs[0].labels
    for other in pmfs[1:]:
        if other.labels != first:
            raise AlphabetError(f"alphabets differ: {first!r} vs {other.labels!r}")


def _require_full_support(p: Pmf, role: str) -> None:
    if not p.full_support:
        raise SupportError(f"{role} has zero-mass symbols; full support required")


def _clamp_nonnegative(value: float) -> float:
    """Round tiny negative results up to 0; reject anything more negative."""
    if value >= 0.0:
        return value
    if value >= -CLAMP_TOL:
        return 0.0
    raise NumericalError(f"value {value!r} negative beyond clamping tolerance")


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10
) -> tuple[float, float]:
    """Maximize a concave function on [lo, hi] by golden-section search.

    Returns ``(x, f(x))`` where x is the midpoint of the final bracket, whose
    width is at most ``tol``.
    """
    a, b = float(lo), float(hi)
    if b < a:
        raise ValidationError(f"empty search interval [{a}, {b}]")
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (d - c) > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


# ---------------------------------------------------------------------------
# Kullback-Leibler divergence
# ---------------------------------------------------------------------------


def kl_from_probs(p: Sequence[float], q: Sequence[float], *, allow_zeros: bool = False) -> float:
    """KL divergence of raw probability sequences (no alphabet checks).

    ``allow_zeros`` permits zero masses in ``p`` only (0 log 0 = 0).  A zero
    in ``q`` facing positive ``p`` mass always raises instead of silently
    returning infinity.
    """
    total = 0.0
    for pa, qa in zip(p, q):
        if pa == 0.0:
            if not allow_zeros:
                raise SupportError("first argument has zero-mass symbols; "
                                   "pass allow_zeros=True to permit them")
            continue
        if qa <= 0.0:
            raise SupportError("second argument has a zero where the first has mass")
        total += pa * math.log(pa / qa)
    return _clamp_nonnegative(total)


def kl_divergence(p: Pmf, q: Pmf, *, allow_zeros: bool = False) -> float:
    """D(p || q) in nats.

    Both pmfs must live on the same alphabet; ``q`` must have full support.
    By default ``p`` must as well; ``allow_zeros=True`` relaxes that for the
    first argument only.
    """
    _common_alphabet(p, q)
    _require_full_support(q, "second argument")
    return kl_from_probs(p.probs, q.probs, allow_zeros=allow_zeros)


# ---------------------------------------------------------------------------
# Chernoff information
# ---------------------------------------------------------------------------


def _chernoff_from_logs(l1: Sequence[float], l2: Sequence[float], tol: float) -> tuple[float, float]:
    def objective(mu: float) -> float:
        one_minus = 1.0 - mu
        acc = 0.0
        for a, b in zip(l1, l2):
            acc += math.exp(mu * a + one_minus * b)
        if acc <= 0.0:
            return math.inf
        return -math.log(acc)

    mu, value = golden_section_max(objective, 0.0, 1.0, tol)
    return mu, value


def chernoff_from_probs(
    p: Sequence[float], q: Sequence[float], *, allow_zeros: bool = False, tol: float = 1e-10
) -> tuple[float, float]:
    """Chernoff information of raw probability sequences.

    Returns ``(value, mu_star)``.  With ``allow_zeros`` the sum runs over the
    common support; if the supports are disjoint the value is ``inf``.
    """
    pairs = list(zip((float(x) for x in p), (float(x) for x in q)))
    if allow_zeros:
        pairs = [(a, b) for a, b in pairs if a > 0.0 and b > 0.0]
        if not pairs:
            return math.inf, 0.5
    else:
        for a, b in pairs:
            if a <= 0.0 or b <= 0.0:
                raise SupportError("chernoff_information requires full support "
                                   "(pass allow_zeros=True for common-support mode)")
    l1 = [math.log(a) for a, _ in pairs]
    l2 = [math.log(b) for _, b in pairs]
    mu, value = _chernoff_from_logs(l1, l2, tol)
    return _clamp_nonnegative(value), mu


def chernoff_information(q1: Pmf, q2: Pmf, *, allow_zeros: bool = False) -> float:
    """C(q1 || q2) in nats: the Bayesian error exponent of the simple test.

    Symmetric in its arguments and zero iff they coincide.  The maximizing
    mu is found to absolute tolerance 1e-10.
    """
    _common_alphabet(q1, q2)
    value, _ = chernoff_from_probs(q1.probs, q2.probs, allow_zeros=allow_zeros)
    return value


def chernoff_information_with_argmax(q1: Pmf, q2: Pmf) -> tuple[float, float]:
    """Like :func:`chernoff_information` but also returns the optimal mu."""
    _common_alphabet(q1, q2)
    return chernoff_from_probs(q1.probs, q2.probs)


# ---------------------------------------------------------------------------
# The two-parameter divergence T
# ---------------------------------------------------------------------------


def _composite_from_logs(l1, l2, l3, mu: float, nu: float) -> float:
    # exponents can be large when nu is large, so shift by the max
    ws = [(mu + nu) * a + (1.0 - mu) * b - nu * c for a, b, c in zip(l1, l2, l3)]
    m = max(ws)
    if m == -math.inf:
        return math.inf
    return -(m + math.log(math.fsum(math.exp(w - m) for w in ws)))


def composite_chernoff_dual(q1: Pmf, q2: Pmf, q3: Pmf, point: DualPoint) -> float:
    """Evaluate ``-log sum q1^(mu+nu) q2^(1-mu) q3^(-nu)`` exactly."""
    _common_alphabet(q1, q2, q3)
    for role, q in (("q1", q1), ("q2", q2), ("q3", q3)):
        _require_full_support(q, role)
    l1 = [math.log(x) for x in q1.probs]
    l2 = [math.log(x) for x in q2.probs]
    l3 = [math.log(x) for x in q3.probs]
    return _composite_from_logs(l1, l2, l3, point.mu, point.nu)


def _composite_maximize(q1: Pmf, q2: Pmf, q3: Pmf) -> tuple[float, DualPoint]:
    """Maximize the dual objective over the compact triangle in the module docs.

    The search region has corners (0, 0), (1, 0) and (0, D12/D13).  When
    D(q1||q3) vanishes the triangle degenerates and the maximization falls
    back to the segment nu = 0, where the objective is the Chernoff curve of
    (q1, q2).  The objective is jointly concave, so a nested golden-section
    search (outer in mu, inner in nu) converges; it is also scale-invariant,
    which matters because D12/D13 can be enormous for nearly coinciding
    pmfs.
    """
    l1 = [math.log(x) for x in q1.probs]
    l2 = [math.log(x) for x in q2.probs]
    l3 = [math.log(x) for x in q3.probs]
    d12 = kl_from_probs(q1.probs, q2.probs)
    d13 = kl_from_probs(q1.probs, q3.probs)

    if d13 < _DEGENERATE_KL or d12 < _DEGENERATE_KL:
        mu, value = golden_section_max(
            lambda m: _composite_from_logs(l1, l2, l3, m, 0.0), 0.0, 1.0, 1e-10
        )
        return value, DualPoint(mu, 0.0)

    ratio = d12 / d13
    best_nu = [0.0]

    def inner(mu: float) -> float:
        hi = (1.0 - mu) * ratio
        if hi <= 0.0:
            best_nu[0] = 0.0
            return _composite_from_logs(l1, l2, l3, mu, 0.0)
        tol = max(1e-10, hi * 1e-12)
        nu, value = golden_section_max(
            lambda n: _composite_from_logs(l1, l2, l3, mu, n), 0.0, hi, tol
        )
        best_nu[0] = nu
        return value

    mu, value = golden_section_max(inner, 0.0, 1.0, 1e-9)
    return value, DualPoint(mu, best_nu[0])


def composite_chernoff(q1: Pmf, q2: Pmf, q3: Pmf) -> float:
    """The composite Chernoff divergence of q1 toward q2 beside q3, in nats.

    Equals, by convex duality, the minimum of D(t || q2) over distributions
    t that are at least as close (in KL) to q1 as to both q2 and q3.
    Asymmetric in (q2, q3); clamped to be nonnegative.
    """
    _common_alphabet(q1, q2, q3)
    for role, q in (("q1", q1), ("q2", q2), ("q3", q3)):
        _require_full_support(q, role)
    value, _ = _composite_maximize(q1, q2, q3)
    return _clamp_nonnegative(value)


def composite_chernoff_with_argmax(q1: Pmf, q2: Pmf, q3: Pmf) -> tuple[float, DualPoint]:
    """Like :func:`composite_chernoff` but also returns the maximizing (mu, nu)."""
    _common_alphabet(q1, q2, q3)
    for role, q in (("q1", q1), ("q2", q2), ("q3", q3)):
        _require_full_support(q, role)
    value, point = _composite_maximize(q1, q2, q3)
    return _clamp_nonnegative(value), point


# ---------------------------------------------------------------------------
# Brute-force primal oracle
# ---------------------------------------------------------------------------

#: Largest alphabet simplex_grid / composite_chernoff_primal_oracle will enumerate.
MAX_GRID_ALPHABET = 4


def simplex_grid(size: int, grid_step: float) -> Iterator[tuple[float, ...]]:
    """Yield all pmfs on ``size`` symbols with weights that are multiples of
    (approximately) ``grid_step``.

    The step is rounded to 1/N for N = round(1/grid_step); a binary alphabet
    with grid_step 0.5 therefore yields exactly the 3 points (0, .5, 1).
    """
    if size < 2:
        raise ValidationError("simplex grid needs at least 2 symbols")
    if size > MAX_GRID_ALPHABET:
        raise SizeCapError(f"alphabet size {size} exceeds grid cap {MAX_GRID_ALPHABET}")
    if not 0.0 < grid_step <= 1.0:
        raise ValidationError(f"grid_step {grid_step} outside (0, 1]")
    n = max(1, round(1.0 / grid_step))

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first, *rest)

    for counts in compositions(n, size):
        yield tuple(c / n for c in counts)


def composite_chernoff_primal_oracle(q1: Pmf, q2: Pmf, q3: Pmf, grid_step: float) -> float:
    """Brute-force the primal composite-divergence form on a simplex grid.

    Minimizes D(t || q2) over grid pmfs t satisfying D(t||q1) <= D(t||q2)
    and D(t||q1) <= D(t||q3).  Returns ``inf`` when no grid point is
    feasible.  Only intended as an independent cross-check of
    :func:`composite_chernoff`; alphabets larger than 4 are refused.
    """
    _common_alphabet(q1, q2, q3)
    for role, q in (("q1", q1), ("q2", q2), ("q3", q3)):
        _require_full_support(q, role)
    best = math.inf
    for t in simplex_grid(q1.size, grid_step):
        d1 = kl_from_probs(t, q1.probs, allow_zeros=True)
        d2 = kl_from_probs(t, q2.probs, allow_zeros=True)
        if d1 <= d2 and d1 <= kl_from_probs(t, q3.probs, allow_zeros=True):
            if d2 < best:
                best = d2
    return best
