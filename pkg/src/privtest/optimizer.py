"""Constrained policy search: minimize the privacy exponent under a utility floor.

A kernel is admissible when its induced utility Chernoff rate clears the
configured threshold (:class:`GuaranteeConfig`); among admissible kernels the
optimizer minimizes the privacy Chernoff rate

    (1/k) * min over (ub, ut) of C(p_{Y^k|ub,1} || p_{Y^k|ut,0}).

Search strategy: the kernel family's free parameters (one simplex per
multi-output row) are enumerated on a per-axis grid when the total dimension
is at most :data:`GRID_DIM_LIMIT`, followed by a local pattern refinement;
higher-dimensional families fall back to seeded multistart random sampling
plus coordinate descent.  All rate evaluations are vectorized over candidate
batches.  Results are deterministic given the search seed.

The per-block optimum at any finite k is only an upper bound on the
asymptotic minimum privacy exponent (the true quantity is an infimum over
all block lengths); :func:`asymptotic_guarantee` reports the best bound over
k = 1..k_max and labels it as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .model import (
    UP_PAIRS,
    OutputLaws,
    PolicyKernel,
    PolicySpace,
    Prior,
    SourceModel,
    blockwise_extend,
    induced_output_laws,
    policy_space,
    validate_policy,
)
from .bayes import TestTarget, grouped_pairs

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

#: Largest free dimension searched by exhaustive grid.
GRID_DIM_LIMIT = 4

#: Margin slack accepted by the public guarantee check (the search itself
#: requires margin >= 0, so re-verification can never flip a result).
MARGIN_SLACK = 1e-9

#: Golden-section bracket width for bulk grid scoring.  The winning kernel is
#: always re-evaluated at full precision, so the scan can afford to be coarse.
GRID_EVAL_TOL = 1e-7

_UP_INDEX = {up: i for i, up in enumerate(UP_PAIRS)}


@dataclass(frozen=True)
class GuaranteeConfig:
    """Utility-test guarantee: threshold lambda, optional finite-k correction.

    With the correction on, the effective threshold is
    lambda + log(8 p_max) / k; with it off, just lambda.
    """

    lam: float
    k: int = 1
    s: float = 1.0
    include_correction: bool = False

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValidationError("lambda must be >= 0")
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.s < 0.0:
            raise ValidationError("s must be >= 0")

    def effective_threshold(self, prior: Prior) -> float:
        extra = math.log(8.0 * prior.p_max) / self.k if self.include_correction else 0.0
        return self.lam + extra


@dataclass(frozen=True)
class SearchConfig:
    """Reproducible search settings; recorded in every result."""

    grid_points_per_parameter: int = 101
    restarts: int = 16
    seed: int = 0
    local_step_tolerance: float = 1e-9

    def __post_init__(self):
        if self.grid_points_per_parameter < 2:
            raise ValidationError("need at least 2 grid points per parameter")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if not 0.0 < self.local_step_tolerance < 1.0:
            raise ValidationError("local_step_tolerance must be in (0, 1)")


@dataclass(frozen=True)
class GuaranteeResult:
    passed: bool
    margin: float
    utility_rate: float
    threshold: float


@dataclass(frozen=True, eq=False)
class TradeoffPoint:
    """One optimized point of the privacy-utility trade-off curve."""

    lam: float
    s: float
    k: int
    privacy_rate: float
    utility_rate: float
    kernel: PolicyKernel
    feasible: bool
    params: tuple[float, ...]
    seed: int


# ---------------------------------------------------------------------------
# Rate evaluation (scalar and batched)
# ---------------------------------------------------------------------------


def _chernoff_batch(p: np.ndarray, q: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Chernoff information per row of two (G, m) probability arrays.

    Zero masses are handled in common-support mode: rows whose supports are
    disjoint evaluate to +inf.  All probabilities are <= 1, so the inner sums
    never overflow and need no log-sum-exp shift.
    """
    with np.errstate(divide="ignore"):
        lp = np.log(p)
        lq = np.log(q)

    def objective(mu: np.ndarray) -> np.ndarray:
        w = mu[:, None] * lp + (1.0 - mu)[:, None] * lq
        with np.errstate(divide="ignore"):
            return -np.log(np.exp(w).sum(axis=1))

    a = np.zeros(p.shape[0])
    b = np.ones(p.shape[0])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = objective(c), objective(d)
    # inf/nan objectives (disjoint support) are routed left arbitrarily;
    # their final value is recomputed at the midpoint anyway
    while float(np.max(d - c)) > tol:
        left = ~(fd > fc)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc, fd = objective(c), objective(d)
    vals = objective(0.5 * (a + b))
    return np.where(np.isnan(vals), np.inf, np.maximum(vals, 0.0))


def _batch_both_rates(
    laws: np.ndarray, k: int, tol: float = 1e-9
) -> tuple[np.ndarray, np.ndarray]:
    """Utility and privacy Chernoff rates per batch row; laws is (G, 4, m).

    Chernoff information is symmetric, so the eight ordered cross-group
    pairs reduce to six unordered ones, each evaluated once.  For the
    privacy rate a single undefined (disjoint-support) pair marks the whole
    kernel degenerate, reported as +inf.
    """
    values: dict[frozenset, np.ndarray] = {}
    rates = []
    for target in (TestTarget.UTILITY, TestTarget.PRIVACY):
        best = None
        any_inf = None
        for a, b in grouped_pairs(target):
            key = frozenset((a, b))
            if key not in values:
                values[key] = _chernoff_batch(
                    laws[:, _UP_INDEX[a], :], laws[:, _UP_INDEX[b], :], tol
                )
            c = values[key]
            best = c if best is None else np.minimum(best, c)
            inf_here = np.isinf(c)
            any_inf = inf_here if any_inf is None else (any_inf | inf_here)
        if target is TestTarget.PRIVACY:
            best = np.where(any_inf, np.inf, best)
        rates.append(best / k)
    return rates[0], rates[1]


def _batch_rates(laws: np.ndarray, k: int, target: TestTarget) -> np.ndarray:
    """min cross-group Chernoff rate per batch row for one target."""
    utility, privacy = _batch_both_rates(laws, k)
    return utility if target is TestTarget.UTILITY else privacy


def utility_rate(laws: OutputLaws) -> float:
    """(1/k) * min cross-group utility Chernoff information of block laws."""
    arr = laws.arrays()[None, :, :]
    return float(_batch_rates(arr, laws.k, TestTarget.UTILITY)[0])


def privacy_objective(laws: OutputLaws) -> float:
    """(1/k) * min cross-group privacy Chernoff information of block laws.

    Laws with partially overlapping supports are evaluated on the common
    support; if any required pair has disjoint supports the kernel is
    degenerate and the objective is +inf.  Identical laws give 0.
    """
    arr = laws.arrays()[None, :, :]
    return float(_batch_rates(arr, laws.k, TestTarget.PRIVACY)[0])


def guarantee_check(laws: OutputLaws, cfg: GuaranteeConfig, prior: Prior) -> GuaranteeResult:
    """Compare the utility rate of block laws against the effective threshold."""
    if laws.k != cfg.k:
        raise ValidationError(f"laws have k={laws.k} but the config says k={cfg.k}")
    rate = utility_rate(laws)
    threshold = cfg.effective_threshold(prior)
    margin = rate - threshold
    return GuaranteeResult(
        passed=bool(margin >= -MARGIN_SLACK),
        margin=margin,
        utility_rate=rate,
        threshold=threshold,
    )


# ---------------------------------------------------------------------------
# Policy optimization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _FamilyEval:
    """Cached rate evaluation of a candidate batch within one policy family."""

    space: PolicySpace
    params: np.ndarray  # (G, dim)
    utility: np.ndarray  # (G,)
    privacy: np.ndarray  # (G,)


def _evaluate(space: PolicySpace, params: np.ndarray, tol: float = 1e-9) -> _FamilyEval:
    params = np.atleast_2d(np.asarray(params, dtype=float))
    laws = space.batch_laws(params)
    utility, privacy = _batch_both_rates(laws, space.k, tol)
    return _FamilyEval(space=space, params=params, utility=utility, privacy=privacy)


def _grid_candidates(space: PolicySpace, points: int, chunk: int = 1 << 20) -> Iterable[np.ndarray]:
    """Yield feasible grid parameter batches (chunked to bound memory)."""
    axis = np.linspace(0.0, 1.0, points)
    d = space.dim
    total = points**d
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        idx = np.arange(start, stop)
        cols = []
        for j in range(d - 1, -1, -1):
            cols.append(axis[idx % points])
            idx = idx // points
        batch = np.stack(cols[::-1], axis=1)
        mask = space.params_feasible(batch)
        if mask.any():
            yield batch[mask]


def _selection_key(privacy: np.ndarray, utility: np.ndarray, threshold: float):
    """Feasible kernels sort by privacy; infeasible ones by shrinking violation."""
    feasible = utility >= threshold
    violation = np.where(feasible, 0.0, threshold - utility)
    return feasible, violation


def _pick_best(ev: _FamilyEval, threshold: float) -> tuple[np.ndarray, float, float, bool]:
    """Best candidate in a batch: min privacy among feasible, else min violation.

    Exact ties are broken by the lexicographically smallest parameter vector.
    """
    feasible, violation = _selection_key(ev.privacy, ev.utility, threshold)
    if feasible.any():
        pool = np.flatnonzero(feasible)
        vals = ev.privacy[pool]
        best_val = vals.min()
        tied = pool[vals == best_val]
    else:
        vals = violation
        best_val = vals.min()
        tied = np.flatnonzero(vals == best_val)
    if len(tied) > 1:
        cand = ev.params[tied]
        order = np.lexsort(tuple(cand[:, j] for j in range(cand.shape[1] - 1, -1, -1)))
        choice = tied[order[0]]
    else:
        choice = tied[0]
    return (
        ev.params[choice].copy(),
        float(ev.privacy[choice]),
        float(ev.utility[choice]),
        bool(feasible[choice]),
    )


def _better(
    cand: tuple[float, float, bool], incumbent: tuple[float, float, bool], threshold: float
) -> bool:
    """Candidate (privacy, utility, feasible) strictly improves the incumbent."""
    c_priv, c_util, c_feas = cand
    i_priv, i_util, i_feas = incumbent
    if c_feas and not i_feas:
        return True
    if c_feas and i_feas:
        return c_priv < i_priv - 1e-15
    if not c_feas and not i_feas:
        return (threshold - c_util) < (threshold - i_util) - 1e-15
    return False


def _local_refine(
    space: PolicySpace,
    threshold: float,
    start: np.ndarray,
    step0: float,
    tol: float,
    directions: np.ndarray,
    max_moves: int = 2000,
) -> tuple[np.ndarray, float, float, bool]:
    """Pattern search from ``start``: probe scaled directions, shrink on failure."""
    x = np.asarray(start, dtype=float).copy()
    ev = _evaluate(space, x[None, :])
    state = (float(ev.privacy[0]), float(ev.utility[0]), bool(ev.utility[0] >= threshold))
    step = step0
    moves = 0
    while step >= tol and moves < max_moves:
        probes = x[None, :] + step * directions
        np.clip(probes, 0.0, 1.0, out=probes)
        mask = space.params_feasible(probes)
        probes = probes[mask]
        if probes.shape[0] == 0:
            step *= 0.5
            continue
        ev = _evaluate(space, probes)
        feasible = ev.utility >= threshold
        best = None
        best_state = None
        order = np.lexsort(
            tuple(ev.params[:, j] for j in range(ev.params.shape[1] - 1, -1, -1))
        )
        for i in order:
            cand_state = (float(ev.privacy[i]), float(ev.utility[i]), bool(feasible[i]))
            if _better(cand_state, state, threshold) and (
                best is None or _better(cand_state, best_state, threshold)
            ):
                best = ev.params[i].copy()
                best_state = cand_state
        if best is None:
            step *= 0.5
        else:
            x, state = best, best_state
            moves += 1
    return x, state[0], state[1], state[2]


def _pattern_directions(dim: int) -> np.ndarray:
    """+-1 coordinate moves, plus all two-coordinate diagonals for small dims."""
    dirs = []
    for j in range(dim):
        for sgn in (1.0, -1.0):
            v = np.zeros(dim)
            v[j] = sgn
            dirs.append(v)
    if dim <= GRID_DIM_LIMIT:
        for j in range(dim):
            for jj in range(j + 1, dim):
                for s1 in (1.0, -1.0):
                    for s2 in (1.0, -1.0):
                        v = np.zeros(dim)
                        v[j], v[jj] = s1, s2
                        dirs.append(v)
    return np.stack(dirs) if dirs else np.zeros((0, dim))


def _random_starts(space: PolicySpace, count: int, seed: int) -> np.ndarray:
    """Uniform draws from each row's output simplex, seeded."""
    rng = np.random.default_rng(seed)
    out = np.zeros((count, space.dim))
    for idx, start, stop in space.free_slices:
        f = stop - start + 1
        draws = rng.dirichlet(np.ones(f), size=count)
        out[:, start:stop] = draws[:, :-1]
    return out


def optimize_policy(
    model: SourceModel,
    cfg: GuaranteeConfig,
    search: SearchConfig = SearchConfig(),
    extra_starts: Sequence[Sequence[float]] = (),
    _grid_eval: "_FamilyEval | None" = None,
) -> TradeoffPoint:
    """Find the kernel minimizing the privacy rate within the guarantee set.

    Exhaustive per-axis grid plus local pattern refinement for families with
    at most :data:`GRID_DIM_LIMIT` free parameters; seeded random multistart
    with coordinate descent above that.  ``extra_starts`` adds deterministic
    warm starts (e.g. a block-extended smaller-k optimum).  When no candidate
    passes the guarantee the least-violating kernel is returned with
    ``feasible=False``.

    The returned kernel is re-validated and its rates recomputed from
    scratch, independently of the search bookkeeping.
    """
    space = _grid_eval.space if _grid_eval is not None else policy_space(model, cfg.s, cfg.k)
    threshold = cfg.effective_threshold(model.prior)

    best_params: np.ndarray | None = None
    best_state: tuple[float, float, bool] | None = None

    def consider(params: np.ndarray, state: tuple[float, float, bool]) -> None:
        nonlocal best_params, best_state
        if best_state is None or _better(state, best_state, threshold):
            best_params, best_state = params, state
        elif (
            not _better(best_state, state, threshold)
            and tuple(params) < tuple(best_params)
        ):
            # exact tie: keep the lexicographically smallest parameter vector
            best_params, best_state = params, state

    if space.dim == 0:
        params = np.zeros(0)
        ev = _evaluate(space, params[None, :])
        consider(params, (float(ev.privacy[0]), float(ev.utility[0]),
                          bool(ev.utility[0] >= threshold)))
    elif space.dim <= GRID_DIM_LIMIT:
        grid_step = 1.0 / (search.grid_points_per_parameter - 1)
        if _grid_eval is not None:
            batches = [_grid_eval]
        else:
            batches = (
                _evaluate(space, chunk, tol=GRID_EVAL_TOL)
                for chunk in _grid_candidates(space, search.grid_points_per_parameter)
            )
        for ev in batches:
            params, priv, util, feas = _pick_best(ev, threshold)
            consider(params, (priv, util, feas))
        directions = _pattern_directions(space.dim)
        starts = [best_params] + [np.asarray(s, dtype=float) for s in extra_starts]
        for start in starts:
            refined, priv, util, feas = _local_refine(
                space, threshold, start, grid_step, search.local_step_tolerance, directions
            )
            consider(refined, (priv, util, feas))
    else:
        starts = list(np.asarray(s, dtype=float) for s in extra_starts)
        starts.extend(_random_starts(space, search.restarts, search.seed))
        directions = _pattern_directions(space.dim)
        for start in starts:
            refined, priv, util, feas = _local_refine(
                space, threshold, np.asarray(start), 0.25, search.local_step_tolerance,
                directions,
            )
            consider(refined, (priv, util, feas))

    kernel = space.kernel_from_params(best_params)
    report = validate_policy(kernel)
    if not report.ok:
        raise ValidationError("optimizer produced an invalid kernel: "
                              + "; ".join(report.violations[:3]))
    laws = induced_output_laws(model, kernel)
    check = guarantee_check(laws, cfg, model.prior)
    return TradeoffPoint(
        lam=cfg.lam,
        s=cfg.s,
        k=cfg.k,
        privacy_rate=privacy_objective(laws),
        utility_rate=check.utility_rate,
        kernel=kernel,
        feasible=bool(best_state[2]) and check.passed,
        params=tuple(float(v) for v in best_params),
        seed=search.seed,
    )


def grid_evaluation(
    model: SourceModel, cfg: GuaranteeConfig, search: SearchConfig
) -> "_FamilyEval | None":
    """Precompute the grid rates for a (model, s, k) family, for reuse across
    many lambda values.  Returns None when the family is not grid-searchable."""
    space = policy_space(model, cfg.s, cfg.k)
    if not 0 < space.dim <= GRID_DIM_LIMIT:
        return None
    chunks = list(_grid_candidates(space, search.grid_points_per_parameter))
    params = np.concatenate(chunks, axis=0)
    return _evaluate(space, params, tol=GRID_EVAL_TOL)


def tradeoff_sweep(
    model: SourceModel,
    lambdas: Sequence[float],
    s_values: Sequence[float],
    cfg_template: GuaranteeConfig = GuaranteeConfig(lam=0.0),
    search: SearchConfig = SearchConfig(),
) -> list[TradeoffPoint]:
    """One optimized point per (s, lambda) pair, in (s outer, lambda inner) order.

    Infeasible points are emitted with ``feasible=False`` rather than
    dropped.  Per-point seeds derive deterministically from the base seed and
    the pair's indices, so sweeps can be partitioned without changing
    results.  The family's grid rates are computed once per s and shared by
    every lambda.
    """
    points = []
    for s_idx, s in enumerate(s_values):
        cfg_s = replace(cfg_template, s=float(s))
        cache = grid_evaluation(model, cfg_s, search)
        for lam_idx, lam in enumerate(lambdas):
            cfg = replace(cfg_s, lam=float(lam))
            point_seed = int(search.seed) * 1_000_003 + lam_idx * 1009 + s_idx
            point = optimize_policy(
                model, cfg, replace(search, seed=point_seed), _grid_eval=cache
            )
            points.append(point)
    return points


@dataclass(frozen=True, eq=False)
class MonotonicityReport:
    """Comparison of optimized rates at block lengths k and n = k*l."""

    point_k: TradeoffPoint
    point_n: TradeoffPoint
    extended_rate: float
    extended_feasible: bool
    slack: float

    @property
    def holds(self) -> bool:
        return self.point_k.privacy_rate >= self.point_n.privacy_rate - self.slack


def monotonicity_check(
    model: SourceModel,
    cfg: GuaranteeConfig,
    l: int,
    search: SearchConfig = SearchConfig(),
    slack: float = 1e-3,
) -> MonotonicityReport:
    """Verify that the optimized rate cannot increase with the block length.

    Optimizes at block length k and at n = k*l (same lambda; the correction
    term, when enabled, shrinks with n).  The block-wise extension of the
    k-optimum is both a warm start for the n-level search and an explicit
    feasibility witness, so the check can only fail by more than float noise
    if the n-level search is broken.  The n-level search is heuristic, hence
    the default slack.
    """
    point_k = optimize_policy(model, cfg, search)
    extended = blockwise_extend(point_k.kernel, l)
    cfg_n = replace(cfg, k=cfg.k * l)

    ext_laws = induced_output_laws(model, extended)
    ext_rate = privacy_objective(ext_laws)
    ext_check = guarantee_check(ext_laws, cfg_n, model.prior)
    ext_ok = validate_policy(extended).ok and ext_check.passed

    space_n = policy_space(model, cfg_n.s, cfg_n.k)
    ext_params = space_n.params_from_kernel(extended)
    point_n = optimize_policy(
        model, cfg_n, search, extra_starts=[ext_params]
    )
    return MonotonicityReport(
        point_k=point_k,
        point_n=point_n,
        extended_rate=ext_rate,
        extended_feasible=ext_ok,
        slack=slack,
    )


def asymptotic_guarantee(
    model: SourceModel,
    cfg_template: GuaranteeConfig,
    k_max: int,
    search: SearchConfig = SearchConfig(),
) -> TradeoffPoint:
    """Best optimized point over block lengths 1..k_max.

    This is an UPPER BOUND on the asymptotic minimum privacy error exponent
    (the true value is an infimum over all block lengths, which no finite
    sweep can certify).  Each block length is warm-started with extensions
    of the optima found at its divisors, so the report is nonincreasing in
    ``k_max`` by construction.
    """
    if k_max < 1:
        raise ValidationError("k_max must be >= 1")
    best: TradeoffPoint | None = None
    found: dict[int, TradeoffPoint] = {}
    for k in range(1, k_max + 1):
        cfg = replace(cfg_template, k=k)
        extra = []
        for k0, point in found.items():
            if k % k0 == 0 and point.feasible and k != k0:
                space_k = policy_space(model, cfg.s, k)
                extended = blockwise_extend(point.kernel, k // k0)
                extra.append(space_k.params_from_kernel(extended))
        point = optimize_policy(model, cfg, search, extra_starts=extra)
        found[k] = point
        if best is None:
            best = point
        elif point.feasible and not best.feasible:
            best = point
        elif point.feasible == best.feasible and point.privacy_rate < best.privacy_rate:
            best = point
    return best
