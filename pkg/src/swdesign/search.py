"""Optimality criteria, cost-weighted design search, and sensitivity grids.

Three classical criteria summarize the treatment-effect covariance
``Lambda_q``: D (determinant), A (average diagonal) and E (maximum
diagonal).  The admissible-design objective trades the criterion against a
trial cost:

    w * (f - f_min) / (f_max - f_min) + (1 - w) * (g - g_min) / (g_max - g_min)

where ``f`` is the design cost, ``g`` the criterion value, and the min/max
scaling constants are taken over every identifiable design in the space.
Minimization runs over the designs that additionally meet the configured
power requirement; when none does, the search reports that no admissible
design exists and suggests the unconstrained criterion optimum instead.

The exhaustive search evaluates whole blocks of candidate allocation
matrices with batched linear algebra: within a ``(T, C, m)`` block every
candidate is a multiset of rows from a shared sequence pool, so its
information matrix is a count-weighted sum of per-sequence contributions and
thousands of candidates are reduced per matrix multiplication.  A
cross-entropy stochastic search covers spaces too large to enumerate.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .designspace import DesignSpace, enumerate_sequences
from .inference import (
    PowerReport,
    PowerSpec,
    critical_value,
    mvn_upper_orthant,
    power_report,
)
from .model import (
    RANK_RTOL,
    CovarianceSummary,
    Design,
    VarianceComponents,
    sequence_contributions,
    treatment_covariance,
)

__all__ = [
    "Criterion",
    "Doptimal",
    "Aoptimal",
    "Eoptimal",
    "criterion_from_name",
    "Objective",
    "SearchResult",
    "CEParams",
    "CandidateCapExceeded",
    "SearchFailure",
    "criterion_value",
    "total_observations",
    "evaluate_design",
    "exhaustive_search",
    "cross_entropy_search",
    "GridSpec",
    "SensitivityResult",
    "sensitivity_map",
    "variance_ratio_map",
]

#: Number of candidate allocation matrices evaluated per batch.
_CHUNK = 200_000

#: Relative tolerance under which two criterion (or objective) values are
#: treated as tied.  Symmetric allocation matrices can attain exactly equal
#: criterion values in exact arithmetic while differing in the last floating
#: point digit; without a tolerance the winner among them would be decided
#: by rounding noise rather than by the documented cost/row tie-break.
_TIE_RTOL = 1e-9


def _tie_close(x: float, y: float) -> bool:
    """Whether two nonnegative champion values count as a tie."""
    return abs(x - y) <= _TIE_RTOL * max(abs(x), abs(y))


class CandidateCapExceeded(RuntimeError):
    """The exhaustive space exceeds the candidate budget.

    Use the cross-entropy search for spaces of this size.
    """


class SearchFailure(RuntimeError):
    """The stochastic search never sampled an identifiable candidate."""


class Criterion:
    """Base class for optimality criteria over ``Lambda_q``."""

    name: str = ""

    def value(self, Lambda_q: np.ndarray) -> float:
        raise NotImplementedError

    def batch(self, Lambda_q: np.ndarray, diag: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Doptimal(Criterion):
    """Minimize ``det(Lambda_q)``."""

    name: str = field(default="D", init=False)

    def value(self, Lambda_q):
        return float(np.linalg.det(Lambda_q))

    def batch(self, Lambda_q, diag):
        return np.linalg.det(Lambda_q)


@dataclass(frozen=True)
class Aoptimal(Criterion):
    """Minimize ``tr(Lambda_q) / q``."""

    name: str = field(default="A", init=False)

    def value(self, Lambda_q):
        return float(np.trace(Lambda_q) / Lambda_q.shape[0])

    def batch(self, Lambda_q, diag):
        return diag.mean(axis=1)


@dataclass(frozen=True)
class Eoptimal(Criterion):
    """Minimize the largest diagonal entry of ``Lambda_q``."""

    name: str = field(default="E", init=False)

    def value(self, Lambda_q):
        return float(np.diag(Lambda_q).max())

    def batch(self, Lambda_q, diag):
        return diag.max(axis=1)


_CRITERIA = {"D": Doptimal, "A": Aoptimal, "E": Eoptimal}


def criterion_from_name(name: str) -> Criterion:
    """Look up a criterion by its one-letter name."""
    try:
        return _CRITERIA[name.upper()]()
    except KeyError:
        raise ValueError(
            f"unknown criterion {name!r}; expected one of D, A, E"
        ) from None


def total_observations(design: Design) -> float:
    """Default trial cost: the total number of observations ``m * C * T``."""
    return float(design.m * design.C * design.T)


@dataclass(frozen=True)
class Objective:
    """Cost-weighted search objective.

    Attributes
    ----------
    w : float
        Cost weight in [0, 1]; ``w = 0`` optimizes the criterion alone.
        ``w = 1`` ignores the criterion entirely and is rarely useful; it is
        permitted with a warning.
    criterion : Criterion
        D-, A- or E-optimality.
    cost_fn : callable
        Cost function over designs.  Must depend on the design only through
        ``(m, C, T)``; only :func:`total_observations` ships.
    """

    w: float
    criterion: Criterion
    cost_fn: object = total_observations

    def __post_init__(self):
        if not 0 <= self.w <= 1:
            raise ValueError(f"w must lie in [0, 1], got {self.w}")
        if self.w == 1:
            warnings.warn(
                "w = 1 ignores the optimality criterion entirely; the result "
                "is simply a cheapest power-feasible design",
                stacklevel=3,
            )


@dataclass(frozen=True)
class SearchResult:
    """Outcome of a design search.

    Attributes
    ----------
    best : Design or None
        Winning design in canonical (row-sorted) form; for a
        no-admissible-design outcome, the unconstrained criterion optimum
        offered as a suggestion (None when nothing was identifiable).
    criterion_value : float
        Criterion value of ``best``.
    cost : float
        Cost of ``best``.
    objective_value : float
        Scaled objective of ``best`` (0 when scaling is degenerate).
    power : PowerReport or None
        Power evaluation of ``best``.
    scaling : dict
        Min/max of cost and criterion used in the objective (exhaustive
        searches only; empty for stochastic searches).
    n_evaluated : int
        Candidates evaluated.
    n_feasible : int
        Candidates that were identifiable and met the power requirement.
    status : str
        ``'ok'`` or ``'no-admissible-design'``.
    """

    best: Design | None
    criterion_value: float
    cost: float
    objective_value: float
    power: PowerReport | None
    scaling: dict
    n_evaluated: int
    n_feasible: int
    status: str = "ok"


@dataclass(frozen=True)
class CEParams:
    """Hyperparameters of the cross-entropy search.

    The defaults (population 1000, elite fraction 0.1, smoothing 0.7, at
    most 200 iterations, stopping after 20 non-improving ones) match common
    cross-entropy practice; a population of at least ten times the sequence
    pool size is recommended.
    """

    population_size: int = 1000
    elite_fraction: float = 0.1
    smoothing: float = 0.7
    max_iterations: int = 200
    stall_limit: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if not 0 < self.elite_fraction < 1:
            raise ValueError("elite_fraction must lie in (0, 1)")
        if not 0 < self.smoothing <= 1:
            raise ValueError("smoothing must lie in (0, 1]")


def criterion_value(summary: CovarianceSummary, criterion: Criterion) -> float:
    """Scalar criterion value of a covariance summary."""
    Lambda_q = np.asarray(summary.Lambda_q, dtype=float)
    vals = np.linalg.eigvalsh(0.5 * (Lambda_q + Lambda_q.T))
    if vals[0] <= 0:
        raise ValueError("Lambda_q must be symmetric positive definite")
    return criterion.value(Lambda_q)


def evaluate_design(
    design: Design,
    vc: VarianceComponents,
    spec: PowerSpec | None = None,
    seed: int = 0,
) -> dict:
    """Full report for one design: criteria values, cost and power."""
    summary = treatment_covariance(design, vc)
    out = {
        "design": design.canonical(),
        "cost": total_observations(design),
        "D": criterion_value(summary, Doptimal()),
        "A": criterion_value(summary, Aoptimal()),
        "E": criterion_value(summary, Eoptimal()),
        "Lambda_q": summary.Lambda_q,
    }
    if spec is not None:
        out["power"] = power_report(summary, spec, seed)
    return out


# ---------------------------------------------------------------------------
# Exhaustive search
# ---------------------------------------------------------------------------


def _combo_counts(
    seqs: list, C: int, start: int, stop: int, equal_alloc: bool
):
    """Count matrix of multiset candidates ``start..stop`` of a block.

    Returns ``(counts, keep_index)`` where ``counts`` is a
    ``k x len(seqs)`` float matrix of row multiplicities and ``keep_index``
    maps its rows back to positions in the full lexicographic combination
    stream (after the equal-allocation filter, when active).
    """
    n = len(seqs)
    combos = itertools.islice(
        itertools.combinations_with_replacement(range(n), C), start, stop
    )
    idx = np.fromiter(
        itertools.chain.from_iterable(combos), dtype=np.int64
    ).reshape(-1, C)
    k = idx.shape[0]
    counts = np.zeros((k, n))
    np.add.at(counts, (np.repeat(np.arange(k), C), idx.ravel()), 1.0)
    if equal_alloc:
        used = counts > 0
        mx = counts.max(axis=1, keepdims=True)
        keep = ((counts == mx) | ~used).all(axis=1)
        counts = counts[keep]
        keep_index = np.nonzero(keep)[0] + start
    else:
        keep_index = np.arange(start, k + start)
    return counts, keep_index


def _counts_to_rows(counts_row: np.ndarray, seqs: list) -> tuple:
    """Canonical (sorted) rows of the design encoded by one count vector."""
    rows = []
    for s, c in zip(seqs, counts_row):
        rows.extend([tuple(s)] * int(round(c)))
    return tuple(rows)


def _scan_chunk(job: dict) -> dict:
    """Evaluate one chunk of a block; pure function of its arguments.

    Returns extrema of cost/criterion over identifiable candidates, the
    feasible champion of the chunk (minimal criterion, or lexicographically
    smallest when ``tie_mode='lex'``), the unconstrained champion, and
    counts.  The reduction over chunk results is associative and
    commutative, so parallel execution order cannot affect the outcome.
    """
    seqs = job["seqs"]
    C, T, m, D = job["C"], job["T"], job["m"], job["D"]
    vc = VarianceComponents(*job["vc"])
    q = D - 1
    counts, _ = _combo_counts(
        seqs, C, job["start"], job["stop"], job["equal_alloc"]
    )
    out = {
        "n_evaluated": counts.shape[0],
        "n_feasible": 0,
        "extrema": None,
        "champion": None,
        "unconstrained": None,
    }
    if counts.shape[0] == 0:
        return out
    contribs = sequence_contributions(seqs, m, T, D, vc)
    p = contribs.shape[1]
    M = (counts @ contribs.reshape(len(seqs), -1)).reshape(-1, p, p)
    eigvals = np.linalg.eigvalsh(M)
    ident = eigvals[:, 0] > eigvals[:, -1] * RANK_RTOL
    if not ident.any():
        return out
    Lambda = np.linalg.inv(M[ident])[:, :q, :q]
    diag = np.diagonal(Lambda, axis1=1, axis2=2)
    crit = criterion_from_name(job["criterion"]).batch(Lambda, diag)
    cost = float(job["cost"])
    out["extrema"] = (cost, cost, float(crit.min()), float(crit.max()))

    delta = np.asarray(job["delta"], dtype=float)
    beta = job["beta"]
    if beta >= 1.0:
        feasible = np.ones(crit.shape[0], dtype=bool)
    else:
        from scipy.stats import norm

        per = norm.cdf(delta[None, :] / np.sqrt(diag) - job["e"])
        feasible = per.min(axis=1) >= 1.0 - beta
        if job["power_type"] == "combined":
            for i in np.nonzero(~feasible)[0]:
                sd = np.sqrt(diag[i])
                corr = Lambda[i] / np.outer(sd, sd)
                np.fill_diagonal(corr, 1.0)
                none_reject = mvn_upper_orthant(
                    np.full(q, job["e"]),
                    delta / sd,
                    corr,
                    job["seed"],
                )
                feasible[i] = 1.0 - none_reject >= 1.0 - beta
    out["n_feasible"] = int(feasible.sum())

    ident_counts = counts[ident]

    def pick(mask, by_crit):
        if not mask.any():
            return None
        if by_crit:
            vals = np.where(mask, crit, np.inf)
            cmin = float(vals.min())
            tied = np.nonzero(vals <= cmin + _TIE_RTOL * cmin)[0]
            j = min(
                (int(t) for t in tied),
                key=lambda t: _counts_to_rows(ident_counts[t], seqs),
            )
        else:
            j = int(np.nonzero(mask)[0][0])
        rows = _counts_to_rows(ident_counts[j], seqs)
        return (float(crit[j]), cost, (m, C, T), rows)

    out["champion"] = pick(feasible, job["tie_mode"] == "crit")
    out["unconstrained"] = pick(
        np.ones(crit.shape[0], dtype=bool), True
    )
    return out


def _better(a, b):
    """Deterministic champion preference: criterion, then cost, then rows.

    Criterion values within ``_TIE_RTOL`` of one another count as equal, so
    designs that tie in exact arithmetic fall through to the cost and row
    comparisons rather than being ordered by floating point noise.
    """
    if a is None:
        return b
    if b is None:
        return a
    if not _tie_close(a[0], b[0]):
        return a if a[0] < b[0] else b
    if a[1] != b[1]:
        return a if a[1] < b[1] else b
    return a if a[3] <= b[3] else b


def exhaustive_search(
    space: DesignSpace,
    vc: VarianceComponents,
    spec: PowerSpec,
    objective: Objective,
    workers: int = 1,
    candidate_cap: int = 10**8,
    seed: int = 0,
    progress=None,
) -> SearchResult:
    """Find the admissible design of a space by complete enumeration.

    Every candidate allocation matrix is evaluated; identifiable candidates
    establish the cost/criterion scaling constants, power-feasible ones
    compete on the scaled objective.  Objective values within a small
    relative tolerance count as tied; ties are broken by lower cost, then by
    the lexicographically smallest canonical allocation matrix, so the
    result is independent of ``workers`` and of rounding noise among
    symmetric, mathematically equivalent optima.

    Parameters
    ----------
    workers : int
        Process count for parallel chunk evaluation.
    candidate_cap : int
        Upper bound on the number of candidates; exceeding it raises
        :class:`CandidateCapExceeded` pointing to the stochastic search.
    seed : int
        Seed for power integrals.
    progress : callable, optional
        Invoked as ``progress(n_evaluated, best_criterion_so_far)`` after
        each chunk.

    Returns
    -------
    SearchResult
        With ``status='no-admissible-design'`` when no candidate meets the
        power requirement; ``best`` then holds the unconstrained criterion
        optimum as a suggestion.
    """
    from math import comb

    blocks = []
    total = 0
    for T, C, m in space.blocks():
        seqs = enumerate_sequences(T, space.D, space.restrictions)
        if not seqs:
            continue
        n_combos = comb(len(seqs) + C - 1, C)
        total += n_combos
        blocks.append((T, C, m, seqs, n_combos))
    if total > candidate_cap:
        raise CandidateCapExceeded(
            f"space holds {total} candidates, above the cap of "
            f"{candidate_cap}; use the cross-entropy search for spaces of "
            "this size"
        )

    q = space.D - 1
    if spec.beta < 1 and spec.q != q:
        raise ValueError(
            f"delta has length {spec.q} but the space has q={q}"
        )
    e = critical_value(spec.alpha, q, spec.correction) if spec.beta < 1 else 0.0
    tie_mode = "lex" if objective.w == 1 else "crit"

    jobs = []
    for T, C, m, seqs, n_combos in blocks:
        cost = objective.cost_fn(Design(m, C, T, np.tile(0, (C, T)), space.D))
        for start in range(0, n_combos, _CHUNK):
            jobs.append(
                {
                    "seqs": seqs,
                    "C": C,
                    "T": T,
                    "m": m,
                    "D": space.D,
                    "vc": vc.as_tuple(),
                    "start": start,
                    "stop": min(start + _CHUNK, n_combos),
                    "equal_alloc": space.requires_equal_allocation(),
                    "criterion": objective.criterion.name,
                    "cost": cost,
                    "delta": tuple(spec.delta),
                    "beta": spec.beta,
                    "e": e,
                    "power_type": spec.power_type,
                    "seed": seed,
                    "tie_mode": tie_mode,
                }
            )

    n_evaluated = 0
    n_feasible = 0
    fmin = gmin = np.inf
    fmax = gmax = -np.inf
    champions: dict[float, tuple] = {}
    unconstrained = None

    def absorb(res):
        nonlocal n_evaluated, n_feasible, fmin, fmax, gmin, gmax, unconstrained
        n_evaluated += res["n_evaluated"]
        n_feasible += res["n_feasible"]
        if res["extrema"] is not None:
            f_lo, f_hi, g_lo, g_hi = res["extrema"]
            fmin, fmax = min(fmin, f_lo), max(fmax, f_hi)
            gmin, gmax = min(gmin, g_lo), max(gmax, g_hi)
        ch = res["champion"]
        if ch is not None:
            champions[ch[1]] = _better(champions.get(ch[1]), ch)
        unconstrained = _better(unconstrained, res["unconstrained"])
        if progress is not None:
            best = min(
                (c[0] for c in champions.values()), default=float("nan")
            )
            progress(n_evaluated, best)

    if workers <= 1:
        for job in jobs:
            absorb(_scan_chunk(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_scan_chunk, jobs, chunksize=1):
                absorb(res)

    scaling = {
        "cost_min": fmin,
        "cost_max": fmax,
        "criterion_min": gmin,
        "criterion_max": gmax,
    }

    def scaled_objective(cost, crit):
        f_term = 0.0 if fmax <= fmin else (cost - fmin) / (fmax - fmin)
        g_term = 0.0 if gmax <= gmin else (crit - gmin) / (gmax - gmin)
        return objective.w * f_term + (1.0 - objective.w) * g_term

    def finish(record, status):
        crit, cost, (m, C, T), rows = record
        design = Design(m, C, T, np.array(rows, dtype=int), space.D)
        power = (
            power_report(treatment_covariance(design, vc), spec, seed)
            if spec.delta.size == q
            else None
        )
        return SearchResult(
            best=design,
            criterion_value=crit,
            cost=cost,
            objective_value=scaled_objective(cost, crit),
            power=power,
            scaling=scaling,
            n_evaluated=n_evaluated,
            n_feasible=n_feasible,
            status=status,
        )

    if not champions:
        if unconstrained is None:
            return SearchResult(
                best=None,
                criterion_value=float("nan"),
                cost=float("nan"),
                objective_value=float("nan"),
                power=None,
                scaling=scaling,
                n_evaluated=n_evaluated,
                n_feasible=0,
                status="no-admissible-design",
            )
        return finish(unconstrained, "no-admissible-design")

    winner = None
    winner_obj = np.inf
    for record in champions.values():
        obj = scaled_objective(record[1], record[0])
        if (
            winner is None
            or (not _tie_close(obj, winner_obj) and obj < winner_obj)
            or (
                _tie_close(obj, winner_obj)
                and (record[1], record[3]) < (winner[1], winner[3])
            )
        ):
            winner, winner_obj = record, obj
    return finish(winner, "ok")


# ---------------------------------------------------------------------------
# Cross-entropy stochastic search
# ---------------------------------------------------------------------------


def cross_entropy_search(
    C: int,
    T: int,
    m: int,
    D: int,
    restrictions,
    vc: VarianceComponents,
    objective: Objective,
    spec: PowerSpec,
    params: CEParams | None = None,
) -> SearchResult:
    """Stochastic criterion optimization over allocation matrices.

    With ``(m, C, T)`` fixed, candidates are sampled row by row from
    per-cluster categorical distributions over the admissible sequence
    pool.  Each iteration keeps the best ``elite_fraction`` of the
    power-feasible samples by raw criterion value and refits the
    categoricals toward the elite frequencies with exponential smoothing.
    No cost rescaling is applied: with the size fixed, every candidate has
    the same cost.  Deterministic for a fixed ``params.seed``.
    """
    params = params or CEParams()
    seqs = enumerate_sequences(T, D, restrictions)
    if not seqs:
        raise SearchFailure(
            "the restrictions admit no sequences at this (T, D)"
        )
    n = len(seqs)
    q = D - 1
    contribs = sequence_contributions(seqs, m, T, D, vc)
    p = contribs.shape[1]
    flat = contribs.reshape(n, -1)
    e = critical_value(spec.alpha, q, spec.correction) if spec.beta < 1 else 0.0
    rng = np.random.default_rng(params.seed)
    probs = np.full((C, n), 1.0 / n)
    n_elite = max(1, int(round(params.elite_fraction * params.population_size)))

    best = None  # (crit, canonical rows)
    sampled_identifiable = False
    best_unconstrained = None
    stall = 0
    n_evaluated = 0
    from scipy.stats import norm

    for _ in range(params.max_iterations):
        u = rng.random((params.population_size, C))
        cdf = probs.cumsum(axis=1)
        idx = (u[:, :, None] > cdf[None, :, :]).sum(axis=2)
        n_evaluated += params.population_size
        counts = np.zeros((params.population_size, n))
        np.add.at(
            counts,
            (
                np.repeat(np.arange(params.population_size), C),
                idx.ravel(),
            ),
            1.0,
        )
        M = (counts @ flat).reshape(-1, p, p)
        eigvals = np.linalg.eigvalsh(M)
        ident = eigvals[:, 0] > eigvals[:, -1] * RANK_RTOL
        score = np.full(params.population_size, np.inf)
        if ident.any():
            sampled_identifiable = True
            Lambda = np.linalg.inv(M[ident])[:, :q, :q]
            diag = np.diagonal(Lambda, axis1=1, axis2=2)
            crit = objective.criterion.batch(Lambda, diag)
            raw = np.full(params.population_size, np.inf)
            raw[ident] = crit
            if spec.beta >= 1.0:
                feasible = ident.copy()
            else:
                per = norm.cdf(spec.delta[None, :] / np.sqrt(diag) - e)
                ok = per.min(axis=1) >= 1.0 - spec.beta
                feasible = np.zeros_like(ident)
                feasible[ident] = ok
            score[feasible] = raw[feasible]
            un_j = int(np.argmin(raw))
            if np.isfinite(raw[un_j]):
                cand = (
                    float(raw[un_j]),
                    tuple(sorted(tuple(seqs[k]) for k in idx[un_j])),
                )
                if best_unconstrained is None or cand < best_unconstrained:
                    best_unconstrained = cand
        order = np.argsort(score, kind="stable")
        elite = order[: n_elite][np.isfinite(score[order[:n_elite]])]
        improved = False
        if elite.size:
            j = int(elite[0])
            cand = (
                float(score[j]),
                tuple(sorted(tuple(seqs[k]) for k in idx[j])),
            )
            if best is None or cand < best:
                best = cand
                improved = True
            freq = np.zeros((C, n))
            rows = np.arange(C)
            for jj in elite:
                freq[rows, idx[jj]] += 1.0
            freq /= elite.size
            probs = params.smoothing * freq + (1 - params.smoothing) * probs
        stall = 0 if improved else stall + 1
        if stall >= params.stall_limit:
            break

    if best is None and not sampled_identifiable:
        raise SearchFailure(
            "no identifiable candidate was ever sampled; increase the "
            "population size"
        )

    record = best if best is not None else best_unconstrained
    status = "ok" if best is not None else "no-admissible-design"
    design = Design(m, C, T, np.array(record[1], dtype=int), D)
    summary = treatment_covariance(design, vc)
    power = (
        power_report(summary, spec, params.seed)
        if spec.delta.size == q
        else None
    )
    return SearchResult(
        best=design,
        criterion_value=record[0]
        if status == "ok"
        else criterion_value(summary, objective.criterion),
        cost=objective.cost_fn(design),
        objective_value=record[0],
        power=power,
        scaling={},
        n_evaluated=n_evaluated,
        n_feasible=-1,
        status=status,
    )


# ---------------------------------------------------------------------------
# Sensitivity grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Equally spaced grid over cluster and residual variances."""

    sigma2_c_range: tuple[float, float] = (0.001, 0.25)
    sigma2_eps_range: tuple[float, float] = (0.25, 4.0)
    steps: int = 26

    def points(self):
        xs = np.linspace(*self.sigma2_c_range, self.steps)
        ys = np.linspace(*self.sigma2_eps_range, self.steps)
        return xs, ys


@dataclass(frozen=True)
class SensitivityResult:
    """Optimal design at each grid point.

    Attributes
    ----------
    sigma2_c_values, sigma2_eps_values : numpy.ndarray
        Grid axes.
    design_ids : numpy.ndarray
        ``steps x steps`` array of design identifiers, indexed
        ``[i_sigma2_c, j_sigma2_eps]``.
    criterion_values : numpy.ndarray
        Criterion value of the optimum at each point.
    designs : dict
        Map identifier -> canonical Design, in discovery order.
    """

    sigma2_c_values: np.ndarray
    sigma2_eps_values: np.ndarray
    design_ids: np.ndarray
    criterion_values: np.ndarray
    designs: dict


def sensitivity_map(
    grid: GridSpec,
    space: DesignSpace,
    objective: Objective,
    spec: PowerSpec,
    workers: int = 1,
    seed: int = 0,
) -> SensitivityResult:
    """Optimal design across a grid of cross-sectional variance settings.

    At each grid point the marginal model uses ``(sigma2_c, sigma2_eps)``
    with no period or individual effects, and the configured search (most
    usefully ``w = 0`` with ``beta = 1``) runs from scratch.  Recurring
    winners are interned so the map stores compact identifiers.
    """
    xs, ys = grid.points()
    ids = np.empty((xs.size, ys.size), dtype=object)
    crit = np.empty((xs.size, ys.size))
    designs: dict[str, Design] = {}
    keys: dict[tuple, str] = {}
    for i, sc2 in enumerate(xs):
        for j, se2 in enumerate(ys):
            vc = VarianceComponents(sigma2_c=sc2, sigma2_eps=se2)
            res = exhaustive_search(
                space, vc, spec, objective, workers=workers, seed=seed
            )
            if res.best is None:
                raise SearchFailure(
                    f"no identifiable design at sigma2_c={sc2}, "
                    f"sigma2_eps={se2}"
                )
            key = (res.best.m, res.best.C, res.best.T, res.best.sequences())
            if key not in keys:
                keys[key] = f"design-{len(keys) + 1}"
                designs[keys[key]] = res.best
            ids[i, j] = keys[key]
            crit[i, j] = res.criterion_value
    return SensitivityResult(
        sigma2_c_values=xs,
        sigma2_eps_values=ys,
        design_ids=ids,
        criterion_values=crit,
        designs=designs,
    )


def variance_ratio_map(
    X,
    grid: GridSpec,
    space: DesignSpace,
    objective: Objective,
    spec: PowerSpec,
    m: int | None = None,
    workers: int = 1,
    seed: int = 0,
) -> np.ndarray:
    """Variance inflation of a fixed design relative to the per-point optimum.

    At each grid point, the ratio of ``var(beta_1_hat)`` under the supplied
    allocation matrix to that of the point's optimal design.  Ratios are
    at least one up to numerical tolerance wherever the supplied design lies
    in the searched space.
    """
    X = np.asarray(X, dtype=int)
    xs, ys = grid.points()
    if m is None:
        T = X.shape[1]
        C = X.shape[0]
        m = sorted(space.M_sets[(C, T)])[0]
    fixed = Design(m, X.shape[0], X.shape[1], X, space.D)
    out = np.empty((xs.size, ys.size))
    for i, sc2 in enumerate(xs):
        for j, se2 in enumerate(ys):
            vc = VarianceComponents(sigma2_c=sc2, sigma2_eps=se2)
            res = exhaustive_search(
                space, vc, spec, objective, workers=workers, seed=seed
            )
            opt_var = treatment_covariance(res.best, vc).Lambda_q[0, 0]
            fix_var = treatment_covariance(fixed, vc).Lambda_q[0, 0]
            out[i, j] = fix_var / opt_var
    return out
