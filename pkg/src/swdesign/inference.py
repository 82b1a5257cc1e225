"""Critical values, per-hypothesis power, combined power.

The trial tests the one-sided superiority hypotheses ``H_0f: beta_f <= 0``
for ``f = 1..q`` using Wald statistics ``Z_f = beta_f_hat * I_f^(1/2)``,
rejecting when ``Z_f > e``.  The familywise error rate is controlled either
per-hypothesis (``correction='none'``) or via Bonferroni.  Individual power
is the smallest per-hypothesis rejection probability at the clinically
relevant differences ``delta``; combined power is the probability of
rejecting at least one hypothesis, a multivariate normal orthant probability
evaluated by randomized quasi-Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc

__all__ = [
    "PowerSpec",
    "PowerReport",
    "critical_value",
    "per_hypothesis_power",
    "mvn_upper_orthant",
    "power_report",
]

#: Number of randomized replicates and points per replicate for the
#: quasi-Monte Carlo multivariate normal integral.
_MVN_REPLICATES = 8
_MVN_LOG2_POINTS = 13


@dataclass(frozen=True)
class PowerSpec:
    """Error rates and effect sizes for power evaluation.

    Attributes
    ----------
    alpha : float
        One-sided familywise significance level, in (0, 1).
    correction : str
        ``'none'`` or ``'bonferroni'``.
    beta : float
        Type-II error requirement in (0, 1]; ``beta = 1`` is the sentinel
        for "ignore power" searches.
    delta : numpy.ndarray
        Length-``q`` positive clinically relevant differences.
    power_type : str
        ``'individual'`` (reject every false null) or ``'combined'``
        (reject at least one) for the feasibility requirement.
    """

    alpha: float
    correction: str = "bonferroni"
    beta: float = 0.2
    delta: np.ndarray = None
    power_type: str = "individual"

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.correction not in ("none", "bonferroni"):
            raise ValueError(f"unknown correction {self.correction!r}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.power_type not in ("individual", "combined"):
            raise ValueError(f"unknown power_type {self.power_type!r}")
        delta = np.asarray(
            [] if self.delta is None else self.delta, dtype=float
        )
        object.__setattr__(self, "delta", delta)
        if delta.size and delta.min() <= 0:
            raise ValueError("delta entries must be positive")

    @property
    def q(self) -> int:
        return self.delta.size


@dataclass(frozen=True)
class PowerReport:
    """Rejection probabilities of a design at the specified effects.

    Attributes
    ----------
    critical_value : float
        Common rejection threshold ``e`` for the Wald statistics.
    per_hypothesis : numpy.ndarray
        Length-``q`` probabilities of rejecting each hypothesis at ``delta``.
    combined : float
        Probability of rejecting at least one hypothesis at ``delta``.
    meets_requirement : bool
        Whether the configured power type reaches ``1 - beta``.
    """

    critical_value: float
    per_hypothesis: np.ndarray
    combined: float
    meets_requirement: bool

    @property
    def individual(self) -> float:
        """Smallest per-hypothesis rejection probability."""
        return float(self.per_hypothesis.min())


def critical_value(alpha: float, q: int, correction: str = "none") -> float:
    """Upper-tail standard normal quantile controlling the error rate.

    Returns ``e`` with upper-tail probability ``alpha`` (``correction='none'``)
    or ``alpha / q`` (``correction='bonferroni'``).
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if correction == "none":
        tail = alpha
    elif correction == "bonferroni":
        tail = alpha / q
    else:
        raise ValueError(f"unknown correction {correction!r}")
    e = norm.isf(tail)
    if not np.isfinite(e):
        raise ValueError(f"tail probability {tail} underflows the quantile")
    return float(e)


def per_hypothesis_power(delta_f: float, info_f: float, e: float) -> float:
    """Probability of rejecting one hypothesis at effect ``delta_f``.

    ``P(Z_f > e) = Phi(delta_f * sqrt(info_f) - e)`` when the true effect
    is ``delta_f`` and the estimator variance is ``1 / info_f``.
    """
    if info_f <= 0:
        raise ValueError(f"info_f must be positive, got {info_f}")
    return float(norm.cdf(delta_f * np.sqrt(info_f) - e))


def _corr_cholesky(corr: np.ndarray) -> np.ndarray:
    """Cholesky factor of a correlation matrix, tolerating semidefiniteness."""
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError("corr must be square")
    if not np.allclose(corr, corr.T, atol=1e-10):
        raise ValueError("corr must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-8):
        raise ValueError("corr must have unit diagonal")
    vals = np.linalg.eigvalsh(corr)
    if vals[0] < -1e-10:
        raise ValueError("corr must be positive semidefinite")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        jitter = max(1e-12, -vals[0] * 2 + 1e-12)
        return np.linalg.cholesky(corr + jitter * np.eye(corr.shape[0]))


def _mvn_upper_orthant_with_error(
    limits, mean, corr, seed: int
) -> tuple[float, float]:
    """Quasi-Monte Carlo lower-orthant probability with an error estimate.

    Sequential-conditioning estimator on a scrambled Sobol point set.  The
    spread over independently scrambled replicates gives the error estimate
    (three standard errors).
    """
    limits = np.asarray(limits, dtype=float)
    mean = np.asarray(mean, dtype=float)
    q = limits.size
    b = limits - mean
    if q == 1:
        return float(norm.cdf(b[0])), 0.0
    L = _corr_cholesky(corr)
    # Condition on variables in increasing order of marginal probability;
    # a deterministic ordering keeps results reproducible.
    order = np.argsort(b)
    b = b[order]
    corr = np.asarray(corr, dtype=float)
    L = _corr_cholesky(corr[np.ix_(order, order)])
    rng = np.random.default_rng(seed)
    estimates = np.empty(_MVN_REPLICATES)
    n = 2**_MVN_LOG2_POINTS
    tiny = 1e-15
    for r in range(_MVN_REPLICATES):
        sob = qmc.Sobol(d=q - 1, scramble=True, seed=rng)
        w = sob.random(n)
        cond = np.full(n, norm.cdf(b[0] / L[0, 0]))
        prob = cond.copy()
        y = np.empty((n, q - 1))
        for i in range(1, q):
            y[:, i - 1] = norm.ppf(
                np.clip(w[:, i - 1] * cond, tiny, 1 - tiny)
            )
            cond = norm.cdf((b[i] - y[:, :i] @ L[i, :i]) / L[i, i])
            prob *= cond
        estimates[r] = prob.mean()
    value = float(estimates.mean())
    err = float(3.0 * estimates.std(ddof=1) / np.sqrt(_MVN_REPLICATES))
    return value, err


def mvn_upper_orthant(limits, mean, corr, seed: int = 0) -> float:
    """``P(Y_f <= limits_f for all f)`` for ``Y ~ N(mean, corr)``.

    Deterministic for a fixed ``seed``; randomized quasi-Monte Carlo with
    absolute error well below 1e-5 for ``q <= 4``.  ``q`` up to 10 is
    supported.
    """
    limits = np.asarray(limits, dtype=float)
    if limits.size > 10:
        raise ValueError("dimension q must be <= 10")
    value, _ = _mvn_upper_orthant_with_error(limits, mean, corr, seed)
    return min(max(value, 0.0), 1.0)


def power_report(summary, spec: PowerSpec, seed: int = 0) -> PowerReport:
    """Full power evaluation of a design's covariance summary.

    Parameters
    ----------
    summary : CovarianceSummary
        Treatment-effect covariance and information levels.
    spec : PowerSpec
        Error rates and effect sizes; ``len(spec.delta)`` must equal
        ``summary.q``.
    seed : int
        Seed for the combined-power integral.
    """
    if spec.q != summary.q:
        raise ValueError(
            f"delta has length {spec.q} but the design has q={summary.q}"
        )
    e = critical_value(spec.alpha, summary.q, spec.correction)
    info = np.asarray(summary.info, dtype=float)
    per = norm.cdf(spec.delta * np.sqrt(info) - e)
    if summary.q == 1:
        combined = float(per[0])
    else:
        sd = np.sqrt(np.diag(summary.Lambda_q))
        corr = summary.Lambda_q / np.outer(sd, sd)
        # Analytically the diagonal is one; renormalize to absorb rounding.
        np.fill_diagonal(corr, 1.0)
        corr = 0.5 * (corr + corr.T)
        none_reject = mvn_upper_orthant(
            np.full(summary.q, e), spec.delta * np.sqrt(info), corr, seed
        )
        combined = 1.0 - none_reject
    achieved = per.min() if spec.power_type == "individual" else combined
    meets = bool(spec.beta >= 1.0 or achieved >= 1.0 - spec.beta)
    return PowerReport(
        critical_value=e,
        per_hypothesis=per,
        combined=combined,
        meets_requirement=meets,
    )
