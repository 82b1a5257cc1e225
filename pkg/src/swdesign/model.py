"""Linear mixed model matrices and treatment-effect covariance.

A multi-arm stepped-wedge trial observes ``m`` individuals in each of ``C``
clusters during each of ``T`` periods.  The outcome of individual ``k`` in
cluster ``i`` during period ``j`` is modelled as

    y_ijk = mu + pi_j + sum_d beta_d * 1{X_ij >= d} + c_i + theta_ij + s_ik + eps_ijk

where ``X`` is the C x T allocation matrix with entries in ``{0, ..., D-1}``,
``c_i`` is a cluster random effect, ``theta_ij`` a cluster-period effect,
``s_ik`` an individual effect (cohort studies) and ``eps_ijk`` residual noise.
The quantities of design interest are the generalized-least-squares covariance
``Lambda`` of the fixed-effect estimators and in particular its leading
``q x q`` block for the ``q = D - 1`` treatment effects.

Because the covariates are constant within a cluster-period cell, the
cluster-period means are sufficient for the fixed effects: each cluster's
information contribution reduces to ``B^T S^-1 B`` where ``B`` is the T x p
cell-level design block of the cluster's treatment sequence and ``S`` is the
T x T compound-symmetric covariance of the cluster-period means.  This module
exploits that reduction so a search over millions of allocation matrices never
touches an (mT) x (mT) matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "Design",
    "VarianceComponents",
    "ModelMatrices",
    "CovarianceSummary",
    "DegenerateVarianceError",
    "NonIdentifiableError",
    "build_model_matrices",
    "treatment_covariance",
    "is_identifiable",
    "sequence_block",
    "mean_precision",
    "sequence_contributions",
    "information_matrix",
    "parameter_labels",
]

#: Relative eigenvalue tolerance below which the information matrix is
#: considered rank deficient.
RANK_RTOL = 1e-8


class DegenerateVarianceError(ValueError):
    """Raised when the marginal covariance matrix is singular."""


class NonIdentifiableError(ValueError):
    """Raised when a design cannot identify all fixed effects."""


@dataclass(frozen=True)
class Design:
    """A trial design ``{m, C, T, X}`` with ``D`` intervention arms.

    Parameters
    ----------
    m : int
        Measurements per cluster per period (``m >= 2``).
    C : int
        Number of clusters (``C >= 2``).
    T : int
        Number of periods (``T >= 2``).
    X : numpy.ndarray
        ``C x T`` integer matrix; ``X[i, j]`` is the arm cluster ``i``
        receives in period ``j``, a label in ``{0, ..., D - 1}``.
    D : int
        Number of arms including control (``D >= 2``).
    """

    m: int
    C: int
    T: int
    X: np.ndarray
    D: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=int)
        object.__setattr__(self, "X", X)
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if self.C < 2:
            raise ValueError(f"C must be >= 2, got {self.C}")
        if self.T < 2:
            raise ValueError(f"T must be >= 2, got {self.T}")
        if self.D < 2:
            raise ValueError(f"D must be >= 2, got {self.D}")
        if X.shape != (self.C, self.T):
            raise ValueError(
                f"X has shape {X.shape}, expected ({self.C}, {self.T})"
            )
        if X.min() < 0 or X.max() > self.D - 1:
            raise ValueError(
                f"X entries must lie in [0, {self.D - 1}], found range "
                f"[{X.min()}, {X.max()}]"
            )

    @property
    def q(self) -> int:
        """Number of treatment effects, ``D - 1``."""
        return self.D - 1

    @property
    def p(self) -> int:
        """Number of fixed effects, ``(D - 1) + 1 + (T - 1)``."""
        return self.D + self.T - 1

    def sequences(self) -> tuple[tuple[int, ...], ...]:
        """Rows of ``X`` as a tuple of integer tuples."""
        return tuple(tuple(int(v) for v in row) for row in self.X)

    def canonical(self) -> "Design":
        """Return the design with rows of ``X`` sorted lexicographically."""
        rows = sorted(self.sequences())
        return Design(self.m, self.C, self.T, np.array(rows, dtype=int), self.D)


@dataclass(frozen=True)
class VarianceComponents:
    """Variance components of the mixed model, all in outcome-variance units.

    Attributes
    ----------
    sigma2_c : float
        Between-cluster variance.
    sigma2_theta : float
        Cluster-period interaction variance.
    sigma2_s : float
        Between-individual (within cluster) variance; zero for
        cross-sectional studies.
    sigma2_eps : float
        Residual variance.
    """

    sigma2_c: float
    sigma2_theta: float = 0.0
    sigma2_s: float = 0.0
    sigma2_eps: float = 1.0

    def __post_init__(self):
        for name in ("sigma2_c", "sigma2_theta", "sigma2_s", "sigma2_eps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.sigma2 <= 0:
            raise ValueError("total variance must be positive")

    @property
    def sigma2(self) -> float:
        """Total outcome variance."""
        return (
            self.sigma2_c + self.sigma2_theta + self.sigma2_s + self.sigma2_eps
        )

    @property
    def rho0(self) -> float:
        """Within-period correlation of two individuals in a cluster."""
        return (self.sigma2_c + self.sigma2_theta) / self.sigma2

    @property
    def rho1(self) -> float:
        """Between-period correlation of two individuals in a cluster."""
        return self.sigma2_c / self.sigma2

    @property
    def rho2(self) -> float:
        """Between-period correlation of one individual with itself."""
        return (self.sigma2_c + self.sigma2_s) / self.sigma2

    @property
    def cross_sectional(self) -> bool:
        """True when no individual effect is present."""
        return self.sigma2_s == 0

    @classmethod
    def from_rho(cls, sigma2: float, rho: float) -> "VarianceComponents":
        """Exchangeable shorthand: one intra-cluster correlation ``rho``.

        Expands to ``sigma2_c = rho * sigma2`` and
        ``sigma2_eps = (1 - rho) * sigma2`` with the period and individual
        components zero, so ``rho0 = rho1 = rho2 = rho``.
        """
        if not 0 <= rho <= 1:
            raise ValueError(f"rho must lie in [0, 1], got {rho}")
        return cls(
            sigma2_c=rho * sigma2,
            sigma2_theta=0.0,
            sigma2_s=0.0,
            sigma2_eps=(1.0 - rho) * sigma2,
        )

    @classmethod
    def from_correlations(
        cls, sigma2: float, rho0: float, rho1: float, rho2: float
    ) -> "VarianceComponents":
        """Build components from ``(sigma2, rho0, rho1, rho2)``.

        Inverts ``rho0 = (s_c + s_th) / s2``, ``rho1 = s_c / s2`` and
        ``rho2 = (s_c + s_s) / s2``.
        """
        s_c = rho1 * sigma2
        s_th = (rho0 - rho1) * sigma2
        s_s = (rho2 - rho1) * sigma2
        s_e = sigma2 - s_c - s_th - s_s
        if min(s_c, s_th, s_s, s_e) < -1e-12:
            raise ValueError(
                f"correlations (rho0={rho0}, rho1={rho1}, rho2={rho2}) imply "
                "a negative variance component"
            )
        return cls(max(s_c, 0.0), max(s_th, 0.0), max(s_s, 0.0), max(s_e, 0.0))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.sigma2_c, self.sigma2_theta, self.sigma2_s, self.sigma2_eps)


@dataclass(frozen=True)
class ModelMatrices:
    """Fixed-effect blocks and shared marginal covariance of one cluster.

    Attributes
    ----------
    A : numpy.ndarray
        ``C x (mT) x p`` stack of per-cluster fixed-effect matrices.  Row
        ``(j, k)`` of ``A[i]`` holds the arm indicators ``1{X[i, j] >= d}``
        for ``d = 1..D-1``, a 1 in the intercept column, and the period
        indicators for periods ``2..T``.
    V : numpy.ndarray
        ``(mT) x (mT)`` marginal covariance of one cluster's observations,
        identical across clusters.
    p : int
        Number of fixed effects.
    """

    A: np.ndarray
    V: np.ndarray
    p: int


@dataclass(frozen=True)
class CovarianceSummary:
    """Covariance of the treatment-effect estimators.

    Attributes
    ----------
    Lambda_q : numpy.ndarray
        ``q x q`` covariance of ``(beta_1_hat, ..., beta_q_hat)``.
    info : numpy.ndarray
        Length-``q`` information levels, ``info[f] = 1 / Lambda_q[f, f]``.
    q : int
        Number of treatment effects.
    """

    Lambda_q: np.ndarray
    info: np.ndarray
    q: int


def parameter_labels(T: int, D: int) -> list[str]:
    """Column labels of the fixed-effect design matrix."""
    return (
        [f"beta_{d}" for d in range(1, D)]
        + ["mu"]
        + [f"pi_{j}" for j in range(2, T + 1)]
    )


def sequence_block(seq, T: int, D: int) -> np.ndarray:
    """Cell-level design block of one treatment sequence.

    Parameters
    ----------
    seq : sequence of int
        Length-``T`` arm labels of one cluster.
    T, D : int
        Periods and arms.

    Returns
    -------
    numpy.ndarray
        ``T x p`` matrix with columns ``[beta_1..beta_{D-1}, mu, pi_2..pi_T]``.
    """
    seq = np.asarray(seq, dtype=int)
    p = D + T - 1
    B = np.zeros((T, p))
    for d in range(1, D):
        B[:, d - 1] = seq >= d
    B[:, D - 1] = 1.0
    for j in range(1, T):
        B[j, D + j - 1] = 1.0
    return B


def cluster_covariance(m: int, T: int, vc: VarianceComponents) -> np.ndarray:
    """Marginal covariance ``V`` of one cluster's ``mT`` observations.

    Observations are ordered period-major: index ``j * m + k`` is individual
    ``k`` in period ``j``.  The entry for observations ``(j, k)`` and
    ``(j', k')`` is ``s_c + 1{j=j'} s_th + 1{k=k'} s_s + 1{j=j', k=k'} s_e``.
    """
    s_c, s_th, s_s, s_e = vc.as_tuple()
    I_T, J_T = np.eye(T), np.ones((T, T))
    I_m, J_m = np.eye(m), np.ones((m, m))
    return (
        s_c * np.kron(J_T, J_m)
        + s_th * np.kron(I_T, J_m)
        + s_s * np.kron(J_T, I_m)
        + s_e * np.kron(I_T, I_m)
    )


def mean_precision(m: int, T: int, vc: VarianceComponents) -> np.ndarray:
    """Precision matrix of a cluster's period means, scaled for raw data.

    The cluster-period means have the compound-symmetric covariance
    ``S = a I + b J`` with ``a = s_th + s_e / m`` and ``b = s_c + s_s / m``.
    Because covariates are period-constant, a cluster's information
    contribution is ``B^T S^-1 B``; this function returns ``S^-1`` via the
    Sherman-Morrison closed form.
    """
    s_c, s_th, s_s, s_e = vc.as_tuple()
    if s_e <= 0:
        raise DegenerateVarianceError(
            "sigma2_eps must be positive: the marginal covariance is singular "
            "when the residual variance vanishes (e.g. rho = 1 exactly)"
        )
    a = s_th + s_e / m
    b = s_c + s_s / m
    return (np.eye(T) - (b / (a + T * b)) * np.ones((T, T))) / a


@lru_cache(maxsize=256)
def _cached_contributions(
    seqs: tuple[tuple[int, ...], ...],
    m: int,
    T: int,
    D: int,
    vc_tuple: tuple[float, float, float, float],
) -> np.ndarray:
    vc = VarianceComponents(*vc_tuple)
    W = mean_precision(m, T, vc)
    p = D + T - 1
    out = np.empty((len(seqs), p, p))
    for i, seq in enumerate(seqs):
        B = sequence_block(seq, T, D)
        out[i] = B.T @ W @ B
    out.setflags(write=False)
    return out


def sequence_contributions(
    seqs, m: int, T: int, D: int, vc: VarianceComponents
) -> np.ndarray:
    """Per-sequence information contributions ``B^T S^-1 B``.

    Results are memoized on ``(seqs, m, T, D, vc)`` because a design search
    evaluates huge numbers of allocation matrices built from the same
    sequence pool.

    Returns
    -------
    numpy.ndarray
        Read-only ``len(seqs) x p x p`` stack; the information matrix of a
        design is the count-weighted sum of these blocks over its rows.
    """
    key = tuple(tuple(int(v) for v in s) for s in seqs)
    return _cached_contributions(key, m, T, D, vc.as_tuple())


def information_matrix(design: Design, vc: VarianceComponents) -> np.ndarray:
    """Fixed-effect information matrix ``sum_i A_i^T V^-1 A_i``."""
    contribs = sequence_contributions(
        design.sequences(), design.m, design.T, design.D, vc
    )
    return contribs.sum(axis=0)


def build_model_matrices(
    design: Design, vc: VarianceComponents
) -> ModelMatrices:
    """Assemble the explicit per-cluster design blocks and covariance.

    This materializes the full ``(mT) x p`` blocks and ``(mT) x (mT)``
    covariance.  It exists for validation and small problems; all search
    paths use the sufficient cluster-period-mean reduction instead.
    """
    m, T, D = design.m, design.T, design.D
    V = cluster_covariance(m, T, vc)
    ones = np.ones((m, 1))
    A = np.empty((design.C, m * T, design.p))
    for i, seq in enumerate(design.sequences()):
        B = sequence_block(seq, T, D)
        A[i] = np.kron(B, ones)
    return ModelMatrices(A=A, V=V, p=design.p)


def _rank_deficient_labels(M: np.ndarray, T: int, D: int) -> list[str]:
    """Names of parameter columns implicated in a rank deficiency."""
    vals, vecs = np.linalg.eigh(M)
    tol = max(vals.max(), 0.0) * RANK_RTOL
    labels = parameter_labels(T, D)
    bad: list[str] = []
    for idx in np.nonzero(vals <= tol)[0]:
        v = np.abs(vecs[:, idx])
        for col in np.nonzero(v > 0.3 * v.max())[0]:
            if labels[col] not in bad:
                bad.append(labels[col])
    return bad


def is_identifiable(design: Design, vc: VarianceComponents) -> bool:
    """Whether the design identifies every fixed effect.

    True iff the information matrix has full rank ``p``, judged by the
    smallest eigenvalue exceeding ``RANK_RTOL`` times the largest.
    """
    M = information_matrix(design, vc)
    vals = np.linalg.eigvalsh(M)
    return bool(vals[0] > vals[-1] * RANK_RTOL)


def _spd_inverse(M: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive-definite matrix.

    Cholesky-based, falling back to an eigendecomposition when the
    factorization fails close to the rank tolerance.
    """
    try:
        L = np.linalg.cholesky(M)
        inv_L = np.linalg.inv(L)
        return inv_L.T @ inv_L
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(M)
        if vals[0] <= vals[-1] * RANK_RTOL:
            raise
        return (vecs / vals) @ vecs.T


def treatment_covariance(
    design: Design, vc: VarianceComponents
) -> CovarianceSummary:
    """Covariance ``Lambda_q`` of the treatment-effect estimators.

    Computes the generalized-least-squares information matrix, inverts it,
    and returns the leading ``q x q`` block (``q = D - 1``) together with the
    per-effect information levels ``1 / Lambda_q[f, f]``.  The result is
    invariant to the ordering of the clusters.

    Raises
    ------
    NonIdentifiableError
        If the information matrix is rank deficient; the message names the
        implicated parameter columns.
    DegenerateVarianceError
        If the residual variance is zero (singular marginal covariance).
    """
    M = information_matrix(design, vc)
    vals = np.linalg.eigvalsh(M)
    if vals[0] <= vals[-1] * RANK_RTOL:
        bad = _rank_deficient_labels(M, design.T, design.D)
        raise NonIdentifiableError(
            "design cannot identify the fixed effects; rank-deficient "
            f"columns: {', '.join(bad) if bad else 'unknown'}"
        )
    Lambda = _spd_inverse(M)
    q = design.q
    Lambda_q = Lambda[:q, :q]
    Lambda_q = 0.5 * (Lambda_q + Lambda_q.T)
    return CovarianceSummary(
        Lambda_q=Lambda_q, info=1.0 / np.diag(Lambda_q), q=q
    )
