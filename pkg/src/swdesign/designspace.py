"""Constrained design spaces and their enumeration.

A design space couples candidate period counts ``T``, cluster counts ``C``
(possibly depending on ``T``), cluster-period sizes ``m`` (possibly depending
on ``(C, T)``) and a set of restrictions on the allocation matrix ``X``.
Restrictions that act row by row (monotone progression, visiting every arm,
a whitelist of allowed sequences) are pushed into sequence enumeration;
matrix-level restrictions (identifiability, equal allocation across
sequences) are applied as filters.

Allocation matrices are enumerated in canonical form with rows sorted
lexicographically: the treatment-effect covariance is invariant to cluster
ordering, so designs whose rows agree as multisets are equivalent and only
one representative is visited.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .model import Design, VarianceComponents, is_identifiable

__all__ = [
    "Restriction",
    "MonotoneNondecreasing",
    "Identifiable",
    "AllInterventionsPerCluster",
    "EqualSequenceAllocation",
    "StartControlEndTreatment",
    "CustomPredicate",
    "restriction_from_name",
    "DesignSpace",
    "enumerate_sequences",
    "enumerate_designs",
    "check_restrictions",
    "count_candidates",
]


class Restriction:
    """Base class for allocation-matrix restrictions."""

    name: str = ""


@dataclass(frozen=True)
class MonotoneNondecreasing(Restriction):
    """Clusters never move back to an earlier arm: ``X[i, j] >= X[i, j-1]``."""

    name: str = field(default="monotone", init=False)

    def row_ok(self, row, D: int) -> bool:
        return all(row[j] >= row[j - 1] for j in range(1, len(row)))


@dataclass(frozen=True)
class Identifiable(Restriction):
    """Only designs whose information matrix has full rank are admitted."""

    name: str = field(default="identifiable", init=False)


@dataclass(frozen=True)
class AllInterventionsPerCluster(Restriction):
    """Every cluster receives every arm ``0..D-1`` at some point."""

    name: str = field(default="all-interventions", init=False)

    def row_ok(self, row, D: int) -> bool:
        return set(row) == set(range(D))


@dataclass(frozen=True)
class EqualSequenceAllocation(Restriction):
    """Rows split into equally sized groups of identical sequences.

    Each distinct sequence used must appear the same number ``a`` of times,
    with ``C / a`` an integer.
    """

    name: str = field(default="equal-allocation", init=False)

    def matrix_ok(self, X) -> bool:
        counts = {}
        for row in map(tuple, X):
            counts[row] = counts.get(row, 0) + 1
        return len(set(counts.values())) == 1


@dataclass(frozen=True)
class StartControlEndTreatment(Restriction):
    """Every cluster starts on control and ends on the last arm."""

    name: str = field(default="start-control-end-treatment", init=False)

    def row_ok(self, row, D: int) -> bool:
        return row[0] == 0 and row[-1] == D - 1


@dataclass(frozen=True)
class CustomPredicate(Restriction):
    """Whitelist of allowed per-cluster sequences.

    Attributes
    ----------
    label : str
        Display name of the predicate.
    allowed : tuple of tuple of int
        The admissible sequences.
    """

    label: str
    allowed: tuple[tuple[int, ...], ...]

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"custom:{self.label}"

    def row_ok(self, row, D: int) -> bool:
        return tuple(row) in self.allowed


_NAMED = {
    "monotone": MonotoneNondecreasing,
    "identifiable": Identifiable,
    "all-interventions": AllInterventionsPerCluster,
    "equal-allocation": EqualSequenceAllocation,
    "start-control-end-treatment": StartControlEndTreatment,
}


def restriction_from_name(name: str) -> Restriction:
    """Look up a built-in restriction by its configuration name."""
    try:
        return _NAMED[name]()
    except KeyError:
        raise ValueError(
            f"unknown restriction {name!r}; expected one of {sorted(_NAMED)}"
        ) from None


@dataclass(frozen=True)
class DesignSpace:
    """The candidate sets defining a design search.

    Attributes
    ----------
    T_set : tuple of int
        Candidate period counts.
    C_sets : dict
        Map ``T -> tuple`` of candidate cluster counts.
    M_sets : dict
        Map ``(C, T) -> tuple`` of candidate cluster-period sizes.
    restrictions : tuple of Restriction
        Conjunctive restrictions on ``X``.
    D : int
        Number of arms.
    """

    T_set: tuple[int, ...]
    C_sets: dict
    M_sets: dict
    restrictions: tuple[Restriction, ...]
    D: int

    def __post_init__(self):
        object.__setattr__(self, "T_set", tuple(sorted(self.T_set)))
        object.__setattr__(self, "restrictions", tuple(self.restrictions))
        if not self.T_set:
            raise ValueError("T_set must be nonempty")
        for T in self.T_set:
            if T < 2:
                raise ValueError("all T must be >= 2")
            Cs = self.C_sets.get(T)
            if not Cs:
                raise ValueError(f"no cluster counts configured for T={T}")
            for C in Cs:
                if C < 2:
                    raise ValueError("all C must be >= 2")
                Ms = self.M_sets.get((C, T))
                if not Ms:
                    raise ValueError(
                        f"no cluster-period sizes configured for (C={C}, T={T})"
                    )
                if min(Ms) < 2:
                    raise ValueError("all m must be >= 2")
        if self.D < 2:
            raise ValueError("D must be >= 2")

    @classmethod
    def single(
        cls, C: int, T: int, m, D: int, restrictions
    ) -> "DesignSpace":
        """Space with fixed ``C`` and ``T`` and one or more values of ``m``."""
        ms = tuple(m) if np.iterable(m) else (m,)
        return cls(
            T_set=(T,),
            C_sets={T: (C,)},
            M_sets={(C, T): ms},
            restrictions=tuple(restrictions),
            D=D,
        )

    @classmethod
    def grid(
        cls, T_values, C_values, m_values, D: int, restrictions
    ) -> "DesignSpace":
        """Cartesian space: every combination of the given T, C and m."""
        T_values = tuple(sorted(T_values))
        C_values = tuple(sorted(C_values))
        m_values = tuple(sorted(m_values))
        return cls(
            T_set=T_values,
            C_sets={T: C_values for T in T_values},
            M_sets={(C, T): m_values for T in T_values for C in C_values},
            restrictions=tuple(restrictions),
            D=D,
        )

    @classmethod
    def budgeted(
        cls, T_values, C_values, m_min: int, budget: int, D: int, restrictions
    ) -> "DesignSpace":
        """Cartesian in T and C with ``m`` ranging to ``floor(budget / T)``.

        Mirrors a per-cluster observation budget: each cluster contributes
        ``m * T`` observations, so larger ``T`` admits smaller ``m``.
        """
        T_values = tuple(sorted(T_values))
        C_values = tuple(sorted(C_values))
        M_sets = {}
        for T in T_values:
            top = budget // T
            if top < m_min:
                raise ValueError(
                    f"budget {budget} admits no m >= {m_min} at T={T}"
                )
            for C in C_values:
                M_sets[(C, T)] = tuple(range(m_min, top + 1))
        return cls(
            T_set=T_values,
            C_sets={T: C_values for T in T_values},
            M_sets=M_sets,
            restrictions=tuple(restrictions),
            D=D,
        )

    def blocks(self):
        """Deterministic iteration over ``(T, C, m)`` combinations."""
        for T in self.T_set:
            for C in sorted(self.C_sets[T]):
                for m in sorted(self.M_sets[(C, T)]):
                    yield T, C, m

    def row_restrictions(self) -> tuple[Restriction, ...]:
        return tuple(r for r in self.restrictions if hasattr(r, "row_ok"))

    def requires_identifiable(self) -> bool:
        return any(isinstance(r, Identifiable) for r in self.restrictions)

    def requires_equal_allocation(self) -> bool:
        return any(
            isinstance(r, EqualSequenceAllocation) for r in self.restrictions
        )


def enumerate_sequences(T: int, D: int, restrictions) -> list[tuple[int, ...]]:
    """All admissible per-cluster sequences in lexicographic order.

    With a monotone restriction the candidates are the nondecreasing
    sequences over ``{0..D-1}`` (``binomial(T + D - 1, D - 1)`` of them);
    without it all ``D**T`` label sequences are candidates.  Row-applicable
    restrictions then filter the list.
    """
    if T < 2 or D < 2:
        raise ValueError("T and D must be >= 2")
    restrictions = tuple(restrictions)
    monotone = any(isinstance(r, MonotoneNondecreasing) for r in restrictions)
    if monotone:
        pool = itertools.combinations_with_replacement(range(D), T)
    else:
        pool = itertools.product(range(D), repeat=T)
    row_checks = [r for r in restrictions if hasattr(r, "row_ok")]
    return [
        seq for seq in pool if all(r.row_ok(seq, D) for r in row_checks)
    ]


def check_restrictions(X, restrictions, D: int) -> bool:
    """Whether an allocation matrix satisfies every restriction.

    The identifiability restriction is ignored here (it depends on the
    variance components); use :func:`swdesign.model.is_identifiable`.
    """
    X = np.asarray(X, dtype=int)
    for r in restrictions:
        if hasattr(r, "row_ok"):
            if not all(r.row_ok(tuple(row), D) for row in X):
                return False
        if hasattr(r, "matrix_ok"):
            if not r.matrix_ok(X):
                return False
    return True


def count_candidates(space: DesignSpace) -> int:
    """Raw number of canonical allocation matrices before matrix filters."""
    total = 0
    for T, C, m in space.blocks():
        n = len(enumerate_sequences(T, space.D, space.restrictions))
        total += comb(n + C - 1, C)
    return total


def enumerate_designs(space: DesignSpace, vc: VarianceComponents):
    """Yield every admissible design exactly once, canonically and in order.

    Designs are produced block by block over ``(T, C, m)``; within a block,
    allocation matrices are the size-``C`` multisets of the sequence pool in
    lexicographic order, so rows arrive already sorted.  Matrix-level
    restrictions and, when requested, identifiability under ``vc`` are
    applied as filters.  Two runs yield identical streams.
    """
    check_ident = space.requires_identifiable()
    equal_alloc = space.requires_equal_allocation()
    for T, C, m in space.blocks():
        seqs = enumerate_sequences(T, space.D, space.restrictions)
        if not seqs:
            continue
        for combo in itertools.combinations_with_replacement(seqs, C):
            if equal_alloc:
                counts = {}
                for s in combo:
                    counts[s] = counts.get(s, 0) + 1
                if len(set(counts.values())) != 1:
                    continue
            design = Design(m, C, T, np.array(combo, dtype=int), space.D)
            if check_ident and not is_identifiable(design, vc):
                continue
            yield design
