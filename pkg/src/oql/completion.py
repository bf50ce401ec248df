"""Constructive completion of star-pattern partial symmetric matrices to
density matrices.

The partial matrix fixes the diagonal (1/2, then 1/(2(N-1)) repeated) and the
first row/column; the unspecified entries are filled with
M[i, j] = 2 * w_i * w_j.  That choice makes

    M = u u^T + diag(0, d_2, ..., d_N),   u = (1/sqrt(2), sqrt(2) w_2, ...),
    d_i = 1/(2(N-1)) - 2 w_i^2 >= 0  under the entry bound,

so the result is PSD with trace exactly 1 whenever every |w_i| is at most
1/(2 sqrt(N-1)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DensityMatrix, ValidationError

ENTRY_BOUND_TOL = 1e-12


def entry_bound(dim: int) -> float:
    return 0.5 / np.sqrt(dim - 1)


@dataclass(frozen=True)
class PartialStarMatrix:
    """First-row-and-diagonal-specified real symmetric partial matrix."""

    dim: int
    first_row: np.ndarray

    def __post_init__(self):
        if self.dim < 2:
            raise ValidationError(f"dim must be >= 2, got {self.dim}")
        raw = np.asarray(self.first_row)
        if np.iscomplexobj(raw):
            if np.any(raw.imag != 0):
                raise ValidationError("first row must be real")
            raw = raw.real
        row = np.array(raw, dtype=float, copy=True).reshape(-1)
        if row.size != self.dim - 1:
            raise ValidationError(
                f"first row has {row.size} entries, expected {self.dim - 1}"
            )
        row.setflags(write=False)
        object.__setattr__(self, "first_row", row)

    @classmethod
    def from_json(cls, payload: dict) -> "PartialStarMatrix":
        return cls(int(payload["dim"]), np.asarray(payload["first_row"], dtype=float))

    def to_json(self) -> dict:
        return {"dim": self.dim, "first_row": self.first_row.tolist()}


@dataclass(frozen=True)
class PatternReport:
    passed: bool
    bound: float
    violations: tuple[tuple[int, float], ...]  # (1-based column index, excess)


def validate_star_pattern(partial: PartialStarMatrix) -> PatternReport:
    """Check |w_{1i}| <= 1/(2 sqrt(N-1)) entrywise."""
    bound = entry_bound(partial.dim)
    bad = []
    for k, w in enumerate(partial.first_row):
        excess = abs(w) - bound
        if excess > ENTRY_BOUND_TOL:
            bad.append((k + 2, float(excess)))
    return PatternReport(not bad, bound, tuple(bad))


def clique_psd_check(partial: PartialStarMatrix) -> list[tuple[int, float, bool]]:
    """2x2 PSD check of each specified clique {1, i}: returns
    (index, determinant, passed) per clique; equivalent to the entry bound."""
    n = partial.dim
    out = []
    for k, w in enumerate(partial.first_row):
        det = 0.25 / (n - 1) - w * w
        out.append((k + 2, float(det), det >= -ENTRY_BOUND_TOL))
    return out


def complete_to_density(partial: PartialStarMatrix) -> DensityMatrix:
    """Complete a valid star pattern to a density matrix, preserving the
    specified entries bit-exactly."""
    report = validate_star_pattern(partial)
    if not report.passed:
        idx, excess = report.violations[0]
        raise ValidationError(
            f"star pattern violated at entry (1, {idx}): "
            f"|w| exceeds {report.bound:.6f} by {excess:.3e}"
        )
    n = partial.dim
    m = np.empty((n, n), dtype=float)
    off = 2.0 * np.outer(partial.first_row, partial.first_row)
    m[1:, 1:] = off
    m[0, 0] = 0.5
    m[0, 1:] = partial.first_row
    m[1:, 0] = partial.first_row
    diag = 0.5 / (n - 1)
    for i in range(1, n):
        m[i, i] = diag
    return DensityMatrix(m.astype(np.complex128))
