"""Validated complex Hermitian linear algebra: states, measurements, and the
primitive operations every other module builds on."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

HERMITICITY_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_TOL = 1e-9
EIGEN_TOL = 1e-8

_MASK64 = (1 << 64) - 1


class ValidationError(ValueError):
    """A matrix or vector violates one of its type invariants."""


def generator(seed: int, *streams: int) -> np.random.Generator:
    """Counter-based Philox generator for (seed, stream...) — splittable and
    deterministic regardless of which worker evaluates a stream."""
    words = [int(seed) & _MASK64] + [int(s) & _MASK64 for s in streams]
    data = b"".join(w.to_bytes(8, "little") for w in words)
    key = int.from_bytes(hashlib.blake2b(data, digest_size=16).digest(), "little")
    return np.random.Generator(np.random.Philox(key=key))


def _as_square_complex(values) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValidationError("empty matrix")
    return arr


def _check_hermitian(arr: np.ndarray, tol: float = HERMITICITY_TOL) -> None:
    asym = np.abs(arr - arr.conj().T)
    bound = tol * (1.0 + np.abs(arr).max())
    worst = asym.max()
    if worst > bound:
        i, j = np.unravel_index(int(asym.argmax()), asym.shape)
        raise ValidationError(
            f"matrix is not Hermitian: |M - M^dag| has max {worst:.3e} at "
            f"entry ({i}, {j}), allowed {bound:.3e}"
        )


@dataclass(frozen=True)
class HermitianOperator:
    """Complex N x N Hermitian matrix (read-only entries)."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_square_complex(self.entries)
        _check_hermitian(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def hash(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.entries).tobytes()).hexdigest()[:12]


@dataclass(frozen=True)
class Measurement(HermitianOperator):
    """Two-outcome measurement: Hermitian with spectrum inside [0, 1]."""

    def __post_init__(self):
        super().__post_init__()
        lam = np.linalg.eigvalsh(self.entries)
        if lam[0] < -PSD_TOL or lam[-1] > 1.0 + PSD_TOL:
            raise ValidationError(
                f"measurement spectrum [{lam[0]:.3e}, {lam[-1]:.3e}] is outside [0, 1]"
            )

    @classmethod
    def basis_projector(cls, dim: int, index: int) -> "Measurement":
        if not 0 <= index < dim:
            raise ValidationError(f"basis index {index} out of range for dim {dim}")
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[index, index] = 1.0
        return cls(m)


@dataclass(frozen=True)
class DensityMatrix:
    """Quantum state: Hermitian, PSD, unit trace.

    `pure_vector` is set when the state was constructed as an outer product of
    a validated unit vector; it enables O(N^2) expectation values and marks the
    PSD/trace invariants as holding by construction.
    """

    entries: np.ndarray
    pure_vector: np.ndarray | None = None

    def __post_init__(self):
        arr = _as_square_complex(self.entries)
        _check_hermitian(arr)
        if self.pure_vector is None:
            lam = np.linalg.eigvalsh(arr)
            if lam[0] < -PSD_TOL:
                raise ValidationError(f"state has negative eigenvalue {lam[0]:.3e}")
            tr = arr.trace().real
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValidationError(f"state trace {tr!r} differs from 1")
        else:
            vec = np.array(self.pure_vector, dtype=np.complex128, copy=True)
            vec.setflags(write=False)
            object.__setattr__(self, "pure_vector", vec)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_pure(cls, amplitudes) -> "DensityMatrix":
        vec = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        nrm2 = float(np.vdot(vec, vec).real)
        if abs(nrm2 - 1.0) > TRACE_TOL:
            raise ValidationError(f"amplitude vector has squared norm {nrm2!r}, not 1")
        return cls(np.outer(vec, vec.conj()), pure_vector=vec)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    def purity(self) -> float:
        return float(np.vdot(self.entries, self.entries).real)

    def hash(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.entries).tobytes()).hexdigest()[:12]


@dataclass(frozen=True)
class PureState:
    """Unit vector in C^N; `density()` lifts it to its rank-1 state."""

    amplitudes: np.ndarray

    def __post_init__(self):
        vec = np.array(self.amplitudes, dtype=np.complex128, copy=True).reshape(-1)
        if vec.size < 1:
            raise ValidationError("empty amplitude vector")
        nrm2 = float(np.vdot(vec, vec).real)
        if abs(nrm2 - 1.0) > TRACE_TOL:
            raise ValidationError(f"squared norm {nrm2!r} differs from 1")
        vec.setflags(write=False)
        object.__setattr__(self, "amplitudes", vec)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self.amplitudes)


@dataclass(frozen=True)
class DensityDiagnostics:
    passed: bool
    hermiticity_residual: float
    min_eigenvalue: float
    trace_residual: float


def hermitian_eigen(op: HermitianOperator) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns of a
    Hermitian operator."""
    return np.linalg.eigh(op.entries)


def expectation(measurement, state) -> float:
    """Re Tr(E rho): acceptance probability of `state` under `measurement`."""
    e = measurement.entries if hasattr(measurement, "entries") else np.asarray(measurement)
    if isinstance(state, PureState):
        state = state.density()
    if e.shape[0] != state.dim:
        raise ValidationError(f"dimension mismatch: {e.shape[0]} vs {state.dim}")
    if state.pure_vector is not None:
        val = complex(np.vdot(state.pure_vector, e @ state.pure_vector))
    else:
        val = complex(np.sum(e * state.entries.T))
    if abs(val.imag) > 1e-10 * (1.0 + abs(val.real)):
        raise ValidationError(f"expectation has imaginary residual {val.imag:.3e}")
    return val.real


def matrix_exp_hermitian(op: HermitianOperator) -> HermitianOperator:
    """exp(H) = V diag(e^lambda) V^dag for Hermitian H."""
    lam, vecs = np.linalg.eigh(op.entries)
    out = (vecs * np.exp(lam)) @ vecs.conj().T
    out = 0.5 * (out + out.conj().T)
    return HermitianOperator(out)


def is_density(matrix, tol: float = PSD_TOL) -> DensityDiagnostics:
    """Diagnostic density-matrix check; `tol` bounds the PSD and trace
    residuals (Hermiticity keeps its own 1e-10 relative tolerance)."""
    arr = matrix.entries if hasattr(matrix, "entries") else np.asarray(matrix, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {arr.shape}")
    herm = float(np.abs(arr - arr.conj().T).max())
    herm_ok = herm <= HERMITICITY_TOL * (1.0 + float(np.abs(arr).max()))
    sym = 0.5 * (arr + arr.conj().T)
    min_eig = float(np.linalg.eigvalsh(sym)[0])
    trace_res = float(abs(arr.trace().real - 1.0))
    passed = herm_ok and min_eig >= -tol and trace_res <= tol
    return DensityDiagnostics(passed, herm, min_eig, trace_res)


def projector(vec: PureState) -> Measurement:
    """Rank-1 projector |v><v| of a unit vector."""
    return Measurement(np.outer(vec.amplitudes, vec.amplitudes.conj()))


def random_state(kind: str, dim: int, seed: int, stream: int = 0) -> DensityMatrix:
    """Seeded random state: `pure` draws a rotation-invariant unit vector,
    `mixed` normalizes G G^dag for complex Gaussian G."""
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    rng = generator(seed, stream)
    if kind == "pure":
        vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        vec /= np.linalg.norm(vec)
        return DensityMatrix.from_pure(vec)
    if kind == "mixed":
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = g @ g.conj().T
        rho /= rho.trace().real
        rho = 0.5 * (rho + rho.conj().T)
        return DensityMatrix(rho)
    raise ValidationError(f"unknown state kind {kind!r}")


def random_measurement(dim: int, seed: int, stream: int = 0) -> Measurement:
    """Seeded random rank-1 projector."""
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    rng = generator(seed, stream)
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    vec /= np.linalg.norm(vec)
    return Measurement(np.outer(vec, vec.conj()))


def random_measurement_from(rng: np.random.Generator, dim: int) -> Measurement:
    """Rank-1 projector drawn from an existing generator (game-loop use)."""
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    vec /= np.linalg.norm(vec)
    return Measurement(np.outer(vec, vec.conj()))


def matrix_to_json(op) -> dict:
    """System-wide matrix encoding: {"dim": N, "re": [[...]], "im": [[...]]}."""
    arr = op.entries if hasattr(op, "entries") else np.asarray(op, dtype=np.complex128)
    return {
        "dim": int(arr.shape[0]),
        "re": arr.real.tolist(),
        "im": arr.imag.tolist(),
    }


def matrix_from_json(payload: dict) -> np.ndarray:
    dim = int(payload["dim"])
    arr = np.asarray(payload["re"], dtype=float) + 1j * np.asarray(payload["im"], dtype=float)
    if arr.shape != (dim, dim):
        raise ValidationError(f"matrix payload shape {arr.shape} does not match dim {dim}")
    return arr


def dump_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
