"""Online learners over density matrices: the matrix-multiplicative-weights
update in cumulative-gradient form, a follow-the-leader baseline, and the
L1/L2 loss machinery."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import DensityMatrix, Measurement, ValidationError


class LossKind(enum.Enum):
    L1 = "l1"
    L2 = "l2"

    @classmethod
    def parse(cls, name) -> "LossKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValidationError(f"unknown loss kind {name!r}") from None


def loss_value(kind: LossKind, prediction: float, label: float) -> float:
    if kind is LossKind.L1:
        return abs(prediction - label)
    return (prediction - label) ** 2


def loss_subgradient_scale(kind: LossKind, prediction: float, label: float) -> float:
    """d/d(prediction) of the loss; the L1 subgradient at zero error is 0."""
    if kind is LossKind.L1:
        return float(np.sign(prediction - label))
    return 2.0 * (prediction - label)


@dataclass(frozen=True)
class LearnerState:
    """Immutable multiplicative-weights state: hypothesis is
    exp(-eta * G) / Tr(exp(-eta * G)) with G the running subgradient sum.
    eta = None selects the anytime rate sqrt(ln N / t)."""

    dim: int
    eta: float | None
    round: int
    cumulative_gradient: np.ndarray

    def current_eta(self) -> float:
        if self.eta is not None:
            return self.eta
        return math.sqrt(math.log(self.dim) / max(1, self.round + 1))


def mmw_init(dim: int, eta: float | None) -> LearnerState:
    if eta is not None and eta < 0:
        raise ValidationError(f"eta must be nonnegative, got {eta}")
    if dim < 2:
        raise ValidationError(f"dim must be >= 2, got {dim}")
    grad = np.zeros((dim, dim), dtype=np.complex128)
    grad.setflags(write=False)
    return LearnerState(dim=dim, eta=eta, round=0, cumulative_gradient=grad)


def mmw_predict(state: LearnerState) -> DensityMatrix:
    scaled = -state.current_eta() * state.cumulative_gradient
    lam, vecs = np.linalg.eigh(scaled)
    weights = np.exp(lam - lam.max())  # shift: exp overflow guard
    weights /= weights.sum()
    rho = (vecs * weights) @ vecs.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho)


def mmw_update(
    state: LearnerState, measurement: Measurement, label: float, kind: LossKind
) -> LearnerState:
    if measurement.dim != state.dim:
        raise ValidationError(
            f"dimension mismatch: learner {state.dim}, measurement {measurement.dim}"
        )
    prediction = float(
        np.sum(measurement.entries * mmw_predict(state).entries.T).real
    )
    scale = loss_subgradient_scale(kind, prediction, label)
    grad = state.cumulative_gradient + scale * measurement.entries
    grad.setflags(write=False)
    return LearnerState(
        dim=state.dim, eta=state.eta, round=state.round + 1, cumulative_gradient=grad
    )


def baseline_ftl(history, dim: int, kind: LossKind) -> DensityMatrix:
    """Best fixed state for the history so far; maximally mixed on an empty
    history.  `history` is a sequence of (Measurement, label) pairs."""
    if not history:
        return DensityMatrix.maximally_mixed(dim)
    from .game import best_in_hindsight  # deferred: game depends on this module

    measurements = [e for e, _ in history]
    labels = [y for _, y in history]
    state, _, _ = best_in_hindsight(measurements, labels, kind)
    return state


class MMWLearner:
    """Game-loop adapter over the functional multiplicative-weights ops."""

    name = "mmw"

    def __init__(self, eta: float | None = None):
        self.eta = eta
        self._state = None
        self._hyp = None

    def begin(self, dim: int, horizon: int | None = None) -> None:
        eta = self.eta
        if eta is None and horizon:
            eta = math.sqrt(math.log(dim) / horizon)
        self._state = mmw_init(dim, eta)
        self._hyp = None

    def hypothesis(self) -> DensityMatrix:
        if self._hyp is None:
            self._hyp = mmw_predict(self._state)
        return self._hyp

    def observe(self, measurement: Measurement, label: float, kind: LossKind) -> None:
        self._state = mmw_update(self._state, measurement, label, kind)
        self._hyp = None


class FTLLearner:
    """Follow-the-leader baseline: replays the hindsight solver each round
    (warm-started, iteration-capped)."""

    name = "ftl"

    def __init__(self, solver_iters: int = 80):
        self.solver_iters = solver_iters
        self._history = []
        self._dim = None
        self._hyp = None

    def begin(self, dim: int, horizon: int | None = None) -> None:
        self._history = []
        self._dim = dim
        self._hyp = DensityMatrix.maximally_mixed(dim)
        self._kind = None

    def hypothesis(self) -> DensityMatrix:
        return self._hyp

    def observe(self, measurement: Measurement, label: float, kind: LossKind) -> None:
        from .game import best_in_hindsight

        self._history.append((measurement, label))
        state, _, _ = best_in_hindsight(
            [e for e, _ in self._history],
            [y for _, y in self._history],
            kind,
            max_iters=self.solver_iters,
            start=self._hyp,
        )
        self._hyp = state


class FixedLearner:
    """Plays one fixed state every round (maximally mixed by default)."""

    name = "fixed"

    def __init__(self, state: DensityMatrix | None = None):
        self._fixed = state
        self._hyp = None

    def begin(self, dim: int, horizon: int | None = None) -> None:
        self._hyp = self._fixed if self._fixed is not None else DensityMatrix.maximally_mixed(dim)

    def hypothesis(self) -> DensityMatrix:
        return self._hyp

    def observe(self, measurement, label, kind) -> None:
        pass


class KnownStateLearner:
    """Cheating baseline that knows the true state."""

    name = "known"

    def __init__(self, state: DensityMatrix):
        self._hyp = state

    def begin(self, dim: int, horizon: int | None = None) -> None:
        if self._hyp.dim != dim:
            raise ValidationError("known state has the wrong dimension")

    def hypothesis(self) -> DensityMatrix:
        return self._hyp

    def observe(self, measurement, label, kind) -> None:
        pass
