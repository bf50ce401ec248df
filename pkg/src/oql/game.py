"""The T-round learner-vs-adversary game: adversary implementations, the
game loop with regret and mistake accounting, and the best-in-hindsight
comparator solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    DensityMatrix,
    Measurement,
    ValidationError,
    expectation,
    generator,
    random_measurement_from,
)
from .learners import LossKind, loss_subgradient_scale, loss_value
from .trees import ShatterTree, WitnessMap


class GameTranscript:
    """Per-round record of one game plus cumulative accounting.

    regret_vs_hindsight and the comparator state are solved lazily on first
    access (one solver call per transcript).
    """

    def __init__(
        self,
        loss_kind: LossKind,
        measurements: list[Measurement],
        predictions: np.ndarray,
        labels: np.ndarray,
        losses: np.ndarray,
        clipped: np.ndarray,
        true_state: DensityMatrix | None,
        seed: int,
    ):
        self.loss_kind = loss_kind
        self.measurements = measurements
        self.predictions = predictions
        self.labels = labels
        self.losses = losses
        self.clipped = clipped
        self.true_state = true_state
        self.seed = seed
        self._hindsight = None
        self._true_values = None

    @property
    def rounds(self) -> int:
        return len(self.measurements)

    @property
    def cumulative_loss(self) -> float:
        return float(self.losses.sum())

    @property
    def clip_count(self) -> int:
        return int(self.clipped.sum())

    def true_values(self) -> np.ndarray:
        if self.true_state is None:
            raise ValidationError("transcript has no true state")
        if self._true_values is None:
            self._true_values = np.array(
                [expectation(e, self.true_state) for e in self.measurements]
            )
        return self._true_values

    def hindsight(self) -> tuple[DensityMatrix, float, bool]:
        if self._hindsight is None:
            self._hindsight = best_in_hindsight(
                self.measurements, self.labels, self.loss_kind
            )
        return self._hindsight

    @property
    def regret_vs_hindsight(self) -> float:
        _, best, _ = self.hindsight()
        return self.cumulative_loss - best

    @property
    def regret_vs_true(self) -> float:
        vals = self.true_values()
        comp = sum(
            loss_value(self.loss_kind, v, y) for v, y in zip(vals, self.labels)
        )
        return self.cumulative_loss - float(comp)

    def mistakes(self, eps_prime: float) -> int:
        vals = self.true_values()
        return int(np.sum(np.abs(self.predictions - vals) > eps_prime))

    def csv_rows(self, eps_prime: float | None = None):
        """Rows for the transcript CSV: cumulative regrets use the final
        comparators (true state; hindsight state solved once)."""
        has_true = self.true_state is not None
        if has_true:
            vals = self.true_values()
        comp_state, _, _ = self.hindsight()
        hind_preds = np.array([expectation(e, comp_state) for e in self.measurements])
        cum_loss = cum_true = cum_hind = 0.0
        for t in range(self.rounds):
            cum_loss += float(self.losses[t])
            cum_hind += float(self.losses[t]) - loss_value(
                self.loss_kind, float(hind_preds[t]), float(self.labels[t])
            )
            if has_true:
                cum_true += float(self.losses[t]) - loss_value(
                    self.loss_kind, float(vals[t]), float(self.labels[t])
                )
            mistake = ""
            if has_true and eps_prime is not None:
                mistake = int(abs(self.predictions[t] - vals[t]) > eps_prime)
            yield {
                "round": t + 1,
                "measurement_hash": self.measurements[t].hash(),
                "prediction": float(self.predictions[t]),
                "label": float(self.labels[t]),
                "loss": float(self.losses[t]),
                "cum_loss": cum_loss,
                "cum_regret_true": cum_true if has_true else "",
                "cum_regret_hindsight": cum_hind,
                "mistake_flag": mistake,
            }


def regret(transcript: GameTranscript, comparator: str) -> float:
    if comparator == "true_state":
        return transcript.regret_vs_true
    if comparator == "hindsight":
        return transcript.regret_vs_hindsight
    raise ValidationError(f"unknown comparator {comparator!r}")


def mistakes(transcript: GameTranscript, eps_prime: float) -> int:
    return transcript.mistakes(eps_prime)


def _clip_unit(y: float) -> tuple[float, bool]:
    if y < 0.0:
        return 0.0, True
    if y > 1.0:
        return 1.0, True
    return y, False


def _noisy_label(center: float, eps: float, noise: str, rng) -> tuple[float, bool]:
    if eps < 0 or eps > 0.5:
        raise ValidationError(f"noise width must be in [0, 1/2], got {eps}")
    if noise == "none" or eps == 0.0:
        return center, False
    if noise == "uniform":
        return _clip_unit(center + rng.uniform(-eps, eps))
    if noise == "gaussian":
        return _clip_unit(center + rng.normal(0.0, eps))
    raise ValidationError(f"unknown noise kind {noise!r}")


class TreeAdversary:
    """Sign-rule adversary walking a shattering tree.

    Plays the node measurement, labels with the node's decision threshold
    (optionally noised, for the realizable-lower-bound variant), then
    descends away from the learner's prediction: eps_t = -sign(p_t - thr),
    ties toward +1.  The post-hoc true state is the witness of the first
    completed traversal (remaining bits padded with +1 if the game stops
    early); rounds beyond the tree depth restart fresh traversals that are
    not covered by the exact margin bound.
    """

    def __init__(
        self,
        tree: ShatterTree,
        witness: WitnessMap,
        noise_eps: float = 0.0,
        noise: str = "none",
    ):
        self.tree = tree
        self.witness = witness
        self.noise_eps = noise_eps
        self.noise = noise
        self.dim = tree.dim

    def begin(self, rng, loss_kind) -> None:
        self._rng = rng
        self._bits: list[int] = []
        self._first_path: tuple[int, ...] | None = None
        self._pending = None

    def measurement(self, round_index: int, hypothesis: DensityMatrix) -> Measurement:
        if len(self._bits) >= self.tree.depth:
            if self._first_path is None:
                self._first_path = tuple(self._bits)
            self._bits = []
        prefix = tuple(self._bits)
        self._pending = prefix
        return self.tree.measurement(prefix)

    def label(self, round_index: int, meas: Measurement, prediction: float):
        thr = self.tree.decision_value(self._pending)
        self._bits.append(1 if prediction <= thr else -1)
        return _noisy_label(thr, self.noise_eps, self.noise, self._rng)

    def true_state(self) -> DensityMatrix:
        path = self._first_path
        if path is None:
            pad = self.tree.depth - len(self._bits)
            path = tuple(self._bits) + (1,) * pad
        return self.witness(path)


class RealizableAdversary:
    """Labels are noisy observations of Tr(E_t rho) for a fixed true state;
    measurements come from a pluggable source (seeded random projectors, a
    fixed list cycled in order, or a tree walked on seeded random bits)."""

    def __init__(
        self,
        rho: DensityMatrix,
        eps: float = 0.0,
        noise: str = "uniform",
        source: str | Sequence[Measurement] | ShatterTree = "random",
    ):
        self.rho = rho
        self.eps = eps
        self.noise = noise
        self.source = source
        self.dim = rho.dim

    def begin(self, rng, loss_kind) -> None:
        self._rng = rng
        self._tree_bits: list[int] = []

    def measurement(self, round_index: int, hypothesis: DensityMatrix) -> Measurement:
        if isinstance(self.source, str) and self.source == "random":
            return random_measurement_from(self._rng, self.dim)
        if isinstance(self.source, ShatterTree):
            if len(self._tree_bits) >= self.source.depth:
                self._tree_bits = []
            meas = self.source.measurement(tuple(self._tree_bits))
            self._tree_bits.append(int(self._rng.integers(0, 2)) * 2 - 1)
            return meas
        return self.source[(round_index - 1) % len(self.source)]

    def label(self, round_index: int, meas: Measurement, prediction: float):
        return _noisy_label(expectation(meas, self.rho), self.eps, self.noise, self._rng)

    def true_state(self) -> DensityMatrix:
        return self.rho


class SmoothAdversary:
    """Max-of-k smoothed adversary: draws k = ceil(1/sigma) candidates from
    the base distribution and plays the one with the highest adversarial
    score (default: the learner's instantaneous loss against the realizable
    label).  The played measurement's law then has density at most k <=
    1/sigma + 1 relative to the base; sigma = 1 plays the single draw.
    Labels follow the wrapped realizable rule."""

    def __init__(
        self,
        rho: DensityMatrix,
        sigma: float,
        base=None,
        eps: float = 0.0,
        noise: str = "none",
        score=None,
    ):
        if not 0.0 < sigma <= 1.0:
            raise ValidationError(f"sigma must be in (0, 1], got {sigma}")
        self.rho = rho
        self.sigma = sigma
        self.k = math.ceil(1.0 / sigma)
        self.base = base
        self.eps = eps
        self.noise = noise
        self.score = score
        self.dim = rho.dim

    def begin(self, rng, loss_kind) -> None:
        self._rng = rng
        self._kind = loss_kind

    def _draw(self) -> Measurement:
        if self.base is None:
            return random_measurement_from(self._rng, self.dim)
        return self.base(self._rng)

    def measurement(self, round_index: int, hypothesis: DensityMatrix) -> Measurement:
        best = None
        best_score = -math.inf
        for _ in range(self.k):
            cand = self._draw()
            if self.score is not None:
                s = self.score(cand, hypothesis, self.rho)
            else:
                s = loss_value(
                    self._kind,
                    expectation(cand, hypothesis),
                    expectation(cand, self.rho),
                )
            if s > best_score:
                best, best_score = cand, s
        return best

    def label(self, round_index: int, meas: Measurement, prediction: float):
        return _noisy_label(expectation(meas, self.rho), self.eps, self.noise, self._rng)

    def true_state(self) -> DensityMatrix:
        return self.rho


def run_game(learner, adversary, rounds: int, loss_kind, seed: int) -> GameTranscript:
    """Play `rounds` rounds; fully deterministic given the seed.  Per round:
    the adversary emits E_t (it may consult the full history, including the
    learner's current hypothesis), the learner predicts Tr(E_t w_t), the
    adversary emits y_t, the learner updates."""
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    loss_kind = LossKind.parse(loss_kind)
    rng = generator(seed, 0xAD)
    adversary.begin(rng, loss_kind)
    learner.begin(adversary.dim, horizon=rounds)

    measurements: list[Measurement] = []
    predictions = np.empty(rounds)
    labels = np.empty(rounds)
    losses = np.empty(rounds)
    clipped = np.zeros(rounds, dtype=bool)
    for t in range(1, rounds + 1):
        hyp = learner.hypothesis()
        meas = adversary.measurement(t, hyp)
        if not isinstance(meas, Measurement):
            raise ValidationError("adversary emitted an invalid measurement")
        p = expectation(meas, hyp)
        y, was_clipped = adversary.label(t, meas, p)
        measurements.append(meas)
        predictions[t - 1] = p
        labels[t - 1] = y
        losses[t - 1] = loss_value(loss_kind, p, y)
        clipped[t - 1] = was_clipped
        learner.observe(meas, y, loss_kind)

    true_state = adversary.true_state() if hasattr(adversary, "true_state") else None
    return GameTranscript(
        loss_kind, measurements, predictions, labels, losses, clipped, true_state, seed
    )


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort method)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, v.size + 1) > 0)[0][-1]
    lam = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


def project_density(m: np.ndarray) -> np.ndarray:
    """Project a Hermitian matrix onto density matrices: eigendecompose and
    project the spectrum onto the simplex."""
    lam, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    lam = project_simplex(lam)
    out = (vecs * lam) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def best_in_hindsight(
    measurements: Sequence[Measurement],
    labels: Sequence[float],
    loss_kind,
    max_iters: int = 4000,
    tol: float = 1e-6,
    start: DensityMatrix | None = None,
) -> tuple[DensityMatrix, float, bool]:
    """Fixed state minimizing the cumulative loss: projected (sub)gradient
    descent over density matrices, with the returned loss additionally
    clamped below every candidate in a fixed gauge set (maximally mixed,
    basis projectors, caller's start)."""
    if len(measurements) == 0:
        raise ValidationError("history must be nonempty")
    loss_kind = LossKind.parse(loss_kind)
    n = measurements[0].dim
    horizon = len(measurements)
    # Tr(E_t w) for all t at once: flatten to one matvec per evaluation
    flat = np.stack([e.entries.T.reshape(-1) for e in measurements])
    ys = np.asarray(labels, dtype=float)

    def preds(w: np.ndarray) -> np.ndarray:
        return (flat @ w.reshape(-1)).real

    def objective(w: np.ndarray) -> float:
        p = preds(w)
        if loss_kind is LossKind.L1:
            return float(np.abs(p - ys).sum())
        return float(((p - ys) ** 2).sum())

    def descend(kind: LossKind, w0: np.ndarray, iters: int):
        w = w0
        best_w, best_obj = w, objective(w)
        avg = w.copy()
        smooth = kind is LossKind.L2
        converged = False
        stall = 0
        for k in range(1, iters + 1):
            p = preds(w)
            err = p - ys
            if kind is LossKind.L1:
                obj = float(np.abs(err).sum())
                scales = np.sign(err)
            else:
                obj = float((err**2).sum())
                scales = 2.0 * err
            if obj < best_obj - 1e-12 * (1.0 + best_obj):
                best_obj, best_w = obj, w
                stall = 0
            else:
                stall += 1
            g = ((scales / horizon) @ flat.conj()).reshape(n, n)
            g = 0.5 * (g + g.conj().T)
            step = 0.4 if smooth else 0.5 / math.sqrt(k)
            w_next = project_density(w - step * g)
            gap = float(np.linalg.norm(w_next - w)) / step
            w = w_next
            avg += (w - avg) / (k + 1)
            if gap <= tol:
                converged = True
                break
            if stall >= 200:  # subgradient plateau: no measurable progress
                break
        obj = objective(avg)
        if obj < best_obj:
            best_obj, best_w = obj, avg
        return best_w, best_obj, converged

    def polyak_polish(w0: np.ndarray, iters: int):
        # zero-target Polyak steps: linear convergence on near-realizable
        # L1 instances, harmless elsewhere (best iterate kept)
        w = w0
        best_w, best_obj = w, objective(w)
        for _ in range(iters):
            p = preds(w)
            err = p - ys
            f = float(np.abs(err).sum())
            if f < best_obj:
                best_obj, best_w = f, w
            if f <= 1e-10:
                break
            g = (np.sign(err) @ flat.conj()).reshape(n, n)
            g = 0.5 * (g + g.conj().T)
            gn2 = float(np.vdot(g, g).real)
            w = project_density(w - (f / max(gn2, 1e-18)) * g)
        return best_w, best_obj

    w0 = start.entries.copy() if start is not None else np.eye(n, dtype=np.complex128) / n
    if loss_kind is LossKind.L1 and max_iters > 500:
        w0, _, _ = descend(LossKind.L2, w0, min(1500, max_iters))  # smooth warm start
    best_w, best_obj, converged = descend(loss_kind, w0, max_iters)
    if loss_kind is LossKind.L1 and 0.0 < best_obj < 0.02 * horizon:
        pw, pobj = polyak_polish(best_w, 500)
        if pobj < best_obj:
            best_w, best_obj = pw, pobj
            converged = converged or pobj <= 1e-9 * max(1.0, horizon)

    gauges = [np.eye(n, dtype=np.complex128) / n]
    for i in range(n):
        p = np.zeros((n, n), dtype=np.complex128)
        p[i, i] = 1.0
        gauges.append(p)
    for cand in gauges:
        obj = objective(cand)
        if obj < best_obj:
            best_obj, best_w = obj, cand
    final = project_density(best_w)  # re-projection cleans accumulated drift
    return DensityMatrix(final), objective(final), converged
