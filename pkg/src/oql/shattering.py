"""Shattering certificates: margin verification, prefix-measurability audit,
a brute-force dimension oracle for tiny instances, a sequential Rademacher
estimator, and the closed-form regret-bound reporter."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import DensityMatrix, Measurement, ValidationError, expectation, generator
from .trees import ShatterTree, WitnessMap, as_bits, constant_path

MARGIN_TOL = 1e-9
DEFAULT_BUDGET = 10_000


class BudgetExceeded(RuntimeError):
    """Search would exceed the caller's evaluation budget."""


@dataclass(frozen=True)
class ShatterReport:
    mode: str  # "exhaustive" | "sampled"
    paths_checked: int
    min_margin: float
    pass_at_half_delta: bool
    pass_at_delta: bool
    worst_path: tuple[int, ...] | None
    worst_level: int | None
    delta: float
    path_margins: tuple[tuple[tuple[int, ...], float], ...] = field(repr=False, default=())
    seed: int | None = None

    def to_certificate(self, tree: ShatterTree) -> dict:
        return {
            "construction": tree.construction,
            "n": tree.n_qubits,
            "T": tree.block,
            "delta": self.delta,
            "mode": self.mode,
            "sample_count": self.paths_checked,
            "seed": self.seed,
            "min_margin": self.min_margin,
            "pass_at_delta": self.pass_at_delta,
            "pass_at_half_delta": self.pass_at_half_delta,
            "paths": [
                {"bits": list(bits), "min_margin": m} for bits, m in self.path_margins
            ],
        }


def _sampled_paths(depth: int, budget: int, seed: int):
    yield constant_path(depth, 1)
    yield constant_path(depth, -1)
    for i in range(budget):
        rng = generator(seed, i)
        yield tuple(int(b) for b in rng.integers(0, 2, depth) * 2 - 1)


def path_margins(tree: ShatterTree, witness: WitnessMap, path: Sequence[int]) -> np.ndarray:
    """Margins eps_t*(Tr(x_t omega) - v_t) at the certified levels of one path."""
    bits = as_bits(path)
    try:
        omega = witness(bits)
    except ValidationError as err:
        raise ValidationError(f"witness invalid on path {bits}: {err}") from err
    values = {}
    out = np.empty(tree.certified_depth)
    for t in range(1, tree.certified_depth + 1):
        meas = tree.measurement(bits[: t - 1])
        key = id(meas)
        if key not in values:
            values[key] = expectation(meas, omega)
        out[t - 1] = bits[t - 1] * (values[key] - tree.value(bits, t))
    return out


def verify_shattering(
    tree: ShatterTree,
    witness: WitnessMap,
    delta: float | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> ShatterReport:
    """Certify the margin property over all paths (if 2^depth fits the
    budget) or over `budget` sampled paths plus the two constant paths."""
    if tree.dim != witness.dim or tree.depth != witness.depth:
        raise ValidationError("tree and witness shapes disagree")
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    if delta is None:
        delta = tree.delta

    exhaustive = 2**tree.depth <= budget
    if exhaustive:
        mode = "exhaustive"
        paths = itertools.product((1, -1), repeat=tree.depth)
    else:
        mode = "sampled"
        paths = _sampled_paths(tree.depth, budget, seed)

    best = math.inf
    worst_path = None
    worst_level = None
    records = []
    count = 0
    for bits in paths:
        count += 1
        if tree.certified_depth == 0:
            records.append((bits, math.inf))
            continue
        margins = path_margins(tree, witness, bits)
        level = int(margins.argmin())
        m = float(margins[level])
        records.append((bits, m))
        if m < best:
            best = m
            worst_path = bits
            worst_level = level + 1
    return ShatterReport(
        mode=mode,
        paths_checked=count,
        min_margin=best,
        pass_at_half_delta=best >= delta / 2.0 - MARGIN_TOL,
        pass_at_delta=best >= delta - MARGIN_TOL,
        worst_path=worst_path,
        worst_level=worst_level,
        delta=delta,
        path_margins=tuple(records),
        seed=None if exhaustive else seed,
    )


@dataclass(frozen=True)
class PrefixReport:
    max_discrepancy: float
    level: int | None
    prefix: tuple[int, ...] | None
    paths: tuple[tuple[int, ...], tuple[int, ...]] | None
    pairs_checked: int


def check_prefix_measurability(
    tree: ShatterTree, budget: int = 1000, seed: int = 0
) -> PrefixReport:
    """Sample path pairs that agree on a random prefix and differ afterwards;
    report the largest node-value difference seen at the prefix level."""
    worst = 0.0
    worst_level = None
    worst_prefix = None
    worst_pair = None
    count = 0
    for i in range(budget):
        rng = generator(seed, i)
        t = int(rng.integers(1, tree.depth + 1))
        prefix = tuple(int(b) for b in rng.integers(0, 2, t - 1) * 2 - 1)
        tail = tree.depth - (t - 1)
        a = prefix + tuple(int(b) for b in rng.integers(0, 2, tail) * 2 - 1)
        b = prefix + tuple(int(b) for b in rng.integers(0, 2, tail) * 2 - 1)
        count += 1
        diff = abs(tree.value(a, t) - tree.value(b, t))
        if diff > worst:
            worst, worst_level, worst_prefix, worst_pair = diff, t, prefix, (a, b)
    return PrefixReport(worst, worst_level, worst_prefix, worst_pair, count)


def brute_force_sfat(
    hypothesis_grid: Sequence[DensityMatrix],
    measurement_grid: Sequence[Measurement],
    delta: float,
    t_max: int,
    budget: int = 2_000_000,
) -> int:
    """Largest depth T <= t_max at which some measurement-labeled tree and
    some value tree on the delta/4 grid are delta-shattered by the grid.

    Works on the shattering definition directly: a depth-d tree rooted at
    (x, v) is shattered by a hypothesis set H iff both
    {h : h(x) >= v + delta/2} and {h : h(x) <= v - delta/2}
    shatter some depth-(d-1) tree.  Memoized over (depth, hypothesis set).
    """
    if t_max > 4:
        raise ValidationError("t_max above 4 is out of scope for the brute-force oracle")
    if delta <= 0:
        raise ValidationError("delta must be positive")
    values = np.array(
        [[expectation(e, h) for e in measurement_grid] for h in hypothesis_grid]
    ).reshape(len(hypothesis_grid), len(measurement_grid))
    grid_step = delta / 4.0
    v_grid = np.arange(0.0, 1.0 + grid_step / 2, grid_step)
    ops = 0
    memo: dict[tuple[int, frozenset[int]], bool] = {}

    def shatters(depth: int, hyp: frozenset[int]) -> bool:
        nonlocal ops
        if depth == 0:
            return len(hyp) > 0
        key = (depth, hyp)
        if key in memo:
            return memo[key]
        idx = sorted(hyp)
        result = False
        for x in range(values.shape[1]):
            col = values[idx, x] if idx else np.empty(0)
            for v in v_grid:
                ops += 1
                if ops > budget:
                    raise BudgetExceeded(
                        f"brute-force search exceeded budget of {budget} node evaluations"
                    )
                up = frozenset(i for i, val in zip(idx, col) if val >= v + delta / 2)
                down = frozenset(i for i, val in zip(idx, col) if val <= v - delta / 2)
                if up and down and shatters(depth - 1, up) and shatters(depth - 1, down):
                    result = True
                    break
            if result:
                break
        memo[key] = result
        return result

    full = frozenset(range(len(hypothesis_grid)))
    best = 0
    for depth in range(1, t_max + 1):
        if shatters(depth, full):
            best = depth
        else:
            break
    return best


@dataclass(frozen=True)
class RademacherEstimate:
    estimate: float
    std_error: float
    num_paths: int
    mode: str


def sequential_rademacher_estimate(
    tree: ShatterTree,
    hypothesis_sampler: Callable[[np.random.Generator], DensityMatrix] | None,
    num_paths: int,
    num_hypotheses: int,
    seed: int,
    mode: str = "sampled",
    include_anchors: bool = True,
) -> RademacherEstimate:
    """Monte-Carlo estimate of (1/T) E_eps[ sup_h sum_t eps_t Tr(x_t(eps) h) ].

    `sampled` approximates the sup over `num_hypotheses` draws plus fixed
    anchors (maximally mixed state and all basis projectors) unless
    `include_anchors` is off; `exact` uses sup_rho Tr(M rho) = lambda_max(M)
    for the all-states class.
    """
    if num_paths < 1 or (mode == "sampled" and num_hypotheses < 1):
        raise ValidationError("counts must be >= 1")
    if mode not in ("sampled", "exact"):
        raise ValidationError(f"unknown mode {mode!r}")
    depth, dim = tree.depth, tree.dim

    hyps: list[np.ndarray] = []
    if mode == "sampled":
        hrng = generator(seed, 1, 0)
        for _ in range(num_hypotheses):
            hyps.append(hypothesis_sampler(hrng).entries)
        if include_anchors:
            hyps.append(np.eye(dim, dtype=np.complex128) / dim)
            for i in range(dim):
                p = np.zeros((dim, dim), dtype=np.complex128)
                p[i, i] = 1.0
                hyps.append(p)
        stack = np.stack(hyps)

    vals = np.empty(num_paths)
    for i in range(num_paths):
        rng = generator(seed, 0, i)
        bits = tuple(int(b) for b in rng.integers(0, 2, depth) * 2 - 1)
        signed = np.zeros((dim, dim), dtype=np.complex128)
        for t in range(1, depth + 1):
            signed += bits[t - 1] * tree.measurement(bits[: t - 1]).entries
        if mode == "exact":
            sup = float(np.linalg.eigvalsh(signed)[-1])
            sup = max(sup, 0.0)
        else:
            sup = float(np.einsum("kij,ji->k", stack, signed).real.max())
        vals[i] = sup / depth
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else 0.0
    return RademacherEstimate(est, se, num_paths, mode)


def theoretical_bounds(
    n: int, horizon: float, delta: float, lipschitz: float = 1.0
) -> dict[str, float]:
    """Closed-form regret bound pair for the n-qubit class with
    sfat(d) = n/d^2 plugged in: `upper` minimizes the chaining bound over a
    grid of cutoffs, `lower` evaluates the fat-shattering lower bound at the
    caller's delta."""
    if n < 1 or horizon < 0 or delta <= 0 or lipschitz <= 0:
        raise ValidationError("arguments must be positive (horizon may be 0)")
    if horizon == 0:
        return {"upper": 0.0, "lower": 0.0}
    uppers = []
    for alpha in np.geomspace(1e-4, 1.0, 200):
        grid = np.geomspace(alpha, 1.0, 400)
        integrand = np.sqrt(n / grid**2 * np.log(2 * math.e * horizon / grid))
        integral = float(np.trapezoid(integrand, grid))
        uppers.append(
            4 * alpha * horizon * lipschitz + 12 * lipschitz * math.sqrt(horizon) * integral
        )
    sfat = min(n / delta**2, horizon)
    lower = math.sqrt(delta**2 * horizon * sfat) / (4 * math.sqrt(2))
    return {"upper": float(min(uppers)), "lower": lower}
