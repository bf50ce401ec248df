"""Builders for the five shattering-tree constructions.

Conventions used throughout (kept identical across constructions and tests):

* Levels are 1-based; a tree of depth D has D (measurement, value) levels and
  paths carry exactly D direction bits eps_1..eps_D in {+1, -1}.
* The node at level t is addressed by the prefix (eps_1, ..., eps_{t-1}).
* An implicit eps_0 = +1 seeds the binary-search value sequences.
* The margin at level t along a path is
      eps_t * (Tr(x_t(eps) omega(eps)) - v_t(eps)),
  and `certified_depth` is the number of leading levels at which the
  construction guarantees margin >= delta.  For the halving tree the last
  level carries no guarantee (its witness reuses only the first D-1 bits),
  so certified_depth = depth - 1 there; every other construction certifies
  its full depth.
* Block constructions of block size B over N-dimensional states use
  tp = (t-1) // B (block index) and tt = t-1 - B*tp (offset inside block).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .completion import PartialStarMatrix, complete_to_density
from .core import DensityMatrix, Measurement, PureState, ValidationError, projector

MAX_HALVING_DEPTH = 500

CONSTRUCTIONS = ("halving", "von_neumann", "vn_halving", "general", "pure")


def as_bits(bits: Sequence[int]) -> tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if any(b not in (-1, 1) for b in out):
        raise ValidationError(f"path bits must be +/-1, got {bits!r}")
    return out


@dataclass(frozen=True)
class Path:
    """Direction bits of one root-to-leaf traversal."""

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", as_bits(self.bits))

    def __len__(self) -> int:
        return len(self.bits)

    def prefix(self, length: int) -> tuple[int, ...]:
        return self.bits[:length]


def constant_path(depth: int, sign: int) -> tuple[int, ...]:
    return (sign,) * depth


@dataclass(frozen=True)
class ShatterTree:
    construction: str
    n_qubits: int
    dim: int
    depth: int
    certified_depth: int
    delta: float
    prefix_valid_v: bool
    block: int
    _measure_fn: Callable[[tuple[int, ...]], Measurement]
    _value_fn: Callable[[tuple[int, ...], int], float]
    _decision_fn: Callable[[tuple[int, ...]], float]

    def measurement(self, prefix: Sequence[int]) -> Measurement:
        prefix = as_bits(prefix)
        if len(prefix) >= self.depth:
            raise ValidationError(
                f"prefix of length {len(prefix)} has no node in a depth-{self.depth} tree"
            )
        return self._measure_fn(prefix)

    def value(self, bits: Sequence[int], level: int | None = None) -> float:
        """Node value at `level`; with level omitted, `bits` is read as the
        prefix of the node (level = len(bits) + 1).  Trees with
        prefix_valid_v = False require a full path plus an explicit level."""
        bits = as_bits(bits)
        if level is None:
            level = len(bits) + 1
        if not 1 <= level <= self.depth:
            raise ValidationError(f"level {level} outside [1, {self.depth}]")
        if self.prefix_valid_v:
            if len(bits) < level - 1:
                raise ValidationError(
                    f"need at least {level - 1} bits for level {level}, got {len(bits)}"
                )
        elif len(bits) != self.depth:
            raise ValidationError(
                f"{self.construction} node values need a full depth-{self.depth} path"
            )
        return self._value_fn(bits, level)

    def decision_value(self, prefix: Sequence[int]) -> float:
        """Prefix-measurable threshold for the sign-rule adversary; equals the
        node value wherever the value tree itself is prefix-measurable."""
        prefix = as_bits(prefix)
        if len(prefix) >= self.depth:
            raise ValidationError(
                f"prefix of length {len(prefix)} has no node in a depth-{self.depth} tree"
            )
        return self._decision_fn(prefix)


@dataclass(frozen=True)
class WitnessMap:
    """Maps a full path to the state that realizes the margins along it."""

    dim: int
    depth: int
    _fn: Callable[[tuple[int, ...]], DensityMatrix]

    def __call__(self, path: Sequence[int]) -> DensityMatrix:
        bits = as_bits(path)
        if len(bits) != self.depth:
            raise ValidationError(
                f"witness path must have {self.depth} bits, got {len(bits)}"
            )
        return self._fn(bits)


def node_measurement(tree: ShatterTree, prefix: Sequence[int]) -> Measurement:
    return tree.measurement(prefix)


def node_value(tree: ShatterTree, bits: Sequence[int], level: int | None = None) -> float:
    return tree.value(bits, level)


def _basis_vector(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def _halving_partial(bits: tuple[int, ...], terms: int) -> float:
    """1/2 + sum_{j=1}^{terms} eps_j 2^-(j+1): binary-search value after
    `terms` directed halvings (implicit eps_0 = +1)."""
    acc = 0.5
    for j in range(1, terms + 1):
        acc += bits[j - 1] * 2.0 ** (-j - 1)
    return acc


def build_halving_tree(
    basis_index: int, depth: int, n_qubits: int, scaled: bool = False
) -> tuple[ShatterTree, WitnessMap]:
    """Constant-measurement tree |i><i| with binary-search node values.

    Node value at level t: scale * (1/2 + sum_{j<t} eps_j 2^-(j+1)); the
    witness puts squared amplitude scale * (1/2 + sum_{j<=depth-1} ...) on
    |i> and the remainder on |N-1>.  Certified margin: scale * 2^-depth at
    levels 1..depth-1.
    """
    dim = 2**n_qubits
    if not 0 <= basis_index <= dim - 2:
        raise ValidationError(f"basis index {basis_index} outside [0, {dim - 2}]")
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    if depth > MAX_HALVING_DEPTH:
        raise ValidationError(f"depth {depth} rejected: 2^-(depth+1) underflows")
    scale = 1.0 / dim if scaled else 1.0
    meas = Measurement.basis_projector(dim, basis_index)
    perp = dim - 1 if basis_index != dim - 1 else 0

    def value(bits: tuple[int, ...], level: int) -> float:
        return scale * _halving_partial(bits, level - 1)

    def witness(bits: tuple[int, ...]) -> DensityMatrix:
        a2 = scale * _halving_partial(bits, depth - 1)
        vec = np.zeros(dim, dtype=np.complex128)
        vec[basis_index] = np.sqrt(a2)
        vec[perp] = np.sqrt(1.0 - a2)
        return DensityMatrix.from_pure(vec)

    tree = ShatterTree(
        construction="halving",
        n_qubits=n_qubits,
        dim=dim,
        depth=depth,
        certified_depth=depth - 1,
        delta=scale * 2.0**-depth,
        prefix_valid_v=True,
        block=depth,
        _measure_fn=lambda prefix: meas,
        _value_fn=value,
        _decision_fn=lambda prefix: value(prefix, len(prefix) + 1),
    )
    return tree, WitnessMap(dim, depth, witness)


def build_von_neumann_tree(levels: int, n_qubits: int) -> tuple[ShatterTree, WitnessMap]:
    """Basis-projector tree with the constant value 1/(2*levels).

    Level t plays |t-1><t-1|; the witness is the uniform superposition over
    {|i> : eps_{i+1} = +1, i <= levels-2} plus the anchor |N-1>.  The tree
    has depth levels-1 (one bit per certified level), margin 1/(2*levels)
    everywhere.
    """
    dim = 2**n_qubits
    if not 2 <= levels <= dim:
        raise ValidationError(f"levels must be in [2, {dim}], got {levels}")
    depth = levels - 1
    v_const = 1.0 / (2.0 * levels)
    cache = [Measurement.basis_projector(dim, t - 1) for t in range(1, depth + 1)]

    def witness(bits: tuple[int, ...]) -> DensityMatrix:
        support = [i for i in range(levels - 1) if bits[i] == 1] + [dim - 1]
        vec = np.zeros(dim, dtype=np.complex128)
        vec[support] = 1.0 / np.sqrt(len(support))
        return DensityMatrix.from_pure(vec)

    tree = ShatterTree(
        construction="von_neumann",
        n_qubits=n_qubits,
        dim=dim,
        depth=depth,
        certified_depth=depth,
        delta=v_const,
        prefix_valid_v=True,
        block=levels,
        _measure_fn=lambda prefix: cache[len(prefix)],
        _value_fn=lambda bits, level: v_const,
        _decision_fn=lambda prefix: v_const,
    )
    return tree, WitnessMap(dim, depth, witness)


def _block_value(bits: tuple[int, ...], level: int, block: int, amp: float) -> float:
    """amp * (1 + sum_{k=1}^{tt} eps_{k + block*tp} 2^-k) for the block
    construction at 1-based `level`."""
    tp = (level - 1) // block
    tt = level - 1 - block * tp
    acc = 1.0
    for k in range(1, tt + 1):
        acc += bits[k + block * tp - 1] * 2.0**-k
    return amp * acc


def build_vn_halving_tree(block_depth: int, n_qubits: int) -> tuple[ShatterTree, WitnessMap]:
    """Basis-projector tree of depth block_depth*(N-1) whose blocks run a
    halving refinement per coordinate.

    Block tp plays |tp><tp|; node values are 2^-(n+1) * (1 + sum eps 2^-k)
    within each block; the witness squared amplitude on |i> is the block-i
    endpoint value plus a 2^-(block_depth+n+1) half-step carried by the
    block's final bit.  Margin 2^-(n+block_depth+1) at every level.
    """
    dim = 2**n_qubits
    if block_depth < 1:
        raise ValidationError("block depth must be >= 1")
    depth = block_depth * (dim - 1)
    amp = 2.0 ** -(n_qubits + 1)
    step = 2.0 ** -(block_depth + n_qubits + 1)
    cache = [Measurement.basis_projector(dim, i) for i in range(dim - 1)]

    def value(bits: tuple[int, ...], level: int) -> float:
        return _block_value(bits, level, block_depth, amp)

    def witness(bits: tuple[int, ...]) -> DensityMatrix:
        amps2 = np.empty(dim)
        for i in range(dim - 1):
            end = (i + 1) * block_depth
            amps2[i] = value(bits, end) + step * bits[end - 1]
        total = amps2[: dim - 1].sum()
        if total > 1.0 + 1e-12:
            raise ValidationError(f"witness amplitudes sum to {total!r} > 1")
        amps2[dim - 1] = 1.0 - total
        return DensityMatrix.from_pure(np.sqrt(amps2).astype(np.complex128))

    tree = ShatterTree(
        construction="vn_halving",
        n_qubits=n_qubits,
        dim=dim,
        depth=depth,
        certified_depth=depth,
        delta=step,
        prefix_valid_v=True,
        block=block_depth,
        _measure_fn=lambda prefix: cache[len(prefix) // block_depth],
        _value_fn=value,
        _decision_fn=lambda prefix: value(prefix, len(prefix) + 1),
    )
    return tree, WitnessMap(dim, depth, witness)


def _plus_projectors(dim: int) -> list[Measurement]:
    """E_i = projector onto (|0> + |i>)/sqrt(2) for i = 1..N-1."""
    out = []
    for i in range(1, dim):
        vec = np.zeros(dim, dtype=np.complex128)
        vec[0] = vec[i] = 1.0 / np.sqrt(2.0)
        out.append(projector(PureState(vec)))
    return out


def _row_entries(bits: tuple[int, ...], block: int, amp: float, count: int) -> np.ndarray:
    """a_i = block-i endpoint value + amp*2^-block carried by the block's
    final bit, for i = 1..count."""
    step = amp * 2.0**-block
    out = np.empty(count)
    for i in range(1, count + 1):
        end = i * block
        out[i - 1] = _block_value(bits, end, block, amp) + step * bits[end - 1]
    return out


def build_general_tree(block_depth: int, n_qubits: int) -> tuple[ShatterTree, WitnessMap]:
    """Superposition-projector tree whose witnesses come from star-pattern
    completion.

    Block tp plays the projector onto (|0> + |tp+1>)/sqrt(2); node values are
    the shifted block values (1/(4 sqrt(N-1)))(1 + sum eps 2^-k) +
    (1/4)(1 + 1/(N-1)); the witness completes part(a_1, ..., a_{N-1}) with
    a_i the unshifted block-i endpoint plus half-step.  Margin
    2^-(block_depth+2)/sqrt(N-1) at every level.
    """
    dim = 2**n_qubits
    if block_depth < 1:
        raise ValidationError("block depth must be >= 1")
    depth = block_depth * (dim - 1)
    amp = 0.25 / np.sqrt(dim - 1)
    shift = 0.25 * (1.0 + 1.0 / (dim - 1))
    cache = _plus_projectors(dim)

    def value(bits: tuple[int, ...], level: int) -> float:
        return _block_value(bits, level, block_depth, amp) + shift

    def witness(bits: tuple[int, ...]) -> DensityMatrix:
        row = _row_entries(bits, block_depth, amp, dim - 1)
        return complete_to_density(PartialStarMatrix(dim, row))

    tree = ShatterTree(
        construction="general",
        n_qubits=n_qubits,
        dim=dim,
        depth=depth,
        certified_depth=depth,
        delta=amp * 2.0**-block_depth,
        prefix_valid_v=True,
        block=block_depth,
        _measure_fn=lambda prefix: cache[len(prefix) // block_depth],
        _value_fn=value,
        _decision_fn=lambda prefix: value(prefix, len(prefix) + 1),
    )
    return tree, WitnessMap(dim, depth, witness)


def build_pure_tree(block_depth: int, n_qubits: int) -> tuple[ShatterTree, WitnessMap]:
    """Superposition-projector tree of depth block_depth*(N-2) with explicit
    pure-state witnesses.

    The witness is (1/sqrt(2))|0> + sum a_i |i> + sqrt(1/2 - sum a_i^2)|N-1>
    (square root applied to the tail weight so the vector normalizes).  The
    node value at level t is w_t = u_t/sqrt(2) + (1/2)(1/2 + a_{tp+1}^2) with
    u_t the unshifted block value; w depends on a bit beyond the prefix, so
    prefix_valid_v is False and the sign-rule threshold uses the
    prefix-measurable surrogate 1/4 + u_t/sqrt(2) + u_t^2/2 instead:
    eps_t*(a - u_t) >= amp*2^-block and a, u_t > 0 give
    eps_t*(a^2 - u_t^2) >= 0, so the per-round margin still holds exactly.
    Margin 2^-(block_depth+2)/sqrt(2(N-1)) at every level.
    """
    dim = 2**n_qubits
    if n_qubits < 2:
        raise ValidationError("pure construction needs n_qubits >= 2")
    if block_depth < 1:
        raise ValidationError("block depth must be >= 1")
    depth = block_depth * (dim - 2)
    amp = 0.25 / np.sqrt(dim - 1)
    cache = _plus_projectors(dim)
    root_half = 1.0 / np.sqrt(2.0)

    def u_value(bits: tuple[int, ...], level: int) -> float:
        return _block_value(bits, level, block_depth, amp)

    def value(bits: tuple[int, ...], level: int) -> float:
        tp = (level - 1) // block_depth
        end = (tp + 1) * block_depth
        a = u_value(bits, end) + amp * 2.0**-block_depth * bits[end - 1]
        return u_value(bits, level) * root_half + 0.5 * (0.5 + a * a)

    def decision(prefix: tuple[int, ...]) -> float:
        u = u_value(prefix, len(prefix) + 1)
        return 0.25 + u * root_half + 0.5 * u * u

    def witness(bits: tuple[int, ...]) -> DensityMatrix:
        row = _row_entries(bits, block_depth, amp, dim - 2)
        tail = 0.5 - float(np.sum(row * row))
        if tail < 0.0:
            raise ValidationError(f"tail weight {tail!r} negative")
        vec = np.zeros(dim, dtype=np.complex128)
        vec[0] = root_half
        vec[1 : dim - 1] = row
        vec[dim - 1] = np.sqrt(tail)
        return DensityMatrix.from_pure(vec)

    tree = ShatterTree(
        construction="pure",
        n_qubits=n_qubits,
        dim=dim,
        depth=depth,
        certified_depth=depth,
        delta=amp * 2.0**-block_depth * root_half,
        prefix_valid_v=False,
        block=block_depth,
        _measure_fn=lambda prefix: cache[len(prefix) // block_depth],
        _value_fn=value,
        _decision_fn=decision,
    )
    return tree, WitnessMap(dim, depth, witness)


def build_construction(
    construction: str,
    n_qubits: int,
    block_depth: int,
    *,
    basis_index: int = 0,
    scaled: bool = False,
) -> tuple[ShatterTree, WitnessMap]:
    """Dispatch a construction by tag; `block_depth` is the builder's T."""
    if construction == "halving":
        return build_halving_tree(basis_index, block_depth, n_qubits, scaled=scaled)
    if construction == "von_neumann":
        return build_von_neumann_tree(block_depth, n_qubits)
    if construction == "vn_halving":
        return build_vn_halving_tree(block_depth, n_qubits)
    if construction == "general":
        return build_general_tree(block_depth, n_qubits)
    if construction == "pure":
        return build_pure_tree(block_depth, n_qubits)
    raise ValidationError(f"unknown construction {construction!r}")
