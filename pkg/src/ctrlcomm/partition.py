"""Monochromatic partitions of a target matrix and the bit protocols that resolve them.

A block is a combinatorial rectangle ``rows x cols`` (index sets, not
necessarily contiguous). A partition covers every cell exactly once. When
every block is monochromatic, the agents only have to find out which block
they are in; after that a single cheap control pair produces the value.

Indices are 0-based throughout the library.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Literal, Optional, Sequence, Union

import numpy as np

from .controls import BilinearMap, fb_map
from .errors import InvalidInputError, PreconditionError, TreeConstructionError
from .synthesis import bh_optimal_cost, optimal_cost, shared_info_cost, target_array

SAME_VALUE_TOL = 1e-12
DEFAULT_BUDGET = 50_000
EXACT_MAX_CELLS = 64


@dataclass(frozen=True, order=True)
class PartitionBlock:
    rows: tuple[int, ...]
    cols: tuple[int, ...]

    def __post_init__(self):
        rows, cols = tuple(int(r) for r in self.rows), tuple(int(c) for c in self.cols)
        for name, idx in (("rows", rows), ("cols", cols)):
            if not idx:
                raise InvalidInputError(f"block {name} must be nonempty")
            if idx[0] < 0 or any(b <= a for a, b in zip(idx, idx[1:])):
                raise InvalidInputError(f"block {name} must be strictly increasing and >= 0: {idx}")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    def cells(self) -> Iterator[tuple[int, int]]:
        return itertools.product(self.rows, self.cols)

    def submatrix(self, h) -> np.ndarray:
        return target_array(h)[np.ix_(self.rows, self.cols)]

    def to_dict(self) -> dict:
        return {"rows": list(self.rows), "cols": list(self.cols)}


@dataclass(frozen=True)
class MatrixPartition:
    blocks: tuple[PartitionBlock, ...]
    exact: bool = False  # True only when a search proved the block count minimal

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def __len__(self) -> int:
        return len(self.blocks)

    def block_index(self, i: int, j: int) -> int:
        for k, b in enumerate(self.blocks):
            if i in b.rows and j in b.cols:
                return k
        raise KeyError((i, j))

    def to_dict(self) -> dict:
        return {"blocks": [b.to_dict() for b in self.blocks], "exact": self.exact}

    @classmethod
    def from_dict(cls, d: dict) -> "MatrixPartition":
        return cls(tuple(PartitionBlock(tuple(b["rows"]), tuple(b["cols"])) for b in d["blocks"]), bool(d.get("exact", False)))


def is_monochromatic(h, b: PartitionBlock, tol: float = SAME_VALUE_TOL) -> bool:
    sub = b.submatrix(h)
    return bool(np.max(sub) - np.min(sub) <= tol)


def validate_partition(h, p: MatrixPartition) -> bool:
    """True iff the blocks cover every cell of ``h`` exactly once."""
    m, n = target_array(h).shape
    seen = np.zeros((m, n), dtype=int)
    for b in p.blocks:
        if b.rows[-1] >= m or b.cols[-1] >= n:
            return False
        seen[np.ix_(b.rows, b.cols)] += 1
    return bool(np.all(seen == 1))


# ---------------------------------------------------------------------------
# minimum monochromatic partition


def _value_labels(a: np.ndarray, tol: float = SAME_VALUE_TOL) -> np.ndarray:
    """Integer label per cell; cells within ``tol`` of each other share a label."""
    flat = a.ravel()
    order = np.argsort(flat, kind="stable")
    labels = np.empty(flat.size, dtype=int)
    current, anchor = -1, None
    for idx in order:
        if anchor is None or flat[idx] - anchor > tol:
            current += 1
            anchor = flat[idx]
        labels[idx] = current
    return labels.reshape(a.shape)


class _Grid:
    """Bitmask bookkeeping for rectangle search; cell (i, j) is bit i*n + j."""

    def __init__(self, labels: np.ndarray):
        self.labels = labels
        self.m, self.n = labels.shape

    def bit(self, i: int, j: int) -> int:
        return 1 << (i * self.n + j)

    def rect_mask(self, rows, cols) -> int:
        mask = 0
        for i in rows:
            for j in cols:
                mask |= self.bit(i, j)
        return mask

    def free(self, mask: int, i: int, j: int) -> bool:
        return bool(mask >> (i * self.n + j) & 1)

    def first_free(self, mask: int) -> tuple[int, int]:
        low = (mask & -mask).bit_length() - 1
        return divmod(low, self.n)

    def rectangles_at(self, mask: int, i: int, j: int) -> list[tuple[int, tuple, tuple]]:
        """All monochromatic rectangles of free cells anchored at the first free cell (i, j).

        Because (i, j) is the first free cell in row-major order, any such
        rectangle uses only rows >= i and columns >= j.
        """
        lab = self.labels[i, j]
        rows = [r for r in range(i + 1, self.m) if self.free(mask, r, j) and self.labels[r, j] == lab]
        cols = [c for c in range(j + 1, self.n) if self.free(mask, i, c) and self.labels[i, c] == lab]
        out = []
        for k in range(len(rows) + 1):
            for extra in itertools.combinations(rows, k):
                rset = (i,) + extra
                cmax = [c for c in cols if all(self.free(mask, r, c) and self.labels[r, c] == lab for r in extra)]
                for t in range(len(cmax) + 1):
                    for cextra in itertools.combinations(cmax, t):
                        cset = (j,) + cextra
                        out.append((len(rset) * len(cset), rset, cset))
        out.sort(key=lambda x: -x[0])
        return out

    def fooling_bound(self, mask: int) -> int:
        """Size of a greedy set of free cells no two of which fit in one block."""
        chosen: list[tuple[int, int]] = []
        rest = mask
        while rest:
            i, j = self.first_free(rest)
            rest &= rest - 1
            ok = True
            for k, l in chosen:
                lab = self.labels[i, j]
                if (
                    self.labels[k, l] == lab
                    and self.labels[i, l] == lab
                    and self.labels[k, j] == lab
                    and self.free(mask, i, l)
                    and self.free(mask, k, j)
                ):
                    ok = False
                    break
            if ok:
                chosen.append((i, j))
        return len(chosen)


class _BudgetExhausted(Exception):
    pass


def _largest_rectangle(grid: _Grid, mask: int) -> tuple[tuple, tuple]:
    """Largest monochromatic rectangle of free cells (ties: first found)."""
    m, n = grid.m, grid.n
    transpose = n < m
    short, long_ = (n, m) if transpose else (m, n)

    def cell(s, t):
        return (t, s) if transpose else (s, t)

    best = (0, (), ())
    if short <= 12:
        for k in range(1, short + 1):
            for sset in itertools.combinations(range(short), k):
                groups: dict[int, list[int]] = {}
                for t in range(long_):
                    labs = set()
                    ok = True
                    for s in sset:
                        i, j = cell(s, t)
                        if not grid.free(mask, i, j):
                            ok = False
                            break
                        labs.add(grid.labels[i, j])
                    if ok and len(labs) == 1:
                        groups.setdefault(labs.pop(), []).append(t)
                for tset in groups.values():
                    area = len(sset) * len(tset)
                    if area > best[0]:
                        best = (area, sset, tuple(tset))
    else:
        # seed-and-grow heuristic when subset enumeration is out of reach
        rest = mask
        while rest:
            i0, j0 = grid.first_free(rest)
            rest &= rest - 1
            s0, _ = (j0, i0) if transpose else (i0, j0)
            lab = grid.labels[i0, j0]
            tset = [t for t in range(long_) if grid.free(mask, *cell(s0, t)) and grid.labels[cell(s0, t)] == lab]
            sset = [s for s in range(short) if all(grid.free(mask, *cell(s, t)) and grid.labels[cell(s, t)] == lab for t in tset)]
            area = len(sset) * len(tset)
            if area > best[0]:
                best = (area, tuple(sset), tuple(tset))
    _, sset, tset = best
    return (tset, sset) if transpose else (sset, tset)


def _greedy(grid: _Grid) -> list[tuple[tuple, tuple]]:
    mask = (1 << (grid.m * grid.n)) - 1
    out = []
    while mask:
        rows, cols = _largest_rectangle(grid, mask)
        out.append((rows, cols))
        mask &= ~grid.rect_mask(rows, cols)
    return out


def _to_partition(rects, exact: bool) -> MatrixPartition:
    blocks = sorted(PartitionBlock(tuple(sorted(r)), tuple(sorted(c))) for r, c in rects)
    return MatrixPartition(tuple(blocks), exact=exact)


def min_monochromatic_partition(
    h, budget: int = DEFAULT_BUDGET, mode: Literal["exact", "greedy"] = "exact"
) -> MatrixPartition:
    """Partition ``h`` into as few monochromatic blocks as possible.

    ``mode="exact"`` runs a branch-and-bound over rectangle partitions and
    marks the result ``exact`` when the search finishes within ``budget``
    nodes. Minimum partitions are usually not unique; among them the one
    with the shallowest protocol tree wins, then the lexicographically
    smallest block list. Otherwise (greedy mode, a blown budget, or more
    than 64 cells) the best partition found is returned with ``exact=False``.
    """
    a = target_array(h)
    grid = _Grid(_value_labels(a))
    greedy = _greedy(grid)
    if mode == "greedy" or a.size > EXACT_MAX_CELLS:
        return _to_partition(greedy, exact=False)
    if mode != "exact":
        raise InvalidInputError(f"unknown partition mode {mode!r}")

    full = (1 << a.size) - 1
    search = _CoverSearch(grid, budget)
    try:
        count = search.minimum(full, len(greedy))
    except _BudgetExhausted:
        return _to_partition(search.best or greedy, exact=False)
    if count is None:
        count, optimal = len(greedy), [greedy]
    else:
        optimal = [search.best]
    # second pass: list every minimum partition (bounded) and pick the best protocol
    try:
        optimal = search.all_of_size(full, count)
    except _BudgetExhausted:
        pass
    ranked = []
    for rects in optimal:
        part = _to_partition(rects, exact=True)
        try:
            depth = build_protocol_tree(part, a).depth()
        except TreeConstructionError:
            depth = math.inf
        ranked.append((depth, part.blocks, part))
    ranked.sort(key=lambda r: (r[0], r[1]))
    return ranked[0][2]


class _CoverSearch:
    def __init__(self, grid: _Grid, budget: int):
        self.grid = grid
        self.budget = budget
        self.nodes = 0
        self.best: Optional[list] = None

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.budget:
            raise _BudgetExhausted

    def minimum(self, full: int, upper: int) -> Optional[int]:
        """Smallest cover size below ``upper``; None if ``upper`` is already optimal."""
        grid, memo = self.grid, {}
        limit = [upper]

        def dfs(mask: int, chosen: list) -> None:
            self._tick()
            if not mask:
                if len(chosen) < limit[0]:
                    limit[0] = len(chosen)
                    self.best = list(chosen)
                return
            if len(chosen) + grid.fooling_bound(mask) >= limit[0]:
                return
            if memo.get(mask, math.inf) <= len(chosen):
                return
            memo[mask] = len(chosen)
            i, j = grid.first_free(mask)
            for _, rows, cols in grid.rectangles_at(mask, i, j):
                chosen.append((rows, cols))
                dfs(mask & ~grid.rect_mask(rows, cols), chosen)
                chosen.pop()

        dfs(full, [])
        return None if self.best is None else limit[0]

    def all_of_size(self, full: int, size: int, cap: int = 2000) -> list:
        """Every cover with exactly ``size`` blocks, up to ``cap`` of them.

        Branching on the first free cell generates each partition once.
        """
        grid, out, memo = self.grid, [], {}

        def dfs(mask: int, chosen: list) -> None:
            self._tick()
            if not mask:
                out.append(list(chosen))
                return
            if len(out) >= cap or len(chosen) + grid.fooling_bound(mask) > size:
                return
            if memo.get(mask, math.inf) <= len(chosen):
                return
            before = len(out)
            i, j = grid.first_free(mask)
            for _, rows, cols in grid.rectangles_at(mask, i, j):
                chosen.append((rows, cols))
                dfs(mask & ~grid.rect_mask(rows, cols), chosen)
                chosen.pop()
            if len(out) == before:
                memo[mask] = min(memo.get(mask, math.inf), len(chosen))

        dfs(full, [])
        return out


# ---------------------------------------------------------------------------
# protocol trees

Speaker = Literal["alice", "bob"]


@dataclass(frozen=True)
class Leaf:
    block: int


@dataclass(frozen=True)
class Node:
    """Internal node: the speaker sends 0 if its choice lies in ``zero_set``.

    Alice's choices are row indices, Bob's are column indices.
    """

    speaker: Speaker
    zero_set: tuple[int, ...]
    one_set: tuple[int, ...]
    zero: Union["Node", Leaf]
    one: Union["Node", Leaf]

    @property
    def text(self) -> str:
        what = "row" if self.speaker == "alice" else "column"
        return f"{self.speaker} sends 0 if {what} in {list(self.zero_set)}, else 1"


Tree = Union[Node, Leaf]


@dataclass(frozen=True)
class ProtocolTree:
    root: Tree
    num_blocks: int

    def depth(self) -> int:
        def d(t: Tree) -> int:
            return 0 if isinstance(t, Leaf) else 1 + max(d(t.zero), d(t.one))

        return d(self.root)

    def leaves(self) -> list[int]:
        out = []

        def walk(t: Tree):
            if isinstance(t, Leaf):
                out.append(t.block)
            else:
                walk(t.zero)
                walk(t.one)

        walk(self.root)
        return out

    def route(self, i: int, j: int) -> tuple[int, list[tuple[Speaker, int]]]:
        """Replay the bit exchange for choices (i, j): (block index, [(speaker, bit), ...])."""
        bits = []
        t = self.root
        while isinstance(t, Node):
            choice = i if t.speaker == "alice" else j
            if choice in t.zero_set:
                bit = 0
            elif choice in t.one_set:
                bit = 1
            else:
                raise KeyError(f"choice {choice} not handled at node '{t.text}'")
            bits.append((t.speaker, bit))
            t = t.zero if bit == 0 else t.one
        return t.block, bits

    def to_dict(self) -> dict:
        def enc(t: Tree) -> dict:
            if isinstance(t, Leaf):
                return {"leaf": t.block}
            return {
                "speaker": t.speaker,
                "zero_set": list(t.zero_set),
                "one_set": list(t.one_set),
                "zero": enc(t.zero),
                "one": enc(t.one),
            }

        return {"num_blocks": self.num_blocks, "depth": self.depth(), "root": enc(self.root)}

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolTree":
        def dec(x: dict) -> Tree:
            if "leaf" in x:
                return Leaf(int(x["leaf"]))
            return Node(x["speaker"], tuple(x["zero_set"]), tuple(x["one_set"]), dec(x["zero"]), dec(x["one"]))

        return cls(dec(d["root"]), int(d["num_blocks"]))

    def to_dot(self, partition: Optional[MatrixPartition] = None, h=None) -> str:
        lines = ["digraph protocol {", "  node [fontname=Helvetica];"]
        counter = itertools.count()

        def emit(t: Tree) -> str:
            name = f"n{next(counter)}"
            if isinstance(t, Leaf):
                label = f"block {t.block}"
                if partition is not None:
                    b = partition.blocks[t.block]
                    label += f"\\nrows {list(b.rows)} x cols {list(b.cols)}"
                    if h is not None:
                        label += f"\\nvalue {float(b.submatrix(h)[0, 0]):g}"
                lines.append(f'  {name} [shape=box, label="{label}"];')
            else:
                lines.append(f'  {name} [shape=ellipse, label="{t.speaker}"];')
                for bit, child in ((0, t.zero), (1, t.one)):
                    cname = emit(child)
                    lines.append(f'  {name} -> {cname} [label="{bit}"];')
            return name

        emit(self.root)
        lines.append("}")
        return "\n".join(lines) + "\n"


def _components(indices: Sequence[int], groups: Sequence[Sequence[int]]) -> list[list[int]]:
    """Connected components of ``indices`` where each group glues its members together."""
    parent = {i: i for i in indices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in groups:
        for a, b in zip(g, g[1:]):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    comps: dict[int, list[int]] = {}
    for i in indices:
        comps.setdefault(find(i), []).append(i)
    return sorted(comps.values())


def _best_bipartition(comps: list[list[int]], weight: list[int]):
    """Group components into two sides with block counts as even as possible."""
    total = sum(weight)
    k = len(comps)
    if k <= 16:
        best = None
        # component 0 always goes to the zero side, so each split is seen once
        for mask in range(0, 1 << (k - 1)):
            side1 = [c + 1 for c in range(k - 1) if mask >> c & 1]
            if not side1:
                continue
            w1 = sum(weight[c] for c in side1)
            score = max(w1, total - w1)
            if best is None or score < best[0]:
                best = (score, side1)
        one = set(best[1])
    else:
        order = sorted(range(k), key=lambda c: -weight[c])
        w0 = w1 = 0
        one = set()
        for c in order:
            if w1 < w0:
                one.add(c)
                w1 += weight[c]
            else:
                w0 += weight[c]
        if not one:
            one.add(order[-1])
        if len(one) == k:
            one.discard(0)
    zero_side = sorted(i for c in range(k) if c not in one for i in comps[c])
    one_side = sorted(i for c in one for i in comps[c])
    return max(sum(weight[c] for c in one), total - sum(weight[c] for c in one)), zero_side, one_side


def _choose_split(rows: tuple, cols: tuple, blocks: Sequence[PartitionBlock]):
    """Most even (speaker, zero_side, one_side) split no block straddles, or None."""
    options = []
    for speaker, idx, attr in (("alice", rows, "rows"), ("bob", cols, "cols")):
        groups = [getattr(b, attr) for b in blocks]
        comps = _components(idx, groups)
        if len(comps) < 2:
            continue
        where = {i: c for c, comp in enumerate(comps) for i in comp}
        weight = [0] * len(comps)
        for g in groups:
            weight[where[g[0]]] += 1
        score, zero_side, one_side = _best_bipartition(comps, weight)
        options.append((score, speaker, zero_side, one_side))
    if not options:
        return None
    options.sort(key=lambda o: o[0])  # stable: alice wins ties
    return options[0][1:]


def build_protocol_tree(p: MatrixPartition, h) -> ProtocolTree:
    """Deterministic bit protocol whose leaves are the partition's blocks.

    At each node the candidate set is a rectangle of remaining (rows, cols).
    Alice can speak if the rows split into two groups that no remaining
    block straddles, and likewise Bob with columns. Among the possible
    splits the one dividing the remaining blocks most evenly is used.
    """
    a = target_array(h)
    if not validate_partition(a, p):
        raise PreconditionError("partition does not cover the target exactly once")
    m, n = a.shape

    def build(rows: tuple, cols: tuple, blocks: list[int]) -> Tree:
        if len(blocks) == 1:
            return Leaf(blocks[0])
        split = _choose_split(rows, cols, [p.blocks[k] for k in blocks])
        if split is None:
            raise TreeConstructionError(
                f"blocks {blocks} on rows {list(rows)} x cols {list(cols)} cannot be separated by either agent"
            )
        speaker, zero_side, one_side = split
        attr = "rows" if speaker == "alice" else "cols"
        zs = set(zero_side)
        b0 = [k for k in blocks if getattr(p.blocks[k], attr)[0] in zs]
        b1 = [k for k in blocks if getattr(p.blocks[k], attr)[0] not in zs]
        z0, z1 = tuple(zero_side), tuple(one_side)
        if speaker == "alice":
            return Node(speaker, z0, z1, build(z0, cols, b0), build(z1, cols, b1))
        return Node(speaker, z0, z1, build(rows, z0, b0), build(rows, z1, b1))

    return ProtocolTree(build(tuple(range(m)), tuple(range(n)), list(range(len(p)))), len(p))


def refine_for_protocol(p: MatrixPartition, h) -> MatrixPartition:
    """Split blocks just enough that ``build_protocol_tree`` succeeds.

    Wherever no agent can split the candidate rectangle cleanly, Alice (or
    Bob, if the first block spans every remaining row) separates the first
    block's rows from the rest and every straddling block is cut in two.
    Pieces of a monochromatic block stay monochromatic. A partition that
    already admits a tree comes back unchanged.
    """
    a = target_array(h)
    if not validate_partition(a, p):
        raise PreconditionError("partition does not cover the target exactly once")
    m, n = a.shape
    out: list[PartitionBlock] = []

    def cut(blocks, attr, side):
        inside, outside = [], []
        for b in blocks:
            idx = getattr(b, attr)
            keep = tuple(i for i in idx if i in side)
            rest = tuple(i for i in idx if i not in side)
            for part, dest in ((keep, inside), (rest, outside)):
                if part:
                    dest.append(PartitionBlock(part, b.cols) if attr == "rows" else PartitionBlock(b.rows, part))
        return inside, outside

    def walk(rows: tuple, cols: tuple, blocks: list[PartitionBlock]) -> None:
        if len(blocks) == 1:
            out.append(blocks[0])
            return
        split = _choose_split(rows, cols, blocks)
        if split is None:
            first = blocks[0]
            if len(first.rows) < len(rows):
                speaker, zero_side = "alice", first.rows
            else:
                speaker, zero_side = "bob", first.cols
            one_side = tuple(i for i in (rows if speaker == "alice" else cols) if i not in set(zero_side))
        else:
            speaker, zero_side, one_side = split
        attr = "rows" if speaker == "alice" else "cols"
        b0, b1 = cut(blocks, attr, set(zero_side))
        if speaker == "alice":
            walk(tuple(zero_side), cols, b0)
            walk(tuple(one_side), cols, b1)
        else:
            walk(rows, tuple(zero_side), b0)
            walk(rows, tuple(one_side), b1)

    walk(tuple(range(m)), tuple(range(n)), list(p.blocks))
    if len(out) == len(p):
        return p
    return MatrixPartition(tuple(sorted(out)), exact=False)


def protocol_complexity(t: ProtocolTree) -> int:
    """Worst-case bits through the plant: each tree level costs agent -> plant -> agent."""
    return 2 * t.depth()


# ---------------------------------------------------------------------------
# costs


@dataclass(frozen=True)
class PartitionCost:
    average: float  # A = (1/mn) sum_k m_k n_k C_hat(H_k)
    lower_bound: float  # (2 / (mn sigma_1(F))) sum |H_ij|
    block_costs: tuple[float, ...] = field(default=())


def partition_cost_A(h, p: MatrixPartition, f: Optional[BilinearMap] = None) -> PartitionCost:
    a = target_array(h)
    if not validate_partition(a, p):
        raise PreconditionError("partition does not cover the target exactly once")
    m, n = a.shape
    costs = []
    for k, b in enumerate(p.blocks):
        sub = b.submatrix(a)
        fk = fb_map(2 * max(sub.shape)) if f is None else f
        try:
            costs.append(optimal_cost(sub, fk))
        except Exception as exc:  # re-raise with the block named
            raise type(exc)(f"block {k} (rows {list(b.rows)}, cols {list(b.cols)}): {exc}") from exc
    avg = sum(b.shape[0] * b.shape[1] * c for b, c in zip(p.blocks, costs)) / (m * n)
    bound = shared_info_cost(a, f)
    if avg < bound - 1e-9 * max(1.0, bound):
        raise ArithmeticError(f"partition cost {avg} fell below the shared-information bound {bound}")
    return PartitionCost(average=float(avg), lower_bound=bound, block_costs=tuple(costs))


@dataclass(frozen=True)
class BitValue:
    single_round_cost: float
    partition_cost: float
    complexity: int
    value: Optional[float]  # None when no bits are exchanged


def value_of_bit(h, f: Optional[BilinearMap], t: ProtocolTree, p: MatrixPartition) -> BitValue:
    """Energy saved per communicated bit: (C_hat(H) - A) / protocol complexity."""
    a = target_array(h)
    for k, b in enumerate(p.blocks):
        if not is_monochromatic(a, b):
            raise PreconditionError(f"block {k} is not monochromatic")
    single = bh_optimal_cost(a) if f is None or f.kind == "diagonal-bh" else optimal_cost(a, f)
    avg = partition_cost_A(a, p, f).average
    bits = protocol_complexity(t)
    return BitValue(single, avg, bits, (single - avg) / bits if bits else None)
