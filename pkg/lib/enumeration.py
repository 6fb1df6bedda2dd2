"""Exact counts of DAGs, CStrees and compatibly labeled staged trees, plus the
brute-force generators used to check them.

All counts are Python ints (exact). Cubical Bell numbers come from an exact
cover over the faces of the cube, memoised on the covered-vertex bitmask.

Usage:
    count_cstrees(4)                 # 59136
    count("staged", 3).value         # 180
"""

import itertools
import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass

from .dag import Dag
from .errors import GraphError, OutOfRangeError, UnsupportedError
from .helpers import prefix_grid
from .model import Context, CStree, Stage, VariableSpec

log = logging.getLogger(__name__)

# Partitions of the 5-cube into faces; out of reach for the exact cover here.
TABULATED_CUBICAL_BELL = {6: 71319425714}
MAX_CUBICAL_BELL = 6
COUNT_KINDS = ("cstrees", "staged", "bell", "cubical-bell", "dags")


@dataclass(frozen=True)
class CountResult:
    value: int
    tabulated: bool = False

    def to_dict(self) -> dict:
        return {"value": self.value, "tabulated": self.tabulated}


def _check_nonnegative(n: int, name: str = "n"):
    if n < 0:
        raise OutOfRangeError(f"{name} must be non-negative, got {n}", **{name: n})


# ── Bell numbers ──

def bell(n: int) -> int:
    """n-th Bell number via the Bell triangle."""
    _check_nonnegative(n)
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def set_partitions(items) -> Iterator[list[list]]:
    """Every partition of `items` into nonempty blocks."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in set_partitions(rest):
        yield [[first]] + partition
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1:]


# ── Cube faces ──

def _cube_faces(n: int) -> list[int]:
    """Vertex bitmasks of every face of the n-cube (vertex index = bit pattern)."""
    faces = []
    for pattern in itertools.product((0, 1, None), repeat=n):
        mask = 0
        for vertex in range(2 ** n):
            if all(x is None or (vertex >> (n - 1 - i)) & 1 == x for i, x in enumerate(pattern)):
                mask |= 1 << vertex
        faces.append(mask)
    return faces


def _count_face_covers(n: int) -> int:
    faces = _cube_faces(n)
    full = (1 << 2 ** n) - 1
    by_vertex = [[f for f in faces if f >> v & 1] for v in range(2 ** n)]
    memo = {full: 1}

    def covers(covered: int) -> int:
        if covered in memo:
            return memo[covered]
        free = ~covered & full
        lowest = (free & -free).bit_length() - 1
        total = sum(covers(covered | f) for f in by_vertex[lowest] if not f & covered)
        memo[covered] = total
        return total

    result = covers(0)
    log.debug(f"Face covers of the {n}-cube: {result} ({len(memo)} states)")
    return result


def cubical_bell_result(m: int) -> CountResult:
    if m < 1:
        raise OutOfRangeError(f"cubical Bell numbers start at m=1, got {m}", m=m)
    if m > MAX_CUBICAL_BELL:
        raise UnsupportedError(f"cubical Bell number B^c_{m} is not available (m <= {MAX_CUBICAL_BELL})", m=m)
    if m in TABULATED_CUBICAL_BELL:
        return CountResult(TABULATED_CUBICAL_BELL[m], tabulated=True)
    return CountResult(_count_face_covers(m - 1))


def cubical_bell(m: int) -> int:
    """Partitions of the vertices of the (m-1)-cube into faces."""
    return cubical_bell_result(m).value


# ── Tree and graph counts ──

def count_cstrees_result(p: int) -> CountResult:
    if p < 1:
        raise OutOfRangeError(f"p must be at least 1, got {p}", p=p)
    factors = [cubical_bell_result(k) for k in range(1, p + 1)]
    return CountResult(math.factorial(p) * math.prod(f.value for f in factors),
                       tabulated=any(f.tabulated for f in factors))


def count_cstrees(p: int) -> int:
    """CStrees on p binary variables: p! times the product of B^c_1..B^c_p."""
    return count_cstrees_result(p).value


def count_compatible_staged_trees(p: int) -> int:
    """Compatibly labeled staged trees on p binary variables."""
    if p < 1:
        raise OutOfRangeError(f"p must be at least 1, got {p}", p=p)
    return math.factorial(p) * math.prod(bell(2 ** k) for k in range(1, p))


def count_dags(p: int) -> int:
    """Labeled DAGs on p nodes (Robinson's recurrence)."""
    _check_nonnegative(p, "p")
    counts = [1]
    for n in range(1, p + 1):
        counts.append(sum((-1) ** (k + 1) * math.comb(n, k) * 2 ** (k * (n - k)) * counts[n - k]
                          for k in range(1, n + 1)))
    return counts[p]


def count(what: str, p: int) -> CountResult:
    """Dispatch for the count command."""
    if what == "cstrees":
        return count_cstrees_result(p)
    if what == "staged":
        return CountResult(count_compatible_staged_trees(p))
    if what == "bell":
        return CountResult(bell(p))
    if what == "cubical-bell":
        return cubical_bell_result(p)
    if what == "dags":
        return CountResult(count_dags(p))
    raise UnsupportedError(f"unknown count {what!r}; expected one of {', '.join(COUNT_KINDS)}", what=what)


# ── Brute-force generators ──

def enumerate_dags(p: int) -> Iterator[Dag]:
    """Every labeled DAG on nodes 0..p-1 (each pair absent, forward or backward)."""
    _check_nonnegative(p, "p")
    pairs = list(itertools.combinations(range(p), 2))
    for choice in itertools.product((None, 0, 1), repeat=len(pairs)):
        edges = [(u, v) if c == 0 else (v, u) for (u, v), c in zip(pairs, choice) if c is not None]
        try:
            yield Dag(tuple(range(p)), frozenset(edges))
        except GraphError:
            continue


def face_partitions(cards) -> Iterator[tuple[Context, ...]]:
    """Every partition of the outcome grid over `cards` into faces.

    Faces are contexts over axis indices 0..len(cards)-1.
    """
    cards = tuple(int(d) for d in cards)
    grid = prefix_grid(cards)
    points = [tuple(int(x) for x in grid[:, i]) for i in range(grid.shape[1])]
    index = {pt: i for i, pt in enumerate(points)}
    faces = []
    for pattern in itertools.product(*([None] + list(range(d)) for d in cards)):
        context = Context(tuple((a, x) for a, x in enumerate(pattern) if x is not None))
        mask = 0
        for pt in points:
            if all(x is None or pt[a] == x for a, x in enumerate(pattern)):
                mask |= 1 << index[pt]
        faces.append((mask, context))
    full = (1 << len(points)) - 1

    def extend(covered: int, chosen: tuple[Context, ...]):
        if covered == full:
            yield tuple(sorted(chosen))
            return
        free = ~covered & full
        lowest = free & -free
        for mask, context in faces:
            if mask & lowest and not mask & covered:
                yield from extend(covered | mask, chosen + (context,))

    yield from extend(0, ())


def enumerate_cstrees(variables) -> Iterator[CStree]:
    """Every CStree over the variables: all orderings times all per-level face partitions."""
    variables = tuple(v if isinstance(v, VariableSpec) else VariableSpec(str(v)) for v in variables)
    p = len(variables)
    for order in itertools.permutations(range(p)):
        cards = tuple(variables[v].cardinality for v in order)
        per_level = []
        for level in range(1, p + 1):
            options = []
            for partition in face_partitions(cards[:level - 1]):
                options.append(tuple(Stage(level, Context(tuple((order[a], x) for a, x in face.pairs)))
                                     for face in partition))
            per_level.append(options)
        for choice in itertools.product(*per_level):
            yield CStree(variables, order, tuple(itertools.chain.from_iterable(choice)))
