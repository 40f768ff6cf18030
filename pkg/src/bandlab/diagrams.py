"""Pairing and lumping combinatorics on the glued two-stem edge cycle.

Edges 0..L-1 sit on a circle, edge i joining vertices i and i+1 mod L. The
two distinguished vertices 0 and n are where the stems of lengths n and n'
were glued; they survive every collapse.
"""

from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass
from itertools import combinations, product

STRAIGHT = "straight"
TWISTED = "twisted"

# tag enumeration in min_skeleton_size is 2^(L/2); keep L manageable
_MIN_SKELETON_EDGE_CAP = 16
_BOUGH_EDGE_CAP = 10


class NoCaseError(RuntimeError):
    """The greedy split found no applicable case; indicates a bug, not bad input."""


@dataclass(frozen=True)
class StemCycle:
    """Edge cycle of two stems of lengths n and nprime glued at both ends."""

    n: int
    nprime: int

    def __post_init__(self):
        if self.n < 1 or self.nprime < 1:
            raise ValueError("both stems need at least one edge")

    @property
    def L(self) -> int:
        return self.n + self.nprime

    @property
    def special(self) -> frozenset:
        return frozenset((0, self.n))

    def edges(self):
        return range(self.L)


def _adjacent_pair(a, b, L):
    # unordered edges a, b flank a common vertex iff they are cyclic neighbours
    return (a - b) % L == 1 or (b - a) % L == 1


def detect_parallel(pi, pi2, stems: StemCycle) -> str:
    """Classify two bridges as parallel, antiparallel or neither.

    Both patterns need the four edges to flank two vertices i, j outside the
    glue points: parallel takes the crossed split {i-1, j} / {i, j-1},
    antiparallel the aligned split {i-1, j-1} / {i, j}.
    """
    L = stems.L
    pi = frozenset(pi)
    pi2 = frozenset(pi2)
    if len(pi) != 2 or len(pi2) != 2:
        raise ValueError("bridges must contain two edges")
    if pi == pi2:
        raise ValueError("a bridge cannot be compared with itself")
    edges = pi | pi2
    if len(edges) != 4:
        return "neither"
    es = sorted(edges)
    for split in ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2)):
        a, b, c, d = (es[k] for k in split)
        for (u, uu), (v, vv) in (((a, b), (c, d)), ((b, a), (d, c)),
                                 ((a, b), (d, c)), ((b, a), (c, d))):
            # u, uu = edges i-1, i in that order; v, vv likewise for j
            if (uu - u) % L != 1 or (vv - v) % L != 1:
                continue
            i, j = (u + 1) % L, (v + 1) % L
            if i in stems.special or j in stems.special:
                continue
            if pi in (frozenset((u, vv)), frozenset((uu, v))):
                return "parallel"
            if pi in (frozenset((u, v)), frozenset((uu, vv))):
                return "antiparallel"
    return "neither"


def compatible(pi, pi2, stems: StemCycle) -> bool:
    return detect_parallel(pi, pi2, stems) == "neither"


# ---------------------------------------------------------------------------
# tagged pairings and their skeletons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaggedPairing:
    stems: StemCycle
    bridges: tuple
    tags: tuple  # same order as bridges, values STRAIGHT / TWISTED

    def __post_init__(self):
        bridges = tuple(frozenset(b) for b in self.bridges)
        object.__setattr__(self, "bridges", bridges)
        object.__setattr__(self, "tags", tuple(self.tags))
        covered = [e for b in bridges for e in b]
        if sorted(covered) != list(range(self.stems.L)):
            raise ValueError("bridges must form a perfect matching of the edges")
        if len(self.tags) != len(bridges) or any(t not in (STRAIGHT, TWISTED) for t in self.tags):
            raise ValueError("need one straight/twisted tag per bridge")

    @property
    def size(self) -> int:
        return len(self.bridges)

    def tag_of(self, bridge) -> str:
        return self.tags[self.bridges.index(frozenset(bridge))]


def ladder(n) -> TaggedPairing:
    """All-straight nested pairing {k, 2n-1-k} on stems (n, n)."""
    if n < 1:
        raise ValueError("ladder needs n >= 1")
    stems = StemCycle(n, n)
    bridges = tuple(frozenset((k, 2 * n - 1 - k)) for k in range(n))
    return TaggedPairing(stems, bridges, (STRAIGHT,) * n)


class _CollapseState:
    """Live edge cycle with merged-vertex gap bookkeeping.

    gaps[p] holds the special vertices absorbed into the vertex class
    between live[p-1] and live[p]; a collapse may never erase a gap that
    contains one.
    """

    def __init__(self, tagged: TaggedPairing):
        L = tagged.stems.L
        self.live = list(range(L))
        self.gaps = [frozenset((v,)) & tagged.stems.special for v in range(L)]
        self.partner = {}
        self.tag = {}
        for bridge, tag in zip(tagged.bridges, tagged.tags):
            a, b = sorted(bridge)
            self.partner[a] = b
            self.partner[b] = a
            self.tag[a] = self.tag[b] = tag

    def moves(self):
        live, gaps = self.live, self.gaps
        m = len(live)
        out = []
        for p in range(m):
            if gaps[p]:
                continue
            A, B = live[p - 1], live[p]
            for q in range(p + 1, m):
                if gaps[q]:
                    continue
                C, D = live[q - 1], live[q]
                if len({A, B, C, D}) != 4:
                    continue
                if (self.partner[A] == D and self.partner[B] == C
                        and self.tag[A] == STRAIGHT and self.tag[B] == STRAIGHT):
                    out.append(("parallel", B, C))
                if (self.partner[A] == C and self.partner[B] == D
                        and self.tag[A] == TWISTED and self.tag[B] == TWISTED):
                    out.append(("antiparallel", B, D))
        return out

    def _drop_edge(self, edge):
        r = self.live.index(edge)
        m = len(self.live)
        merged = self.gaps[r] | self.gaps[(r + 1) % m]
        self.gaps[(r + 1) % m] = merged
        del self.live[r]
        del self.gaps[r]

    def apply(self, move):
        _, x, y = move
        del self.partner[x], self.partner[y], self.tag[x], self.tag[y]
        self._drop_edge(x)
        self._drop_edge(y)

    def result(self):
        bridges, tags = [], []
        for e in self.live:
            p = self.partner[e]
            if e < p:
                bridges.append(frozenset((e, p)))
                tags.append(self.tag[e])
        return tuple(bridges), tuple(tags)

    def key(self):
        return (tuple(self.live),
                tuple(self.gaps),
                tuple(sorted((e, self.partner[e], self.tag[e]) for e in self.live)))


@dataclass(frozen=True)
class Skeleton:
    stems: StemCycle
    bridges: tuple
    tags: tuple

    @property
    def size(self) -> int:
        return len(self.bridges)


def skeleton(tagged: TaggedPairing, rng: random.Random | None = None) -> Skeleton:
    """Collapse parallel straight and antiparallel twisted pairs to a fixed point.

    The default order is the first move of a deterministic scan; passing an
    rng applies moves in random order instead, which by confluence must end
    at the same bridge count.
    """
    state = _CollapseState(tagged)
    while True:
        moves = state.moves()
        if not moves:
            break
        state.apply(moves[0] if rng is None else rng.choice(moves))
    bridges, tags = state.result()
    return Skeleton(tagged.stems, bridges, tags)


def skeleton_terminal_sizes(tagged: TaggedPairing) -> set:
    """Bridge counts reachable by every possible collapse order (small inputs)."""
    seen = {}

    def explore(state):
        k = state.key()
        if k in seen:
            return seen[k]
        moves = state.moves()
        if not moves:
            out = {len(state.live) // 2}
        else:
            out = set()
            for mv in moves:
                child = copy.deepcopy(state)
                child.apply(mv)
                out |= explore(child)
        seen[k] = out
        return out

    return explore(_CollapseState(tagged))


def min_skeleton_size(bridges, stems: StemCycle) -> int:
    """m of an untagged pairing: the minimum skeleton size over all taggings."""
    bridges = tuple(frozenset(b) for b in bridges)
    if stems.L > _MIN_SKELETON_EDGE_CAP:
        raise ValueError(f"tag enumeration capped at {_MIN_SKELETON_EDGE_CAP} edges")
    best = len(bridges)
    for tags in product((STRAIGHT, TWISTED), repeat=len(bridges)):
        sz = skeleton(TaggedPairing(stems, bridges, tags)).size
        if sz < best:
            best = sz
            if best == 1:
                break
    return best


# ---------------------------------------------------------------------------
# lumpings and the refining pairing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lumping:
    stems: StemCycle
    lumps: tuple

    def __post_init__(self):
        lumps = tuple(sorted((frozenset(l) for l in self.lumps), key=min))
        object.__setattr__(self, "lumps", lumps)
        covered = [e for l in lumps for e in l]
        if sorted(covered) != list(range(self.stems.L)):
            raise ValueError("lumps must partition the edges")
        if any(len(l) % 2 for l in lumps):
            raise ValueError("every lump must have even size")

    @property
    def p(self) -> int:
        return sum(len(l) - 2 for l in self.lumps)

    def is_pairing(self) -> bool:
        return all(len(l) == 2 for l in self.lumps)


def even_lumpings(L):
    """All partitions of 0..L-1 into even-size blocks."""

    def rec(elems):
        if not elems:
            yield ()
            return
        first, rest = elems[0], elems[1:]
        for size in range(2, len(elems) + 1, 2):
            for comb in combinations(rest, size - 1):
                block = frozenset((first,) + comb)
                rem = tuple(e for e in rest if e not in block)
                for tail in rec(rem):
                    yield (block,) + tail

    yield from rec(tuple(range(L)))


def all_pairings(edges):
    """Perfect matchings of an edge list, deterministic order."""
    edges = sorted(edges)

    def rec(es):
        if not es:
            yield ()
            return
        a = es[0]
        for k in range(1, len(es)):
            b = es[k]
            rest = es[1:k] + es[k + 1:]
            for tail in rec(rest):
                yield (frozenset((a, b)),) + tail

    yield from rec(edges)


@dataclass(frozen=True)
class RefiningPairing:
    stems: StemCycle
    bridges: tuple
    marked: frozenset
    method: str
    violations: tuple = ()


def _split_large_lumps(lumps):
    """Cut every lump of size >= 6 into leading four-lumps plus a remainder."""
    work = sorted((sorted(l) for l in lumps), key=lambda l: l[0])
    out = []
    while work:
        work.sort(key=lambda l: l[0])
        l = work.pop(0)
        if len(l) >= 6:
            work.append(l[:4])
            work.append(l[4:])
        else:
            out.append(frozenset(l))
    return out


def _nbrs(e, L):
    return ((e - 1) % L, (e + 1) % L)


def greedy_refining_pairing(gamma: Lumping) -> RefiningPairing:
    """Refine an even lumping into a pairing whose skeletons stay large.

    Splits big lumps into four-lumps, then resolves each four-lump through
    the case analysis that keeps one marked bridge per four-lump compatible
    with everything else. Stems of combined length at most 8 instead search
    all refining pairings for one with minimum skeleton size 2.
    """
    stems = gamma.stems
    if gamma.is_pairing():
        raise ValueError("input is already a pairing; nothing to refine")
    if stems.L <= 8:
        return _small_refining_pairing(gamma)

    lumps = _split_large_lumps(gamma.lumps)
    p_split = sum(len(l) - 2 for l in lumps)
    if 2 * p_split < gamma.p:
        raise NoCaseError("splitting phase lost more than half of p")

    L = stems.L
    work = sorted(lumps, key=min)
    marked = set()
    steps = 0
    violations = []

    while True:
        fours = [l for l in work if len(l) == 4]
        if not fours:
            break
        gam = min(fours, key=min)
        bridges_now = [l for l in work if len(l) == 2]
        new_pair, mark = _resolve_four_lump(gam, bridges_now, work, stems, violations)
        work.remove(gam)
        work.extend(new_pair)
        steps += 1
        if mark in marked:
            violations.append(f"bridge {sorted(mark)} marked twice")
        marked.add(mark)
        _check_step_properties(new_pair, mark, work, stems, violations)

    bridges = tuple(sorted((l for l in work), key=min))
    return RefiningPairing(stems, bridges, frozenset(marked), "greedy",
                           tuple(violations))


def _resolve_four_lump(gam, bridges, work, stems, violations):
    """Split one four-lump into two bridges; returns (new bridges, marked bridge)."""
    L = stems.L
    es = sorted(gam)

    def clashes(cand):
        return sum(1 for b in bridges if not compatible(cand, b, stems))

    adjacent = [(x, y) for x, y in combinations(es, 2) if _adjacent_pair(x, y, L)]
    if adjacent:
        e1, e2 = adjacent[0]
        shared = e2 if e2 - e1 == 1 else e1  # sorted pair, so only (0, L-1) wraps
        if shared not in stems.special:
            # a walk pair cannot put adjacent edges of one lump at an inner
            # vertex; the guarantees below are void, so instead take the split
            # of the lump with the fewest incompatibilities overall
            violations.append(f"adjacent lump edges {e1},{e2} meet at inner vertex {shared}")
            splits = [(frozenset((es[0], es[k])), frozenset(es[1:k] + es[k + 1:]))
                      for k in (1, 2, 3)]
            def cost(split):
                b1, b2 = split
                return (clashes(b1) + clashes(b2)
                        + (0 if compatible(b1, b2, stems) else 2))
            b1, b2 = min(splits, key=lambda s: (cost(s), sorted(sorted(b) for b in s)))
            mark = min((b1, b2), key=lambda b: (clashes(b), sorted(b)))
            return (b1, b2), mark
        others = [e for e in es if e not in (e1, e2)]
        cands = [frozenset((ei, eo)) for ei in (e1, e2) for eo in others]
        best = min(cands, key=lambda c: (clashes(c), sorted(c)))
        if clashes(best) > 0:
            violations.append(f"adjacent case: no bridge out of {es} clears all bridges")
        rest = frozenset(e for e in es if e not in best)
        return (best, rest), best

    four_lumps = [l for l in work if len(l) == 4 and l != gam]

    # case (a): two edges all of whose neighbours sit in one other four-lump
    for e, e2 in combinations(es, 2):
        flanks = set(_nbrs(e, L)) | set(_nbrs(e2, L))
        host = next((g for g in four_lumps if flanks <= g), None)
        if host is None:
            continue
        cands = [x for x in es if x not in (e, e2)
                 and any(nb not in host for nb in _nbrs(x, L))]
        if not cands:
            raise NoCaseError("case (a): no edge with a neighbour outside the host lump")
        e3 = cands[0]
        cand = frozenset((e, e3))
        rest = frozenset(x for x in es if x not in cand)
        return (cand, rest), cand

    # case (b): an existing bridge whose flanks make up the whole four-lump
    for b in sorted(bridges, key=min):
        e, e2 = sorted(b)
        if set(es) == set(_nbrs(e, L)) | set(_nbrs(e2, L)):
            p1 = frozenset(_nbrs(e, L))
            p2 = frozenset(_nbrs(e2, L))
            return (p1, p2), b

    # case (c)
    cands = [e for e in es
             if len(({(e - 2) % L, (e - 1) % L, (e + 1) % L, (e + 2) % L}
                     & set(es)) - {e}) <= 1]
    if not cands:
        raise NoCaseError("case (c): no sparse edge in the four-lump")
    e0 = cands[0]
    nb0 = set(_nbrs(e0, L))

    def bridged(x, y):
        return frozenset((x, y)) in bridges

    zeta = [e for e in es if e != e0
            and not any(bridged(ne, n0) for ne in _nbrs(e, L) for n0 in nb0)]
    if zeta:
        for e1 in zeta:
            rest = frozenset(e for e in es if e not in (e0, e1))
            bad = sum(1 for b in bridges if not compatible(rest, b, stems))
            if bad <= 1:
                cand = frozenset((e0, e1))
                return (cand, rest), cand
        violations.append(f"case (c1): every partner of {e0} leaves a doubly clashing rest")
        e1 = zeta[0]
        cand = frozenset((e0, e1))
        return (cand, frozenset(e for e in es if e not in cand)), cand

    # case (c2): a bridge from e0's flank to an edge wedged between two of gamma
    pick = None
    for b in sorted(bridges, key=min):
        for f0, f1 in ((min(b), max(b)), (max(b), min(b))):
            if f0 in nb0 and set(_nbrs(f1, L)) <= set(es):
                pick = (f0, f1)
                break
        if pick:
            break
    order = sorted(es)
    i0 = order.index(e0)
    antipodal = order[(i0 + 2) % 4]
    if pick is None or antipodal not in _nbrs(pick[1], L):
        # the wedge geometry the proof derives is absent; fall back to pairing
        # e0 with its antipodal edge, which no flank bridge can ladder against
        violations.append(f"case (c2): wedge around {e0} missing, antipodal fallback")
        cand = frozenset((e0, antipodal))
        return (cand, frozenset(e for e in es if e not in cand)), cand
    f0, f1 = pick
    wedged = sorted(_nbrs(f1, L))
    e2 = antipodal
    e1 = wedged[0] if wedged[1] == e2 else wedged[1]
    e3 = next(e for e in es if e not in (e0, e1, e2))
    g1 = next(g for g in _nbrs(e1, L) if g != f1)
    g2 = next(g for g in _nbrs(e2, L) if g != f1)
    if not bridged(g1, g2):
        cand = frozenset((e1, e2))
        return (cand, frozenset((e0, e3))), cand
    cand = frozenset((e2, e3))
    return (cand, frozenset((e0, e1))), cand


def _check_step_properties(new_pair, mark, work, stems, violations):
    """The step invariants: the marked bridge clashes with nothing, new ones with at most one."""
    bridges = [l for l in work if len(l) == 2]
    for other in bridges:
        if other != mark and not compatible(mark, other, stems):
            violations.append(
                f"marked bridge {sorted(mark)} incompatible with {sorted(other)}")
    for nb in new_pair:
        bad = sum(1 for other in bridges
                  if other != nb and not compatible(nb, other, stems))
        if bad > 1:
            violations.append(f"new bridge {sorted(nb)} incompatible with {bad} bridges")


def _small_refining_pairing(gamma: Lumping) -> RefiningPairing:
    # short cycles: search all refining pairings for one the collapse cannot shrink below 2
    for choice in product(*(tuple(all_pairings(sorted(l))) for l in gamma.lumps)):
        bridges = tuple(b for part in choice for b in part)
        if min_skeleton_size(bridges, gamma.stems) >= 2:
            return RefiningPairing(gamma.stems, tuple(sorted(bridges, key=min)),
                                   frozenset(), "exhaustive-small")
    raise NoCaseError("no refining pairing with skeleton size >= 2 exists")


def refines(bridges, gamma: Lumping) -> bool:
    return all(any(b <= l for l in gamma.lumps) for b in bridges)


# ---------------------------------------------------------------------------
# labeled-walk feasibility (used by tests to filter lumpings)
# ---------------------------------------------------------------------------

def admits_consistent_labeling(gamma: Lumping) -> bool:
    """Whether some vertex labeling realizes the lumping as an actual walk pair.

    Requires every lump's edges to carry one common unordered label pair,
    distinct lumps distinct pairs, and the two-back labels to differ at every
    vertex except the glue points. Labels follow restricted growth, so the
    search runs over set partitions of the vertices.
    """
    stems = gamma.stems
    L = stems.L
    special = stems.special
    lump_of = [None] * L
    for li, l in enumerate(gamma.lumps):
        for e in l:
            lump_of[e] = li
    labels = [None] * L
    lump_pair = [None] * len(gamma.lumps)
    pair_owner = {}

    def place_edge(e):
        # returns True plus an undo flag once the finished edge fits its lump
        pair = frozenset((labels[e], labels[(e + 1) % L]))
        li = lump_of[e]
        if lump_pair[li] is not None:
            return (lump_pair[li] == pair), False
        if pair in pair_owner:
            return False, False
        lump_pair[li] = pair
        pair_owner[pair] = li
        return True, True

    def unplace_edge(e):
        li = lump_of[e]
        del pair_owner[lump_pair[li]]
        lump_pair[li] = None

    def backtrack(v, used):
        if v == L:
            return True
        if (v == L - 1 and (L - 1) not in special
                and labels[L - 2] == labels[0]):
            return False  # two-back clash across the wrap, no label can fix it
        for lab in range(used + 1):
            if v >= 2 and (v - 1) not in special and lab == labels[v - 2]:
                continue
            labels[v] = lab
            undos = []
            ok = True
            edges = [v - 1] if v >= 1 else []
            if v == L - 1:
                edges.append(L - 1)
            for e in edges:
                good, fresh = place_edge(e)
                if fresh:
                    undos.append(e)
                if not good:
                    ok = False
                    break
            if ok and backtrack(v + 1, max(used, lab + 1)):
                return True
            for e in reversed(undos):
                unplace_edge(e)
            labels[v] = None
        return False

    return backtrack(0, 0)


# ---------------------------------------------------------------------------
# tree counting
# ---------------------------------------------------------------------------

def narayana(k, l) -> int:
    """Rooted plane trees with k edges and l leaves, exact."""
    if not 1 <= l <= k:
        raise ValueError("need 1 <= l <= k")
    return math.comb(k - 1, l - 1) * math.comb(k, l - 1) // l


def catalan(k) -> int:
    return math.comb(2 * k, k) // (k + 1)


def plane_trees(k):
    """All rooted plane trees with k edges as nested child tuples."""
    if k == 0:
        yield ()
        return
    for first in range(1, k + 1):
        for sub in plane_trees(first - 1):
            for rest in plane_trees(k - first):
                yield (sub,) + rest


def _leaf_stats(tree):
    # returns (#leaf edges, #non-root vertices owning at least one leaf child)
    leaves = 0
    groups = 0
    stack = [(tree, True)]
    while stack:
        node, is_root = stack.pop()
        pendant = sum(1 for c in node if c == ())
        leaves += pendant
        if pendant and not is_root:
            groups += 1
        for c in node:
            if c != ():
                stack.append((c, False))
    return leaves, groups


def leaf_census(k) -> dict:
    """Counts of k-edge plane trees by leaf number; matches the closed formula."""
    out = {}
    for t in plane_trees(k):
        l, _ = _leaf_stats(t)
        out[l] = out.get(l, 0) + 1
    return out


def count_constrained_boughs(k, f, b) -> int:
    """Non-star rooted plane trees with k edges, f leaf groups away from the
    root and b leftover leaves; checks the k^(2f-2) 4^f 2^b ceiling."""
    if k > _BOUGH_EDGE_CAP:
        raise ValueError(f"bough census capped at {_BOUGH_EDGE_CAP} edges")
    count = 0
    for t in plane_trees(k):
        leaves, groups = _leaf_stats(t)
        if leaves == len(t) == k:
            continue  # star: every edge pendant at the root
        if groups == f and leaves - groups == b:
            count += 1
    if count > k ** (2 * f - 2) * 2 ** (2 * f + b):
        raise AssertionError(f"bough bound violated at k={k}, f={f}, b={b}: {count}")
    return count


def bough_census(k) -> dict:
    """(f, b) -> count over all non-star k-edge plane trees."""
    if k > _BOUGH_EDGE_CAP:
        raise ValueError(f"bough census capped at {_BOUGH_EDGE_CAP} edges")
    out = {}
    for t in plane_trees(k):
        leaves, groups = _leaf_stats(t)
        if leaves == len(t) == k:
            continue
        key = (groups, leaves - groups)
        out[key] = out.get(key, 0) + 1
    return out
