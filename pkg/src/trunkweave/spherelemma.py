"""
spherelemma.py
--------------

Exhaustive verification of the circle-system lemma on the sphere.

A configuration is a system of m disjoint circles on S^2 (encoded by
their nesting forest), a proper 2-coloring of the m+1 complementary
regions into surfaces and gaps (colors alternate across every circle, so
each circle bounds exactly one surface), and an essential/inessential
label per circle.  With n_j the number of essential boundary circles of
surface region j, the claim checked here is:

    if (i) for every surface j and every essential boundary circle c of
    j, the disk on the far side of c contains a different surface with at
    least one essential boundary circle, and (ii) some n_j > 0, then

        sum over surfaces with odd n_j of (2 - n_j)  >  0.

The checker enumerates every isomorphism class of nesting forests up to
a circle budget, both colorings, and all 2^m labelings, and evaluates
the implication exactly in integer arithmetic.  The Euler identity
sum over all regions of (2 - #boundaries) == 2 is asserted along the way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .errors import InvalidInputError

MAX_CIRCLES = 12   # 2^m labelings per forest; beyond this runtime explodes

SURFACE = "surface"
GAP = "gap"


# ---------------------------------------------------------------------------
# rooted forest enumeration (unordered, unlabeled)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _trees(n):
    """Canonical rooted trees with n nodes, as sorted tuples of child trees."""
    if n == 1:
        return ((),)
    out = []
    for forest in _forests_of_trees(n - 1):
        out.append(forest)
    return tuple(out)


@lru_cache(maxsize=None)
def _forests_of_trees(n):
    """Canonical multisets of trees with n total nodes (sorted tuples)."""
    results = []

    def rec(remaining, bound, acc):
        if remaining == 0:
            results.append(tuple(acc))
            return
        for size in range(min(remaining, bound[0]), 0, -1):
            trees = _trees(size)
            start = bound[1] if size == bound[0] else 0
            for idx in range(start, len(trees)):
                acc.append(trees[idx])
                rec(remaining - size, (size, idx), acc)
                acc.pop()

    rec(n, (n, 0), [])
    return tuple(results)


def _tree_code(tree):
    return "(" + "".join(sorted(_tree_code(c) for c in tree)) + ")"


@dataclass(frozen=True)
class NestingForest:
    """Containment structure of m disjoint circles on the sphere.

    parent[i] is the index of the smallest circle properly containing
    circle i, or -1 for an outermost circle.  canonical_code is identical
    for isomorphic forests (children are unordered).
    """
    m: int
    parent: tuple
    canonical_code: str

    @property
    def children(self):
        kids = [[] for _ in range(self.m)]
        for i, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(i)
        return kids

    @property
    def roots(self):
        return [i for i, p in enumerate(self.parent) if p < 0]

    def depths(self):
        out = [0] * self.m
        for i in range(self.m):   # parents always precede children (see _flatten)
            out[i] = 0 if self.parent[i] < 0 else out[self.parent[i]] + 1
        return out

    def subtree_masks(self):
        masks = [1 << i for i in range(self.m)]
        for i in range(self.m - 1, -1, -1):
            p = self.parent[i]
            if p >= 0:
                masks[p] |= masks[i]
        return masks


def _flatten(forest_of_trees):
    """Parent array with parents preceding children (preorder)."""
    parent = []

    def walk(tree, parent_idx):
        my = len(parent)
        parent.append(parent_idx)
        for child in tree:
            walk(child, my)

    for tree in forest_of_trees:
        walk(tree, -1)
    return tuple(parent)


def enumerate_forests(m: int):
    """All isomorphism classes of nesting forests on m circles."""
    if not 1 <= m <= MAX_CIRCLES:
        raise InvalidInputError(f"m must be between 1 and {MAX_CIRCLES}")
    out = []
    for forest in _forests_of_trees(m):
        code = "".join(sorted(_tree_code(t) for t in forest))
        out.append(NestingForest(m, _flatten(forest), code))
    return out


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------

class _ForestTables:
    """Per-forest region structure shared by both colorings and all labelings.

    Region i (i < m) is the area inside circle i and outside its children;
    region m is the outer region.  Regions adjacent across a circle differ
    in depth parity, so the two proper colorings are the two parities.
    """

    def __init__(self, forest: NestingForest):
        m = forest.m
        self.forest = forest
        self.m = m
        self.region_count = m + 1
        kids = forest.children
        depths = forest.depths()
        self.region_depth = [d + 1 for d in depths] + [0]
        self.boundary = [[i] + kids[i] for i in range(m)] + [forest.roots]
        self.boundary_mask = [sum(1 << c for c in b) for b in self.boundary]
        # regions on the inner side of each circle: the circle's own region
        # plus every region of circles in its subtree
        sub = forest.subtree_masks()
        self.inside_regions = []
        for c in range(m):
            mask = 0
            for i in range(m):
                if sub[c] >> i & 1:
                    mask |= 1 << i
            self.inside_regions.append(mask)
        self.all_regions_mask = (1 << self.region_count) - 1
        # Euler identity: sum of (2 - b) over regions is exactly 2
        self.euler_sum = sum(2 - len(b) for b in self.boundary)

    def surface_regions(self, coloring: int):
        """Region ids colored as surfaces; coloring 0 makes the outer region a surface."""
        return [r for r in range(self.region_count)
                if (self.region_depth[r] + coloring) % 2 == 0]


@dataclass(frozen=True)
class SphereConfiguration:
    """One (forest, coloring, essential labeling) triple.

    coloring 0 paints the outer region as a surface; essential is a
    bitmask over circles.
    """
    forest: NestingForest
    coloring: int
    essential: int
    _tables: _ForestTables = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.coloring not in (0, 1):
            raise InvalidInputError("coloring must be 0 or 1")
        if not 0 <= self.essential < (1 << self.forest.m):
            raise InvalidInputError("essential labeling out of range")
        if self._tables is None:
            object.__setattr__(self, "_tables", _ForestTables(self.forest))

    # -- structure ----------------------------------------------------------

    @property
    def regions(self):
        return range(self._tables.region_count)

    def region_boundary_circles(self, region):
        return tuple(self._tables.boundary[region])

    def is_surface(self, region):
        return (self._tables.region_depth[region] + self.coloring) % 2 == 0

    def surface_regions(self):
        return self._tables.surface_regions(self.coloring)

    def essential_count(self, region):
        return (self._tables.boundary_mask[region] & self.essential).bit_count()


def colorings(forest: NestingForest):
    """The two proper alternating colorings of a forest's regions.

    Returned as region -> color maps; index 0 paints the outer region a
    surface, index 1 a gap.
    """
    tables = _ForestTables(forest)
    out = []
    for c in (0, 1):
        out.append({r: (SURFACE if (tables.region_depth[r] + c) % 2 == 0 else GAP)
                    for r in range(tables.region_count)})
    return out


def region_euler(config: SphereConfiguration, region) -> int:
    """Euler characteristic of a planar region: 2 minus its boundary count."""
    return 2 - len(config.region_boundary_circles(region))


def euler_sum_check(config: SphereConfiguration) -> bool:
    """Whether the region Euler characteristics sum to chi(S^2) = 2 exactly."""
    return sum(region_euler(config, r) for r in config.regions) == 2


def hypothesis_holds(config: SphereConfiguration) -> bool:
    """Condition (i) far-side essential surfaces and (ii) some n_j > 0."""
    t = config._tables
    e = config.essential
    active = 0
    for r in t.surface_regions(config.coloring):
        if t.boundary_mask[r] & e:
            active |= 1 << r
    if active == 0:
        return False
    for r in t.surface_regions(config.coloring):
        bits = t.boundary_mask[r] & e
        while bits:
            c = (bits & -bits).bit_length() - 1
            bits &= bits - 1
            inside = t.inside_regions[c]
            far = inside if not (inside >> r & 1) else (t.all_regions_mask & ~inside)
            if not (far & active & ~(1 << r)):
                return False
    return True


def conclusion_value(config: SphereConfiguration) -> int:
    """Sum of (2 - n_j) over surface regions with odd n_j."""
    total = 0
    for r in config.surface_regions():
        n_j = config.essential_count(r)
        if n_j % 2 == 1:
            total += 2 - n_j
    return total


# ---------------------------------------------------------------------------
# exhaustive sweep
# ---------------------------------------------------------------------------

@dataclass
class LemmaReport:
    """Outcome of the exhaustive sweep up to max_m circles.

    counterexamples lists hypothesis-passing configurations whose
    conclusion value fails to be positive, as (canonical forest code,
    coloring index, essential bitmask) triples; sharpening_violations and
    gap_bound_violations cover the two filtered strengthenings (see
    exhaustive_check).  case_counts tallies how many hypothesis-passing
    configurations fall in each structural case: "all-essential",
    "mixed-covered" (every surface meets an essential circle but some
    circle is inessential), "mixed-bare" (some surface has n_j = 0).
    """
    max_m: int
    configurations_checked: int = 0
    hypothesis_passing: int = 0
    counterexamples: list = field(default_factory=list)
    sharpening_violations: list = field(default_factory=list)
    gap_bound_violations: list = field(default_factory=list)
    euler_failures: int = 0
    case_counts: dict = field(default_factory=lambda: {
        "all-essential": 0, "mixed-covered": 0, "mixed-bare": 0})

    @property
    def ok(self):
        return (not self.counterexamples and not self.sharpening_violations
                and not self.gap_bound_violations and self.euler_failures == 0)


def exhaustive_check(max_m: int) -> LemmaReport:
    """Sweep every configuration with up to max_m circles.

    For each forest class x 2 colorings x 2^m essential labelings:
    whenever the hypothesis holds, assert conclusion_value > 0.  Two
    strengthenings from the structure of the argument are asserted on
    their own filtered sets: with every n_j >= 1 and at least one
    inessential circle present the sum is at least 2, and with all
    circles essential every gap region has at least 2 boundary circles.
    """
    if not 1 <= max_m <= MAX_CIRCLES:
        raise InvalidInputError(f"max_m must be between 1 and {MAX_CIRCLES}")
    report = LemmaReport(max_m)

    for m in range(1, max_m + 1):
        full = (1 << m) - 1
        for forest in enumerate_forests(m):
            t = _ForestTables(forest)
            if t.euler_sum != 2:
                report.euler_failures += 1
            for coloring in (0, 1):
                surfaces = t.surface_regions(coloring)
                gaps = [r for r in range(t.region_count) if r not in surfaces]
                s_masks = [t.boundary_mask[r] for r in surfaces]
                s_bits = [1 << r for r in surfaces]
                for e in range(1 << m):
                    report.configurations_checked += 1
                    active = 0
                    for mask, bit in zip(s_masks, s_bits):
                        if mask & e:
                            active |= bit
                    if active == 0:
                        continue   # condition (ii) fails
                    holds = True
                    for r, mask, bit in zip(surfaces, s_masks, s_bits):
                        bits = mask & e
                        while bits:
                            c = (bits & -bits).bit_length() - 1
                            bits &= bits - 1
                            inside = t.inside_regions[c]
                            far = inside if not (inside >> r & 1) \
                                else (t.all_regions_mask & ~inside)
                            if not (far & active & ~bit):
                                holds = False
                                break
                        if not holds:
                            break
                    if not holds:
                        continue

                    report.hypothesis_passing += 1
                    key = (forest.canonical_code, coloring, e)

                    value = 0
                    min_n = None
                    for mask in s_masks:
                        n_j = (mask & e).bit_count()
                        min_n = n_j if min_n is None else min(min_n, n_j)
                        if n_j % 2 == 1:
                            value += 2 - n_j
                    if value <= 0:
                        report.counterexamples.append(key)

                    if e == full:
                        report.case_counts["all-essential"] += 1
                        for r in gaps:
                            if len(t.boundary[r]) < 2:
                                report.gap_bound_violations.append(key)
                                break
                    elif min_n is not None and min_n >= 1:
                        report.case_counts["mixed-covered"] += 1
                        if value < 2:
                            report.sharpening_violations.append(key)
                    else:
                        report.case_counts["mixed-bare"] += 1
    return report
