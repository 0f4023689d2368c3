"""
levelset.py
-----------

Horizontal-plane sections of a triangulated companion tube: stitching
section curves, classifying them in the homology of the torus, grouping
the plane slice of the solid torus into connected components, and the
per-level verification runs built on top of those pieces.

Section curves are stitched combinatorially: a regular height crosses a
triangle in a segment whose endpoints sit on two of its edges, and
crossings on a shared edge are identified by edge id, never by
coordinate proximity.  Each curve is oriented so that the part of the
torus below the section height lies on its left, which makes the curve
system the oriented boundary of the sub-level part of the torus; the
homology classes of a full level therefore sum to zero, which is
asserted on every grouped section.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericalError, RegularValueError
from .geometry import (
    ClosedPolyline,
    TubeMesh,
    level_count,
    level_crossing_points,
    point_to_curve_distance,
)

_RAY_DIRECTIONS = np.array([
    [0.2871, 0.4519, 0.8447],
    [-0.6312, 0.7503, 0.1965],
    [0.5529, -0.3761, 0.7437],
])
_RAY_RETRY_SPINS = [0.0, 0.37, 0.74, 1.11, 1.48]


# ---------------------------------------------------------------------------
# section curves
# ---------------------------------------------------------------------------

@dataclass
class SectionCurve:
    """One closed curve of a plane section of the tube mesh.

    points are the crossing points in walk order; edge_ids / tri_ids
    record which mesh edge each point lies on and which triangle each
    segment crosses.  homology is (meridian coordinate, longitude
    coordinate) with respect to the mesh's marked cycles, for the walk
    orientation (torus-below-the-plane on the left).
    """
    points: np.ndarray
    edge_ids: np.ndarray
    tri_ids: np.ndarray
    homology: tuple

    @property
    def essential(self):
        return self.homology != (0, 0)

    @property
    def xy(self):
        return self.points[:, :2]

    def signed_area(self):
        x, y = self.xy[:, 0], self.xy[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def __len__(self):
        return len(self.points)


def _marked_edges(mesh: TubeMesh):
    """edge_id -> (cycle index, triangle on the directed side) for both cycles."""
    cached = getattr(mesh, "_marked_edge_table", None)
    if cached is not None:
        return cached
    edge_lookup = {tuple(e): i for i, e in enumerate(map(tuple, mesh.edges))}
    table = {}
    for cyc_idx, cycle in enumerate((mesh.meridian_cycle, mesh.longitude_cycle)):
        for a, b in mesh.cycle_edges(cycle):
            eid = edge_lookup[tuple(sorted((a, b)))]
            table[eid] = (cyc_idx, mesh.directed_edge_triangle(a, b))
    mesh._marked_edge_table = table
    return table


def _tri_normals_cached(mesh: TubeMesh):
    cached = getattr(mesh, "_tri_normals", None)
    if cached is None:
        cached = mesh.triangle_normals()
        mesh._tri_normals = cached
    return cached


def section_torus(mesh: TubeMesh, z: float) -> list:
    """Stitch the section curves of the mesh at a regular height z."""
    vz = mesh.vertices[:, 2]
    tol = 1e-12 * mesh.diameter
    if np.abs(vz - z).min() <= tol:
        raise RegularValueError(f"z={z!r} coincides with a mesh vertex height")

    below = vz < z
    tri_below = below[mesh.triangles]
    crossing = tri_below.any(axis=1) & ~tri_below.all(axis=1)
    tri_ids = np.nonzero(crossing)[0]
    if len(tri_ids) == 0:
        return []

    ev = mesh.edges
    straddle = below[ev[:, 0]] != below[ev[:, 1]]
    pa = mesh.vertices[ev[straddle, 0]]
    pb = mesh.vertices[ev[straddle, 1]]
    t = (z - pa[:, 2]) / (pb[:, 2] - pa[:, 2])
    pts = pa + t[:, None] * (pb - pa)
    point_of_edge = dict(zip(np.nonzero(straddle)[0].tolist(), pts))

    normals = _tri_normals_cached(mesh)
    # within each crossing triangle, orient the chord so the below-z part
    # of the surface is on the left: direction = outward normal x z-hat
    next_hop = {}
    for tid in tri_ids:
        eids = [int(e) for e in mesh.tri_edges[tid] if straddle[e]]
        if len(eids) != 2:
            raise NumericalError(f"triangle {tid} crosses the plane in {len(eids)} edges")
        n = normals[tid]
        d = np.array([n[1], -n[0]])          # (n x z-hat) projected to the plane
        if float(np.hypot(*d)) < 1e-14:
            raise NumericalError(f"triangle {tid} is too horizontal to orient its chord")
        p0, p1 = point_of_edge[eids[0]], point_of_edge[eids[1]]
        if (p1[0] - p0[0]) * d[0] + (p1[1] - p0[1]) * d[1] >= 0.0:
            e_in, e_out = eids[0], eids[1]
        else:
            e_in, e_out = eids[1], eids[0]
        next_hop[e_in] = (int(tid), e_out)

    marked = _marked_edges(mesh)
    curves = []
    seen = set()
    for start in sorted(next_hop):
        if start in seen:
            continue
        walk_pts, walk_edges, walk_tris = [], [], []
        crossings = [0, 0]
        e_cur = start
        while True:
            seen.add(e_cur)
            tid, e_out = next_hop[e_cur]
            walk_pts.append(point_of_edge[e_cur])
            walk_edges.append(e_cur)
            walk_tris.append(tid)
            hit = marked.get(e_out)
            if hit is not None:
                cyc_idx, plus_tri = hit
                crossings[cyc_idx] += 1 if tid == plus_tri else -1
            e_cur = e_out
            if e_cur == start:
                break
        homology = (crossings[1], -crossings[0])   # (meridian, longitude) coords
        curves.append(SectionCurve(np.asarray(walk_pts),
                                   np.asarray(walk_edges, dtype=np.int64),
                                   np.asarray(walk_tris, dtype=np.int64),
                                   homology))
    return curves


def curve_class_on_torus(mesh: TubeMesh, curve) -> tuple:
    """Homology class of a closed curve on the mesh, by marked-cycle crossings.

    Accepts a SectionCurve (its crossing record is replayed, so the result
    is independent of the starting point) or a raw (k, 3) polygon whose
    vertices lie strictly inside mesh triangles, consecutive vertices in
    the same or in edge-adjacent triangles.
    """
    if isinstance(curve, SectionCurve):
        marked = _marked_edges(mesh)
        crossings = [0, 0]
        k = len(curve.edge_ids)
        for i in range(k):
            e_out = int(curve.edge_ids[(i + 1) % k])
            tid = int(curve.tri_ids[i])
            hit = marked.get(e_out)
            if hit is not None:
                cyc_idx, plus_tri = hit
                crossings[cyc_idx] += 1 if tid == plus_tri else -1
        return (crossings[1], -crossings[0])
    return _polygon_class(mesh, np.asarray(curve, dtype=np.float64))


def _locate_triangle(mesh, point, tol):
    """Triangle strictly containing the point, or None when ambiguous."""
    tv = mesh.vertices[mesh.triangles]
    a, b, c = tv[:, 0], tv[:, 1], tv[:, 2]
    n = np.cross(b - a, c - a)
    nn = np.linalg.norm(n, axis=1)
    dist = np.abs(np.einsum("ij,ij->i", point[None, :] - a, n / nn[:, None]))
    cand = np.nonzero(dist < tol * 100.0)[0]
    best, best_margin = None, -math.inf
    for tid in cand:
        va, vb, vc = a[tid], b[tid], c[tid]
        v0, v1, v2 = vc - va, vb - va, point - va
        d00, d01, d11 = np.dot(v0, v0), np.dot(v0, v1), np.dot(v1, v1)
        d20, d21 = np.dot(v2, v0), np.dot(v2, v1)
        den = d00 * d11 - d01 * d01
        if abs(den) < 1e-30:
            continue
        u = (d11 * d20 - d01 * d21) / den
        v = (d00 * d21 - d01 * d20) / den
        margin = min(u, v, 1.0 - u - v)
        if margin > best_margin and dist[tid] < tol * 10.0:
            best, best_margin = int(tid), margin
    if best is None or best_margin < 1e-9:
        return None
    return best


def _polygon_class(mesh, poly):
    tol = 1e-9 * mesh.diameter
    tris = []
    for p in poly:
        tid = _locate_triangle(mesh, p, tol)
        if tid is None:
            raise NumericalError(
                "polygon vertex not strictly inside a mesh triangle "
                "(touching an edge or reference-cycle vertex); perturb the query")
        tris.append(tid)
    marked = _marked_edges(mesh)
    edge_of_pair = {}
    for eid, (ta, tb) in enumerate(mesh.edge_tris):
        edge_of_pair[(int(ta), int(tb))] = eid
        edge_of_pair[(int(tb), int(ta))] = eid
    crossings = [0, 0]
    k = len(poly)
    for i in range(k):
        ta, tb = tris[i], tris[(i + 1) % k]
        if ta == tb:
            continue
        eid = edge_of_pair.get((ta, tb))
        if eid is None:
            raise InvalidInputError(
                "consecutive polygon vertices lie in non-adjacent triangles; "
                "the curve does not stay on the mesh")
        hit = marked.get(eid)
        if hit is not None:
            cyc_idx, plus_tri = hit
            crossings[cyc_idx] += 1 if ta == plus_tri else -1
    return (crossings[1], -crossings[0])


# ---------------------------------------------------------------------------
# planar nesting and point-in-solid
# ---------------------------------------------------------------------------

def _points_in_polygon(poly_xy, pts_xy):
    """Even-odd containment of query points in a closed polygon."""
    x1, y1 = poly_xy[:, 0], poly_xy[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    qx = pts_xy[:, 0][:, None]
    qy = pts_xy[:, 1][:, None]
    straddle = (y1[None, :] > qy) != (y2[None, :] > qy)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_at = x1[None, :] + (qy - y1[None, :]) * (x2 - x1)[None, :] / (y2 - y1)[None, :]
    hits = straddle & (qx < x_at)
    return hits.sum(axis=1) % 2 == 1


def _moller_trumbore(origin, direction, tv):
    v0, v1, v2 = tv[:, 0], tv[:, 1], tv[:, 2]
    e1 = v1 - v0
    e2 = v2 - v0
    h = np.cross(direction[None, :], e2)
    a = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(a) > 1e-14
    f = np.where(ok, 1.0 / np.where(ok, a, 1.0), 0.0)
    s = origin[None, :] - v0
    u = f * np.einsum("ij,ij->i", s, h)
    q = np.cross(s, e1)
    v = f * np.einsum("ij,ij->i", direction[None, :], q)
    t = f * np.einsum("ij,ij->i", e2, q)
    return ok, u, v, t


def _ray_parity(mesh, point, direction, t_tol, edge_tol=1e-9):
    ok, u, v, t = _moller_trumbore(point, direction, mesh.vertices[mesh.triangles])
    inside = ok & (u >= -edge_tol) & (v >= -edge_tol) & (u + v <= 1.0 + edge_tol) & (t > t_tol)
    grazing = inside & ((u < edge_tol) | (v < edge_tol) | (u + v > 1.0 - edge_tol))
    if grazing.any():
        return None
    return int(np.count_nonzero(inside)) % 2 == 1


def point_in_tube(mesh: TubeMesh, point) -> bool:
    """Ray-parity containment test against the mesh, majority of 3 rays.

    Ambiguous rays (grazing an edge or vertex) are retried with a
    deterministic ladder of rotated direction triples.
    """
    point = np.asarray(point, dtype=np.float64)
    t_tol = 1e-12 * mesh.diameter
    for spin in _RAY_RETRY_SPINS:
        c, s = math.cos(spin), math.sin(spin)
        votes = []
        for d in _RAY_DIRECTIONS:
            d_rot = np.array([c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]])
            d_rot /= np.linalg.norm(d_rot)
            res = _ray_parity(mesh, point, d_rot, t_tol)
            if res is not None:
                votes.append(res)
        if len(votes) >= 2 and (all(votes) or not any(votes)):
            return votes[0]
        if len(votes) == 3:
            return sum(votes) >= 2
    raise NumericalError("point-in-tube test stayed ambiguous after retries")


def _region_sample(node_idx, curves, children):
    """Interior point of the plane region bounded by a curve and its children.

    Scans vertical lines through the region, decomposes them into
    containment intervals, and returns the midpoint of the widest
    interval lying inside the node curve and outside every child.
    """
    bound = curves[node_idx].xy
    kids = [curves[k].xy for k in children]
    xs = np.unique(np.concatenate([bound[:, 0]] + [k[:, 0] for k in kids]))
    mids = 0.5 * (xs[:-1] + xs[1:])
    widths = np.diff(xs)
    order = np.argsort(-widths, kind="stable")
    best = None
    for x0 in mids[order[:48]]:
        ys = []
        for poly in [bound] + kids:
            x1, x2 = poly[:, 0], np.roll(poly[:, 0], -1)
            y1, y2 = poly[:, 1], np.roll(poly[:, 1], -1)
            hit = (x1 > x0) != (x2 > x0)
            if hit.any():
                ys.append(y1[hit] + (x0 - x1[hit]) * (y2[hit] - y1[hit]) / (x2[hit] - x1[hit]))
        if not ys:
            continue
        ys = np.sort(np.concatenate(ys))
        gaps = np.diff(ys)
        for k in np.argsort(-gaps, kind="stable")[:8]:
            if gaps[k] <= 0.0:
                break
            cand = np.array([x0, 0.5 * (ys[k] + ys[k + 1])])
            in_bound = bool(_points_in_polygon(bound, cand[None, :])[0])
            in_kid = any(bool(_points_in_polygon(kxy, cand[None, :])[0]) for kxy in kids)
            if in_bound and not in_kid:
                if best is None or gaps[k] > best[0]:
                    best = (gaps[k], cand)
        if best is not None:
            return best[1]
    raise NumericalError(f"no interior sample found for region of curve {node_idx}")


@dataclass
class PlaneComponent:
    """A connected component of the plane slice of the solid torus.

    node_curve is the outer boundary in the nesting order; curve_indices
    includes it and the inner boundaries.  boundary_class is the homology
    class of the oriented boundary of the component (outer curve
    counterclockwise, inner ones clockwise).
    """
    node_curve: int
    curve_indices: tuple
    essential_count: int
    principal: bool
    boundary_class: tuple
    depth: int
    k_hits: int = 0


@dataclass
class Grouping:
    """Nesting structure of a level's section curves plus the components."""
    parent: tuple
    depth: tuple
    components: list
    checks: dict = field(default_factory=dict)


def group_components(mesh: TubeMesh, core: ClosedPolyline, z: float, curves) -> Grouping:
    """Partition the plane slice of the solid torus at height z.

    Membership is decided by the nesting order of the section curves
    (containment in the plane flips inside/outside across every curve, so
    odd nesting depth means inside), and verified by a ray-parity
    inside-test against the tube mesh on an interior sample point of
    every region.  The core curve is used for a distance sanity check on
    ambiguous samples.
    """
    if not curves:
        return Grouping((), (), [], {"verified_regions": 0})

    n = len(curves)
    anchors = np.asarray([c.xy[0] for c in curves])
    contains = np.zeros((n, n), dtype=bool)
    for j, cj in enumerate(curves):
        inside = _points_in_polygon(cj.xy, anchors)
        contains[:, j] = inside
        contains[j, j] = False
    depth = contains.sum(axis=1)
    parent = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for j in np.nonzero(contains[i])[0]:
            if depth[j] == depth[i] - 1:
                parent[i] = j
    children = [[] for _ in range(n)]
    for i, p in enumerate(parent):
        if p >= 0:
            children[p].append(i)

    verified = 0
    for i in range(n):
        sample_xy = _region_sample(i, curves, children[i])
        sample = np.array([sample_xy[0], sample_xy[1], z])
        want_inside = (depth[i] + 1) % 2 == 1
        got_inside = point_in_tube(mesh, sample)
        if got_inside != want_inside:
            dist = float(point_to_curve_distance(sample[None, :], core)[0])
            margin = abs(dist - mesh.radius)
            if margin > 0.2 * mesh.radius and (dist < mesh.radius) == want_inside:
                got_inside = want_inside   # grazing mesh artifact; core distance decisive
            else:
                raise NumericalError(
                    f"nesting parity and ray parity disagree for region of curve {i} at z={z}")
        verified += 1

    comps = []
    for i in range(n):
        if (depth[i] + 1) % 2 != 1:
            continue
        boundary = (i,) + tuple(children[i])
        ess = sum(1 for b in boundary if curves[b].essential)
        cls = np.zeros(2, dtype=np.int64)
        for b in boundary:
            ccw = np.asarray(curves[b].homology, dtype=np.int64)
            if curves[b].signed_area() < 0.0:
                ccw = -ccw
            cls += ccw if b == i else -ccw
        comps.append(PlaneComponent(
            node_curve=i,
            curve_indices=tuple(sorted(boundary)),
            essential_count=ess,
            principal=ess % 2 == 1,
            boundary_class=(int(cls[0]), int(cls[1])),
            depth=int(depth[i]) + 1,
        ))

    grouping = Grouping(tuple(int(p) for p in parent), tuple(int(d) + 1 for d in depth),
                        comps, {"verified_regions": verified})
    grouping.checks.update(_grouping_invariants(curves, comps))
    return grouping


def _primitive(cls):
    g = math.gcd(abs(cls[0]), abs(cls[1]))
    return g == 1


def _grouping_invariants(curves, comps):
    total = np.zeros(2, dtype=np.int64)
    for c in curves:
        total += np.asarray(c.homology, dtype=np.int64)
    homology_sum_zero = bool((total == 0).all())

    ess_classes = [c.homology for c in curves if c.essential]
    parallel = all(_primitive(h) for h in ess_classes)
    if ess_classes and parallel:
        base = ess_classes[0]
        parallel = all(h == base or (h[0] == -base[0] and h[1] == -base[1])
                       for h in ess_classes)
    parity = len(ess_classes) % 2 == 0

    principal_matches = all(
        (comp.boundary_class != (0, 0)) == comp.principal and
        (comp.boundary_class == (0, 0) or _primitive(comp.boundary_class))
        for comp in comps)
    return {
        "homology_sum_zero": homology_sum_zero,
        "essential_parallel": parallel,
        "essential_parity_even": parity,
        "principal_matches_boundary_class": principal_matches,
    }


def count_principal(grouping: Grouping) -> int:
    """Number of principal components (odd essential boundary count)."""
    return sum(1 for c in grouping.components if c.principal)


def norm_candidate(a: int, b: int) -> int:
    """The norm value contributed by a connected principal piece with a
    essential boundaries and b curve crossings: max(a + b - 2, 0)."""
    if a < 0 or b < 0:
        raise InvalidInputError("norm_candidate arguments must be non-negative")
    return max(a + b - 2, 0)


# ---------------------------------------------------------------------------
# level sections of a (tube, satellite) pair
# ---------------------------------------------------------------------------

@dataclass
class LevelSection:
    """Everything extracted at one regular height."""
    z: float
    torus_curves: list
    grouping: Grouping
    z_count_k: int
    z_principal: int

    @property
    def components(self):
        return self.grouping.components

    @property
    def consistent(self):
        return all(self.grouping.checks.values())


def build_level_section(mesh: TubeMesh, core: ClosedPolyline,
                        satellite: ClosedPolyline, z: float) -> LevelSection:
    """Section the mesh at z, group the slice, and attach satellite hits."""
    curves = section_torus(mesh, z)
    grouping = group_components(mesh, core, z, curves)
    count_k = level_count(satellite, z)
    hits = level_crossing_points(satellite, z)

    comp_of_node = {c.node_curve: c for c in grouping.components}
    assigned = 0
    if len(curves) and len(hits):
        pts_xy = hits[:, :2]
        inside = np.zeros((len(hits), len(curves)), dtype=bool)
        for j, cj in enumerate(curves):
            inside[:, j] = _points_in_polygon(cj.xy, pts_xy)
        for row in inside:
            chain = np.nonzero(row)[0]
            if len(chain) % 2 != 1:
                continue   # a hit outside the solid torus; flagged below
            node = chain[np.argmax([grouping.depth[c] for c in chain])]
            comp = comp_of_node.get(int(node))
            if comp is not None:
                comp.k_hits += 1
                assigned += 1

    grouping.checks["k_hits_account_for_count"] = assigned == count_k
    z_principal = count_principal(grouping)
    grouping.checks["principal_count_even"] = z_principal % 2 == 0
    return LevelSection(z, curves, grouping, count_k, z_principal)


def merged_regular_levels(mesh: TubeMesh, satellite: ClosedPolyline) -> np.ndarray:
    """Midpoints between consecutive distinct heights of the merged critical set.

    The critical set is approximated by the union of mesh vertex heights
    and satellite vertex heights.
    """
    heights = np.sort(np.concatenate([mesh.vertices[:, 2], satellite.heights]))
    scale = max(mesh.diameter, satellite.diameter)
    gaps = np.diff(heights)
    keep = gaps > 1e-12 * scale
    return (heights[:-1] + 0.5 * gaps)[keep]


def check_lemma31(section: LevelSection) -> list:
    """Far-side essential-component check, per essential boundary curve.

    For each component and each of its essential boundary curves c, the
    disk on the far side of c (the plane is compactified, so the
    unbounded side counts as a disk through infinity) must contain a
    different component with at least one essential boundary.  Returns
    (component node, curve index) violations; empty for tubes around
    knotted companions, and genuinely non-empty for some unknotted ones.
    """
    group = section.grouping
    comps = group.components
    parent = group.parent
    n = len(parent)
    if n == 0:
        return []
    children = [[] for _ in range(n)]
    for i, p in enumerate(parent):
        if p >= 0:
            children[p].append(i)

    in_subtree = [[False] * n for _ in range(n)]
    for c in range(n):
        stack = [c]
        while stack:
            k = stack.pop()
            in_subtree[c][k] = True
            stack.extend(children[k])

    curves = section.torus_curves
    violations = []
    for comp in comps:
        for c in comp.curve_indices:
            if not curves[c].essential:
                continue
            if c == comp.node_curve:
                far = [other for other in comps if not in_subtree[c][other.node_curve]]
            else:
                far = [other for other in comps if in_subtree[c][other.node_curve]
                       and other.node_curve != comp.node_curve]
            if not any(o.essential_count >= 1 for o in far if o is not comp):
                violations.append((comp.node_curve, c))
    return violations


# ---------------------------------------------------------------------------
# per-level verification run
# ---------------------------------------------------------------------------

@dataclass
class LevelRow:
    """One row of the per-level verification table."""
    z: float
    count_k: int
    z_i: int
    n_js: tuple
    k_hits: tuple
    status: str            # "pass" | "vacuous" | "fail"
    chain_ok: bool
    consistent: bool
    lemma31_violations: int


@dataclass
class Prop34Report:
    """Per-level intersection bound results for a satellite in its tube."""
    n_lower: int
    rows: list
    warnings: list

    @property
    def all_pass(self):
        return all(r.status != "fail" and r.consistent for r in self.rows)

    @property
    def checked_levels(self):
        return sum(1 for r in self.rows if r.status == "pass")

    @property
    def vacuous_levels(self):
        return sum(1 for r in self.rows if r.status == "vacuous")


def thread_budget() -> int:
    """Worker cap for level processing, from TRUNKWEAVE_THREADS."""
    raw = os.environ.get("TRUNKWEAVE_THREADS", "")
    if raw:
        try:
            val = int(raw)
        except ValueError as exc:
            raise InvalidInputError("TRUNKWEAVE_THREADS must be a positive integer") from exc
        if val < 1:
            raise InvalidInputError("TRUNKWEAVE_THREADS must be a positive integer")
        return val
    return min(4, os.cpu_count() or 1)


def _level_row(mesh, core, satellite, z, n_lower, with_lemma31):
    section = build_level_section(mesh, core, satellite, z)
    n_js = tuple(sorted((c.essential_count for c in section.components), reverse=True))
    k_hits = tuple(c.k_hits for c in section.components)
    z_i = section.z_principal
    count_k = section.z_count_k

    if z_i == 0:
        status = "vacuous"
        chain_ok = True
    else:
        status = "pass" if count_k > n_lower * z_i else "fail"
        chain_sum = sum(n_lower + 2 - c.essential_count
                        for c in section.components if c.principal)
        chain_ok = (count_k >= chain_sum) and (chain_sum > n_lower * z_i)
    violations = len(check_lemma31(section)) if with_lemma31 else 0
    return LevelRow(z, count_k, z_i, n_js, k_hits, status, chain_ok,
                    section.consistent, violations)


def verify_prop34(satellite: ClosedPolyline, mesh: TubeMesh, core: ClosedPolyline,
                  n_lower: int, with_lemma31: bool = True) -> Prop34Report:
    """Check count_k > n_lower * z_i at every regular level with z_i > 0.

    Levels are the midpoints between consecutive distinct heights of the
    merged mesh/satellite vertex heights.  Rows also record the chain
    inequality count_k >= sum over principal components of
    (n_lower + 2 - n_j) > n_lower * z_i, the grouping consistency flags,
    and (optionally) far-side violations.  Levels that fail to be regular
    even after retries are skipped with a warning.
    """
    if n_lower < 1:
        raise InvalidInputError(
            "verify_prop34 requires n_lower >= 1 (the bound is vacuous for "
            "norm lower bound 0)")
    reach = point_to_curve_distance(satellite.vertices, core)
    if (reach > mesh.radius * (1.0 + 1e-6)).any():
        raise InvalidInputError("satellite is not contained in the tube")

    levels = merged_regular_levels(mesh, satellite)
    warnings = []

    def run(z):
        try:
            return _level_row(mesh, core, satellite, float(z), n_lower, with_lemma31)
        except (RegularValueError, NumericalError) as exc:
            warnings.append(f"level z={float(z)!r} skipped: {exc}")
            return None

    workers = thread_budget()
    if workers > 1 and len(levels) > 64:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, levels))
    else:
        rows = [run(z) for z in levels]
    rows = [r for r in rows if r is not None]
    rows.sort(key=lambda r: r.z)
    return Prop34Report(n_lower, rows, warnings)
