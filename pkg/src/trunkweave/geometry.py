"""
geometry.py
-----------

Closed piecewise-linear curves in R^3, height-level sweeps and trunk
counts, rotation minimizing frames, framed solid tori, and swept-tube
constructions (satellites and triangulated boundary tori).

Height always means the z coordinate.  A curve is *generic* when all of
its vertex heights are distinct and no edge is horizontal; every level
query below requires a regular height (one that is not a vertex height).

All geometric predicates use absolute tolerances scaled by the model
diameter.  File ingestion rescales curves to unit diameter, so on loaded
data the scaled tolerances coincide with the absolute defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstructionError,
    GenericityError,
    InvalidInputError,
    NumericalError,
    RegularValueError,
)

# Tolerances, relative to model diameter.
HEIGHT_TOL = 1e-9      # two heights closer than this count as equal
REGULAR_TOL = 1e-12    # a query height closer than this to a vertex height is rejected
CLEARANCE_TOL = 1e-9   # minimum allowed distance between non-adjacent segments

# Fraction of the clearance used for tube radii.  Strictly below 0.5 so a
# pattern with radial extent up to 0.95 still sweeps an embedded tube.
TUBE_SAFETY = 0.45

_PAIR_BLOCK = 262144   # pair-chunk size for O(n^2) distance scans


# ---------------------------------------------------------------------------
# small vector helpers
# ---------------------------------------------------------------------------

def _unit(v):
    n = np.linalg.norm(v)
    if n == 0.0:
        raise NumericalError("cannot normalize a zero vector")
    return v / n


def _rotate_about(v, axis, angle):
    """Rodrigues rotation of v about a unit axis."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (np.dot(axis, v)) * (1.0 - c)


def _transport(v, a, b):
    """Minimal rotation carrying unit vector a onto unit vector b, applied to v."""
    c = float(np.dot(a, b))
    w = np.cross(a, b)
    s = float(np.linalg.norm(w))
    if s < 1e-14:
        if c > 0.0:
            return v
        raise NumericalError("cannot transport across an exact tangent reversal")
    axis = w / s
    return _rotate_about(v, axis, math.atan2(s, c))


def _segment_pair_distance(p1, q1, p2, q2):
    """Minimum distances between segment batches [p1,q1] and [p2,q2].

    Standard clamped closest-point computation, vectorized over leading
    axes.  Degenerate (zero-length) segments are tolerated.
    """
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    b = np.einsum("...i,...i->...", d1, d2)
    c = np.einsum("...i,...i->...", d1, r)
    f = np.einsum("...i,...i->...", d2, r)

    den = a * e - b * b
    ok = den > 1e-30
    s = np.where(ok, np.divide(b * f - c * e, den, out=np.zeros_like(den), where=ok), 0.0)
    s = np.clip(s, 0.0, 1.0)
    t = np.divide(b * s + f, e, out=np.zeros_like(e), where=e > 1e-30)
    t_cl = np.clip(t, 0.0, 1.0)
    s2 = np.divide(t_cl * b - c, a, out=np.zeros_like(a), where=a > 1e-30)
    s2 = np.clip(s2, 0.0, 1.0)
    s = np.where((t != t_cl), s2, s)
    closest1 = p1 + s[..., None] * d1
    closest2 = p2 + t_cl[..., None] * d2
    diff = closest1 - closest2
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


def _pairwise_max_distance(points):
    n = len(points)
    best = 0.0
    step = max(1, _PAIR_BLOCK // max(n, 1))
    for lo in range(0, n, step):
        chunk = points[lo:lo + step]
        d = np.linalg.norm(chunk[:, None, :] - points[None, :, :], axis=2)
        best = max(best, float(d.max()))
    return best


# ---------------------------------------------------------------------------
# ClosedPolyline
# ---------------------------------------------------------------------------

class ClosedPolyline:
    """A closed, embedded piecewise-linear curve in R^3.

    The edge from the last vertex back to the first is implicit.
    Construction validates embeddedness: at least 3 vertices, no
    zero-length edge, and every pair of non-adjacent segments at positive
    distance.  Degenerate input is rejected, never repaired.
    """

    def __init__(self, vertices):
        verts = np.array(vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise InvalidInputError("vertices must be an (n, 3) array")
        n = len(verts)
        if n < 3:
            raise InvalidInputError(f"a closed curve needs at least 3 vertices, got {n}")
        if not np.isfinite(verts).all():
            raise InvalidInputError("vertices contain non-finite coordinates")

        self._verts = verts
        self._verts.flags.writeable = False
        self._diameter = _pairwise_max_distance(verts)
        if self._diameter == 0.0:
            raise InvalidInputError("all vertices coincide")

        edge_len = np.linalg.norm(np.roll(verts, -1, axis=0) - verts, axis=1)
        tol = CLEARANCE_TOL * self._diameter
        if (edge_len <= tol).any():
            bad = int(np.argmin(edge_len))
            raise InvalidInputError(f"zero-length edge at vertex {bad}")
        self._edge_lengths = edge_len
        self._edge_lengths.flags.writeable = False

        self._clearance = self._nonadjacent_clearance()
        if self._clearance <= tol:
            raise InvalidInputError(
                "curve self-intersects: non-adjacent segments at distance "
                f"{self._clearance:.3e} (tolerance {tol:.3e})")

    # -- basic accessors ----------------------------------------------------

    @property
    def vertices(self):
        return self._verts

    @property
    def n(self):
        return len(self._verts)

    @property
    def heights(self):
        return self._verts[:, 2]

    @property
    def diameter(self):
        return self._diameter

    @property
    def clearance(self):
        """Minimum distance between non-adjacent segments."""
        return self._clearance

    @property
    def edge_lengths(self):
        return self._edge_lengths

    @property
    def total_length(self):
        return float(self._edge_lengths.sum())

    def min_feature_size(self):
        return min(float(self._edge_lengths.min()), self._clearance)

    def translated(self, offset):
        return ClosedPolyline(self._verts + np.asarray(offset, dtype=np.float64))

    def __repr__(self):
        return f"ClosedPolyline(n={self.n}, diameter={self._diameter:.4g})"

    # -- internals ----------------------------------------------------------

    def _nonadjacent_clearance(self):
        verts = self._verts
        n = len(verts)
        p = verts
        q = np.roll(verts, -1, axis=0)
        ii, jj = np.triu_indices(n, k=2)
        keep = ~((ii == 0) & (jj == n - 1))
        ii, jj = ii[keep], jj[keep]
        best = math.inf
        for lo in range(0, len(ii), _PAIR_BLOCK):
            a, b = ii[lo:lo + _PAIR_BLOCK], jj[lo:lo + _PAIR_BLOCK]
            d = _segment_pair_distance(p[a], q[a], p[b], q[b])
            best = min(best, float(d.min()))
        return best


def rescale_to_unit_diameter(curve: ClosedPolyline) -> ClosedPolyline:
    """Translate to the bounding-box center and scale to diameter 1."""
    verts = curve.vertices
    center = 0.5 * (verts.min(axis=0) + verts.max(axis=0))
    return ClosedPolyline((verts - center) / curve.diameter)


def point_to_curve_distance(points, curve: ClosedPolyline):
    """Distance from each query point to the curve (as a point set)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    p = curve.vertices
    q = np.roll(p, -1, axis=0)
    out = np.full(len(pts), math.inf)
    for lo in range(0, len(pts), 1024):
        chunk = pts[lo:lo + 1024]
        d = _segment_pair_distance(
            chunk[:, None, :], chunk[:, None, :],
            p[None, :, :], q[None, :, :])
        out[lo:lo + 1024] = d.min(axis=1)
    return out


# ---------------------------------------------------------------------------
# genericity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GenericityReport:
    """Violations found by validate_genericity.

    Each violation is a tuple: ("duplicate-height", i, j) for vertices i, j
    at indistinguishable heights, or ("horizontal-edge", i) for the edge
    leaving vertex i.
    """
    violations: tuple

    @property
    def ok(self):
        return len(self.violations) == 0


def validate_genericity(curve: ClosedPolyline) -> GenericityReport:
    """Check that all vertex heights are distinct and no edge is horizontal."""
    z = curve.heights
    tol = HEIGHT_TOL * curve.diameter
    violations = []
    order = np.argsort(z, kind="stable")
    zs = z[order]
    for k in np.nonzero(np.diff(zs) <= tol)[0]:
        i, j = int(order[k]), int(order[k + 1])
        violations.append(("duplicate-height", min(i, j), max(i, j)))
    dz = np.abs(np.roll(z, -1) - z)
    for i in np.nonzero(dz <= tol)[0]:
        violations.append(("horizontal-edge", int(i)))
    return GenericityReport(tuple(violations))


def perturb_generic(curve: ClosedPolyline, epsilon: float) -> ClosedPolyline:
    """Return a generic curve within vertex distance epsilon of the input.

    A curve that is already generic is returned unchanged.  Repairs are
    deterministic: vertex i receives a z offset proportional to i, with a
    fixed ladder of scale factors tried until the result validates.
    """
    if epsilon <= 0.0:
        raise InvalidInputError("epsilon must be positive")
    feature = curve.min_feature_size()
    if epsilon >= 0.5 * feature:
        raise InvalidInputError(
            f"epsilon {epsilon:.3e} too large: must stay below half the "
            f"minimum feature size {feature:.3e}")
    if validate_genericity(curve).ok:
        return curve

    n = curve.n
    base = np.arange(1, n + 1, dtype=np.float64) / (2.0 * n)
    for attempt in range(48):
        scale = 1.0 - attempt / 64.0
        dz = scale * epsilon * base
        cand_verts = curve.vertices.copy()
        cand_verts[:, 2] += dz
        try:
            cand = ClosedPolyline(cand_verts)
        except InvalidInputError:
            continue
        if validate_genericity(cand).ok:
            return cand
    raise NumericalError(
        "could not repair genericity within epsilon; offsets kept colliding "
        "or fell below the height-distinctness tolerance")


def _require_generic(curve):
    report = validate_genericity(curve)
    if not report.ok:
        raise GenericityError(
            f"curve is not generic: {len(report.violations)} violation(s), "
            f"first: {report.violations[0]}")


# ---------------------------------------------------------------------------
# level counting and sweep profiles
# ---------------------------------------------------------------------------

def level_count(curve: ClosedPolyline, z: float) -> int:
    """Number of transverse intersections of the curve with the plane at height z."""
    heights = curve.heights
    tol = REGULAR_TOL * curve.diameter
    if np.abs(heights - z).min() <= tol:
        raise RegularValueError(f"z={z!r} coincides with a vertex height")
    za = heights
    zb = np.roll(heights, -1)
    return int(np.count_nonzero((za - z) * (zb - z) < 0.0))


def level_counts_bulk(curve: ClosedPolyline, zs) -> np.ndarray:
    """Vectorized level_count over many heights (all must be regular)."""
    zs = np.asarray(zs, dtype=np.float64)
    heights = curve.heights
    tol = REGULAR_TOL * curve.diameter
    if (np.abs(zs[:, None] - heights[None, :]).min(axis=1) <= tol).any():
        raise RegularValueError("a query height coincides with a vertex height")
    za = heights[None, :]
    zb = np.roll(heights, -1)[None, :]
    return np.count_nonzero((za - zs[:, None]) * (zb - zs[:, None]) < 0.0, axis=1)


def level_crossing_points(curve: ClosedPolyline, z: float) -> np.ndarray:
    """The intersection points of the curve with the plane at height z."""
    heights = curve.heights
    tol = REGULAR_TOL * curve.diameter
    if np.abs(heights - z).min() <= tol:
        raise RegularValueError(f"z={z!r} coincides with a vertex height")
    za = heights
    zb = np.roll(heights, -1)
    mask = (za - z) * (zb - z) < 0.0
    a = curve.vertices[mask]
    b = np.roll(curve.vertices, -1, axis=0)[mask]
    t = (z - a[:, 2]) / (b[:, 2] - a[:, 2])
    return a + t[:, None] * (b - a)


@dataclass(frozen=True)
class SweepProfile:
    """Critical heights of a generic curve and the level count on each gap.

    critical_values are the heights of the local extrema along the curve
    (monotone pass-through vertices do not change the count and are not
    critical).  interval_counts[k] is the count on the open interval below
    critical_values[k]; the last entry is the count above all criticals.
    """
    critical_values: np.ndarray
    interval_counts: np.ndarray

    def __post_init__(self):
        cv, counts = self.critical_values, self.interval_counts
        if len(counts) != len(cv) + 1:
            raise NumericalError("sweep profile shape mismatch")
        if counts[0] != 0 or counts[-1] != 0:
            raise NumericalError("sweep counts must vanish outside the height range")
        steps = np.abs(np.diff(counts))
        if (steps != 2).any():
            raise NumericalError("sweep counts must change by exactly 2 at each critical value")
        if (counts % 2 != 0).any() or (counts < 0).any():
            raise NumericalError("sweep counts must be even and non-negative")

    @property
    def max_count(self):
        return int(self.interval_counts.max())


def _regular_probe(curve, lo, hi):
    """A height strictly inside (lo, hi) away from every vertex height."""
    heights = curve.heights
    tol = REGULAR_TOL * curve.diameter
    for frac in (0.5, 0.47, 0.53, 0.43, 0.57, 0.39, 0.61, 0.33, 0.67, 0.29, 0.71):
        z = lo + frac * (hi - lo)
        if np.abs(heights - z).min() > tol:
            return z
    raise NumericalError(f"no regular probe height found in ({lo}, {hi})")


def critical_heights(curve: ClosedPolyline) -> np.ndarray:
    """Sorted heights of the local extrema (the critical vertices)."""
    _require_generic(curve)
    z = curve.heights
    prev = np.roll(z, 1)
    nxt = np.roll(z, -1)
    is_max = (z > prev) & (z > nxt)
    is_min = (z < prev) & (z < nxt)
    return np.sort(z[is_max | is_min])


def sweep_profile(curve: ClosedPolyline) -> SweepProfile:
    """Level counts between consecutive critical heights of a generic curve."""
    crit = critical_heights(curve)
    counts = [0]
    for k in range(len(crit) - 1):
        counts.append(level_count(curve, _regular_probe(curve, crit[k], crit[k + 1])))
    counts.append(0)
    return SweepProfile(crit, np.asarray(counts, dtype=np.int64))


def trunk_embedding(curve: ClosedPolyline) -> int:
    """Maximum level count of the embedding: the trunk of this representative.

    This is an upper bound for the trunk of the isotopy class, which
    minimizes over all generic representatives.
    """
    return sweep_profile(curve).max_count


# ---------------------------------------------------------------------------
# connected sum
# ---------------------------------------------------------------------------

def _cut_at_extremum(curve, vertex_idx, frac_a, frac_b):
    """Open chain obtained by clipping the curve just short of an extremum.

    Removes vertex_idx and replaces its two incident edges by partial edges
    ending at the given height fractions toward the extremum.  Returns the
    chain as an (n+1, 3) array running from the cut on the outgoing edge
    around the curve to the cut on the incoming edge.
    """
    verts = curve.vertices
    n = len(verts)
    tip = verts[vertex_idx]
    prev_v = verts[(vertex_idx - 1) % n]
    next_v = verts[(vertex_idx + 1) % n]
    others = np.delete(np.arange(n), vertex_idx)
    rest_extreme = verts[others][:, 2]
    span_prev = tip[2] - prev_v[2]
    span_next = tip[2] - next_v[2]
    # target heights sit between the tip and every remaining vertex
    if span_prev > 0:   # tip is a maximum
        base = rest_extreme.max()
    else:
        base = rest_extreme.min()
    cut_a = tip[2] - frac_a * (tip[2] - base)
    cut_b = tip[2] - frac_b * (tip[2] - base)
    q_in = prev_v + (cut_a - prev_v[2]) / span_prev * (tip - prev_v)
    q_out = next_v + (cut_b - next_v[2]) / span_next * (tip - next_v)
    chain = [q_out]
    k = (vertex_idx + 1) % n
    while k != vertex_idx:
        chain.append(verts[k])
        k = (k + 1) % n
    chain.append(q_in)
    return np.asarray(chain)


def connected_sum_presentation(a: ClosedPolyline, b: ClosedPolyline) -> ClosedPolyline:
    """A presentation of the connected sum stacking b above a.

    b is translated above a and the two curves are joined by two monotone
    strands through a height window where each side contributes exactly two
    strands (just below a's global maximum and just above b's global
    minimum), so the trunk of the result is max of the input trunks.
    """
    _require_generic(a)
    _require_generic(b)

    top_a = int(np.argmax(a.heights))
    bot_b = int(np.argmin(b.heights))
    scale = max(a.diameter, b.diameter)

    for gap_mult in (0.2, 0.45, 0.8):
        for angle_deg in (0.0, 40.0, 80.0, 120.0, 160.0, 200.0, 240.0, 280.0, 320.0):
            for frac_a, frac_b in ((0.30, 0.35), (0.50, 0.60)):
                cand = _assemble_sum(a, b, top_a, bot_b,
                                     gap_mult * scale, math.radians(angle_deg),
                                     frac_a, frac_b)
                if cand is not None:
                    return cand
    raise ConstructionError("could not join the two curves with embedded bridges")


def _assemble_sum(a, b, top_a, bot_b, gap, angle, frac_a, frac_b):
    tip_a = a.vertices[top_a]
    tip_b = b.vertices[bot_b]
    # rotate b about the vertical axis through its lowest vertex: heights
    # (and therefore its sweep profile) are unchanged
    rel = b.vertices - tip_b
    c, s = math.cos(angle), math.sin(angle)
    rot = rel.copy()
    rot[:, 0] = c * rel[:, 0] - s * rel[:, 1]
    rot[:, 1] = s * rel[:, 0] + c * rel[:, 1]
    shifted = rot + tip_a
    shifted[:, 2] += (a.heights.max() - b.heights.min()) + gap - (tip_a[2] - tip_b[2])
    try:
        b_moved = ClosedPolyline(shifted)
    except InvalidInputError:
        return None

    chain_a = _cut_at_extremum(a, top_a, frac_a, frac_b)          # q_out ... q_in
    chain_b = _cut_at_extremum(b_moved, bot_b, frac_a, frac_b)    # r_out ... r_in
    # close: chain_a, ascend from its end to chain_b's end, walk chain_b
    # backwards, then the implicit closing edge descends to chain_a's start
    verts = np.concatenate([chain_a, chain_b[::-1]])
    try:
        joined = ClosedPolyline(verts)
    except InvalidInputError:
        return None
    if not validate_genericity(joined).ok:
        eps = 1e-6 * joined.diameter
        try:
            joined = perturb_generic(joined, eps)
        except (InvalidInputError, NumericalError):
            return None
    return joined


# ---------------------------------------------------------------------------
# frames and tubes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameField:
    """Per-vertex orthonormal triads along a closed curve.

    Transporting the first normal around the loop with the double
    reflection rule reproduces it only up to a rotation about the tangent;
    that angular defect is closure_twist, with the sign convention
    rotate(normals[0], tangents[0], closure_twist) == transported end normal.
    """
    tangents: np.ndarray
    normals: np.ndarray
    binormals: np.ndarray
    closure_twist: float

    def orthonormality_error(self):
        t, n, b = self.tangents, self.normals, self.binormals
        errs = [
            np.abs(np.einsum("ij,ij->i", t, t) - 1.0),
            np.abs(np.einsum("ij,ij->i", n, n) - 1.0),
            np.abs(np.einsum("ij,ij->i", b, b) - 1.0),
            np.abs(np.einsum("ij,ij->i", t, n)),
            np.abs(np.einsum("ij,ij->i", t, b)),
            np.abs(np.einsum("ij,ij->i", n, b)),
        ]
        return float(np.max(errs))


def _vertex_tangents(verts):
    edges = np.roll(verts, -1, axis=0) - verts
    e = edges / np.linalg.norm(edges, axis=1)[:, None]
    t = e + np.roll(e, 1, axis=0)
    norms = np.linalg.norm(t, axis=1)
    out = np.empty_like(t)
    for i in range(len(t)):
        if norms[i] < 1e-9:
            # near tangent reversal at this vertex: fall back to the outgoing edge
            out[i] = e[i]
        else:
            out[i] = t[i] / norms[i]
    return out


def rotation_minimizing_frame(curve: ClosedPolyline) -> FrameField:
    """Rotation minimizing frame via double-reflection transport per edge."""
    verts = curve.vertices
    m = len(verts)
    t = _vertex_tangents(verts)

    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(t[0])))] = 1.0
    n0 = _unit(ref - np.dot(ref, t[0]) * t[0])

    normals = np.empty_like(t)
    normals[0] = n0
    n_cur = n0
    for i in range(m):
        x_i, x_j = verts[i], verts[(i + 1) % m]
        t_i, t_j = t[i], t[(i + 1) % m]
        v1 = x_j - x_i
        c1 = float(np.dot(v1, v1))
        n_l = n_cur - (2.0 / c1) * np.dot(v1, n_cur) * v1
        t_l = t_i - (2.0 / c1) * np.dot(v1, t_i) * v1
        v2 = t_j - t_l
        c2 = float(np.dot(v2, v2))
        if c2 > 1e-30:
            n_next = n_l - (2.0 / c2) * np.dot(v2, n_l) * v2
        else:
            n_next = n_l
        n_next = _unit(n_next - np.dot(n_next, t_j) * t_j)
        if i + 1 < m:
            normals[i + 1] = n_next
        n_cur = n_next

    n_end = n_cur  # transport of n0 all the way around, expressed at vertex 0
    closure = math.atan2(float(np.dot(np.cross(n0, n_end), t[0])),
                         float(np.dot(n0, n_end)))
    binormals = np.cross(t, normals)
    for arr in (t, normals, binormals):
        arr.flags.writeable = False
    return FrameField(t, normals, binormals, closure)


def safe_tube_radius(curve: ClosedPolyline) -> float:
    """Radius at which a tube around the curve is safely embedded.

    0.45 times the smaller of (a) the minimum distance between
    non-adjacent segments and (b) the turning clearance at each vertex,
    min(adjacent edge lengths) / (2 tan(turn/2)), capped by the edge
    lengths themselves.
    """
    lengths = curve.edge_lengths
    verts = curve.vertices
    e = (np.roll(verts, -1, axis=0) - verts) / lengths[:, None]
    turning = math.inf
    for i in range(len(verts)):
        d_in, d_out = e[i - 1], e[i]
        cosang = float(np.clip(np.dot(d_in, d_out), -1.0, 1.0))
        ang = math.acos(cosang)
        pair = min(float(lengths[i - 1]), float(lengths[i]))
        if ang < 1e-9:
            local = pair
        else:
            local = min(pair, pair / (2.0 * math.tan(ang / 2.0)))
        turning = min(turning, local)
    return TUBE_SAFETY * min(curve.clearance, turning)


@dataclass(frozen=True)
class SolidTorusEmbedding:
    """A framed tube around a companion curve.

    twist is the integer framing: the frame used for the tube closes up
    after absorbing the rotation-minimizing closure defect plus twist full
    turns, distributed uniformly in arclength.
    """
    core: ClosedPolyline
    radius: float
    frame: FrameField = None
    twist: int = 0

    def __post_init__(self):
        if self.radius <= 0.0:
            raise InvalidInputError("tube radius must be positive")
        limit = safe_tube_radius(self.core)
        if self.radius >= limit:
            raise InvalidInputError(
                f"tube radius {self.radius:.4g} not below the safe radius {limit:.4g}")
        if self.frame is None:
            object.__setattr__(self, "frame", rotation_minimizing_frame(self.core))


class _TubeFrames:
    """Interpolated positions and closed frames along a framed tube.

    Fractions in [0, 1) run once around the core by arclength.  Between
    vertices the tangent is interpolated and both endpoint normals are
    transported onto it and blended, so the frame is continuous; the
    closure defect and the integer twist are unwound linearly in
    arclength, making the full frame loop periodic.
    """

    def __init__(self, torus: SolidTorusEmbedding):
        core, frame = torus.core, torus.frame
        self.radius = torus.radius
        self.verts = core.vertices
        self.m = len(self.verts)
        seg = core.edge_lengths
        self.s = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = self.s[-1]
        self.tan = np.concatenate([frame.tangents, frame.tangents[:1]])
        n_end = _rotate_about(frame.normals[0], frame.tangents[0], frame.closure_twist)
        self.nor = np.concatenate([frame.normals, n_end[None, :]])
        self.spin = 2.0 * math.pi * torus.twist - frame.closure_twist

    def frame_at(self, frac):
        f = frac % 1.0
        s = f * self.length
        k = int(np.searchsorted(self.s, s, side="right") - 1)
        k = min(max(k, 0), self.m - 1)
        w = (s - self.s[k]) / (self.s[k + 1] - self.s[k])
        v0, v1 = self.verts[k], self.verts[(k + 1) % self.m]
        pos = v0 + w * (v1 - v0)
        t = _unit((1.0 - w) * self.tan[k] + w * self.tan[k + 1])
        na = _transport(self.nor[k], self.tan[k], t)
        nb = _transport(self.nor[k + 1], self.tan[k + 1], t)
        n = (1.0 - w) * na + w * nb
        n = _unit(n - np.dot(n, t) * t)
        n = _rotate_about(n, t, self.spin * f)
        b = np.cross(t, n)
        return pos, t, n, b

    def point_at(self, frac, u, v):
        pos, _, n, b = self.frame_at(frac)
        return pos + self.radius * (u * n + v * b)


def embed_pattern(torus: SolidTorusEmbedding, pattern, samples_per_edge: int) -> ClosedPolyline:
    """Map a solid-torus pattern curve through the framed tube.

    Each pattern edge is sampled samples_per_edge times; the point at
    lifted coordinates (theta, u, v) goes to core(theta) plus
    radius * (u N + v B) in the twist-adjusted frame.  The output is made
    generic by an automatic perturbation ladder when necessary.
    """
    if samples_per_edge < 1:
        raise InvalidInputError("samples_per_edge must be >= 1")
    tf = _TubeFrames(torus)
    tuv = pattern.lifted_vertices()
    closed = np.concatenate([tuv, pattern.closure_point()[None, :]])
    pts = []
    for k in range(len(tuv)):
        a, b = closed[k], closed[k + 1]
        for j in range(samples_per_edge):
            theta, u, v = a + (j / samples_per_edge) * (b - a)
            pts.append(tf.point_at(theta / (2.0 * math.pi), u, v))
    try:
        out = ClosedPolyline(np.asarray(pts))
    except InvalidInputError as exc:
        raise ConstructionError(
            "satellite curve self-intersects; reduce the tube radius, the "
            f"pattern's radial extent, or refine the sampling ({exc})") from exc

    if not validate_genericity(out).ok:
        for eps_rel in (1e-9, 1e-8, 1e-7, 1e-6):
            try:
                out = perturb_generic(out, eps_rel * out.diameter)
                break
            except (InvalidInputError, NumericalError):
                continue
        else:
            raise ConstructionError("could not make the satellite curve generic")

    inside = point_to_curve_distance(out.vertices, torus.core)
    if (inside > torus.radius * (1.0 + 1e-9) + 1e-9 * torus.core.diameter).any():
        raise ConstructionError("satellite curve escaped the tube")
    return out


# ---------------------------------------------------------------------------
# tube meshes
# ---------------------------------------------------------------------------

@dataclass
class TubeMesh:
    """Triangulated boundary torus of a framed tube.

    Rings of meridional_res vertices sit at longitudinal_res stations,
    uniformly spaced in arclength.  Triangles are oriented with outward
    normals.  Vertex heights are perturbed to be pairwise distinct so
    every non-vertex height is a regular section value.

    meridian_cycle / longitude_cycle are ordered vertex index loops
    marking the homology basis used for section-curve classification.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    longitudinal_res: int
    meridional_res: int
    radius: float
    meridian_cycle: np.ndarray
    longitude_cycle: np.ndarray
    edges: np.ndarray = field(repr=False, default=None)
    tri_edges: np.ndarray = field(repr=False, default=None)
    edge_tris: np.ndarray = field(repr=False, default=None)
    _directed_tri: dict = field(repr=False, default=None)

    def __post_init__(self):
        if self.edges is None:
            self._build_adjacency()

    def _build_adjacency(self):
        tris = self.triangles
        raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        srt = np.sort(raw, axis=1)
        self.edges, inv = np.unique(srt, axis=0, return_inverse=True)
        self.tri_edges = inv.reshape(3, -1).T.copy()
        edge_tris = np.full((len(self.edges), 2), -1, dtype=np.int64)
        tri_ids = np.tile(np.arange(len(tris)), 3)
        for eid, tid in zip(inv, tri_ids):
            if edge_tris[eid, 0] == -1:
                edge_tris[eid, 0] = tid
            else:
                edge_tris[eid, 1] = tid
        if (edge_tris < 0).any():
            raise NumericalError("mesh is not closed: an edge has fewer than 2 triangles")
        self.edge_tris = edge_tris
        directed = {}
        for tid, (a, b, c) in enumerate(tris):
            directed[(int(a), int(b))] = tid
            directed[(int(b), int(c))] = tid
            directed[(int(c), int(a))] = tid
        self._directed_tri = directed

    @property
    def euler_characteristic(self):
        return len(self.vertices) - len(self.edges) + len(self.triangles)

    @property
    def diameter(self):
        mins = self.vertices.min(axis=0)
        maxs = self.vertices.max(axis=0)
        return float(np.linalg.norm(maxs - mins))

    def triangle_normals(self):
        tv = self.vertices[self.triangles]
        n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
        return n / np.linalg.norm(n, axis=1)[:, None]

    def directed_edge_triangle(self, a, b):
        """Triangle whose boundary cycle contains the directed edge (a, b)."""
        return self._directed_tri[(int(a), int(b))]

    def cycle_edges(self, cycle):
        """Directed edge list of a marked cycle (vertex index loop)."""
        return [(int(cycle[i]), int(cycle[(i + 1) % len(cycle)])) for i in range(len(cycle))]


def _distinct_heights(z, min_gap):
    """Deterministic minimal upward shifts making all values pairwise distinct."""
    order = np.argsort(z, kind="stable")
    out = z.copy()
    prev = -math.inf
    for idx in order:
        if out[idx] <= prev + min_gap:
            out[idx] = prev + min_gap
        prev = out[idx]
    return out


def tube_mesh(torus: SolidTorusEmbedding, longitudinal_res: int, meridional_res: int) -> TubeMesh:
    """Triangulate the boundary torus of a framed tube."""
    if longitudinal_res < 8 or meridional_res < 8:
        raise InvalidInputError("mesh resolutions must be at least 8")
    tf = _TubeFrames(torus)
    lres, mres = longitudinal_res, meridional_res
    verts = np.empty((lres * mres, 3))
    for j in range(lres):
        pos, _, n, b = tf.frame_at(j / lres)
        psi = 2.0 * math.pi * np.arange(mres) / mres
        ring = pos + torus.radius * (np.cos(psi)[:, None] * n + np.sin(psi)[:, None] * b)
        verts[j * mres:(j + 1) * mres] = ring

    diam = float(np.linalg.norm(verts.max(axis=0) - verts.min(axis=0)))
    verts[:, 2] = _distinct_heights(verts[:, 2], HEIGHT_TOL * diam)

    def vid(j, i):
        return (j % lres) * mres + (i % mres)

    tris = []
    for j in range(lres):
        for i in range(mres):
            a, b_, c, d = vid(j, i), vid(j + 1, i), vid(j + 1, i + 1), vid(j, i + 1)
            tris.append((a, b_, c))
            tris.append((a, c, d))
    tris = np.asarray(tris, dtype=np.int64)

    tv = verts[tris]
    signed_vol = float(np.einsum("ij,ij->", tv[:, 0], np.cross(tv[:, 1], tv[:, 2]))) / 6.0
    if signed_vol < 0.0:
        tris = tris[:, [0, 2, 1]]

    meridian = np.arange(mres, dtype=np.int64)                    # ring at station 0
    longitude = (np.arange(lres, dtype=np.int64) * mres)          # frame line psi=0
    return TubeMesh(verts, tris, lres, mres, torus.radius, meridian, longitude)


def mesh_self_intersections(mesh: TubeMesh, tol=1e-12) -> int:
    """Count intersecting non-adjacent triangle pairs (brute-force scan).

    Bounding boxes prune the O(T^2) pair set; survivors get an exact
    segment-against-triangle test in both directions.  Intended for
    fixture verification, not production paths.
    """
    tris = mesh.triangles
    tv = mesh.vertices[tris]
    lo = tv.min(axis=1)
    hi = tv.max(axis=1)
    t_count = len(tris)
    hits = 0
    for i in range(t_count):
        overlap = np.nonzero(
            (lo[i + 1:] <= hi[i]).all(axis=1) & (hi[i + 1:] >= lo[i]).all(axis=1))[0] + i + 1
        for j in overlap:
            if len(set(tris[i]) & set(tris[int(j)])) > 0:
                continue
            if _tri_tri_intersect(tv[i], tv[int(j)], tol):
                hits += 1
    return hits


def _tri_tri_intersect(t1, t2, tol):
    return _tri_edges_cross(t1, t2, tol) or _tri_edges_cross(t2, t1, tol)


def _tri_edges_cross(tri, other, tol):
    n = np.cross(other[1] - other[0], other[2] - other[0])
    nn = np.linalg.norm(n)
    if nn == 0.0:
        return False
    n = n / nn
    d = np.dot(tri - other[0], n)
    for k in range(3):
        da, db = d[k], d[(k + 1) % 3]
        if (da > tol and db > tol) or (da < -tol and db < -tol):
            continue
        if abs(da - db) < tol:
            continue
        t = da / (da - db)
        p = tri[k] + t * (tri[(k + 1) % 3] - tri[k])
        if _point_in_triangle(p, other, tol):
            return True
    return False


def _point_in_triangle(p, tri, tol):
    a, b, c = tri
    v0, v1, v2 = c - a, b - a, p - a
    d00 = np.dot(v0, v0)
    d01 = np.dot(v0, v1)
    d11 = np.dot(v1, v1)
    d20 = np.dot(v2, v0)
    d21 = np.dot(v2, v1)
    den = d00 * d11 - d01 * d01
    if abs(den) < 1e-30:
        return False
    u = (d11 * d20 - d01 * d21) / den
    v = (d00 * d21 - d01 * d20) / den
    return u >= -tol and v >= -tol and u + v <= 1.0 + tol
