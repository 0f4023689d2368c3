"""
pattern.py
----------

Closed curves in the solid torus S^1 x D^2, given in lifted coordinates
(theta, u, v) with theta a real lift of the circle angle.  Provides
winding numbers, meridian-disk crossing counts, and the two-sided bound
on the generalized Thurston norm of the meridian-disk class.

The norm of a surface class here is max(-chi + crossings, 0) minimized
over representatives; a meridian disk with c transverse crossings gives
the candidate value max(c - 1, 0), so the discrete meridian sweep yields
an upper bound.  Any transverse representative of the class meets the
curve at least |winding| times algebraically and a connected surface has
-chi >= -1, which yields the lower bound max(|winding| - 1, 0).  The
lower bound is heuristic for disconnected minimizers and is reported as
such; all downstream strict-inequality checks consume the lower bound,
the conservative direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, RegularValueError
from .geometry import _segment_pair_distance

TWO_PI = 2.0 * math.pi

# patterns must stay inside the disk fiber with this margin so the swept
# satellite keeps clear of the tube boundary
DISK_MARGIN = 0.95

# the closing edge takes the nearest lift of the start point; its angle
# advance must stay below a quarter turn or closure is considered broken
CLOSURE_SLACK = 0.25

_ANGLE_TOL = 1e-9


class PatternCurve:
    """A closed PL curve in the solid torus, in lifted coordinates.

    Vertices are rows (theta, u, v).  The curve closes from the last
    vertex back to the first; the closing edge advances theta to the
    nearest lift of the starting angle, and the total angle advance
    around the loop is 2 pi times the winding number.

    Validation rejects: points outside the 0.95 disk margin, a closing
    edge that would advance by more than a quarter turn (non-integral
    closure), self-intersection in (theta mod 2 pi, u, v), and curves
    whose meridian count vanishes somewhere (such a curve fits in a ball
    inside the solid torus, so it is not a satellite pattern; the count
    condition is necessary, not sufficient, and accepted as the working
    proxy).
    """

    def __init__(self, vertices):
        tuv = np.array(vertices, dtype=np.float64)
        if tuv.ndim != 2 or tuv.shape[1] != 3:
            raise InvalidInputError("pattern vertices must be an (n, 3) array of (theta, u, v)")
        if len(tuv) < 3:
            raise InvalidInputError("a pattern needs at least 3 vertices")
        if not np.isfinite(tuv).all():
            raise InvalidInputError("pattern vertices contain non-finite values")
        radial = np.hypot(tuv[:, 1], tuv[:, 2])
        if (radial > DISK_MARGIN + 1e-12).any():
            worst = int(np.argmax(radial))
            raise InvalidInputError(
                f"disk-margin violation: |(u, v)| = {radial[worst]:.4f} > {DISK_MARGIN} "
                f"at vertex {worst}")

        frac = (tuv[-1, 0] - tuv[0, 0]) / TWO_PI
        w = round(frac)
        if abs(frac - w) > CLOSURE_SLACK:
            raise InvalidInputError(
                "non-integral closure: the loop ends "
                f"{abs(frac - w):.3f} turns away from a lift of its start")
        self._winding = int(w)
        self._tuv = tuv
        self._tuv.flags.writeable = False

        self._check_embedded()
        if self.meridian_minimum_unchecked() < 1:
            raise InvalidInputError(
                "satellite-candidate check failed: some meridian disk misses "
                "the curve, so it fits inside a ball in the solid torus")

    # -- data access ---------------------------------------------------------

    def lifted_vertices(self):
        return self._tuv

    def closure_point(self):
        """The lift of the first vertex targeted by the closing edge."""
        end = self._tuv[0].copy()
        end[0] += TWO_PI * self._winding
        return end

    @property
    def n(self):
        return len(self._tuv)

    @property
    def winding(self):
        return self._winding

    def _edges(self):
        """All edges including the closing one, as (n, 2, 3) start/end rows."""
        closed = np.concatenate([self._tuv, self.closure_point()[None, :]])
        return np.stack([closed[:-1], closed[1:]], axis=1)

    def reversed(self):
        """The same curve with the opposite orientation."""
        return PatternCurve(self._tuv[::-1])

    def __repr__(self):
        return f"PatternCurve(n={self.n}, winding={self._winding})"

    # -- validation internals --------------------------------------------------

    def _check_embedded(self):
        # flat embedding of the solid torus: (theta,u,v) -> ((R+u) e^{i theta}, v).
        # A diffeomorphism for |u| < R, so positivity of segment distances is
        # preserved and the geometry module's pairwise scan applies.
        big_r = 2.0
        closed = np.concatenate([self._tuv, self.closure_point()[None, :]])
        xyz = np.empty_like(closed)
        xyz[:, 0] = (big_r + closed[:, 1]) * np.cos(closed[:, 0])
        xyz[:, 1] = (big_r + closed[:, 1]) * np.sin(closed[:, 0])
        xyz[:, 2] = closed[:, 2]
        p, q = xyz[:-1], xyz[1:]
        n = len(p)
        seg_len = np.linalg.norm(q - p, axis=1)
        if (seg_len < 1e-12).any():
            raise InvalidInputError("pattern has a zero-length edge")
        ii, jj = np.triu_indices(n, k=2)
        keep = ~((ii == 0) & (jj == n - 1))
        ii, jj = ii[keep], jj[keep]
        d = _segment_pair_distance(p[ii], q[ii], p[jj], q[jj])
        if (d < 1e-9).any():
            k = int(np.argmin(d))
            raise InvalidInputError(
                f"pattern self-intersects: edges {ii[k]} and {jj[k]} at distance {d[k]:.3e}")

    def meridian_minimum_unchecked(self):
        theta_star, count = min_meridian_sweep_raw(self)
        return count


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def winding_number(p: PatternCurve) -> int:
    """Total angle advance around the loop divided by 2 pi, an exact integer."""
    return p.winding


def meridian_count_at(p: PatternCurve, theta0: float) -> int:
    """Number of edges crossing the meridian disk at fiber angle theta0.

    Counts crossings of every lift theta0 + 2 pi n, so the result is the
    geometric intersection count with the disk {theta0} x D^2.
    """
    edges = p._edges()
    ta, tb = edges[:, 0, 0], edges[:, 1, 0]
    verts_t = p.lifted_vertices()[:, 0]
    if np.min(np.abs(((verts_t - theta0) / TWO_PI + 0.5) % 1.0 - 0.5)) * TWO_PI < _ANGLE_TOL:
        raise RegularValueError(f"theta0={theta0!r} hits a pattern vertex angle")
    lo = np.floor((ta - theta0) / TWO_PI)
    hi = np.floor((tb - theta0) / TWO_PI)
    return int(np.abs(hi - lo).sum())


def meridian_counts_bulk(p: PatternCurve, thetas) -> np.ndarray:
    """Vectorized meridian_count_at over many regular fiber angles."""
    thetas = np.asarray(thetas, dtype=np.float64)
    edges = p._edges()
    ta, tb = edges[:, 0, 0], edges[:, 1, 0]
    lo = np.floor((ta[None, :] - thetas[:, None]) / TWO_PI)
    hi = np.floor((tb[None, :] - thetas[:, None]) / TWO_PI)
    return np.abs(hi - lo).sum(axis=1).astype(np.int64)


def min_meridian_sweep_raw(p) -> tuple:
    # shared by the constructor (before full validation) and the public op
    angles = np.sort(np.unique(p.lifted_vertices()[:, 0] % TWO_PI))
    gaps_lo = angles
    gaps_hi = np.concatenate([angles[1:], angles[:1] + TWO_PI])
    mids = 0.5 * (gaps_lo + gaps_hi)
    mids = mids[(gaps_hi - gaps_lo) > 2.0 * _ANGLE_TOL]
    if len(mids) == 0:
        raise InvalidInputError("pattern vertex angles leave no regular fiber angle")
    counts = meridian_counts_bulk(p, mids)
    k = int(np.argmin(counts))
    return float(mids[k] % TWO_PI), int(counts[k])


def min_meridian_sweep(p: PatternCurve) -> tuple:
    """(theta_star, count): the exact discrete minimum of meridian_count_at.

    The count is constant between consecutive vertex angles mod 2 pi, so
    evaluating one midpoint per gap gives the true minimum.
    """
    return min_meridian_sweep_raw(p)


@dataclass(frozen=True)
class NormBounds:
    """Certified interval for the meridian-class norm of a pattern.

    upper comes from the best meridian disk; lower from the winding number
    (heuristic if the minimizing surface is disconnected).  witness_theta
    is a fiber angle achieving the upper bound.
    """
    lower: int
    upper: int
    witness_theta: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise InvalidInputError("norm bounds out of order")

    @property
    def exact(self):
        return self.lower == self.upper


def norm_bounds(p: PatternCurve) -> NormBounds:
    """Two-sided bounds on the generalized norm of the meridian-disk class."""
    theta_star, count = min_meridian_sweep(p)
    upper = max(count - 1, 0)
    lower = max(abs(p.winding) - 1, 0)
    return NormBounds(lower, upper, theta_star)


# ---------------------------------------------------------------------------
# catalog constructors
# ---------------------------------------------------------------------------

def cable_pattern(strands: int, twists: int, samples_per_turn: int = 24,
                  rho: float = 0.5) -> PatternCurve:
    """A cable: `strands` parallel points on a circle of radius rho in the
    disk fiber, rotating by 2 pi twists / strands per pass and closing
    after `strands` passes around the solid torus.

    For strands >= 2 the construction traces a single closed curve only
    when gcd(strands, twists) == 1; other combinations close early into a
    link and are rejected.
    """
    if strands < 1:
        raise InvalidInputError("strands must be >= 1")
    if strands >= 2 and math.gcd(strands, twists) != 1:
        raise InvalidInputError(
            f"cable({strands},{twists}) is a {math.gcd(strands, twists)}-component link, "
            "not a knot pattern")
    if samples_per_turn < 8:
        raise InvalidInputError("samples_per_turn must be >= 8")
    total = strands * samples_per_turn
    t = np.arange(total) / samples_per_turn          # passes traversed so far
    theta = TWO_PI * t + 0.05                        # phase keeps vertex angles off 0
    alpha = 0.3 + TWO_PI * twists * t / strands
    uv = rho * np.stack([np.cos(alpha), np.sin(alpha)], axis=1)
    return PatternCurve(np.column_stack([theta, uv]))


def core_pattern(samples: int = 24) -> PatternCurve:
    """The core circle u = v = 0, winding once around the solid torus."""
    theta = TWO_PI * np.arange(samples) / samples + 0.05
    return PatternCurve(np.column_stack([theta, np.zeros((samples, 2))]))


def whitehead_pattern() -> PatternCurve:
    """A clasped double of the core: winding 0, minimum meridian count 2.

    The outgoing strand runs at v = +0.4; the clasp dives through the
    fiber wall on the +u side while overshooting the start angle; the
    return strand descends the whole way back on a shallow v ramp (so its
    two layers over the overshoot band stay separated); the closing hook
    rises on the -u side.  The two clasp passages therefore hook around
    each other on opposite sides of the disk fiber.
    """
    lane_v = 0.4

    def ramp(lift):
        # return-lane v coordinate; the slope keeps layers 0.14 apart
        return -0.45 + 0.14 * (lift - 0.3) / TWO_PI

    pts = []
    # outgoing lane: lift 0.3 .. 2 pi - 0.3 at (u, v) = (0, +0.4)
    for k in range(18):
        pts.append((0.3 + (TWO_PI - 0.6) * k / 17.0, 0.0, lane_v))
    # clasp dive on the +u side, overshooting to 2 pi + 0.5
    pts.append((TWO_PI - 0.05, 0.45, 0.25))
    pts.append((TWO_PI + 0.25, 0.45, -0.1))
    hi = TWO_PI + 0.5
    pts.append((hi, 0.0, ramp(hi)))
    # return lane: lift descends hi .. 0.3 at u = 0 on the v ramp
    for k in range(1, 19):
        s = hi + (0.3 - hi) * k / 18.0
        pts.append((s, 0.0, ramp(s)))
    # closing hook on the -u side, rising back toward the start point
    pts.append((0.22, -0.45, -0.1))
    pts.append((0.26, -0.45, 0.2))
    return PatternCurve(np.asarray(pts))
