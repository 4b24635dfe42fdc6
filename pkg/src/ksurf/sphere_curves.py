"""Closed real-analytic curves on the unit sphere.

Curves are trigonometric polynomials in R^3 (see :mod:`ksurf.fourier`).  The
admissibility notions follow the limit-normal classification of K=1 conical
singularities: a closed curve is admissible when ``|a'| k_a`` stays nonzero,
including at cusps where ``a'`` vanishes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import (
    ClassificationError,
    ConsistencyError,
    DomainError,
    NonAdmissibleCuspError,
    OriginCrossingError,
    ResolutionError,
    SingularPointError,
    UnsupportedOrderError,
)
from .fourier import FourierCurve3, grid, grid_to_hat, mode_energy

NORM_TOL = 1e-9
ORIGIN_TOL = 1e-6
REG_REL = 1e-8
CURV_TOL = 1e-8
CUSP_WINDOWS = ((1e-3, 1e-2), (5e-4, 5e-3))
CUSP_STABILITY = 1e-6
JORDAN_VERTICES = 4096
CONE_CONSISTENCY = 1e-6

REGULAR_CONVEX_JORDAN = "RegularConvexJordan"
ADMISSIBLE_CUSP_CURVE = "AdmissibleCuspCurve"
INADMISSIBLE = "Inadmissible"


def _dense_count(M: int) -> int:
    return max(1024, 16 * (M + 1))


@dataclass(frozen=True)
class SphericalCurve:
    """A trigonometric curve whose image lies on S^2 to ``norm_defect``."""

    base: FourierCurve3
    norm_defect: float

    @classmethod
    def from_fourier(cls, curve: FourierCurve3, normalize: bool = True) -> "SphericalCurve":
        if normalize:
            return _normalized(curve)
        # exact coefficients: pad so the tail check sees two empty modes
        padded = curve.resized(curve.modes + 2)
        defect = _norm_defect(padded)
        if defect > NORM_TOL:
            raise DomainError(f"curve is not on the unit sphere (defect {defect:.3e})")
        return cls(padded, defect)

    @classmethod
    def from_coeffs(cls, cos, sin=(), normalize: bool = True) -> "SphericalCurve":
        return cls.from_fourier(FourierCurve3.from_cos_sin(cos, sin), normalize)

    @property
    def modes(self) -> int:
        return self.base.modes

    def __call__(self, s, order: int = 0) -> np.ndarray:
        return self.base(s, order)

    @cached_property
    def max_speed(self) -> float:
        n = _dense_count(self.modes)
        return float(np.linalg.norm(self.base.on_grid(n, 1), axis=-1).max())

    @property
    def eps_reg(self) -> float:
        """Speed below which a point counts as singular."""
        return REG_REL * self.max_speed

    @cached_property
    def classification(self) -> "CurveClassification":
        return classify_curve(self)

    def shifted(self, c: float) -> "SphericalCurve":
        return SphericalCurve(self.base.shifted(c), self.norm_defect)

    def rotated(self, R) -> "SphericalCurve":
        return SphericalCurve(self.base.rotated(R), self.norm_defect)


def _norm_defect(curve: FourierCurve3) -> float:
    vals = curve.on_grid(_dense_count(curve.modes))
    return float(np.abs(np.linalg.norm(vals, axis=-1) - 1.0).max())


def _normalized(curve: FourierCurve3, max_modes: int = 2048) -> SphericalCurve:
    n = max(1024, 8 * (curve.modes + 1))
    if np.linalg.norm(curve.on_grid(4 * n), axis=-1).min() <= ORIGIN_TOL:
        raise OriginCrossingError("curve passes through the origin; cannot project radially")
    while True:
        vals = curve.on_grid(n)
        alpha = vals / np.linalg.norm(vals, axis=-1, keepdims=True)
        hat = grid_to_hat(alpha, n // 2 - 1)
        e = mode_energy(hat)
        significant = np.nonzero(e > 1e-15 * e.max())[0]
        M = int(significant[-1]) + 2
        if M < n // 8 or n >= 4 * max_modes:
            break
        n *= 2
    if M > max_modes:
        raise ResolutionError(f"radial projection needs more than {max_modes} modes")
    fc = FourierCurve3(hat[: M + 1])
    defect = _norm_defect(fc)
    if defect > NORM_TOL or not fc.is_resolved():
        raise ResolutionError(f"re-expanded curve misses the sphere by {defect:.3e}")
    return SphericalCurve(fc, defect)


# ---------------------------------------------------------------- builtins

def circle(A: float) -> SphericalCurve:
    """Circle of constant height ``A = cos(phi)`` traversed counterclockwise."""
    if not -1.0 <= A <= 1.0:
        raise DomainError("circle height must lie in [-1, 1]")
    r = math.sqrt(max(0.0, 1.0 - A * A))
    return SphericalCurve.from_coeffs([[0, 0, A], [r, 0, 0]], [[0, r, 0]], normalize=False)


def equator() -> SphericalCurve:
    return circle(0.0)


def cardioid_plane(scale: float = 0.25) -> FourierCurve3:
    """Planar cardioid ``scale * (2 e^{is} - e^{2is})``; one (s^2, s^3) cusp at s=0."""
    return FourierCurve3.from_cos_sin(
        [[0, 0, 0], [2 * scale, 0, 0], [-scale, 0, 0]],
        [[0, 2 * scale, 0], [0, -scale, 0]],
    )


def cusp_demo(scale: float = 0.25) -> SphericalCurve:
    return gnomonic_lift(cardioid_plane(scale))


def perturbed_circle(A: float, amplitude: float, seed: int, modes: Sequence[int] = (2, 3)) -> SphericalCurve:
    """Circle ``A`` carrying a seeded epicycle; exactly unit and band limited.

    ``alpha(s) = R_z(s) R_n(k s + phase) p`` where ``n`` is the circle point at
    ``s = 0`` and ``p`` lies at angular distance ``~ amplitude`` from ``n``.
    Both rotations have trigonometric entries, so ``alpha`` is a trigonometric
    polynomial of degree ``k + 1`` with no projection error.  Radially
    normalized bumps carry round-off in every mode, which the Cauchy
    recurrence amplifies beyond recovery.
    """
    if not 0.0 <= A < 1.0:
        raise DomainError("circle height must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    k = int(rng.choice(np.asarray(modes)))
    delta = amplitude * rng.uniform(0.5, 1.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    r = math.sqrt(1.0 - A * A)
    n = np.array([r, 0.0, A])
    p = math.cos(delta) * n + math.sin(delta) * np.array([-A, 0.0, r])

    def fn(s):
        th = k * s + phase
        w = (np.multiply.outer(np.cos(th), p) + np.multiply.outer(np.sin(th), np.cross(n, p))
             + np.multiply.outer(1.0 - np.cos(th), n * (n @ p)))
        c, sn = np.cos(s), np.sin(s)
        return np.stack([c * w[:, 0] - sn * w[:, 1], sn * w[:, 0] + c * w[:, 1], w[:, 2]], axis=-1)

    return SphericalCurve.from_fourier(FourierCurve3.from_function(fn, k + 1), normalize=False)


# -------------------------------------------------------------- operations

def curve_jet(curve: SphericalCurve, s, order: int) -> tuple:
    if order > 4:
        raise UnsupportedOrderError(f"jets above order 4 are not supported (got {order})")
    if order < 0:
        raise UnsupportedOrderError("order must be non-negative")
    return tuple(curve(s, k) for k in range(order + 1))


def _speed_times_curvature(a, da, dda):
    """``<a'', a x a'> / |a'|^2``, i.e. ``|a'| k_a``."""
    num = np.einsum("...i,...i->...", dda, np.cross(a, da))
    return num / np.einsum("...i,...i->...", da, da)


def geodesic_curvature(curve: SphericalCurve, s):
    a, da, dda = curve_jet(curve, s, 2)
    speed = np.linalg.norm(da, axis=-1)
    if np.any(speed <= curve.eps_reg):
        raise SingularPointError("geodesic curvature is undefined where the curve stops; use cusp_invariant")
    k = np.einsum("...i,...i->...", dda, np.cross(a, da)) / speed**3
    return float(k) if np.ndim(k) == 0 else k


def _g(curve, s):
    a, da, dda = curve_jet(curve, s, 2)
    return _speed_times_curvature(a, da, dda)


def _window_limit(curve, s0, lo, hi, count=12):
    t = np.geomspace(lo, hi, count)
    t = np.concatenate([-t[::-1], t])
    vals = _g(curve, s0 + t)
    coef = np.polynomial.polynomial.polyfit(t, vals, 4)
    return float(coef[0])


def cusp_invariant(curve: SphericalCurve, s0: float) -> float:
    """Limit of ``|a'(s)| k_a(s)`` as ``s -> s0``."""
    da = curve(s0, 1)
    if np.linalg.norm(da) > curve.eps_reg:
        return float(_g(curve, s0))
    values = [_window_limit(curve, s0, lo, hi) for lo, hi in CUSP_WINDOWS]
    scale = max(1.0, max(abs(v) for v in values))
    if abs(values[0] - values[1]) > CUSP_STABILITY * scale:
        raise NonAdmissibleCuspError(f"cusp limit at s={s0:.6g} does not stabilize", values)
    return values[-1]


def find_cusps(curve: SphericalCurve) -> list[float]:
    """Parameters in [0, 2pi) where the velocity vanishes."""
    n = _dense_count(curve.modes) * 4
    s = grid(n)
    da = curve(s, 1)
    dda = curve(s, 2)
    speed = np.linalg.norm(da, axis=-1)
    phi = np.einsum("ij,ij->i", da, dda)
    out = []
    for i in np.nonzero((phi < 0) & (np.roll(phi, -1) >= 0))[0]:
        if speed[i] > 1e-2 * curve.max_speed and speed[(i + 1) % n] > 1e-2 * curve.max_speed:
            continue
        a, b = s[i], s[i] + 2 * np.pi / n
        f = lambda x: float(np.dot(curve(x, 1), curve(x, 2)))
        x = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if np.linalg.norm(curve(x, 1)) <= curve.eps_reg:
            out.append(float(np.mod(x, 2 * np.pi)))
    return sorted(out)


def _arcs_intersect(A, B, C, D):
    """Vectorised test for crossings of short great-circle arcs AB and CD."""
    n1 = np.cross(A, B)
    n2 = np.cross(C, D)
    line = np.cross(n1, n2)
    norm = np.linalg.norm(line, axis=-1)
    hit = np.zeros(len(A), dtype=bool)
    flat = norm < 1e-14
    if np.any(flat):
        # coplanar arcs: compare angular intervals along the common great circle
        e1 = A[flat]
        e2 = np.cross(n1[flat] / np.linalg.norm(n1[flat], axis=-1, keepdims=True), e1)

        def ang(P):
            return np.arctan2(np.einsum("ij,ij->i", P, e2), np.einsum("ij,ij->i", P, e1))

        ib = ang(B[flat])
        ic, id_ = ang(C[flat]), ang(D[flat])
        lo, hi = np.minimum(ic, id_), np.maximum(ic, id_)
        ok = (hi - lo) < np.pi
        hit[flat] = ok & (np.maximum(0.0, lo) < np.minimum(ib, hi))
    P = line[~flat] / norm[~flat, None]
    a, b, c, d = A[~flat], B[~flat], C[~flat], D[~flat]
    m1, m2 = n1[~flat], n2[~flat]
    res = np.zeros(len(P), dtype=bool)
    for sign in (1.0, -1.0):
        Q = sign * P
        on1 = (np.einsum("ij,ij->i", np.cross(a, Q), m1) >= 0) & (np.einsum("ij,ij->i", np.cross(Q, b), m1) >= 0)
        on2 = (np.einsum("ij,ij->i", np.cross(c, Q), m2) >= 0) & (np.einsum("ij,ij->i", np.cross(Q, d), m2) >= 0)
        res |= on1 & on2
    hit[~flat] = res
    return hit


def is_simple(curve: SphericalCurve, vertices: int = JORDAN_VERTICES) -> bool:
    """Segment-pair intersection test on a geodesic polygon proxy."""
    P = curve.base.on_grid(vertices)
    P = P / np.linalg.norm(P, axis=-1, keepdims=True)
    Q = np.roll(P, -1, axis=0)
    mid = P + Q
    mid /= np.linalg.norm(mid, axis=-1, keepdims=True)
    seg = np.linalg.norm(Q - P, axis=-1)
    tree = cKDTree(mid)
    pairs = tree.query_pairs(r=1.01 * seg.max() + 1e-12, output_type="ndarray")
    if len(pairs) == 0:
        return True
    i, j = pairs[:, 0], pairs[:, 1]
    gap = np.abs(i - j)
    keep = (gap > 1) & (gap < vertices - 1)
    i, j = i[keep], j[keep]
    if len(i) == 0:
        return True
    return not np.any(_arcs_intersect(P[i], Q[i], P[j], Q[j]))


@dataclass(frozen=True)
class CurveClassification:
    verdict: str
    cusp_locations: tuple = ()
    cusp_invariants: tuple = ()
    min_speed: float = 0.0
    curvature_sign: int = 0
    simple: bool = False
    reason: str = ""


def classify_curve(curve: SphericalCurve) -> CurveClassification:
    if not curve.base.is_resolved():
        raise ResolutionError(f"curve tail ratio {curve.base.tail_ratio():.2e} exceeds resolution bound")
    cusps = find_cusps(curve)
    invariants = []
    for s0 in cusps:
        try:
            invariants.append(cusp_invariant(curve, s0))
        except NonAdmissibleCuspError as exc:
            return CurveClassification(INADMISSIBLE, tuple(cusps), tuple(exc.window_values), reason=str(exc))
    n = _dense_count(curve.modes) * 4
    s = grid(n)
    a, da, dda = curve_jet(curve, s, 2)
    speed = np.linalg.norm(da, axis=-1)
    regular = speed > curve.eps_reg
    g = _speed_times_curvature(a[regular], da[regular], dda[regular])
    k = g / speed[regular]
    signs = {int(v) for v in np.sign(g[np.abs(k) > CURV_TOL])}
    min_speed = float(speed.min())
    base = dict(cusp_locations=tuple(cusps), cusp_invariants=tuple(invariants), min_speed=min_speed)
    if np.any(np.abs(k) <= CURV_TOL) or len(signs) != 1:
        return CurveClassification(INADMISSIBLE, **base, reason="geodesic curvature vanishes")
    sign = signs.pop()
    if any(abs(c) <= CURV_TOL or np.sign(c) != sign for c in invariants):
        return CurveClassification(INADMISSIBLE, **base, curvature_sign=sign, reason="degenerate cusp")
    simple = is_simple(curve)
    verdict = REGULAR_CONVEX_JORDAN if (not cusps and simple) else ADMISSIBLE_CUSP_CURVE
    return CurveClassification(verdict, **base, curvature_sign=sign, simple=simple)


def _require_jordan(curve: SphericalCurve):
    verdict = curve.classification.verdict
    if verdict != REGULAR_CONVEX_JORDAN:
        raise ClassificationError(f"operation needs a regular convex Jordan curve, got {verdict}")


def _fan_area(curve: SphericalCurve, n: int) -> float:
    P = curve.base.on_grid(n)
    P /= np.linalg.norm(P, axis=-1, keepdims=True)
    c = P.mean(axis=0)
    c /= np.linalg.norm(c)
    Q = np.roll(P, -1, axis=0)
    det = np.einsum("j,ij->i", c, np.cross(P, Q))
    den = 1.0 + P @ c + Q @ c + np.einsum("ij,ij->i", P, Q)
    return float(np.sum(2.0 * np.arctan2(det, den)))


def enclosed_spherical_area(curve: SphericalCurve) -> float:
    """Area of the smaller region bounded by a convex Jordan curve.

    Centroid fan of spherical triangles on an ``n``-gon and a ``2n``-gon,
    combined by Richardson extrapolation (the polygon error is O(n^-2)).
    """
    _require_jordan(curve)
    n = max(1 << 15, 64 * (curve.modes + 1))
    a1, a2 = abs(_fan_area(curve, n)), abs(_fan_area(curve, 2 * n))
    area = (4.0 * a2 - a1) / 3.0
    return min(area, 4.0 * np.pi - area)


@dataclass(frozen=True)
class ConeAngle:
    angle_area: float
    angle_gb: float
    difference: float = field(default=0.0)


def total_geodesic_curvature(curve: SphericalCurve, n: int | None = None) -> float:
    """Periodic trapezoid rule for the closed integral of ``k_a |a'| ds``."""
    n = n or _dense_count(curve.modes)
    s = grid(n)
    return float(np.mean(_g(curve, s)) * 2.0 * np.pi)


def cone_angle(curve: SphericalCurve) -> ConeAngle:
    _require_jordan(curve)
    by_area = 2.0 * np.pi - enclosed_spherical_area(curve)
    by_gb = abs(total_geodesic_curvature(curve))
    diff = abs(by_area - by_gb)
    if diff > CONE_CONSISTENCY:
        raise ConsistencyError(f"cone angle routes disagree by {diff:.3e}")
    return ConeAngle(by_area, by_gb, diff)


def gnomonic_lift(planar: FourierCurve3) -> SphericalCurve:
    """Invert the central projection ``(x1/x3, x2/x3)`` into the upper hemisphere."""
    if np.abs(planar.hat[:, 2]).max() > 0.0:
        raise DomainError("planar curve must have a vanishing third component")
    hat = planar.hat.copy()
    hat[0, 2] = 1.0
    return SphericalCurve.from_fourier(FourierCurve3(hat), normalize=True)


def troyanov_check(thetas: Sequence[float]) -> bool:
    """Strict angle inequalities ``n-2 < sum < n-2 + min`` for normalised cone angles.

    Evaluated in exact rational arithmetic on the given floats.
    """
    thetas = list(thetas)
    n = len(thetas)
    if n <= 2:
        raise DomainError("need more than two cone angles")
    if any(not (0.0 < t < 1.0) for t in thetas):
        raise DomainError("normalised cone angles must lie in (0, 1)")
    q = [Fraction(t) for t in thetas]
    total = sum(q)
    return n - 2 < total < n - 2 + min(q)
