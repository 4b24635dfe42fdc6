"""K=1 surfaces from a harmonic Gauss map, plus the exact rotational family.

The surface follows from its Gauss map through

    X_u = N x N_v,    X_v = -N x N_u,

so integrating the second relation term by term in ``v`` gives
``X - p = sum_k d_k v^k`` with ``d_k = -[N x N_u]_{k-1} / k``.  The first
relation then becomes a compatibility check that holds iff ``N`` is harmonic.

Both relations are unchanged under ``N -> -N``.  Patches carry the normal
``sigma * N`` with ``sigma`` chosen so that ``rho = -<X_u, N_u>/2 > 0`` on the
side ``v > 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad_vec

from .errors import DivergentIntegralError, DomainError, ExtrapolationError, HorizonError, IntegrabilityError
from .fourier import grid, grid_to_hat, hat_derivative, hat_to_grid
from .harmonic_cauchy import GaussJet, series_partials

COMPAT_TOL = 1e-6
QUAD_TOL = 1e-12
HORIZON_TOL = 1e-6
V_MIN = 1e-3
ORIGINS = ("cauchy_pipeline", "rotational_exact", "parallel_cmc", "reflection", "legendre")


# ------------------------------------------------------------------ surface jets

@dataclass(frozen=True)
class SurfaceJet:
    base_point: np.ndarray
    hat: np.ndarray  # (K_v + 2, 2 M_u + 1, 3); hat[0] = 0 so that X(u, 0) = p
    source: GaussJet
    orientation: int
    compat_residual: float
    reflected: bool = False

    @property
    def layers(self):
        from .fourier import FourierCurve3

        return [FourierCurve3(h) for h in self.hat[1:]]

    @property
    def trust_height(self) -> float:
        return self.source.trust_height


def _cross_layers(a_grid, b_grid, M_out):
    """v-coefficients of ``a x b`` from grid samples of the layers of ``a`` and ``b``."""
    K = a_grid.shape[0]
    out = np.zeros((K, M_out + 1, 3), dtype=complex)
    for k in range(K):
        acc = np.zeros(a_grid.shape[1:])
        for i in range(k + 1):
            acc += np.cross(a_grid[i], b_grid[k - i])
        out[k] = grid_to_hat(acc, M_out)
    return out


def orientation_sign(jet: GaussJet) -> int:
    """``sigma`` making ``rho > 0`` for small ``v > 0``.

    To leading order ``rho = -|a'|^3 k v / 2`` for the unoriented normal, so
    ``sigma`` is minus the sign of the total turning ``<a'', a x a'>``.
    """
    n = 4 * jet.M_u + 4
    a, da, dda = (hat_to_grid(hat_derivative(jet.hat[0], j), n) for j in range(3))
    turning = np.einsum("ij,ij->i", dda, np.cross(a, da)).sum()
    scale = np.einsum("ij,ij->i", da, da).sum() ** 1.5 + 1e-300
    if abs(turning) <= 1e-12 * scale:
        return 1
    return -1 if turning > 0 else 1


def integrate_surface(jet: GaussJet, p=(0.0, 0.0, 0.0)) -> SurfaceJet:
    p = np.asarray(p, dtype=float).reshape(3)
    K, M = jet.K_v, jet.M_u
    M2 = 2 * M
    n = 4 * M2 + 4
    c = hat_to_grid(jet.hat, n)
    cu = hat_to_grid(hat_derivative(jet.hat, 1), n)
    # [N x N_u]_k for k = 0..K
    nnu = _cross_layers(c, cu, M2)
    hat = np.zeros((K + 2, M2 + 1, 3), dtype=complex)
    for k in range(1, K + 2):
        hat[k] = -nnu[k - 1] / k
    # compatibility: d/du d_k = [N x N_v]_k with [N_v]_j = (j + 1) c_{j+1}; exact for k < K
    cv = np.zeros_like(c)
    cv[:-1] = c[1:] * np.arange(1, K + 1)[:, None, None]
    nnv = _cross_layers(c[:K], cv[:K], M2)
    resid = float(np.abs(hat_derivative(hat[1:K], 1) - nnv[1:K]).max()) if K >= 2 else 0.0
    if resid > COMPAT_TOL:
        raise IntegrabilityError(f"compatibility residual {resid:.3e} exceeds {COMPAT_TOL:g}")
    return SurfaceJet(p, hat, jet, orientation_sign(jet), float(resid))


def compatibility_residual(sjet: SurfaceJet) -> float:
    return sjet.compat_residual


# ------------------------------------------------------------------ patches

@dataclass(frozen=True)
class SurfacePatch:
    """Samples on a rectangular ``u x v`` grid; ``X[(i, j)] = d_u^i d_v^j X``."""

    u: np.ndarray
    v: np.ndarray
    X: dict
    N: dict
    origin: str
    conformal: bool = True
    periodic_u: bool = False
    flags: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return (len(self.u), len(self.v))

    @property
    def order(self) -> int:
        return max(i + j for i, j in self.X)


def sample_patch(sjet: SurfaceJet, u_count: int, v_range, v_count: int, order: int = 3) -> SurfacePatch:
    """Exact series and spectral samples of ``X`` and the oriented ``N``."""
    return sample_patch_at(sjet, u_count, np.linspace(v_range[0], v_range[1], v_count), order)


def sample_patch_at(sjet: SurfaceJet, u_count: int, v, order: int = 3) -> SurfacePatch:
    """Like :func:`sample_patch` on explicit, possibly non-uniform, ``v`` values."""
    v = np.asarray(v, dtype=float)
    u = grid(u_count)
    h = sjet.trust_height
    if np.any(np.abs(v) > h * (1 + 1e-12)):
        raise ExtrapolationError(f"|v| up to {np.abs(v).max():.4g} leaves the trusted strip |v| <= {h:.4g}")
    sigma = sjet.orientation
    if sjet.reflected:
        # explicit rule X(u, -v) = 2p - X(u, v), N(u, -v) = N(u, v)
        av = np.abs(v)
        Xr = series_partials(sjet.hat, u, av, order)
        Nr = series_partials(sjet.source.hat, u, av, order)
        X, N = {}, {}
        for (i, j), val in Xr.items():
            X[(i, j)] = val * np.where(v < 0, -((-1.0) ** j), 1.0)[None, :, None]
        for (i, j), val in Nr.items():
            N[(i, j)] = sigma * val * np.where(v < 0, (-1.0) ** j, 1.0)[None, :, None]
    else:
        X = series_partials(sjet.hat, u, v, order)
        N = {k: sigma * val for k, val in series_partials(sjet.source.hat, u, v, order).items()}
    X[(0, 0)] = X[(0, 0)] + sjet.base_point
    return SurfacePatch(u, v, X, N, "cauchy_pipeline", True, True, meta={"orientation": sigma})


def reflect_extend(sjet: SurfaceJet) -> SurfaceJet:
    """Jet whose samples at ``v < 0`` follow the point reflection through ``p``."""
    return replace(sjet, reflected=True)


def reflect_patch(patch: SurfacePatch, p=(0.0, 0.0, 0.0)) -> SurfacePatch:
    """``Y(u, v) = 2p - X(u, -v)`` with ``N(u, -v)``, sampled on the mirrored grid."""
    p = np.asarray(p, dtype=float)
    X, N = {}, {}
    for (i, j), val in patch.X.items():
        s = -((-1.0) ** j)
        X[(i, j)] = s * val[:, ::-1]
    X[(0, 0)] = 2.0 * p + X[(0, 0)]
    for (i, j), val in patch.N.items():
        N[(i, j)] = (-1.0) ** j * val[:, ::-1]
    flags = None if patch.flags is None else patch.flags[:, ::-1]
    return SurfacePatch(patch.u, -patch.v[::-1], X, N, "reflection", patch.conformal, patch.periodic_u,
                        flags, dict(patch.meta))


def parallel_cmc(patch: SurfacePatch, sign: int) -> SurfacePatch:
    """Parallel surface ``X + sign * N``; mean curvature ``-sign/2`` for the normal ``N``.

    Samples where the induced metric degenerates are flagged.  Undoing a
    parallel shift returns the stored source patch, so positions round trip
    exactly.
    """
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    parent = patch.meta.get("parallel_parent")
    if patch.origin == "parallel_cmc" and parent is not None and patch.meta.get("parallel_sign") == -sign:
        return parent
    X = {k: val + sign * patch.N[k] for k, val in patch.X.items() if k in patch.N}
    E, F, G = _metric(X)
    E0, _, G0 = _metric(patch.X)
    # degeneracy is measured against the metric scale of the source surface
    flags = E * G - F * F <= 1e-10 * (E0 + G0) ** 2
    meta = {"parallel_parent": patch, "parallel_sign": sign, "H": -sign / 2.0}
    return SurfacePatch(patch.u, patch.v, X, dict(patch.N), "parallel_cmc", patch.conformal,
                        patch.periodic_u, flags, meta)


def _metric(X):
    fu, fv = X[(1, 0)], X[(0, 1)]
    dot = lambda a, b: np.einsum("...i,...i->...", a, b)
    return dot(fu, fu), dot(fu, fv), dot(fv, fv)


def legendre_transform(patch: SurfacePatch) -> SurfacePatch:
    """``L = (-N1/N3, -N2/N3, -(X1 N1 + X2 N2)/N3 - X3)`` with first derivatives."""
    N, X = patch.N[(0, 0)], patch.X[(0, 0)]
    n3 = N[..., 2]
    bad = np.argwhere(np.abs(n3) <= HORIZON_TOL)
    if len(bad):
        raise HorizonError(f"{len(bad)} samples reach the horizon |N3| <= {HORIZON_TOL:g}",
                           [tuple(int(i) for i in b) for b in bad])
    L = {(0, 0): _legendre_point(X, N)}
    for d in ((1, 0), (0, 1)):
        Xd, Nd = patch.X[d], patch.N[d]
        p1, p2 = N[..., 0] / n3, N[..., 1] / n3
        dp1 = (Nd[..., 0] * n3 - N[..., 0] * Nd[..., 2]) / n3**2
        dp2 = (Nd[..., 1] * n3 - N[..., 1] * Nd[..., 2]) / n3**2
        d3 = -(Xd[..., 0] * p1 + X[..., 0] * dp1 + Xd[..., 1] * p2 + X[..., 1] * dp2) - Xd[..., 2]
        L[d] = np.stack([-dp1, -dp2, d3], axis=-1)
    x1, x2 = X[..., 0], X[..., 1]
    w = np.sqrt(1.0 + x1**2 + x2**2)
    nl = {(0, 0): np.stack([-x1, -x2, np.ones_like(x1)], axis=-1) / w[..., None]}
    for d in ((1, 0), (0, 1)):
        Xd = patch.X[d]
        dw = (x1 * Xd[..., 0] + x2 * Xd[..., 1]) / w
        raw = np.stack([-Xd[..., 0], -Xd[..., 1], np.zeros_like(x1)], axis=-1)
        nl[d] = raw / w[..., None] - nl[(0, 0)] * (dw / w)[..., None]
    return SurfacePatch(patch.u, patch.v, L, nl, "legendre", False, patch.periodic_u, None, {})


def _legendre_point(X, N):
    n3 = N[..., 2]
    return np.stack([
        -N[..., 0] / n3,
        -N[..., 1] / n3,
        -(X[..., 0] * N[..., 0] + X[..., 1] * N[..., 1]) / n3 - X[..., 2],
    ], axis=-1)


# ------------------------------------------------------------------ rotational family

def _elliptic(fn, lo, hi):
    """Vectorized adaptive 15-point Gauss-Kronrod integral of ``fn`` over ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    span = hi - lo
    val, _ = quad_vec(lambda x: fn(lo + span * x) * span, 0.0, 1.0, epsabs=QUAD_TOL, epsrel=0.0,
                      quadrature="gk15")
    return val


def meridian_height(A: float, u):
    """``h(u) = int_0^u sqrt(1 - A^2 sin^2 r) dr``."""
    m = A * A
    return _elliptic(lambda r: np.sqrt(1.0 - m * np.sin(r) ** 2), 0.0, u)


def conformal_coordinate(A: float, u):
    """``s(u) = int_0^u dr / sqrt(1 - A^2 sin^2 r)``."""
    m = A * A
    return _elliptic(lambda r: 1.0 / np.sqrt(1.0 - m * np.sin(r) ** 2), 0.0, u)


def diameter(A: float) -> float:
    if not 0.0 < A <= 1.0:
        raise DomainError("A must lie in (0, 1]")
    return float(2.0 * meridian_height(A, math.pi / 2))


@dataclass(frozen=True)
class ConformalData:
    A: float
    a: float
    modulus: float

    def s_of_u(self, u):
        return conformal_coordinate(self.A, u)

    def u_of_s(self, s):
        return _invert_s(self.A, s, self.a)


def rotational_conformal(A: float) -> ConformalData:
    if A == 1.0:
        raise DivergentIntegralError("A = 1: the conformal half period diverges (infinite modulus)")
    if not 0.0 < A < 1.0:
        raise DomainError("A must lie in (0, 1)")
    a = float(conformal_coordinate(A, math.pi / 2))
    return ConformalData(A, a, math.exp(2.0 * a))


def _invert_s(A: float, s, a: float | None = None):
    """Monotone inverse of ``s(u)`` by safeguarded Newton steps to 1e-12."""
    s = np.asarray(s, dtype=float)
    m = A * A
    lo = np.full(s.shape, -math.pi / 2)
    hi = np.full(s.shape, math.pi / 2)
    u = np.clip(s, lo, hi)
    for _ in range(100):
        f = conformal_coordinate(A, u) - s
        lo = np.where(f < 0, u, lo)
        hi = np.where(f > 0, u, hi)
        step = f * np.sqrt(1.0 - m * np.sin(u) ** 2)
        cand = u - step
        out = (cand <= lo) | (cand >= hi)
        cand = np.where(out, 0.5 * (lo + hi), cand)
        done = np.abs(cand - u) <= 1e-13
        u = cand
        if np.all(done):
            break
    return u


class _SCD:
    """Polynomials in ``S = sin u``, ``C = cos u`` and ``D = sqrt(1 - m S^2)``; ``D`` may carry negative powers."""

    def __init__(self, terms: dict, m: float):
        self.terms = {k: c for k, c in terms.items() if c != 0.0}
        self.m = m

    def d_u(self) -> "_SCD":
        out: dict = {}
        for (i, j, k), c in self.terms.items():
            if i:
                out[(i - 1, j + 1, k)] = out.get((i - 1, j + 1, k), 0.0) + c * i
            if j:
                out[(i + 1, j - 1, k)] = out.get((i + 1, j - 1, k), 0.0) - c * j
            if k:
                key = (i + 1, j + 1, k - 2)
                out[key] = out.get(key, 0.0) - c * k * self.m
        return _SCD(out, self.m)

    def times_D(self, power: int = 1) -> "_SCD":
        return _SCD({(i, j, k + power): c for (i, j, k), c in self.terms.items()}, self.m)

    def __call__(self, S, C, D):
        out = np.zeros_like(S)
        for (i, j, k), c in self.terms.items():
            out = out + c * S**i * C**j * D**k
        return out


def _trig(kind: str, j: int, t):
    if kind == "one":
        return np.ones_like(t) if j == 0 else np.zeros_like(t)
    cyc = [np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin]
    shift = 0 if kind == "cos" else 3
    return cyc[(j + shift) % 4](t)


def _rotational_partials(A: float, u, t, order: int, conformal: bool):
    """Partials of ``X_A`` and ``N_A`` in ``(u, t)`` or ``(s, t)`` on a tensor grid.

    ``u`` holds meridian parameters in both cases; in the conformal frame the
    first derivative operator is ``d/ds = D d/du``.
    """
    m = A * A
    S, C = np.sin(u)[:, None], np.cos(u)[:, None]
    D = np.sqrt(1.0 - m * S**2)
    t = np.asarray(t)[None, :]
    h = meridian_height(A, u)[:, None]

    def deriv(poly):
        p = poly.d_u()
        return p.times_D() if conformal else p

    # (polynomial part, angular factor) per component
    X_parts = [(_SCD({(0, 1, 0): A}, m), "cos"), (_SCD({(0, 1, 0): A}, m), "sin")]
    N_parts = [(_SCD({(0, 0, 1): -1.0}, m), "cos"), (_SCD({(0, 0, 1): -1.0}, m), "sin"),
               (_SCD({(1, 0, 0): -A}, m), "one")]
    # first s or u derivative of the height: D, or D^2 in the conformal frame
    h1 = _SCD({(0, 0, 2 if conformal else 1): 1.0}, m)

    def table(parts, with_height):
        polys = []
        for poly, kind in parts:
            chain = [poly]
            for _ in range(order):
                chain.append(deriv(chain[-1]))
            polys.append((chain, kind))
        hchain = [None, h1]
        for _ in range(order - 1):
            hchain.append(deriv(hchain[-1]))
        out = {}
        for i in range(order + 1):
            for j in range(order + 1 - i):
                comps = [chain[i](S, C, D) * _trig(kind, j, t) for chain, kind in polys]
                if with_height:
                    if j > 0:
                        z = np.zeros((len(S), t.shape[1]))
                    elif i == 0:
                        z = np.broadcast_to(h, (len(S), t.shape[1]))
                    else:
                        z = np.broadcast_to(hchain[i](S, C, D), (len(S), t.shape[1]))
                    comps.append(z)
                out[(i, j)] = np.stack([np.broadcast_to(c, (len(S), t.shape[1])) for c in comps], axis=-1)
        return out

    return table(X_parts, True), table(N_parts, False)


def rotational_peaked_sphere(A: float, u_range=(-1.2, 1.2), u_count: int = 64, v_range=(0.0, 2 * math.pi),
                             v_count: int = 64, order: int = 3) -> SurfacePatch:
    """Meridian-frame samples of ``X_A(u, v) = (A cos u cos v, A cos u sin v, h(u))``."""
    if not 0.0 < A <= 1.0:
        raise DomainError("A must lie in (0, 1]")
    if u_range[0] <= -math.pi / 2 or u_range[1] >= math.pi / 2:
        raise DomainError("meridian range must stay inside (-pi/2, pi/2)")
    u = np.linspace(u_range[0], u_range[1], u_count)
    v = _angle_grid(v_range, v_count)
    X, N = _rotational_partials(A, u, v, order, conformal=False)
    return SurfacePatch(u, v, X, N, "rotational_exact", conformal=False, periodic_u=False,
                        meta={"A": A, "frame": "meridian", "periodic_v": _full_turn(v_range)})


def rotational_conformal_patch(A: float, s_range, s_count: int, v_range=(0.0, 2 * math.pi), v_count: int = 64,
                               order: int = 3) -> SurfacePatch:
    """Samples in the conformal coordinates ``(s, v)`` with ``s = s(u)``."""
    if not 0.0 < A <= 1.0:
        raise DomainError("A must lie in (0, 1]")
    s = np.linspace(s_range[0], s_range[1], s_count)
    u = _invert_s(A, s)
    v = _angle_grid(v_range, v_count)
    X, N = _rotational_partials(A, u, v, order, conformal=True)
    return SurfacePatch(s, v, X, N, "rotational_exact", conformal=True, periodic_u=False,
                        meta={"A": A, "frame": "conformal", "periodic_v": _full_turn(v_range)})


def rotational_cauchy_patch(A: float, u_count: int, v_range, v_count: int, order: int = 3) -> SurfacePatch:
    """The rotational surface in the coordinates of the Cauchy construction.

    With ``a = K(A^2)`` the pipeline variables are ``u = t`` and ``v = a - s``
    so that ``v = 0`` is the cone point, which becomes the origin.  The side
    ``v < 0`` is the point reflection of the side ``v > 0``.
    """
    a = rotational_conformal(A).a
    v = np.linspace(v_range[0], v_range[1], v_count)
    if np.any(np.abs(v) >= 2 * a):
        raise DomainError("|v| must stay below twice the conformal half period")
    t = grid(u_count)
    s = a - np.abs(v)
    uu = _invert_s(A, s)
    top = np.array([0.0, 0.0, float(meridian_height(A, math.pi / 2))])
    Xc, Nc = _rotational_partials(A, uu, t, order, conformal=True)
    refl = np.where(v < 0, -1.0, 1.0)[None, :, None]
    X, N = {}, {}
    for (i, j) in Xc:
        # d_u = d_t, d_v = -d_s on v > 0; arrays are indexed (s, t) so swap to (t, s)
        xs = np.swapaxes(Xc[(j, i)], 0, 1) * (-1.0) ** j
        ns = np.swapaxes(Nc[(j, i)], 0, 1) * (-1.0) ** j
        # v < 0: X(u, v) = -X(u, -v) and N(u, v) = N(u, -v)
        X[(i, j)] = np.where(refl < 0, -((-1.0) ** j) * xs, xs)
        N[(i, j)] = np.where(refl < 0, (-1.0) ** j * ns, ns)
    X[(0, 0)] = np.where(refl < 0, -(np.swapaxes(Xc[(0, 0)], 0, 1) - top),
                         np.swapaxes(Xc[(0, 0)], 0, 1) - top)
    return SurfacePatch(t, v, X, N, "rotational_exact", conformal=True, periodic_u=True,
                        meta={"A": A, "frame": "cauchy"})


def _angle_grid(v_range, count):
    if _full_turn(v_range):
        return v_range[0] + 2 * math.pi * np.arange(count) / count
    return np.linspace(v_range[0], v_range[1], count)


def _full_turn(v_range) -> bool:
    return abs(v_range[1] - v_range[0] - 2 * math.pi) < 1e-12


def limit_normal_curvature(A: float) -> dict:
    """Geodesic curvature of the limit-normal circle, two candidate expressions.

    The limit normal at the cone point traces a circle of Euclidean radius
    ``sqrt(1 - A^2)``; its geodesic curvature ``A / sqrt(1 - A^2)`` is the
    value consistent with the cone angle ``2 pi A`` via Gauss-Bonnet.  The
    alternative ``sqrt((2 - A^2)/(1 - A^2))`` is reported alongside.
    """
    if not 0.0 < A < 1.0:
        raise DomainError("A must lie in (0, 1)")
    return {
        "gauss_bonnet": A / math.sqrt(1.0 - A * A),
        "alternative": math.sqrt((2.0 - A * A) / (1.0 - A * A)),
    }
