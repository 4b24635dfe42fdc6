"""Fundamental data of sampled surfaces and residuals of the K=1 structure identities.

Conventions, with ``X_z = (X_u - i X_v)/2``:

    mu  = (|X_u|^2 + |X_v|^2) / 4
    Q   = <X_z, X_z> = (|X_u|^2 - |X_v|^2 - 2i <X_u, X_v>) / 4
    rho = -<X_u, N_u> / 2,   rho = |Q| sinh(omega),   H = mu / rho.

Derivatives of these quantities come from the stored partials of ``X`` and
``N`` through a second-order jet calculus, never from grid differencing.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GraphExtractionError, IsolatedSingularityWarning, ParametrizationError
from .fourier import grid, hat_derivative, hat_to_grid
from .harmonic_cauchy import GaussJet, series_partials
from .sphere_curves import SphericalCurve, cone_angle
from .surface_builder import SurfaceJet, SurfacePatch

CONFORMAL_TOL = 1e-9
Q_TOL = 1e-9
UMBILIC_REL = 1e-8
TOLERANCES = {
    "K_minus_1": 1e-6,
    "holo_Q": 1e-6,
    "romu": 1e-6,
    "sinh_gordon": 1e-6,
    "H_consistency": 1e-6,
    "boundary_omega": 1e-8,
    "boundary_omega_consistent": 1e-8,
    "frontal": 1e-9,
    "compat": 1e-9,
}


# ------------------------------------------------------------------ jet calculus

@dataclass
class Jet2:
    """Value and partial derivatives up to order two in ``(u, v)``."""

    f: np.ndarray
    fu: np.ndarray
    fv: np.ndarray
    fuu: np.ndarray
    fuv: np.ndarray
    fvv: np.ndarray

    @classmethod
    def from_partials(cls, P: dict, i: int = 0, j: int = 0) -> "Jet2":
        return cls(P[(i, j)], P[(i + 1, j)], P[(i, j + 1)], P[(i + 2, j)], P[(i + 1, j + 1)], P[(i, j + 2)])

    def _parts(self):
        return (self.f, self.fu, self.fv, self.fuu, self.fuv, self.fvv)

    def __add__(self, o):
        if isinstance(o, Jet2):
            return Jet2(*(a + b for a, b in zip(self._parts(), o._parts())))
        return Jet2(self.f + o, *self._parts()[1:])

    __radd__ = __add__

    def __neg__(self):
        return Jet2(*(-a for a in self._parts()))

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if not isinstance(o, Jet2):
            return Jet2(*(a * o for a in self._parts()))
        a, b = self, o
        return Jet2(
            a.f * b.f,
            a.fu * b.f + a.f * b.fu,
            a.fv * b.f + a.f * b.fv,
            a.fuu * b.f + 2 * a.fu * b.fu + a.f * b.fuu,
            a.fuv * b.f + a.fu * b.fv + a.fv * b.fu + a.f * b.fuv,
            a.fvv * b.f + 2 * a.fv * b.fv + a.f * b.fvv,
        )

    __rmul__ = __mul__

    def __truediv__(self, o):
        if not isinstance(o, Jet2):
            return self * (1.0 / o)
        return self * o.apply(lambda x: 1.0 / x, lambda x: -1.0 / x**2, lambda x: 2.0 / x**3)

    def apply(self, g, dg, ddg) -> "Jet2":
        """Chain rule for a scalar function with first and second derivatives."""
        g1, g2 = dg(self.f), ddg(self.f)
        return Jet2(
            g(self.f),
            g1 * self.fu,
            g1 * self.fv,
            g1 * self.fuu + g2 * self.fu**2,
            g1 * self.fuv + g2 * self.fu * self.fv,
            g1 * self.fvv + g2 * self.fv**2,
        )

    def conj(self) -> "Jet2":
        return Jet2(*(np.conj(a) for a in self._parts()))

    @property
    def real(self) -> "Jet2":
        return Jet2(*(np.real(a) for a in self._parts()))


def jdot(a: Jet2, b: Jet2) -> Jet2:
    d = lambda x, y: np.einsum("...i,...i->...", x, y)
    return Jet2(
        d(a.f, b.f),
        d(a.fu, b.f) + d(a.f, b.fu),
        d(a.fv, b.f) + d(a.f, b.fv),
        d(a.fuu, b.f) + 2 * d(a.fu, b.fu) + d(a.f, b.fuu),
        d(a.fuv, b.f) + d(a.fu, b.fv) + d(a.fv, b.fu) + d(a.f, b.fuv),
        d(a.fvv, b.f) + 2 * d(a.fv, b.fv) + d(a.f, b.fvv),
    )


def jsqrt(a: Jet2) -> Jet2:
    return a.apply(np.sqrt, lambda x: 0.5 / np.sqrt(x), lambda x: -0.25 / x**1.5)


def jarcsinh(a: Jet2) -> Jet2:
    return a.apply(np.arcsinh, lambda x: 1.0 / np.sqrt(1 + x * x), lambda x: -x / (1 + x * x) ** 1.5)


# ------------------------------------------------------------------ fundamental data

@dataclass
class FundamentalData:
    Q: np.ndarray
    Q_from_N: np.ndarray
    mu: np.ndarray
    rho: np.ndarray
    omega: np.ndarray  # NaN at umbilic or singular samples
    H: np.ndarray
    K_raw: np.ndarray
    umbilic: np.ndarray
    singular: np.ndarray
    jets: dict = field(repr=False, default_factory=dict)

    @property
    def excluded_fraction(self) -> float:
        return float(np.mean(self.umbilic | self.singular))


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def gaussian_curvature(patch: SurfacePatch) -> np.ndarray:
    """``det II / det I`` from raw second derivatives and the cross-product normal."""
    Xu, Xv = patch.X[(1, 0)], patch.X[(0, 1)]
    n = np.cross(Xu, Xv)
    norm = np.linalg.norm(n, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        n = n / norm[..., None]
        E, F, G = _dot(Xu, Xu), _dot(Xu, Xv), _dot(Xv, Xv)
        e, f, g = _dot(patch.X[(2, 0)], n), _dot(patch.X[(1, 1)], n), _dot(patch.X[(0, 2)], n)
        K = (e * g - f * f) / (E * G - F * F)
    return np.where(norm > 0, K, np.nan)


def conformality_residual(patch: SurfacePatch) -> float:
    Xu, Xv, Nu, Nv = patch.X[(1, 0)], patch.X[(0, 1)], patch.N[(1, 0)], patch.N[(0, 1)]
    scale = max(float(np.abs(_dot(Xu, Nu)).max()), float(np.abs(_dot(Xv, Nv)).max()), 1.0)
    r1 = np.abs(_dot(Xu, Nv)).max()
    r2 = np.abs(_dot(Xu, Nu) - _dot(Xv, Nv)).max()
    return float(max(r1, r2) / scale)


def fundamental_forms(patch: SurfacePatch) -> FundamentalData:
    if not patch.conformal:
        raise ParametrizationError(f"{patch.origin} patch in the {patch.meta.get('frame', '?')} frame is not conformal")
    cres = conformality_residual(patch)
    if cres > CONFORMAL_TOL:
        raise ParametrizationError(f"patch is not conformal for II (residual {cres:.2e})")
    second = patch.order >= 3
    if second:
        Xu, Xv = Jet2.from_partials(patch.X, 1, 0), Jet2.from_partials(patch.X, 0, 1)
        Nu = Jet2.from_partials(patch.N, 1, 0)
        uu, vv, uv = jdot(Xu, Xu), jdot(Xv, Xv), jdot(Xu, Xv)
        mu_j = (uu + vv) * 0.25
        Q_j = (uu - vv - uv * 2j) * 0.25
        rho_j = jdot(Xu, Nu) * -0.5
        mu, Q, rho = mu_j.f, Q_j.f, rho_j.f
    else:
        Xu, Xv, Nu = patch.X[(1, 0)], patch.X[(0, 1)], patch.N[(1, 0)]
        mu = (_dot(Xu, Xu) + _dot(Xv, Xv)) / 4
        Q = (_dot(Xu, Xu) - _dot(Xv, Xv) - 2j * _dot(Xu, Xv)) / 4
        rho = -_dot(Xu, Nu) / 2
        mu_j = Q_j = rho_j = None
    Nu0, Nv0 = patch.N[(1, 0)], patch.N[(0, 1)]
    QN = -(_dot(Nu0, Nu0) - _dot(Nv0, Nv0) - 2j * _dot(Nu0, Nv0)) / 4
    absQ = np.abs(Q)
    scale = max(float(mu.max()), 1e-300)
    # relative to max |Q|, with a round-off floor so a totally umbilic patch is excluded entirely
    umbilic = absQ <= max(UMBILIC_REL * float(absQ.max()), 1e-12 * scale)
    singular = rho <= 1e-12 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        H = np.where(singular, np.inf, mu / np.where(singular, 1.0, rho))
        omega = np.where(umbilic | singular, np.nan, np.arcsinh(rho / np.where(umbilic, 1.0, absQ)))
    jets = {"mu": mu_j, "Q": Q_j, "rho": rho_j}
    return FundamentalData(Q, QN, mu, rho, omega, H, gaussian_curvature(patch), umbilic, singular, jets)


def verify_structure(data: FundamentalData, patch: SurfacePatch) -> dict:
    """Maximum residual of each structure identity over the admissible samples."""
    ok = ~data.singular
    good = ok & ~data.umbilic
    mx = lambda arr, mask: float(np.max(np.abs(arr[mask]))) if np.any(mask) else 0.0
    out = {
        "K_minus_1": mx(data.K_raw - 1.0, ok),
        "romu": mx(data.rho**2 - (data.mu**2 - np.abs(data.Q) ** 2), np.ones_like(ok)),
        "Q_two_ways": mx(data.Q - data.Q_from_N, np.ones_like(ok)),
        "frontal": max(mx(_dot(patch.X[(1, 0)], patch.N[(0, 0)]), np.ones_like(ok)),
                       mx(_dot(patch.X[(0, 1)], patch.N[(0, 0)]), np.ones_like(ok))),
        "conformal": conformality_residual(patch),
    }
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        coth = 1.0 / np.tanh(data.omega)
        out["H_consistency"] = mx(data.H - coth, good)
        Qj, rj = data.jets.get("Q"), data.jets.get("rho")
        if Qj is not None:
            out["holo_Q"] = mx(0.5 * (Qj.fu + 1j * Qj.fv), np.ones_like(ok))
            absQ = jsqrt((Qj * Qj.conj()).real)
            w = jarcsinh(rj / absQ) if np.any(good) else None
            if w is not None:
                sg = (w.fuu + w.fvv) / 4 + absQ.f * np.sinh(w.f)
                out["sinh_gordon"] = mx(sg, good)
            else:
                out["sinh_gordon"] = 0.0
    out["umbilic_fraction"] = float(np.mean(data.umbilic))
    out["singular_fraction"] = float(np.mean(data.singular))
    return out


# ------------------------------------------------------------------ axis behaviour

def axis_omega_v(jet: GaussJet, sjet: SurfaceJet, u) -> np.ndarray:
    """``omega_v(u, 0) = rho_1 / |Q_0|`` from the first series layers.

    ``rho = rho_1 v + O(v^2)`` with ``rho_1 = -sigma <d_1', c_0'> / 2`` and
    ``|Q(u, 0)| = |d_1|^2 / 4``.
    """
    u = np.asarray(u, dtype=float)
    d1 = series_partials(sjet.hat[1:2], u, np.zeros(1), 0)[(0, 0)][:, 0]
    d1u = series_partials(hat_derivative(sjet.hat[1:2], 1), u, np.zeros(1), 0)[(0, 0)][:, 0]
    c0u = series_partials(hat_derivative(jet.hat[:1], 1), u, np.zeros(1), 0)[(0, 0)][:, 0]
    rho1 = -sjet.orientation * _dot(d1u, c0u) / 2
    q0 = _dot(d1, d1) / 4
    with np.errstate(divide="ignore", invalid="ignore"):
        return rho1 / q0


@dataclass
class BoundaryRecord:
    omega_v_defect: float  # against the identity omega_v = ||a'|| k_a
    omega_v_consistent_defect: float  # against omega_v = 2 ||a'|| |k_a|
    axis_value_defect: float
    singular_scan: bool
    scan_height: float


def boundary_checks(jet: GaussJet, sjet: SurfaceJet, alpha: SphericalCurve, n: int = 256,
                    scan_height: float | None = None, scan_counts=(128, 64)) -> BoundaryRecord:
    """Axis behaviour of ``omega`` and a scan for zeros of ``rho`` above the axis."""
    u = grid(n)
    da = alpha(u, 1)
    speed2 = _dot(da, da)
    keep = speed2 > 1e-6 * speed2.max()  # omega_v is 0/0 at cusp parameters
    g = _dot(alpha(u, 2), np.cross(alpha(u), da)) / np.where(keep, speed2, 1.0)
    wv = axis_omega_v(jet, sjet, u)
    if np.any(keep):
        defect = float(np.abs(wv - g)[keep].max())
        consistent = float(np.abs(wv - 2 * np.abs(g))[keep].max())
    else:
        defect = consistent = math.inf
    # rho(u, 0) vanishes because X_u(u, 0) = d_0' = 0
    X = series_partials(sjet.hat, u, np.zeros(1), 1)
    N = series_partials(jet.hat, u, np.zeros(1), 1)
    axis = float(np.abs(_dot(X[(1, 0)], N[(1, 0)])).max()) / 2
    h = min(sjet.trust_height, 0.3) if scan_height is None else scan_height
    nu, nv = scan_counts
    vs = np.linspace(h / nv, h, nv)
    Xs = series_partials(sjet.hat, grid(nu), vs, 1)
    Ns = series_partials(jet.hat, grid(nu), vs, 1)
    rho = -sjet.orientation * _dot(Xs[(1, 0)], Ns[(1, 0)]) / 2
    mu = (_dot(Xs[(1, 0)], Xs[(1, 0)]) + _dot(Xs[(0, 1)], Xs[(0, 1)])) / 4
    scan = bool(np.all(rho > 1e-12 * max(float(mu.max()), 1e-300)))
    if not scan:
        warnings.warn("omega vanishes off the axis: the singular set is not isolated", IsolatedSingularityWarning,
                      stacklevel=2)
    return BoundaryRecord(defect, consistent, axis, scan, h)


# ------------------------------------------------------------------ integrals

def area_and_tmc(sampler, v_mins, v_max: float, nodes: int = 32) -> dict:
    """Area and total absolute mean curvature over ``v_min <= v <= v_max``.

    ``sampler(v)`` returns a patch on a periodic ``u`` grid at the given ``v``
    values; ``v`` is integrated by Gauss-Legendre and ``u`` by the periodic
    trapezoid rule.  Returns the table and successive difference ratios.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    rows = []
    for vm in v_mins:
        v = vm + (v_max - vm) * (x + 1) / 2
        wv = w * (v_max - vm) / 2
        patch = sampler(v)
        Xu, Xv = patch.X[(1, 0)], patch.X[(0, 1)]
        E, F, G = _dot(Xu, Xu), _dot(Xu, Xv), _dot(Xv, Xv)
        dA = np.sqrt(np.maximum(E * G - F * F, 0.0))
        mu = (E + G) / 4
        rho = np.abs(_dot(Xu, patch.N[(1, 0)])) / 2
        # rank-one samples carry no area, so they contribute nothing to either integral
        regular = dA > 1e-12 * (E + G)
        with np.errstate(divide="ignore", invalid="ignore"):
            hdA = np.where(regular, mu / rho * dA, 0.0)
        du = 2 * math.pi / len(patch.u)
        rows.append((float(vm), float(du * (dA @ wv).sum()), float(du * (hdA @ wv).sum())))
    diffs = [(rows[i + 1][1] - rows[i][1], rows[i + 1][2] - rows[i][2]) for i in range(len(rows) - 1)]
    ratios = [
        (d2[0] / d1[0] if d1[0] else 0.0, d2[1] / d1[1] if d1[1] else 0.0)
        for d1, d2 in zip(diffs, diffs[1:])
    ]
    return {"table": rows, "ratios": ratios}


# ------------------------------------------------------------------ finite-difference oracles

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _fd(arr, axis, stencil, h):
    """Fourth-order central difference along ``axis``; drops two samples at each end."""
    n = arr.shape[axis]
    out = 0.0
    for k, c in enumerate(stencil):
        if c:
            out = out + c * np.take(arr, np.arange(k, n - 4 + k), axis=axis)
    return out / h ** (2 if stencil is _D2 else 1)


def fd_mean_curvature(points: np.ndarray, hu: float, hv: float, normal: np.ndarray) -> np.ndarray:
    """Mean curvature from 4th-order differences of positions on a uniform grid.

    ``normal`` fixes the orientation; the result lives on the interior
    ``[2:-2, 2:-2]`` samples.
    """
    inner = (slice(2, -2), slice(2, -2))
    Xu = _fd(points, 0, _D1, hu)[:, 2:-2]
    Xv = _fd(points, 1, _D1, hv)[2:-2, :]
    Xuu = _fd(points, 0, _D2, hu)[:, 2:-2]
    Xvv = _fd(points, 1, _D2, hv)[2:-2, :]
    Xuv = _fd(_fd(points, 0, _D1, hu), 1, _D1, hv)
    n = np.cross(Xu, Xv)
    n /= np.linalg.norm(n, axis=-1)[..., None]
    n *= np.sign(_dot(n, normal[inner]))[..., None]
    E, F, G = _dot(Xu, Xu), _dot(Xu, Xv), _dot(Xv, Xv)
    e, f, g = _dot(Xuu, n), _dot(Xuv, n), _dot(Xvv, n)
    return (e * G - 2 * f * F + g * E) / (2 * (E * G - F * F))


def monge_ampere_residual(heights: np.ndarray, h: float, K: float) -> float:
    """``max |u_xx u_yy - u_xy^2 - K (1 + u_x^2 + u_y^2)^2|`` by 4th-order differences."""
    z = np.asarray(heights, dtype=float)
    zx = _fd(z, 0, _D1, h)[:, 2:-2]
    zy = _fd(z, 1, _D1, h)[2:-2, :]
    zxx = _fd(z, 0, _D2, h)[:, 2:-2]
    zyy = _fd(z, 1, _D2, h)[2:-2, :]
    zxy = _fd(_fd(z, 0, _D1, h), 1, _D1, h)
    res = zxx * zyy - zxy**2 - K * (1 + zx**2 + zy**2) ** 2
    return float(np.abs(res).max())


def extract_graph(evaluate, xs, ys, guess, iters: int = 50, tol: float = 1e-14) -> np.ndarray:
    """Heights ``z(x, y)`` of a surface ``(u, v) -> X`` over the plane grid ``xs x ys``.

    ``evaluate(u, v)`` returns ``(X, X_u, X_v)`` pointwise and ``guess(x, y)``
    an initial parameter pair.  Newton's method solves ``(X_1, X_2) = (x, y)``;
    failure to converge, or a change of orientation of the projection,
    means the surface is not a graph there.
    """
    x, y = np.meshgrid(xs, ys, indexing="ij")
    u, v = guess(x, y)
    for _ in range(iters):
        X, Xu, Xv = evaluate(u, v)
        r1, r2 = X[..., 0] - x, X[..., 1] - y
        det = Xu[..., 0] * Xv[..., 1] - Xv[..., 0] * Xu[..., 1]
        if np.any(det == 0):
            raise GraphExtractionError("projection is singular inside the graph region")
        du = (r1 * Xv[..., 1] - r2 * Xv[..., 0]) / det
        dv = (Xu[..., 0] * r2 - Xu[..., 1] * r1) / det
        u, v = u - du, v - dv
        if max(np.abs(du).max(), np.abs(dv).max()) < tol:
            break
    else:
        raise GraphExtractionError("Newton projection did not converge; the surface is not a graph here")
    X, Xu, Xv = evaluate(u, v)
    det = Xu[..., 0] * Xv[..., 1] - Xv[..., 0] * Xu[..., 1]
    if not (np.all(det > 0) or np.all(det < 0)):
        raise GraphExtractionError("projection folds over the region")
    return X[..., 2]


# ------------------------------------------------------------------ report

@dataclass
class DiagnosticsReport:
    residuals: dict
    cone_angle: dict | None
    verdict: str
    area: float
    total_mean_curvature: float
    singular_scan: bool
    extras: dict = field(default_factory=dict)

    def failures(self, tolerances: dict | None = None, enabled=None) -> list:
        tol = dict(TOLERANCES, **(tolerances or {}))
        names = enabled if enabled is not None else [k for k in tol if k != "boundary_omega"]
        bad = [k for k in names if k in self.residuals and not self.residuals[k] <= tol[k]]
        if not self.singular_scan:
            bad.append("singular_scan")
        return bad

    def as_dict(self) -> dict:
        return asdict(self)


def diagnose_jet(alpha: SphericalCurve, jet: GaussJet, sjet: SurfaceJet, patch: SurfacePatch,
                 sampler=None, v_mins=None) -> DiagnosticsReport:
    """Assemble every residual for one pipeline run."""
    from .harmonic_cauchy import norm_defect

    data = fundamental_forms(patch)
    res = verify_structure(data, patch)
    res["compat"] = sjet.compat_residual
    res["unit_norm"] = float(norm_defect(jet).max())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IsolatedSingularityWarning)
        bnd = boundary_checks(jet, sjet, alpha)
    res["boundary_omega"] = bnd.omega_v_defect
    res["boundary_omega_consistent"] = bnd.omega_v_consistent_defect
    res["axis_value"] = bnd.axis_value_defect
    cls = alpha.classification
    try:
        ca = cone_angle(alpha)
        cone = {"angle_area": ca.angle_area, "angle_gb": ca.angle_gb, "difference": ca.difference}
    except Exception as exc:  # non-Jordan or degenerate data has no cone angle
        cone = {"error": type(exc).__name__}
    area = tmc = 0.0
    if sampler is not None:
        v_max = float(patch.v.max())
        tab = area_and_tmc(sampler, v_mins or [float(patch.v.min())], v_max)
        _, area, tmc = tab["table"][-1]
    return DiagnosticsReport(res, cone, cls.verdict, area, tmc, bnd.singular_scan,
                             {"trust_height": jet.trust_height, "M_u": jet.M_u, "K_v": jet.K_v})
