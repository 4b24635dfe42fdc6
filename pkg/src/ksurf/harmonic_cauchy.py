"""Power series solution of the singular Cauchy problem for harmonic maps into S^2.

We look for ``N(u, v) = sum_k c_k(u) v^k`` with ``N(u, 0) = alpha(u)`` and
``N_v(u, 0) = 0`` solving

    N_uu + N_vv + (|N_u|^2 + |N_v|^2) N = 0.

Matching powers of ``v`` gives

    c_{k+2} = -(c_k'' + Phi_k) / ((k + 1) (k + 2)),

where ``Phi_k`` is the ``v^k`` coefficient of ``(|N_u|^2 + |N_v|^2) N``.  Every
layer is a trigonometric polynomial with ``M_u`` modes; products are formed
pointwise on an oversampled grid and projected back.

The Cauchy problem for an elliptic equation amplifies frequency ``m`` like
``exp(m v)``, so round-off in high modes would swamp the series at large
``k``.  Modes whose magnitude falls below ``FILTER_LEVEL`` times the largest
mode of their layer are zeroed after each step (a Krasny filter).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceWarning, DomainError, ExtrapolationError, ResolutionError
from .fourier import FourierCurve3, grid_to_hat, hat_derivative, hat_to_grid, mode_energy, resize_hat
from .sphere_curves import SphericalCurve

FILTER_LEVEL = 1e-13
ALIAS_LEVEL = 1e-8
AUTO_ALIAS_LEVEL = 1e-12
AUTO_MAX_MODES = 1024
TAIL_TOL = 1e-8
STRIP_CAP = 1.0
DIVERGENCE_HEIGHT = 1e-3
DEFAULT_KV = 24


def default_modes(alpha: SphericalCurve) -> int:
    return max(8, 4 * alpha.modes)


def _grid_size(M: int) -> int:
    # triple products carry 3M modes; 4M + 4 points keep modes <= M alias free
    return 4 * M + 4


@dataclass(frozen=True)
class GaussJet:
    """Taylor layers of the harmonic Gauss map in the transverse variable ``v``."""

    hat: np.ndarray  # (K_v + 1, M_u + 1, 3) complex half spectra
    trust_height: float
    alpha: SphericalCurve | None = None

    @property
    def K_v(self) -> int:
        return self.hat.shape[0] - 1

    @property
    def M_u(self) -> int:
        return self.hat.shape[1] - 1

    @property
    def layers(self) -> list[FourierCurve3]:
        return [FourierCurve3(h) for h in self.hat]

    def layer_norms(self) -> np.ndarray:
        """Upper bounds ``sum_m |c_k,m|`` on the sup norm of each layer."""
        return mode_energy(self.hat).sum(axis=-1)

    def partials(self, u, v, order: int = 2, tensor: bool = True, check: bool = True) -> dict:
        """All partial derivatives ``d_u^i d_v^j N`` with ``i + j <= order``.

        With ``tensor=True`` the result lives on the grid ``u x v`` (shape
        ``(len(u), len(v), 3)``); otherwise ``u`` and ``v`` are broadcast
        pointwise.
        """
        v = np.asarray(v, dtype=float)
        if check and np.any(np.abs(v) > self.trust_height * (1 + 1e-12)):
            raise ExtrapolationError(
                f"|v| = {np.abs(v).max():.4g} exceeds the trusted strip {self.trust_height:.4g}"
            )
        return series_partials(self.hat, u, v, order, tensor)


def series_partials(hat, u, v, order, tensor=True):
    """Evaluate ``sum_k f_k(u) v^k`` and its partials up to ``order``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    K = hat.shape[0] - 1
    m = np.arange(hat.shape[1])
    if tensor:
        phase = np.exp(1j * np.multiply.outer(u, m))  # (nu, M+1)
    else:
        u, v = np.broadcast_arrays(u, v)
        shape = u.shape
        u, v = u.ravel(), v.ravel()
        phase = np.exp(1j * np.multiply.outer(u, m))
    powers = np.arange(K + 1)
    out = {}
    for i in range(order + 1):
        # layer values (K+1, npts_u, 3) of the i-th u derivative
        lay = np.real(np.einsum("pm,kmc->kpc", phase, hat_derivative(hat, i)))
        for j in range(order + 1 - i):
            # falling factorial k (k-1) ... (k-j+1) vanishes whenever k < j
            fall = np.ones(K + 1)
            for r in range(j):
                fall = fall * (powers - r)
            expo = np.maximum(powers - j, 0)
            coeff = fall[:, None] * np.power.outer(v, expo).T  # (K+1, nv)
            if tensor:
                out[(i, j)] = np.einsum("kpc,kq->pqc", lay, coeff)
            else:
                val = np.einsum("kpc,kp->pc", lay, coeff)
                out[(i, j)] = val.reshape(shape + (3,))
    return out


def _krasny(hat: np.ndarray, floor: float) -> np.ndarray:
    e = mode_energy(hat)
    cut = max(FILTER_LEVEL * e.max(), floor)
    hat = hat.copy()
    hat[e < cut] = 0.0
    return hat


def solve_cauchy(alpha: SphericalCurve, K_v: int = DEFAULT_KV, M_u: int | None = None) -> GaussJet:
    """Taylor layers of the harmonic Gauss map with Cauchy data ``(alpha, 0)``.

    With ``M_u=None`` the mode count starts at ``max(8, 4 * modes)`` and is
    doubled until the top modes hold less than ``AUTO_ALIAS_LEVEL`` of the
    energy; an explicit ``M_u`` is used as given and rejected above
    ``ALIAS_LEVEL``.
    """
    if K_v < 2:
        raise DomainError("K_v must be at least 2")
    if M_u is not None:
        if M_u < alpha.modes and np.any(mode_energy(alpha.base.hat)[M_u + 1 :] > 0):
            raise DomainError(f"M_u = {M_u} is below the curve's {alpha.modes} modes")
        hat = _layers(alpha, K_v, M_u)
        ratio = _top_ratio(hat)
        if ratio > ALIAS_LEVEL:
            raise ResolutionError(f"{ratio:.2e} of the jet's energy sits in the top modes; increase M_u")
    else:
        M = default_modes(alpha)
        while True:
            hat = _layers(alpha, K_v, M)
            ratio = _top_ratio(hat)
            if ratio <= AUTO_ALIAS_LEVEL:
                break
            if 2 * M > AUTO_MAX_MODES:
                if ratio > ALIAS_LEVEL:
                    raise ResolutionError(f"{ratio:.2e} of the energy in the top modes at M_u = {M}")
                break
            M *= 2
    jet = GaussJet(hat, STRIP_CAP, alpha)
    height = estimate_strip(jet)
    if height < DIVERGENCE_HEIGHT:
        warnings.warn(f"trusted strip height {height:.2e} is negligible", DivergenceWarning, stacklevel=2)
    return GaussJet(hat, height, alpha)


def _layers(alpha: SphericalCurve, K_v: int, M_u: int) -> np.ndarray:
    n = _grid_size(M_u)
    hat = np.zeros((K_v + 1, M_u + 1, 3), dtype=complex)
    hat[0] = resize_hat(alpha.base.hat, M_u)
    floor = FILTER_LEVEL * 1e-3 * mode_energy(hat[0]).max()

    vals = np.zeros((K_v + 1, n, 3))
    du = np.zeros((K_v + 1, n, 3))
    vals[0] = hat_to_grid(hat[0], n)
    du[0] = hat_to_grid(hat_derivative(hat[0], 1), n)
    # S[m] is the v^m coefficient of |N_u|^2 + |N_v|^2
    S = []
    for k in range(K_v - 1):
        acc = np.zeros(n)
        for a in range(k + 1):
            b = k - a
            acc += np.einsum("ij,ij->i", du[a], du[b])
            acc += (a + 1) * (b + 1) * np.einsum("ij,ij->i", vals[a + 1], vals[b + 1])
        S.append(acc)
        phi = np.zeros((n, 3))
        for m in range(k + 1):
            phi += S[m][:, None] * vals[k - m]
        rhs = hat_derivative(hat[k], 2) + grid_to_hat(phi, M_u)
        new = _krasny(-rhs / ((k + 1) * (k + 2)), floor)
        hat[k + 2] = new
        vals[k + 2] = hat_to_grid(new, n)
        du[k + 2] = hat_to_grid(hat_derivative(new, 1), n)
    return hat


def _top_ratio(hat) -> float:
    # energy summed over all layers, so one broad high-order layer does not dominate
    e = mode_energy(hat)
    total = e.sum()
    if total == 0.0 or e.shape[1] < 3:
        return 0.0
    return float(e[:, -2:].sum() / total)


def evaluate_gauss(jet: GaussJet, u, v, deriv_order: int = 0) -> dict:
    """``N`` and its partials up to ``deriv_order`` (at most 2) at ``(u, v)``."""
    if deriv_order > 2:
        raise DomainError("evaluate_gauss supports derivatives up to order 2")
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    out = jet.partials(u, v, deriv_order, tensor=False)
    return out


def norm_defect(jet: GaussJet) -> np.ndarray:
    """Per order ``k``: max coefficient of ``sum_{i+j=k} <c_i, c_j> - delta_k0``."""
    K, M = jet.K_v, jet.M_u
    n = _grid_size(M)
    vals = hat_to_grid(jet.hat, n)
    out = np.zeros(K + 1)
    for k in range(K + 1):
        acc = np.zeros(n)
        for i in range(k + 1):
            acc += np.einsum("ij,ij->i", vals[i], vals[k - i])
        if k == 0:
            acc -= 1.0
        coef = grid_to_hat(acc[:, None], 2 * M)
        out[k] = np.abs(coef).max()
    return out


def estimate_strip(jet: GaussJet, tol: float = TAIL_TOL, cap: float = STRIP_CAP) -> float:
    """Largest ``v`` at which the extrapolated series tail stays below ``tol``.

    Layer norms are fitted by a geometric law ``C r^k`` over the upper half of
    the computed orders; the tail sums orders ``k > K_v - 2``.
    """
    norms = jet.layer_norms()
    K = jet.K_v
    scale = max(norms[0], 1e-300)
    ks = np.arange(2, K + 1)
    ks = ks[(ks >= K // 2) & (norms[ks] > 1e-15 * scale)]
    if len(ks) < 2:
        return cap
    slope, icpt = np.polyfit(ks, np.log(norms[ks]), 1)
    r = math.exp(slope)
    C = math.exp(icpt)
    first = K - 1

    def tail(v):
        q = r * v
        if q >= 1.0:
            return math.inf
        return C * q**first / (1.0 - q)

    hi = min(cap, (1.0 - 1e-12) / r)
    if tail(hi) < tol:
        return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail(mid) < tol:
            lo = mid
        else:
            hi = mid
    return lo
