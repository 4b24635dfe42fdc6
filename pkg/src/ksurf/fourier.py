"""Truncated real Fourier series of 2pi-periodic curves in R^3.

A curve is stored as a half spectrum ``hat`` of shape ``(M + 1, 3)`` with

    f(s) = Re( sum_m hat[m] * exp(i m s) ),

so ``hat[0]`` is the mean, and for ``m >= 1`` ``hat[m] = a_m - i b_m`` where
``a_m``/``b_m`` are the cosine/sine coefficients.  Differentiation, shifts and
rotations act exactly on the coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TAIL_RATIO = 1e-8


def grid(n: int) -> np.ndarray:
    """Uniform periodic grid of ``n`` points on [0, 2pi)."""
    return 2.0 * np.pi * np.arange(n) / n


def hat_to_grid(hat: np.ndarray, n: int) -> np.ndarray:
    """Sample the series on ``grid(n)``; ``hat`` may have leading batch axes.

    The mode axis is ``-2`` and the component axis ``-1``.
    """
    hat = np.asarray(hat)
    M = hat.shape[-2] - 1
    if n < 2 * M + 1:
        raise ValueError(f"grid of {n} points cannot carry {M} modes")
    spec = np.zeros(hat.shape[:-2] + (n // 2 + 1, hat.shape[-1]), dtype=complex)
    spec[..., 0, :] = n * hat[..., 0, :]
    spec[..., 1 : M + 1, :] = 0.5 * n * hat[..., 1:, :]
    return np.fft.irfft(spec, n=n, axis=-2)


def grid_to_hat(values: np.ndarray, M: int) -> np.ndarray:
    """Project grid samples (mode axis ``-2``) onto ``M`` modes."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-2]
    if n < 2 * M + 1:
        raise ValueError(f"grid of {n} points cannot resolve {M} modes")
    spec = np.fft.rfft(values, axis=-2)
    hat = np.empty(values.shape[:-2] + (M + 1, values.shape[-1]), dtype=complex)
    hat[..., 0, :] = spec[..., 0, :].real / n
    hat[..., 1:, :] = 2.0 * spec[..., 1 : M + 1, :] / n
    return hat


def hat_derivative(hat: np.ndarray, order: int = 1) -> np.ndarray:
    if order == 0:
        return hat
    m = np.arange(hat.shape[-2])[:, None]
    return hat * (1j * m) ** order


def resize_hat(hat: np.ndarray, M: int) -> np.ndarray:
    """Truncate or zero-pad the mode axis to ``M`` modes."""
    cur = hat.shape[-2] - 1
    if M <= cur:
        return hat[..., : M + 1, :].copy()
    out = np.zeros(hat.shape[:-2] + (M + 1, hat.shape[-1]), dtype=complex)
    out[..., : cur + 1, :] = hat
    return out


def mode_energy(hat: np.ndarray) -> np.ndarray:
    """Rotation- and shift-invariant magnitude of each mode."""
    return np.sqrt(np.sum(np.abs(hat) ** 2, axis=-1))


def evaluate_hat(hat: np.ndarray, s, order: int = 0) -> np.ndarray:
    """Evaluate the ``order``-th derivative at arbitrary parameters ``s``."""
    s = np.asarray(s, dtype=float)
    h = hat_derivative(hat, order)
    m = np.arange(h.shape[0])
    phase = np.exp(1j * np.multiply.outer(s, m))
    return np.real(phase @ h)


@dataclass(frozen=True)
class FourierCurve3:
    """2pi-periodic trigonometric polynomial curve in R^3."""

    hat: np.ndarray

    def __post_init__(self):
        h = np.array(self.hat, dtype=complex)
        if h.ndim != 2 or h.shape[1] != 3:
            raise ValueError("hat must have shape (M + 1, 3)")
        h[0] = h[0].real
        h.setflags(write=False)
        object.__setattr__(self, "hat", h)

    @classmethod
    def from_cos_sin(cls, cos, sin=()) -> "FourierCurve3":
        cos = np.asarray(cos, dtype=float).reshape(-1, 3)
        sin = np.asarray(sin, dtype=float).reshape(-1, 3)
        M = max(len(cos) - 1, len(sin), 0)
        hat = np.zeros((M + 1, 3), dtype=complex)
        hat[: len(cos)] += cos
        hat[1 : len(sin) + 1] -= 1j * sin
        return cls(hat)

    @classmethod
    def from_samples(cls, values, M: int) -> "FourierCurve3":
        return cls(grid_to_hat(values, M))

    @classmethod
    def from_function(cls, fn, M: int, n: int | None = None) -> "FourierCurve3":
        n = n or max(4 * M + 4, 64)
        return cls.from_samples(fn(grid(n)), M)

    @property
    def modes(self) -> int:
        return self.hat.shape[0] - 1

    @property
    def cos_coeffs(self) -> np.ndarray:
        return self.hat.real.copy()

    @property
    def sin_coeffs(self) -> np.ndarray:
        return -self.hat.imag[1:].copy()

    def __call__(self, s, order: int = 0) -> np.ndarray:
        return evaluate_hat(self.hat, s, order)

    def derivative(self, order: int = 1) -> "FourierCurve3":
        return FourierCurve3(hat_derivative(self.hat, order))

    def on_grid(self, n: int, order: int = 0) -> np.ndarray:
        return hat_to_grid(hat_derivative(self.hat, order), n)

    def shifted(self, c: float) -> "FourierCurve3":
        """The curve ``s -> f(s + c)``."""
        m = np.arange(self.modes + 1)[:, None]
        return FourierCurve3(self.hat * np.exp(1j * m * c))

    def rotated(self, R) -> "FourierCurve3":
        return FourierCurve3(self.hat @ np.asarray(R, dtype=float).T)

    def resized(self, M: int) -> "FourierCurve3":
        return FourierCurve3(resize_hat(self.hat, M))

    def tail_ratio(self) -> float:
        """Largest magnitude among the last two modes over the largest overall."""
        e = mode_energy(self.hat)
        head = e.max()
        if head == 0.0:
            return 0.0
        return float(e[-2:].max() / head) if self.modes >= 1 else 0.0

    def is_resolved(self, ratio: float = TAIL_RATIO) -> bool:
        return self.tail_ratio() <= ratio
