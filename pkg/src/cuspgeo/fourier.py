"""Finite Fourier series on a circle of given circumference.

All periodic boundary data (the cusp invariant S, the metric coefficient C,
components of embedded boundary curves) is stored in this representation so
that derivatives of any order are exact, with no finite differencing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = ["BoundaryFunction", "FitResult"]


@dataclass(frozen=True)
class FitResult:
    """Diagnostics of an adaptive Fourier fit."""

    degree: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class BoundaryFunction:
    """Real trigonometric polynomial ``f(phi)`` with period ``period``.

    ``f(phi) = cos_coeffs[0] + sum_n cos_coeffs[n] cos(n w phi)
                             + sin_coeffs[n-1] sin(n w phi)``
    with ``w = 2 pi / period``.
    """

    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    period: float
    fit: FitResult | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        a = np.atleast_1d(np.asarray(self.cos_coeffs, dtype=float))
        b = np.atleast_1d(np.asarray(self.sin_coeffs, dtype=float))
        if a.size == 0:
            raise ValueError("need at least the constant cosine coefficient")
        if b.size != a.size - 1:
            raise ValueError(
                f"expected {a.size - 1} sine coefficients to match degree "
                f"{a.size - 1}, got {b.size}"
            )
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        object.__setattr__(self, "cos_coeffs", a)
        object.__setattr__(self, "sin_coeffs", b)

    # -- construction -----------------------------------------------------

    @classmethod
    def constant(cls, value: float, period: float) -> "BoundaryFunction":
        return cls(np.array([float(value)]), np.zeros(0), period)

    @classmethod
    def from_coefficients(
        cls, cos_coeffs, sin_coeffs, period: float
    ) -> "BoundaryFunction":
        return cls(np.asarray(cos_coeffs, float), np.asarray(sin_coeffs, float), period)

    @classmethod
    def from_samples(cls, values, period: float) -> "BoundaryFunction":
        """Interpolate values on the uniform grid ``phi_j = j period / M``.

        The degree is ``M // 2``; for even ``M`` the Nyquist mode is kept as a
        pure cosine, which is the unique interpolant with that symmetry.
        """
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("need a 1-d array of at least 2 samples")
        m = v.size
        spec = np.fft.rfft(v)
        n_modes = spec.size  # m // 2 + 1
        a = np.zeros(n_modes)
        b = np.zeros(n_modes - 1)
        a[0] = spec[0].real / m
        a[1:] = 2.0 * spec[1:].real / m
        b[:] = -2.0 * spec[1:].imag / m
        if m % 2 == 0:
            a[-1] = spec[-1].real / m  # Nyquist mode is not doubled
            b[-1] = 0.0
        return cls(a, b, period)

    @classmethod
    def from_callable(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        period: float,
        *,
        tol: float = 1e-10,
        min_degree: int = 64,
        max_degree: int = 1024,
    ) -> "BoundaryFunction":
        """Fit ``fn`` adaptively, doubling the degree until the interpolant

        reproduces ``fn`` at grid midpoints to ``tol`` (relative to the sample
        scale), or ``max_degree`` is reached (then a warning is issued and the
        best fit returned).
        """
        degree = min_degree
        best = None
        while True:
            m = 2 * degree
            grid = np.arange(m) * (period / m)
            bf = cls.from_samples(fn(grid), period)
            mid = grid + period / (2 * m)
            exact = np.asarray(fn(mid), dtype=float)
            scale = 1.0 + float(np.max(np.abs(exact)))
            residual = float(np.max(np.abs(bf(mid) - exact))) / scale
            best = cls(bf.cos_coeffs, bf.sin_coeffs, period,
                       fit=FitResult(degree, residual, residual < tol))
            if residual < tol:
                return best
            if degree >= max_degree:
                warnings.warn(
                    f"Fourier fit stalled at degree {degree}: residual "
                    f"{residual:.3e} above tol {tol:.1e}",
                    stacklevel=2,
                )
                return best
            degree *= 2

    # -- evaluation -------------------------------------------------------

    @property
    def degree(self) -> int:
        return self.cos_coeffs.size - 1

    def __call__(self, phi, deriv: int = 0):
        """Evaluate the ``deriv``-th derivative at ``phi`` (scalar or array)."""
        phi_arr = np.asarray(phi, dtype=float)
        scalar = phi_arr.ndim == 0
        x = np.atleast_1d(phi_arr)
        n = np.arange(self.degree + 1)
        w = 2.0 * np.pi / self.period
        # f = Re sum_n (a_n - i b_n) e^{i n w phi}; d/dphi brings down (i n w)
        coeff = self.cos_coeffs.astype(complex)
        coeff[1:] -= 1j * self.sin_coeffs
        if deriv:
            coeff = coeff * (1j * n * w) ** deriv
        vals = np.exp(1j * np.outer(x, n * w)) @ coeff
        out = vals.real
        return float(out[0]) if scalar else out

    def bundle(self, phi) -> tuple:
        """Value and first two derivatives at ``phi``."""
        return self(phi), self(phi, 1), self(phi, 2)

    # -- global properties ------------------------------------------------

    def minmax(self, samples: int = 4096) -> tuple[float, float]:
        """Global min and max over one period, polished to ~1e-12."""
        grid = np.arange(samples) * (self.period / samples)
        vals = self(grid)
        lo = self._polish_extremum(grid[int(np.argmin(vals))], sign=+1.0)
        hi = self._polish_extremum(grid[int(np.argmax(vals))], sign=-1.0)
        return min(lo, float(np.min(vals))), max(hi, float(np.max(vals)))

    def _polish_extremum(self, phi0: float, sign: float) -> float:
        if self.degree == 0:
            return float(self.cos_coeffs[0])
        h = self.period / 64
        res = minimize_scalar(
            lambda t: sign * self(t),
            bounds=(phi0 - h, phi0 + h),
            method="bounded",
            options={"xatol": 1e-13},
        )
        return float(sign * res.fun)

    def is_constant(self, rtol: float = 1e-12) -> bool:
        """Spread below ``rtol * (1 + |mean|)`` counts as constant."""
        lo, hi = self.minmax()
        return (hi - lo) < rtol * (1.0 + abs(float(self.cos_coeffs[0])))
