"""Wendland radial functions and the linear-radial product kernel.

The radial profile is ``rho = I^k rho_l`` with the truncated power
``rho_l(r) = max(1 - r, 0)^l``, ``l = floor(d/2 + k + 1)`` and the integral
operator ``I phi(r) = int_r^1 t phi(t) dt``.  Coefficients are kept as exact
rationals and evaluated in floating point by Horner's scheme.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, floor

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import check_points, check_state
from .exceptions import ParameterError

__all__ = [
    "WendlandRadial",
    "ProductKernel",
    "build_wendland",
    "make_kernel",
    "eval_kernel",
    "gram",
]


def _truncated_power(ell: int) -> list[Fraction]:
    # (1 - r)^ell in ascending powers of r
    return [Fraction(comb(ell, m) * (-1) ** m) for m in range(ell + 1)]


def _apply_integral_operator(coeffs: list[Fraction]) -> list[Fraction]:
    """Coefficients of ``int_r^1 t p(t) dt`` for the polynomial ``p``."""
    antideriv = [Fraction(0)] * (len(coeffs) + 2)
    for m, c in enumerate(coeffs):
        antideriv[m + 2] = c / (m + 2)
    out = [-a for a in antideriv]
    out[0] += sum(antideriv)
    return out


@dataclass(frozen=True)
class WendlandRadial:
    """Compactly supported radial profile ``r -> rho(r / scale)``.

    Parameters
    ----------
    d : int
        State dimension.
    k : int
        Smoothness index; the RKHS is norm-equivalent to ``W^{d/2+k,2}``.
    scale : float
        Support radius.  ``rho(r) == 0`` for ``r >= scale``.
    """

    d: int
    k: int = 1
    scale: float = 1.0
    exact_coeffs: tuple[Fraction, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.d, bool) or not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ParameterError(f"d must be a positive integer, got {self.d!r}")
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 0:
            raise ParameterError(f"k must be a non-negative integer, got {self.k!r}")
        if not np.isfinite(self.scale) or self.scale <= 0:
            raise ParameterError(f"scale must be a positive real, got {self.scale!r}")
        coeffs = _truncated_power(self.ell)
        for _ in range(self.k):
            coeffs = _apply_integral_operator(coeffs)
        # trailing zeros never occur, but keep the representation minimal
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "exact_coeffs", tuple(coeffs))
        object.__setattr__(self, "_coeffs", np.array([float(c) for c in coeffs]))

    @property
    def ell(self) -> int:
        return floor(self.d / 2 + self.k + 1)

    @property
    def coeffs(self) -> np.ndarray:
        """Float coefficients of the profile on ``[0, 1]``, ascending powers."""
        return self._coeffs.copy()

    @property
    def degree(self) -> int:
        return len(self._coeffs) - 1

    def __call__(self, r):
        """Evaluate ``rho(r / scale)``; zero outside the support."""
        r = np.asarray(r, dtype=float)
        u = r / self.scale
        inside = u < 1.0
        u_in = np.where(inside, u, 0.0)
        acc = np.full_like(u_in, self._coeffs[-1])
        for c in self._coeffs[-2::-1]:
            acc = acc * u_in + c
        return np.where(inside, acc, 0.0)

    def at_origin(self) -> float:
        return float(self._coeffs[0])


@dataclass(frozen=True)
class ProductKernel:
    """``kappa(x, x') = (x . x') * rho(|x - x'|)`` with a Wendland ``rho``."""

    radial: WendlandRadial

    @property
    def d(self) -> int:
        return self.radial.d

    def __call__(self, x, y) -> float:
        return eval_kernel(self, x, y)

    def gram(self, A, B=None) -> np.ndarray:
        return gram(self, A, A if B is None else B)

    def diag(self, A) -> np.ndarray:
        """``kappa(a, a)`` for every row of ``A``."""
        A = check_points(A, self.d)
        return np.einsum("ij,ij->i", A, A) * self.radial.at_origin()


def build_wendland(d: int, k: int, scale: float = 1.0) -> WendlandRadial:
    return WendlandRadial(d=d, k=k, scale=scale)


def make_kernel(d: int, k: int = 1, scale: float = 2.0) -> ProductKernel:
    return ProductKernel(WendlandRadial(d=d, k=k, scale=scale))


def eval_kernel(kern: ProductKernel, x, y) -> float:
    x = check_state(x, kern.d)
    y = check_state(y, kern.d)
    lin = float(np.dot(x, y))
    # (x-y)^2 == (y-x)^2 exactly, so the value is symmetric bit-for-bit
    dist = float(np.sqrt(np.sum((x - y) ** 2)))
    return lin * float(kern.radial(dist))


def gram(kern: ProductKernel, pts_a, pts_b) -> np.ndarray:
    """Matrix ``[kappa(a_i, b_j)]``.

    Entries are independent of each other; when ``pts_a`` and ``pts_b`` are the
    same set the result is symmetrized to remove BLAS round-off asymmetry.
    """
    same = pts_a is pts_b
    A = check_points(pts_a, kern.d, name="pts_a")
    B = A if same else check_points(pts_b, kern.d, name="pts_b")
    if not same and A.shape == B.shape and np.array_equal(A, B):
        same = True
    K = (A @ B.T) * kern.radial(cdist(A, B))
    if same:
        K = 0.5 * (K + K.T)
    return K
