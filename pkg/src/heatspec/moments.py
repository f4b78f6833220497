"""Closed-form moments of the limit laws and their multiplicative transform.

The one-parameter family of limit measures (circle for t > 0, positive line
for t < 0, point mass at 1 for t = 0) is determined by explicit moments

    m_n(t) = e^{-|n| t / 2} * sum_{k=0}^{|n|-1} ((-t)^k / k!) |n|^{k-1} C(|n|, k+1),

with m_0 = 1 and m_{-n} = m_n.  The multiplicative transform of the family is
Sigma(z, t) = exp((t/2)(1+z)/(1-z)); `sigma_from_moments` rebuilds it from the
moments alone (series of the resolvent-type generating function, then
compositional reversion), which gives an independent cross-check of the
closed form.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

from .errors import (
    InvalidParameter,
    NonInvertibleSeries,
    PoleAtOne,
    PrecisionWarning,
)

# Beyond these, the alternating sum loses digits in float64; results are
# still produced (compensated summation) but flagged.
SAFE_MAX_N = 30
SAFE_MAX_T = 50.0


def nu_moment(n: int, t: float) -> float:
    """n-th moment of the limit law at parameter t (any real t)."""
    n = abs(int(n))
    if n == 0:
        return 1.0
    unsafe = n > SAFE_MAX_N or abs(t) > SAFE_MAX_T
    if unsafe:
        warnings.warn(
            f"moment outside the safe range (|n| <= {SAFE_MAX_N}, "
            f"|t| <= {SAFE_MAX_T}): alternating sum may lose digits",
            PrecisionWarning,
            stacklevel=2,
        )
    # term_k = ((-t)^k / k!) * n^{k-1} * C(n, k+1), accumulated in index order
    total = 0.0
    comp = 0.0  # Kahan carry, used in the flagged regime
    pw = 1.0  # (-t)^k / k!
    npow = 1.0 / n  # n^{k-1}
    for k in range(n):
        term = pw * npow * math.comb(n, k + 1)
        if unsafe:
            y = term - comp
            s = total + y
            comp = (s - total) - y
            total = s
        else:
            total += term
        pw *= (-t) / (k + 1)
        npow *= n
    return math.exp(-n * t / 2.0) * total


@dataclass(frozen=True)
class MomentTable:
    """Moments n -> m_n(t) for |n| <= max_n, with parameter metadata."""

    t: float
    entries: dict = field(default_factory=dict)

    def __getitem__(self, n: int) -> float:
        return self.entries[abs(int(n))]


def moment_table(t: float, max_n: int) -> MomentTable:
    if max_n < 0:
        raise InvalidParameter("max_n must be nonnegative")
    return MomentTable(t=float(t), entries={n: nu_moment(n, t) for n in range(max_n + 1)})


def sigma_closed(z: complex, t: float) -> complex:
    """Closed form of the multiplicative transform; pole at z = 1."""
    if z == 1:
        raise PoleAtOne("transform has an essential singularity at z = 1")
    return cmath.exp((t / 2.0) * (1.0 + z) / (1.0 - z))


# -- truncated power series -------------------------------------------------


@dataclass(frozen=True)
class PowerSeries:
    """Truncated power series with exact truncated arithmetic at fixed order."""

    coeffs: tuple  # c_0 .. c_K as complex

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @staticmethod
    def identity(order: int) -> "PowerSeries":
        return PowerSeries((0.0, 1.0) + (0.0,) * (order - 1))

    @staticmethod
    def constant(c: complex, order: int) -> "PowerSeries":
        return PowerSeries((c,) + (0.0,) * order)

    def __add__(self, other: "PowerSeries") -> "PowerSeries":
        K = min(self.order, other.order)
        return PowerSeries(tuple(self.coeffs[i] + other.coeffs[i] for i in range(K + 1)))

    def __sub__(self, other: "PowerSeries") -> "PowerSeries":
        K = min(self.order, other.order)
        return PowerSeries(tuple(self.coeffs[i] - other.coeffs[i] for i in range(K + 1)))

    def __mul__(self, other: "PowerSeries") -> "PowerSeries":
        K = min(self.order, other.order)
        out = [0.0 + 0.0j] * (K + 1)
        for i, a in enumerate(self.coeffs[: K + 1]):
            if a == 0:
                continue
            for j in range(K + 1 - i):
                out[i + j] += a * other.coeffs[j]
        return PowerSeries(tuple(out))

    def __truediv__(self, other: "PowerSeries") -> "PowerSeries":
        K = min(self.order, other.order)
        b0 = other.coeffs[0]
        if b0 == 0:
            raise NonInvertibleSeries("division by a series with zero constant term")
        out = [0.0 + 0.0j] * (K + 1)
        for n in range(K + 1):
            acc = self.coeffs[n]
            for j in range(1, n + 1):
                acc -= other.coeffs[j] * out[n - j]
            out[n] = acc / b0
        return PowerSeries(tuple(out))

    def compose(self, inner: "PowerSeries") -> "PowerSeries":
        """self(inner(z)); requires inner(0) = 0 for exact truncation."""
        if inner.coeffs[0] != 0:
            raise InvalidParameter("composition requires zero constant term")
        K = min(self.order, inner.order)
        out = PowerSeries.constant(self.coeffs[K], K)
        for c in reversed(self.coeffs[:K]):
            out = out * inner + PowerSeries.constant(c, K)
        return out

    def derivative(self) -> "PowerSeries":
        if self.order == 0:
            return PowerSeries((0.0,))
        return PowerSeries(tuple((i + 1) * c for i, c in enumerate(self.coeffs[1:])) + (0.0,))

    def exp(self) -> "PowerSeries":
        """Series exponential: E' = A' E with E(0) = exp(a_0)."""
        K = self.order
        out = [cmath.exp(self.coeffs[0])] + [0.0 + 0.0j] * K
        for n in range(1, K + 1):
            acc = 0.0 + 0.0j
            for j in range(1, n + 1):
                acc += j * self.coeffs[j] * out[n - j]
            out[n] = acc / n
        return PowerSeries(tuple(out))


def revert_series(s: PowerSeries, *, lin_tol: float = 1e-10) -> PowerSeries:
    """Compositional inverse g with s(g(z)) = z + O(z^{K+1}).

    Newton iteration on truncated series; quadratic convergence in attained
    order, so ceil(log2(K)) + 2 sweeps suffice.
    """
    a = s.coeffs
    if abs(a[0]) != 0:
        raise InvalidParameter("reversion requires zero constant term")
    if abs(a[1]) < lin_tol:
        raise NonInvertibleSeries(
            f"linear coefficient {abs(a[1]):.3g} below {lin_tol:.0e}"
        )
    K = s.order
    ident = PowerSeries.identity(K)
    ds = s.derivative()
    g = PowerSeries((0.0, 1.0 / a[1]) + (0.0,) * (K - 1))
    for _ in range(max(1, math.ceil(math.log2(max(K, 2)))) + 2):
        g = g - (s.compose(g) - ident) / ds.compose(g)
    return g


def sigma_from_moments(t: float, K: int) -> PowerSeries:
    """Rebuild the transform from moments alone, to series order K - 1.

    Builds psi(z) = sum_{n>=1} m_n(t) z^n, eta = psi/(1+psi), reverts eta, and
    returns eta^{-1}(z)/z.  Independent of `sigma_closed`.
    """
    if K < 1 or K > 16:
        raise InvalidParameter("series order K must be in 1..16")
    psi = PowerSeries((0.0,) + tuple(nu_moment(n, t) for n in range(1, K + 1)))
    eta = psi / (PowerSeries.constant(1.0, K) + psi)
    if abs(eta.coeffs[1]) < 1e-10:
        raise NonInvertibleSeries("eta has (numerically) vanishing linear term")
    inv = revert_series(eta)
    return PowerSeries(inv.coeffs[1:])
