"""Pointwise densities and supports of the two limit spectral laws.

Circle law (flow parameter t > 0): the spectral density at e^{iθ} is Re z,
taken with respect to normalized arc length, where z is the unique root with
positive real part of

    (z - 1)/(z + 1) * exp(t z / 2) = e^{iθ}.

Positive-line law (flow parameter τ < 0): the density at x > 0 is Im z/(πx)
with respect to Lebesgue measure, where z is the unique upper-half-plane root of

    z/(z - 1) * exp(-τ (z - 1/2)) = x.

Both equations are solved by damped Newton iteration with continuation: the
circle sweep marches in θ from the closed-form-seeded real root at θ = 0,
the line sweep marches in log x from the left support edge, whose root is a
perturbation of the defining equation's branch point.  Each solver instance
owns its continuation cache; instances are cheap and single-sweep by design.
"""

from __future__ import annotations

import bisect
import cmath
import math
from dataclasses import dataclass

from .errors import InvalidParameter, NoConvergence

_THETA_STEP = math.pi / 512  # max continuation step on the circle
_LOG_STEP = 0.02  # max continuation step in log x on the line
_LOG_TOL = 1e-13  # Newton tolerance on the logarithmic residual
_RESIDUAL_CAP = 1e-12  # contract: defining equation satisfied to this accuracy
_EDGE_STALL = 1e-6  # stalls this close to a support edge report density 0
_NEG_CLAMP = -1e-12  # tiny negative densities are roundoff; clamp to 0


@dataclass(frozen=True)
class ArcSupport:
    """Symmetric arc {e^{iθ} : |θ| ≤ half_width} carrying the circle law."""

    half_width: float

    def __post_init__(self):
        if not (0.0 <= self.half_width <= math.pi):
            raise InvalidParameter("half_width must lie in [0, pi]")

    def contains(self, theta: float) -> bool:
        return abs(theta) <= self.half_width


@dataclass(frozen=True)
class IntervalSupport:
    """Interval [r_minus, r_plus] on the positive half-line."""

    r_minus: float
    r_plus: float

    def __post_init__(self):
        if not (0.0 < self.r_minus <= 1.0 + 1e-12 and self.r_plus >= 1.0 - 1e-12):
            raise InvalidParameter("need 0 < r_minus <= 1 <= r_plus")
        if abs(self.r_minus * self.r_plus - 1.0) > 1e-9:
            raise InvalidParameter("endpoints must multiply to 1 (reciprocal symmetry)")

    def contains(self, x: float) -> bool:
        return self.r_minus <= x <= self.r_plus


def unitary_support(t: float) -> ArcSupport:
    """Support arc of the circle law: half-width ½√(t(4−t)) + arccos(1 − t/2),
    saturating at the full circle for t ≥ 4."""
    if t <= 0.0:
        raise InvalidParameter("circle law requires t > 0")
    if t >= 4.0:
        return ArcSupport(math.pi)
    return ArcSupport(0.5 * math.sqrt(t * (4.0 - t)) + math.acos(1.0 - t / 2.0))


def positive_support(tau: float) -> IntervalSupport:
    """Support interval of the positive-line law.

    With d = √(τ(τ−4)) the endpoints are r_± = ((2−τ±d)/2)·e^{±d/2}; they are
    the critical values of the defining equation at its two real branch points,
    and satisfy r_−·r_+ = 1 exactly.
    """
    if tau >= 0.0:
        raise InvalidParameter("positive-line law requires tau < 0")
    d = math.sqrt(tau * (tau - 4.0))
    r_minus = ((2.0 - tau - d) / 2.0) * math.exp(-d / 2.0)
    r_plus = ((2.0 - tau + d) / 2.0) * math.exp(d / 2.0)
    return IntervalSupport(r_minus, r_plus)


class CircleDensity:
    """Continuation solver for the circle-law density at a fixed t > 0.

    Instances cache solved roots keyed by |θ| and reuse the nearest one as the
    Newton seed for new angles, marching in steps of at most π/512.
    """

    def __init__(self, t: float):
        if t <= 0.0:
            raise InvalidParameter("circle law requires t > 0")
        self.t = float(t)
        self.support = unitary_support(self.t)
        z0 = self._seed_at_origin()
        self._thetas = [0.0]  # sorted cache keys (nonnegative angles)
        self._roots = [z0]

    # the defining map, its log-residual at angle theta, and the log-derivative
    def _map(self, z: complex) -> complex:
        return (z - 1.0) / (z + 1.0) * cmath.exp(0.5 * self.t * z)

    def _dlog(self, z: complex) -> complex:
        return 2.0 / (z * z - 1.0) + 0.5 * self.t

    def _seed_at_origin(self) -> complex:
        # real root of (x-1)/(x+1)e^{tx/2} = 1 on (1, 1 + 40/t]: the map is 0 at
        # x = 1+ and exceeds 1 at the right end, so bisection always brackets
        t = self.t
        lo = 1.0 + min(1e-12, 0.25 * math.exp(-min(t, 1400.0) / 2.0))
        hi = 1.0 + 40.0 / t

        def g(x: float) -> float:
            return math.log((x - 1.0) / (x + 1.0)) + 0.5 * t * x

        if not (g(lo) < 0.0 < g(hi)):
            raise NoConvergence("seed bracket failed for the circle-law origin root")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16 * hi:
                break
        z = complex(0.5 * (lo + hi))
        out = self._newton(z, 0.0)
        if out is None:
            raise NoConvergence("origin root polish failed for the circle law")
        return out

    def _newton(self, z: complex, theta: float) -> complex | None:
        rot = cmath.exp(-1j * theta)
        for _ in range(80):
            if abs(z + 1.0) < 1e-12 or abs(z * z - 1.0) < 1e-300:
                return None
            w = self._map(z) * rot
            if w == 0.0 or cmath.isinf(w) or cmath.isnan(w):
                return None
            r = cmath.log(w)
            if abs(r) < _LOG_TOL:
                return z
            dz = -r / self._dlog(z)
            mag = abs(dz)
            if mag > 0.5:
                dz *= 0.5 / mag
            z = z + dz
        return None

    def _solve_cached(self, theta: float) -> complex:
        # nearest cached angle as the continuation anchor
        i = bisect.bisect_left(self._thetas, theta)
        if i < len(self._thetas) and self._thetas[i] == theta:
            return self._roots[i]
        candidates = [j for j in (i - 1, i) if 0 <= j < len(self._thetas)]
        anchor = min(candidates, key=lambda j: abs(self._thetas[j] - theta))
        cur_t, z = self._thetas[anchor], self._roots[anchor]

        step = _THETA_STEP
        while cur_t != theta:
            nxt = min(theta, cur_t + step) if theta > cur_t else max(theta, cur_t - step)
            z_try = self._newton(z, nxt)
            if z_try is not None and z_try.real <= 0.0:
                # wrong branch: retry from perturbed seeds biased into Re z > 0
                for seed in (z + 0.05, z * (1.0 + 0.03 + 0.04j), z.conjugate() + 0.1):
                    z_try = self._newton(seed, nxt)
                    if z_try is not None and z_try.real > 0.0:
                        break
            if z_try is None or z_try.real <= 0.0:
                step *= 0.5
                if step < 1e-13:
                    raise NoConvergence(
                        f"circle-law continuation stalled at angle {cur_t:.6f} "
                        f"(target {theta:.6f}, t={self.t})"
                    )
                continue
            cur_t, z = nxt, z_try
            step = min(_THETA_STEP, step * 2.0)
            k = bisect.bisect_left(self._thetas, cur_t)
            if k == len(self._thetas) or self._thetas[k] != cur_t:
                self._thetas.insert(k, cur_t)
                self._roots.insert(k, z)
        return z

    def root(self, theta: float) -> complex:
        """The Re z > 0 root at angle θ, residual ≤ 1e−12 on the defining map."""
        th = abs(math.remainder(float(theta), 2.0 * math.pi))
        try:
            z = self._solve_cached(th)
        except NoConvergence:
            if self.support.half_width - th <= _EDGE_STALL:
                return complex(0.0)  # defective edge root; density vanishes there
            raise
        if abs(self._map(z) - cmath.exp(1j * th)) > _RESIDUAL_CAP:
            raise NoConvergence("circle-law residual contract violated")
        return z

    def __call__(self, theta: float) -> float:
        th = abs(math.remainder(float(theta), 2.0 * math.pi))
        if self.t < 4.0 and th >= self.support.half_width:
            return 0.0
        z = self.root(th)
        val = z.real
        if val < 0.0:
            if val < _NEG_CLAMP:
                raise NoConvergence("circle-law density came out negative")
            val = 0.0
        return val


class LineDensity:
    """Continuation solver for the positive-line-law density at a fixed τ < 0.

    Marches in log x from the left support edge, where the root branches off
    z_- = (1 − √(1−4/τ))/2 into the upper half plane.
    """

    def __init__(self, tau: float):
        if tau >= 0.0:
            raise InvalidParameter("positive-line law requires tau < 0")
        self.tau = float(tau)
        self.support = positive_support(self.tau)
        g = math.sqrt(1.0 - 4.0 / self.tau)
        self._z_minus = (1.0 - g) / 2.0
        self._z_plus = (1.0 + g) / 2.0
        self._logx = []  # sorted cache keys: log x
        self._roots = []
        self._seed_interior()

    def _map(self, z: complex) -> complex:
        return z / (z - 1.0) * cmath.exp(-self.tau * (z - 0.5))

    def _dlog(self, z: complex) -> complex:
        return 1.0 / z - 1.0 / (z - 1.0) - self.tau

    def _newton(self, z: complex, x: float) -> complex | None:
        for _ in range(80):
            if abs(z) < 1e-300 or abs(z - 1.0) < 1e-300:
                return None
            w = self._map(z) / x
            if w == 0.0 or cmath.isinf(w) or cmath.isnan(w):
                return None
            r = cmath.log(w)
            if abs(r) < _LOG_TOL:
                break
            dz = -r / self._dlog(z)
            mag = abs(dz)
            if mag > 0.5:
                dz *= 0.5 / mag
            z = z + dz
        else:
            return None
        # polish the absolute residual (the log form is only relative)
        for _ in range(3):
            res = self._map(z) - x
            if abs(res) <= 0.25 * _RESIDUAL_CAP:
                break
            z = z - res / (self._map(z) * self._dlog(z))
        return z

    def _seed_interior(self):
        x0 = self.support.r_minus * math.exp(0.01)
        scale = max(1.0, abs(self._z_minus))
        for eps in (1e-4, 1e-3, 1e-2, 1e-1):
            z = self._newton(complex(self._z_minus, eps * scale), x0)
            if z is not None and z.imag > 0.0:
                self._logx = [math.log(x0)]
                self._roots = [z]
                return
        raise NoConvergence(
            f"left-edge seeding failed for the positive-line law at tau={self.tau}"
        )

    def _solve_cached(self, x: float) -> complex:
        lx = math.log(x)
        i = bisect.bisect_left(self._logx, lx)
        if i < len(self._logx) and self._logx[i] == lx:
            return self._roots[i]
        candidates = [j for j in (i - 1, i) if 0 <= j < len(self._logx)]
        anchor = min(candidates, key=lambda j: abs(self._logx[j] - lx))
        cur_l, z = self._logx[anchor], self._roots[anchor]

        step = _LOG_STEP
        while cur_l != lx:
            nxt = min(lx, cur_l + step) if lx > cur_l else max(lx, cur_l - step)
            z_try = self._newton(z, math.exp(nxt))
            if z_try is not None and z_try.imag <= 0.0:
                for seed in (z + 0.05j * max(1.0, abs(z)), z * (1.0 + 0.05j)):
                    z_try = self._newton(seed, math.exp(nxt))
                    if z_try is not None and z_try.imag > 0.0:
                        break
            if z_try is None or z_try.imag <= 0.0:
                step *= 0.5
                if step < 1e-13:
                    raise NoConvergence(
                        f"line-law continuation stalled at x={math.exp(cur_l):.6g} "
                        f"(target {x:.6g}, tau={self.tau})"
                    )
                continue
            cur_l, z = nxt, z_try
            step = min(_LOG_STEP, step * 2.0)
            k = bisect.bisect_left(self._logx, cur_l)
            if k == len(self._logx) or self._logx[k] != cur_l:
                self._logx.insert(k, cur_l)
                self._roots.insert(k, z)
        return z

    def root(self, x: float) -> complex:
        """The Im z > 0 root at x, residual ≤ 1e−12 on the defining map."""
        if x <= 0.0:
            raise InvalidParameter("positive-line law is supported on x > 0")
        try:
            z = self._solve_cached(float(x))
        except NoConvergence:
            edge_gap = min(
                abs(x - self.support.r_minus) / max(1.0, self.support.r_minus),
                abs(self.support.r_plus - x) / max(1.0, self.support.r_plus),
            )
            if edge_gap <= _EDGE_STALL:
                return complex(0.0)
            raise
        if abs(self._map(z) - x) > _RESIDUAL_CAP:
            raise NoConvergence("line-law residual contract violated")
        return z

    def __call__(self, x: float) -> float:
        x = float(x)
        if x <= 0.0:
            raise InvalidParameter("positive-line law is supported on x > 0")
        eps_lo = _EDGE_STALL * max(1.0, self.support.r_minus)
        eps_hi = _EDGE_STALL * max(1.0, self.support.r_plus)
        if x <= self.support.r_minus + eps_lo or x >= self.support.r_plus - eps_hi:
            return 0.0
        z = self.root(x)
        val = z.imag / (math.pi * x)
        if val < 0.0:
            if val < _NEG_CLAMP:
                raise NoConvergence("line-law density came out negative")
            val = 0.0
        return val


def unitary_density(theta: float, t: float, *, solver: CircleDensity | None = None) -> float:
    """Circle-law density at angle θ (w.r.t. normalized arc length).

    Pass a shared solver when sweeping many angles at one t; a fresh solver is
    created (and its continuation cache discarded) otherwise.
    """
    if solver is None:
        solver = CircleDensity(t)
    elif solver.t != t:
        raise InvalidParameter("solver was built for a different t")
    return solver(theta)


def positive_density(x: float, tau: float, *, solver: LineDensity | None = None) -> float:
    """Positive-line-law density at x (w.r.t. Lebesgue measure)."""
    if solver is None:
        solver = LineDensity(tau)
    elif solver.tau != tau:
        raise InvalidParameter("solver was built for a different tau")
    return solver(x)


def adaptive_simpson(f, a: float, b: float, *, tol: float = 1e-8, max_depth: int = 48) -> float:
    """Recursive adaptive Simpson quadrature with absolute tolerance.

    Callers integrating a density should split panels at the support edges;
    inside the support the integrands here are analytic, with at worst a
    square-root derivative blowup at the edges, which the recursion absorbs.
    """
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, m, b, fa, fm, fb, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth >= max_depth:
            return left + right
        if abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return rec(a, lm, m, fa, flm, fm, left, tol / 2.0, depth + 1) + rec(
            m, rm, b, fm, frm, fb, right, tol / 2.0, depth + 1
        )

    return rec(a, m, b, fa, fm, fb, whole, tol, 0)
