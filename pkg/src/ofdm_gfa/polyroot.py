"""Real roots of real polynomials restricted to a closed interval.

Degrees 1-3 are solved in closed form; higher degrees go through the
eigenvalues of the companion matrix.  LAPACK's ``geev`` balances the
matrix before the QR iterations, so no explicit balancing step is done
here.  Every root gets one Newton polish step.

The numeric core is compiled with numba so the coordinate-descent
kernels can call it without leaving nopython mode.  Coefficients are in
ascending order throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

TRIM_RTOL = 1e-14
IMAG_RTOL = 1e-9
CLAMP_ATOL = 1e-12
MERGE_ATOL = 1e-10
# conjugate pairs this close to the axis are re-examined as possible
# multiple real roots and kept if they pass the residual bound
SUSPECT_RTOL = 1e-4
RESIDUAL_RTOL = 1e-8


@njit(cache=True)
def _trim(c):
    big = 0.0
    for a in c:
        big = max(big, abs(a))
    if big == 0.0:
        return np.zeros(1)
    last = 0
    for k in range(c.size):
        if abs(c[k]) > TRIM_RTOL * big:
            last = k
    return c[: last + 1].copy()


@njit(cache=True)
def _horner(c, x):
    val = 0.0
    for k in range(c.size - 1, -1, -1):
        val = val * x + c[k]
    return val


@njit(cache=True)
def _horner2(c, x):
    val = 0.0
    der = 0.0
    for k in range(c.size - 1, -1, -1):
        der = der * x + val
        val = val * x + c[k]
    return val, der


@njit(cache=True)
def _polish(c, x):
    val, der = _horner2(c, x)
    if der == 0.0 or not np.isfinite(der):
        return x
    y = x - val / der
    if abs(_horner(c, y)) <= abs(val):
        return y
    return x


@njit(cache=True)
def _quadratic(c0, c1, c2, out):
    disc = c1 * c1 - 4.0 * c2 * c0
    if disc < 0.0:
        # tolerate rounding on a double root
        if disc >= -1e-14 * (c1 * c1 + abs(4.0 * c2 * c0)):
            out[0] = -c1 / (2.0 * c2)
            return 1
        return 0
    q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
    if q == 0.0:
        out[0] = 0.0
        return 1
    out[0] = q / c2
    out[1] = c0 / q
    return 2


@njit(cache=True)
def _cubic(c0, c1, c2, c3, out):
    a = c2 / c3
    b = c1 / c3
    c = c0 / c3
    Q = (a * a - 3.0 * b) / 9.0
    R = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0
    shift = a / 3.0
    Q3 = Q * Q * Q
    R2 = R * R
    if Q > 0.0 and R2 <= Q3 * (1.0 + 1e-12):
        # three real roots; a near-double pair stays as two close roots
        ratio = max(-1.0, min(1.0, R / math.sqrt(Q3)))
        theta = math.acos(ratio)
        m = -2.0 * math.sqrt(Q)
        out[0] = m * math.cos(theta / 3.0) - shift
        out[1] = m * math.cos((theta + 2.0 * math.pi) / 3.0) - shift
        out[2] = m * math.cos((theta - 2.0 * math.pi) / 3.0) - shift
        return 3
    t = (abs(R) + math.sqrt(max(R2 - Q3, 0.0))) ** (1.0 / 3.0)
    A = -math.copysign(t, R)
    B = Q / A if A != 0.0 else 0.0
    out[0] = A + B - shift
    return 1


@njit(cache=True)
def _residual_bound(c, lo, hi):
    scale = max(abs(lo), abs(hi), 1.0)
    big = 1.0
    pw = 1.0
    for a in c:
        big = max(big, abs(a) * pw)
        pw *= scale
    return RESIDUAL_RTOL * big


@njit(cache=True)
def _companion(c, out, suspect):
    """Real eigenvalues of the companion matrix into ``out``; near-real
    conjugate pairs (one real part per pair) into ``suspect``."""
    n = c.size - 1
    comp = np.zeros((n, n), dtype=np.complex128)
    for k in range(n - 1):
        comp[k + 1, k] = 1.0
    for k in range(n):
        comp[k, n - 1] = -c[k] / c[n]
    eig = np.linalg.eigvals(comp)
    cnt = 0
    ns = 0
    for z in eig:
        tol = 1.0 + abs(z.real)
        if abs(z.imag) <= IMAG_RTOL * tol:
            out[cnt] = z.real
            cnt += 1
        elif z.imag > 0.0 and z.imag <= SUSPECT_RTOL * tol:
            suspect[ns] = z.real
            ns += 1
    return cnt, ns


@njit(cache=True)
def _bisect(c, a, b, fa):
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        fm = _horner(c, m)
        if fm == 0.0:
            return m
        if (fm < 0.0) == (fa < 0.0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


@njit(cache=True)
def _roots_trimmed(c, lo, hi):
    """Roots in [lo, hi] of an already-trimmed polynomial of degree >= 1."""
    deg = c.size - 1
    raw = np.empty(max(deg, 3))
    suspect = np.empty(deg)
    ns = 0
    if deg == 1:
        raw[0] = -c[0] / c[1]
        cnt = 1
    elif deg == 2:
        cnt = _quadratic(c[0], c[1], c[2], raw)
    elif deg == 3:
        cnt = _cubic(c[0], c[1], c[2], c[3], raw)
    else:
        cnt, ns = _companion(c, raw, suspect)
    bound = _residual_bound(c, lo, hi)
    found = np.empty(cnt + ns + deg + 2)
    nf = 0
    for k in range(cnt + ns):
        if k < cnt:
            r = _polish(c, raw[k])
        else:
            r = _polish(c, suspect[k - cnt])
            if not abs(_horner(c, r)) <= bound:
                continue
        if r < lo:
            if lo - r > CLAMP_ATOL:
                continue
            r = lo
        elif r > hi:
            if r - hi > CLAMP_ATOL:
                continue
            r = hi
        found[nf] = r
        nf += 1
    found[:nf].sort()
    # a sign change between neighbours with no root in between means an
    # odd-multiplicity root was dropped by the imaginary-part filter
    prev = lo
    fprev = _horner(c, lo)
    extra = 0
    for k in range(nf + 1):
        nxt = found[k] if k < nf else hi
        fnxt = _horner(c, nxt)
        if nxt > prev and fprev * fnxt < 0.0:
            found[nf + extra] = _bisect(c, prev, nxt, fprev)
            extra += 1
        prev, fprev = nxt, fnxt
    nf += extra
    pts = np.sort(found[:nf])
    out = np.empty(nf)
    no = 0
    for r in pts:
        if no > 0 and r - out[no - 1] <= MERGE_ATOL:
            continue
        out[no] = r
        no += 1
    return out[:no]


@njit(cache=True)
def _roots_or_empty(c, lo, hi):
    """Interval roots, or an empty array for constant polynomials."""
    t = _trim(c)
    if t.size < 2 or lo > hi:
        return np.empty(0)
    return _roots_trimmed(t, lo, hi)


def trim(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.size == 0:
        return np.zeros(1)
    return _trim(np.ascontiguousarray(c))


@dataclass(frozen=True, eq=False)
class RealPolynomial:
    coeffs: np.ndarray

    def __post_init__(self):
        c = trim(self.coeffs)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, d):
        return evaluate(self, d)

    def __eq__(self, other):
        return isinstance(other, RealPolynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __repr__(self):
        return f"RealPolynomial({self.coeffs.tolist()})"


def evaluate(p: RealPolynomial, d):
    """Horner evaluation; ``d`` may be a scalar or an array."""
    c = p.coeffs if isinstance(p, RealPolynomial) else np.asarray(p, dtype=float)
    if np.ndim(d) == 0:
        return _horner(np.ascontiguousarray(c, dtype=float), float(d))
    acc = np.zeros(np.shape(d))
    for a in c[::-1]:
        acc = acc * d + a
    return acc


def multiply(p: RealPolynomial, q: RealPolynomial) -> RealPolynomial:
    return RealPolynomial(np.convolve(p.coeffs, q.coeffs))


def add(p: RealPolynomial, q: RealPolynomial) -> RealPolynomial:
    n = max(len(p.coeffs), len(q.coeffs))
    out = np.zeros(n)
    out[: len(p.coeffs)] += p.coeffs
    out[: len(q.coeffs)] += q.coeffs
    return RealPolynomial(out)


def roots_in_interval(coeffs, lo: float, hi: float) -> list[float]:
    """:func:`real_roots_in_interval` on a raw ascending coefficient sequence."""
    c = trim(coeffs)
    if c.size < 2:
        raise ValueError("constant polynomial")
    if lo > hi:
        return []
    return _roots_trimmed(c, float(lo), float(hi)).tolist()


def real_roots_in_interval(p: RealPolynomial, lo: float, hi: float) -> list[float]:
    """Sorted real roots of ``p`` in ``[lo, hi]``.

    Roots landing within 1e-12 outside the interval are clamped onto the
    nearest endpoint; roots closer than 1e-10 are merged.
    """
    return roots_in_interval(p.coeffs, lo, hi)
