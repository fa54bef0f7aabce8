"""Terminating Gauss hypergeometric series and integer-order Bessel J."""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from jchtransfer.errors import BesselRangeError

BESSEL_N_MAX = 200


def _check_hyp_args(j: int, k: int, n: int) -> None:
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    if not (0 <= j <= n - 1 and 0 <= k <= n - 1):
        raise ValueError(f"need 0 <= j, k <= N-1 = {n - 1}, got j={j}, k={k}")


@lru_cache(maxsize=None)
def hyp2f1_terminating_coeffs(j: int, k: int, n: int) -> tuple[Fraction, ...]:
    """Exact series coefficients of ₂F₁(−j, −k; −(N−1); x).

    Entry m is (−j)_m (−k)_m / ((−(N−1))_m m!); there are min(j, k) + 1 of them.
    """
    _check_hyp_args(j, k, n)
    coeffs = [Fraction(1)]
    for m in range(min(j, k)):
        coeffs.append(coeffs[-1] * Fraction((m - j) * (m - k), (m - (n - 1)) * (m + 1)))
    return tuple(coeffs)


def hyp2f1_terminating(j: int, k: int, n: int, x: complex) -> complex:
    """₂F₁(−j, −k; −(N−1); x) summed term by term.

    The series stops after min(j, k) + 1 terms, before the lower Pochhammer
    symbol reaches zero. Real and imaginary parts are accumulated with
    ``math.fsum``.
    """
    _check_hyp_args(j, k, n)
    x = complex(x)
    term = 1.0 + 0.0j
    re, im = [1.0], [0.0]
    for m in range(min(j, k)):
        term *= (m - j) * (m - k) / ((m - (n - 1)) * (m + 1)) * x
        re.append(term.real)
        im.append(term.imag)
    return complex(math.fsum(re), math.fsum(im))


def _miller_start(n_max: int, ax: float) -> int:
    start = max(n_max, int(ax)) + 40 + int(2.0 * math.sqrt(max(n_max, ax)))
    return start + (start % 2)


def bessel_j_orders(x: float, n_max: int = BESSEL_N_MAX) -> np.ndarray:
    """J_0(x) … J_{n_max}(x) by Miller's backward recurrence.

    The downward recurrence J_{m−1} = (2m/x) J_m − J_{m+1} is started from an
    arbitrary tiny seed well above max(n_max, |x|) and normalized with
    J_0 + 2 Σ J_{2m} = 1.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if n_max > BESSEL_N_MAX:
        raise BesselRangeError(f"order {n_max} exceeds supported maximum {BESSEL_N_MAX}")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    out = np.zeros(n_max + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    ax = abs(x)
    if ax < 1e-8:
        # two series terms; the seeded recurrence would overflow here
        h = ax / 2.0
        lead = 1.0
        for m in range(n_max + 1):
            # (h^m / m!) built by products so that it underflows to zero cleanly
            if m:
                lead *= h / m
            out[m] = lead * (1.0 - h * h / (m + 1))
        if x < 0:
            out[1::2] *= -1.0
        return out
    start = _miller_start(n_max, ax)
    vals = np.zeros(start + 2)
    vals[start] = 1e-300
    norm = 0.0
    for m in range(start, 0, -1):
        vals[m - 1] = (2.0 * m / ax) * vals[m] - vals[m + 1]
        if abs(vals[m - 1]) > 1e250:
            vals[m - 1 :] *= 1e-250
            norm *= 1e-250
        if (m - 1) % 2 == 0 and m - 1 > 0:
            norm += 2.0 * vals[m - 1]
    norm += vals[0]
    out[:] = vals[: n_max + 1] / norm
    if x < 0:
        out[1::2] *= -1.0
    return out


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind J_n(x) for integer n, |n| <= 200.

    Negative orders use J_{−n}(x) = (−1)^n J_n(x).
    """
    if abs(n) > BESSEL_N_MAX:
        raise BesselRangeError(f"|n| = {abs(n)} exceeds supported maximum {BESSEL_N_MAX}")
    value = bessel_j_orders(x, abs(n))[abs(n)]
    return float(-value if n < 0 and n % 2 else value)
