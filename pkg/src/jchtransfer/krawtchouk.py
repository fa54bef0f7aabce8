"""Krawtchouk polynomials K_n(x; p, 𝔑) and their orthonormal scaling.

Values are computed from the terminating hypergeometric sum in exact rational
arithmetic. The sum alternates in sign and, for 𝔑 near 60, cancels through
more than sixteen decimal digits, so double precision cannot be used for it.
The float three-term recurrence in :func:`normalized_krawtchouk_recurrence`
is kept as an independent cross-check.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

# largest 𝔑 accepted for the normalized polynomials (chains of up to 64 sites)
MAX_DEGREE = 63


def _check(n: int, x: int, p, big_n: int) -> Fraction:
    if big_n < 0:
        raise ValueError(f"𝔑 must be >= 0, got {big_n}")
    if not (0 <= n <= big_n and 0 <= x <= big_n):
        raise ValueError(f"need 0 <= n, x <= {big_n}, got n={n}, x={x}")
    p = Fraction(p)
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    return p


def krawtchouk_exact(n: int, x: int, p, big_n: int) -> Fraction:
    """K_n(x; p, 𝔑) = ₂F₁(−x, −n; −𝔑; 1/p) as an exact rational.

    Floats are converted to their exact binary value.
    """
    p = _check(n, x, p, big_n)
    inv_p = 1 / p
    term = Fraction(1)
    total = Fraction(1)
    # stops at k = min(n, x) before the lower Pochhammer (−𝔑)_k can vanish
    for k in range(min(n, x)):
        term *= Fraction((k - n) * (k - x), (k - big_n) * (k + 1)) * inv_p
        total += term
    return total


def krawtchouk(n: int, x: int, p: float, big_n: int) -> float:
    return float(krawtchouk_exact(n, x, p, big_n))


def weight(x: int, p, big_n: int) -> Fraction:
    """Binomial weight w(x) = C(𝔑, x) p^x (1−p)^{𝔑−x}."""
    p = Fraction(p)
    return math.comb(big_n, x) * p**x * (1 - p) ** (big_n - x)


def norm_constant(n: int, p, big_n: int) -> Fraction:
    """d_n = ((1−p)/p)^n / C(𝔑, n)."""
    p = Fraction(p)
    return ((1 - p) / p) ** n / math.comb(big_n, n)


def normalized_krawtchouk_exact_square(n: int, x: int, p, big_n: int) -> tuple[int, Fraction]:
    """Sign and exact square of K̃_n(x) = √w(x) K_n(x) / √d_n."""
    k = krawtchouk_exact(n, x, p, big_n)
    sign = (k > 0) - (k < 0)
    return sign, k * k * weight(x, p, big_n) / norm_constant(n, p, big_n)


def normalized_krawtchouk(n: int, x: int, p: float, big_n: int) -> float:
    """Orthonormal Krawtchouk value K̃_n(x; p, 𝔑)."""
    if big_n > MAX_DEGREE:
        raise OverflowError(f"normalized Krawtchouk supported for 𝔑 <= {MAX_DEGREE}")
    sign, square = normalized_krawtchouk_exact_square(n, x, p, big_n)
    return sign * math.sqrt(square)


@lru_cache(maxsize=None)
def _matrix_half(big_n: int) -> tuple[tuple[float, ...], ...]:
    size = big_n + 1
    rows = [[0.0] * size for _ in range(size)]
    for x in range(size):
        for n in range(x, size):
            rows[x][n] = rows[n][x] = normalized_krawtchouk(n, x, Fraction(1, 2), big_n)
    return tuple(tuple(r) for r in rows)


def normalized_krawtchouk_matrix(big_n: int) -> np.ndarray:
    """M[x, n] = K̃_n(x; 1/2, 𝔑), an (𝔑+1)×(𝔑+1) symmetric orthogonal matrix.

    Uses the self-duality K̃_n(x) = K̃_x(n) at p = 1/2.
    """
    if not 0 <= big_n <= MAX_DEGREE:
        raise OverflowError(f"normalized Krawtchouk supported for 0 <= 𝔑 <= {MAX_DEGREE}")
    return np.array(_matrix_half(big_n))


def normalized_krawtchouk_recurrence(big_n: int, p: float = 0.5) -> np.ndarray:
    """Float evaluation of M[x, n] = K̃_n(x) through the three-term recurrence.

    (p(𝔑−n) + n(1−p) − x) K̃_n = √(p(1−p)(n+1)(𝔑−n)) K̃_{n+1} + √(p(1−p)n(𝔑−n+1)) K̃_{n−1}

    Run forward from n = 0 and backward from n = 𝔑 and joined at the middle,
    so that each half only ever runs in the direction where it is stable.
    """
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    size = big_n + 1
    q = 1.0 - p
    logw = np.array(
        [
            math.lgamma(big_n + 1) - math.lgamma(x + 1) - math.lgamma(big_n - x + 1)
            + x * math.log(p) + (big_n - x) * math.log(q)
            for x in range(size)
        ]
    )
    sqrt_w = np.exp(0.5 * logw)
    xs = np.arange(size, dtype=float)
    out = np.zeros((size, size))
    if big_n == 0:
        out[0, 0] = 1.0
        return out

    def b(n):
        return math.sqrt(p * q * (n + 1) * (big_n - n))

    def centre(n):
        return p * (big_n - n) + n * q - xs

    mid = big_n // 2
    out[:, 0] = sqrt_w
    prev = np.zeros(size)
    for n in range(0, mid):
        out[:, n + 1] = (centre(n) * out[:, n] - (b(n - 1) if n else 0.0) * prev) / b(n)
        prev = out[:, n]
    # K_𝔑(x) = (1 − 1/p)^x = (−1)^x (q/p)^x and 1/√d_𝔑 = (p/q)^{𝔑/2}
    sign = np.where(np.arange(size) % 2 == 1, -1.0, 1.0)
    log_last = logw / 2 + xs * math.log(q / p) + 0.5 * big_n * math.log(p / q)
    out[:, big_n] = sign * np.exp(log_last)
    nxt = np.zeros(size)
    for n in range(big_n, mid + 1, -1):
        # solve the relation at index n for K̃_{n−1}
        upper = b(n) if n < big_n else 0.0
        out[:, n - 1] = (centre(n) * out[:, n] - upper * nxt) / b(n - 1)
        nxt = out[:, n]
    return out


def parity_check(ell: int, j: int, big_n: int, tol: float = 1e-12) -> bool:
    """Both mirror identities at p = 1/2.

    K̃_j(ℓ) = (−1)^ℓ K̃_{𝔑−j}(ℓ) and K̃_ℓ(j) = (−1)^ℓ K̃_ℓ(𝔑−j).
    """
    m = normalized_krawtchouk_matrix(big_n)
    s = -1.0 if ell % 2 else 1.0
    first = abs(m[ell, j] - s * m[ell, big_n - j]) <= tol
    second = abs(m[j, ell] - s * m[big_n - j, ell]) <= tol
    return bool(first and second)
