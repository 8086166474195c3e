"""Reference implementations used as test oracles.

These deliberately avoid the package's own helpers: plain loops, explicit
inverses and the complex eigenproblem of ``i Omega sigma``.
"""

import itertools
import math

import numpy as np


def tmsv_value(r):
    """Steerability of a two-mode squeezed vacuum, either direction."""
    return math.log(math.cosh(2 * r))


def tmsv_matrix(r):
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    return np.array(
        [[c, 0, s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, -s, 0, c]], dtype=float
    )


def omega(n):
    out = np.zeros((2 * n, 2 * n))
    for k in range(n):
        out[2 * k, 2 * k + 1] = 1.0
        out[2 * k + 1, 2 * k] = -1.0
    return out


def symplectic_spectrum(sigma):
    n = sigma.shape[0] // 2
    ev = np.sort(np.abs(np.linalg.eigvals(1j * omega(n) @ sigma)))
    return ev[::2]


def quads(modes):
    return [q for m in modes for q in (2 * m, 2 * m + 1)]


def steering_value(sigma, steering, steered):
    a, b = quads(steering), quads(steered)
    M = sigma[np.ix_(a, a)]
    N = sigma[np.ix_(b, b)]
    C = sigma[np.ix_(a, b)]
    S = N - C.T @ np.linalg.inv(M) @ C
    nu = symplectic_spectrum(0.5 * (S + S.T))
    return max(0.0, -sum(math.log(v) for v in nu if v < 1))


def all_bipartitions(n, mode):
    """Brute-force subset pairs, sorted by (steering mask, steered mask)."""
    out = []
    for m_size in range(1, n):
        for m in itertools.combinations(range(n), m_size):
            rest = [i for i in range(n) if i not in m]
            subsets = (
                [tuple(rest)]
                if mode == "full"
                else [s for k in range(1, len(rest) + 1) for s in itertools.combinations(rest, k)]
            )
            out.extend((m, s) for s in subsets)

    def mask(s):
        return sum(1 << i for i in s)

    return sorted(out, key=lambda p: (mask(p[0]), mask(p[1])))
