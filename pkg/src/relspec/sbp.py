"""Diagonal-norm summation-by-parts first-derivative operators."""
from __future__ import annotations

import numpy as np

# upper-boundary antisymmetric entries (i, j, value) of the order-4 (2-4) operator
_A4_BOUNDARY = {
    (0, 1): 59 / 96, (0, 2): -1 / 12, (0, 3): -1 / 32,
    (1, 2): 59 / 96, (1, 3): 0.0,
    (2, 3): 59 / 96, (2, 4): -1 / 12,
    (3, 4): 2 / 3, (3, 5): -1 / 12,
}
_P4_BOUNDARY = (17 / 48, 59 / 48, 43 / 48, 49 / 48)

# number of nodes touched by the boundary row of each operator
STENCIL_WIDTH = {2: 2, 4: 4}


def sbp_operator(n: int, order: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Unit-spacing norm weights p and matrix Q with Q + Q^T = diag(-1, 0, ..., 0, 1) exactly.

    The derivative on a grid of spacing h is diag(h p)^{-1} Q.
    """
    if order == 2:
        if n < 2:
            raise ValueError("need at least 2 nodes")
        p = np.ones(n)
        p[0] = p[-1] = 0.5
        up = np.zeros((n, n))
        idx = np.arange(n - 1)
        up[idx, idx + 1] = 0.5
    elif order == 4:
        if n < 8:
            raise ValueError("order-4 operator needs at least 8 nodes")
        p = np.ones(n)
        p[:4] = _P4_BOUNDARY
        p[-4:] = _P4_BOUNDARY[::-1]
        up = np.zeros((n, n))
        for i in range(n):
            if i + 1 < n:
                up[i, i + 1] = 2 / 3
            if i + 2 < n:
                up[i, i + 2] = -1 / 12
        for (i, j) in _A4_BOUNDARY:
            up[i, j] = 0.0
            up[n - 1 - j, n - 1 - i] = 0.0
        for (i, j), v in _A4_BOUNDARY.items():
            up[i, j] = v
            up[n - 1 - j, n - 1 - i] = v
    else:
        raise ValueError(f"unsupported SBP order {order}")
    A = up - up.T
    B = np.zeros((n, n))
    B[0, 0] = -1.0
    B[-1, -1] = 1.0
    Q = A + 0.5 * B
    return p, Q


def derivative(n: int, h: float, order: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Return (P weights, Dx) for spacing h."""
    p, Q = sbp_operator(n, order)
    P = h * p
    return P, Q / P[:, None]


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    out = np.zeros_like(t)
    mid = (t > 0) & (t < 1)
    a = np.exp(-1.0 / t[mid])
    b = np.exp(-1.0 / (1.0 - t[mid]))
    out[mid] = a / (a + b)
    out[t >= 1] = 1.0
    return out


def boundary_taper(n: int, order: int = 2, plateau: float = 0.1, ramp_end: float = 0.3) -> np.ndarray:
    """Profile equal to 1 on the first nodes and smoothly 0 from ramp_end on (node-index fraction).

    The plateau always covers the boundary stencil so commutators with the
    derivative vanish on the boundary row.
    """
    j = np.arange(n)
    p = max(int(np.ceil(plateau * (n - 1))), STENCIL_WIDTH[order] + 1)
    q = max(int(np.ceil(ramp_end * (n - 1))), p + 2)
    return 1.0 - smooth_step((j - p) / (q - p))
