"""Pure-Python/numpy implementations of the sequential inner loops.

Every function here has a Cython twin in ``_kernels.pyx`` with the same
signature and in-place semantics. ``seqmon.kernels`` picks one at import.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def stream_update(sigma, gamma, phi, arms, y, n0):
    """Run the running-average recursion over a batch, in place.

    For each observation ``n`` is incremented and, for both arms,
    ``sigma[a] = (1 - 1/n) sigma[a] + (1/n) 1(A=a) phi phi^T`` and likewise
    ``gamma[a]`` with ``phi * y``.

    Args:
        sigma: (2, q, q) running averages, modified in place.
        gamma: (2, q) running averages, modified in place.
        phi: (m, q) feature rows.
        arms: (m,) integer arms in {0, 1}.
        y: (m,) rewards.
        n0: sample count before the batch.

    Returns:
        The sample count after the batch.
    """
    n = int(n0)
    for i in range(phi.shape[0]):
        n += 1
        w = 1.0 / n
        c = 1.0 - w
        row = phi[i]
        a = int(arms[i])
        sigma *= c
        gamma *= c
        sigma[a] += w * np.outer(row, row)
        gamma[a] += w * (row * y[i])
    return n


def bspline_basis(x, knots, degree, out):
    """Evaluate every B-spline of a clamped knot vector at the points ``x``.

    Uses the triangular Cox-de Boor scheme on the nonzero span. Points at
    the right boundary are assigned to the last nonempty span.

    Args:
        x: (n,) evaluation points inside ``[knots[degree], knots[-degree-1]]``.
        knots: full knot vector including repeated boundary knots.
        degree: spline degree.
        out: (n, len(knots) - degree - 1) array, overwritten.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(knots, dtype=float)
    k = int(degree)
    nb = t.shape[0] - k - 1
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, k, nb - 1)
    n_pts = x.shape[0]
    vals = np.zeros((n_pts, k + 1))
    vals[:, 0] = 1.0
    left = np.zeros((n_pts, k + 1))
    right = np.zeros((n_pts, k + 1))
    for j in range(1, k + 1):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(n_pts)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    out[:] = 0.0
    rows = np.arange(n_pts)
    for r in range(k + 1):
        out[rows, span - k + r] = vals[:, r]


def greedy_run(phi, u, y0, y1, P, beta, eps, arms_out, prop_out, y_out):
    """Assign a batch by epsilon-greedy, updating per-arm least squares online.

    ``P[a]`` is the inverse Gram matrix of arm ``a`` and ``beta[a]`` its
    least-squares coefficients; both are updated in place by rank-one
    (Sherman-Morrison) steps after each assignment.

    Args:
        phi: (m, q) feature rows.
        u: (m,) uniforms deciding the assignment (arm 1 iff ``u < propensity``).
        y0, y1: (m,) potential outcomes under each arm.
        P: (2, q, q) inverse Gram matrices.
        beta: (2, q) coefficients.
        eps: exploration probability.
        arms_out, prop_out, y_out: (m,) outputs.
    """
    for i in range(phi.shape[0]):
        row = phi[i]
        score = row @ beta[1] - row @ beta[0]
        p1 = 1.0 - eps if score > 0.0 else eps
        a = 1 if u[i] < p1 else 0
        yi = y1[i] if a == 1 else y0[i]
        arms_out[i] = a
        prop_out[i] = p1
        y_out[i] = yi
        Pa = P[a]
        k = Pa @ row
        denom = 1.0 + row @ k
        resid = yi - row @ beta[a]
        beta[a] += k * (resid / denom)
        Pa -= np.outer(k, k) / denom


def _splitmix(z):
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def reservoir_offer(points, seen, X, seed):
    """Offer rows of ``X`` to a uniform reservoir (Algorithm R), in place.

    The replacement slot for the ``i``-th offered row (0-based) is
    ``hash(seed, i) mod (i + 1)``, so the reservoir is a pure function of the
    seed and the offered sequence.

    Returns:
        The updated count of offered rows.
    """
    size = points.shape[0]
    key = _splitmix(int(seed) & _MASK64)
    i = int(seen)
    for row in X:
        if i < size:
            points[i] = row
        else:
            j = _splitmix((key + i * _GOLDEN) & _MASK64) % (i + 1)
            if j < size:
                points[j] = row
        i += 1
    return i
