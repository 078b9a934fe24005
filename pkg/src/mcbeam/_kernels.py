"""Compiled inner loops shared by the subproblem solvers.

All vectors are real and lifted: entries ``j`` and ``j + N`` form group ``j``.
The power set is described by ``radii`` (per-antenna mode) or, when
``total_radius > 0``, by a single Euclidean ball of that radius.
"""

import numpy as np
from numba import njit

SIMPLEX_FLOOR = 1e-300
# points this close to a ball's boundary count as inside, so that projecting a
# projected point leaves it bit-identical despite rounding in the norm
BOUNDARY_SLACK = 1.0 + 4e-16


@njit(cache=True)
def group_norms(x):
    n = x.size // 2
    out = np.empty(n)
    for j in range(n):
        out[j] = np.sqrt(x[j] * x[j] + x[j + n] * x[j + n])
    return out


@njit(cache=True)
def l12_norm(x):
    return group_norms(x).sum()


@njit(cache=True)
def project_power(x, radii, total_radius):
    out = x.copy()
    n = x.size // 2
    if total_radius > 0.0:
        nrm = np.sqrt(np.dot(x, x))
        if nrm > total_radius * BOUNDARY_SLACK:
            out *= total_radius / nrm
        return out
    for j in range(n):
        nj = np.sqrt(x[j] * x[j] + x[j + n] * x[j + n])
        if nj > radii[j] * BOUNDARY_SLACK:
            c = radii[j] / nj
            out[j] *= c
            out[j + n] *= c
    return out


@njit(cache=True)
def project_group_ball(x):
    out = x.copy()
    n = x.size // 2
    for j in range(n):
        nj = np.sqrt(x[j] * x[j] + x[j + n] * x[j + n])
        if nj > BOUNDARY_SLACK:
            out[j] /= nj
            out[j + n] /= nj
    return out


@njit(cache=True)
def prox_group_l12(x, t):
    out = np.zeros_like(x)
    n = x.size // 2
    for j in range(n):
        nj = np.sqrt(x[j] * x[j] + x[j + n] * x[j + n])
        if nj > t:
            c = 1.0 - t / nj
            out[j] = c * x[j]
            out[j + n] = c * x[j + n]
    return out


@njit(cache=True)
def entropic_step(y, v):
    """Multiplicative update ``y * exp(v)`` followed by normalization."""
    z = np.log(np.maximum(y, SIMPLEX_FLOOR)) + v
    z -= z.max()
    e = np.exp(z)
    e /= e.sum()
    return np.maximum(e, SIMPLEX_FLOOR)


@njit(cache=True)
def smoothed_max(Q, Qt, b, w, mu):
    """Log-sum-exp smoothing of ``max(Q w + b)``; returns (value, gradient)."""
    a = Q @ w + b
    amax = a.max()
    e = np.exp((a - amax) / mu)
    se = e.sum()
    theta = e / se
    value = amax + mu * np.log(se) - mu * np.log(a.size)
    return value, Qt @ theta


@njit(cache=True)
def linear_min_over_power(c, radii, total_radius):
    """min of c^T w over the power set, in closed form."""
    if total_radius > 0.0:
        return -total_radius * np.sqrt(np.dot(c, c))
    return -np.dot(radii, group_norms(c))


@njit(cache=True)
def subproblem_value(Q, b, lam, w):
    return (Q @ w + b).max() + lam * l12_norm(w)


@njit(cache=True)
def accel_prox(Q, Qt, b, x, w0, rho, mu, L, eps, max_iter):
    """Constant-momentum accelerated gradient on the smoothed prox objective.

    Minimizes ``g_mu(w) + ||w - x||^2 / (2 rho)``. Returns the iterate with the
    smallest observed gradient norm, the iteration count and a convergence flag.
    """
    tau = 1.0 / rho
    q = np.sqrt(tau / L)
    beta = (1.0 - q) / (1.0 + q)
    w_prev = w0.copy()
    z = w0.copy()
    best = w0.copy()
    best_g = np.inf
    for k in range(max_iter):
        _, g = smoothed_max(Q, Qt, b, z, mu)
        g += (z - x) * tau
        gn = np.sqrt(np.dot(g, g))
        if gn < best_g:
            best_g = gn
            best[:] = z
        if gn <= eps:
            return best, k, True
        w_new = z - g / L
        z = w_new + beta * (w_new - w_prev)
        w_prev = w_new
    return best, max_iter, False


@njit(cache=True)
def admm_run(Q, Qt, b, lam, rho, mu, L, radii, total_radius,
             w1, w2, w3, v1, v2, v3, max_iter, eps, eps_mu, max_prox_iters,
             window, growth):
    """Three-block consensus ADMM on u(w) + lam ||w||_{1,2} + I_P(w).

    State arrays are updated in place. Returns (iterations, status, prox
    non-convergence count, final residual). Status: 0 converged, 1 cap
    reached, 2 diverged.
    """
    wav = (w1 + w2 + w3) / 3.0
    res_hist = np.full(max_iter, np.inf)
    obj_prev = np.inf
    prox_fail = 0
    res = np.inf
    for k in range(max_iter):
        p1, _, ok = accel_prox(Q, Qt, b, wav - v1, wav, rho, mu, L, eps_mu,
                               max_prox_iters)
        if not ok:
            prox_fail += 1
        w1[:] = p1
        w2[:] = prox_group_l12(wav - v2, lam * rho)
        w3[:] = project_power(wav - v3, radii, total_radius)
        wav = (w1 + w2 + w3) / 3.0
        v1 += w1 - wav
        v2 += w2 - wav
        v3 += w3 - wav
        d1 = w1 - wav
        d2 = w2 - wav
        d3 = w3 - wav
        res = (np.sqrt(np.dot(d1, d1)) + np.sqrt(np.dot(d2, d2))
               + np.sqrt(np.dot(d3, d3)))
        res_hist[k] = res
        scale = 1.0 + np.sqrt(np.dot(wav, wav))
        if not np.isfinite(res):
            return k + 1, 2, prox_fail, res
        if k >= window:
            # residual-sized growth from a consensus start is normal
            floor = 1e-2 * scale
            base = res_hist[k - window:k].min()
            if res > growth * max(base, floor):
                return k + 1, 2, prox_fail, res
        obj = subproblem_value(Q, b, lam, project_power(wav, radii, total_radius))
        if res <= eps * scale and abs(obj - obj_prev) <= eps * max(1.0, abs(obj)):
            return k + 1, 0, prox_fail, res
        obj_prev = obj
    return max_iter, 1, prox_fail, res


@njit(cache=True)
def saddle_gap(Q, Qt, b, lam, w, y, s, radii, total_radius):
    """Primal value at w minus the dual lower bound at (y, s)."""
    primal = subproblem_value(Q, b, lam, w)
    c = Qt @ y + lam * s
    dual = np.dot(y, b) + linear_min_over_power(c, radii, total_radius)
    return primal, primal - dual


@njit(cache=True)
def _matvec(A, x, out):
    m, n = A.shape
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += A[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def _project_power_inplace(x, radii, total_radius):
    n = x.size // 2
    if total_radius > 0.0:
        acc = 0.0
        for i in range(x.size):
            acc += x[i] * x[i]
        nrm = np.sqrt(acc)
        if nrm > total_radius * BOUNDARY_SLACK:
            c = total_radius / nrm
            for i in range(x.size):
                x[i] *= c
        return
    for j in range(n):
        nj = np.sqrt(x[j] * x[j] + x[j + n] * x[j + n])
        if nj > radii[j] * BOUNDARY_SLACK:
            c = radii[j] / nj
            x[j] *= c
            x[j + n] *= c


@njit(cache=True)
def _ball_inplace(x):
    n = x.size // 2
    for j in range(n):
        nj = np.sqrt(x[j] * x[j] + x[j + n] * x[j + n])
        if nj > BOUNDARY_SLACK:
            x[j] /= nj
            x[j + n] /= nj


@njit(cache=True)
def _entropic_inplace(y, v, alpha, out):
    zmax = -np.inf
    for i in range(y.size):
        z = np.log(max(y[i], SIMPLEX_FLOOR)) + alpha * v[i]
        out[i] = z
        if z > zmax:
            zmax = z
    tot = 0.0
    for i in range(y.size):
        e = np.exp(out[i] - zmax)
        out[i] = e
        tot += e
    for i in range(y.size):
        out[i] = max(out[i] / tot, SIMPLEX_FLOOR)


@njit(cache=True)
def mirror_prox_run(Q, Qt, b, lam, w, y, s, radii, total_radius, alpha,
                    max_iter, eps, check_every):
    """Extragradient mirror-prox on min_w max_{y,s} y^T(Qw + b) + lam s^T w.

    Euclidean steps with ball projections on w and s, entropic steps on y.
    Returns the last iterate, the ergodic averages of the extrapolated points,
    the recorded gaps (one per check), the iteration count and a flag.
    """
    w = w.copy()
    y = y.copy()
    s = s.copy()
    n2 = w.size
    m = y.size
    u = np.empty(n2)
    yr = np.empty(m)
    sr = np.empty(n2)
    gw = np.empty(n2)
    gy = np.empty(m)
    wavg = np.zeros(n2)
    yavg = np.zeros(m)
    savg = np.zeros(n2)
    gaps = np.full(max_iter // check_every + 1, np.nan)
    n_checks = 0
    k = 0
    converged = False
    al = alpha * lam
    for it in range(max_iter):
        # extrapolation at z
        _matvec(Qt, y, gw)
        _matvec(Q, w, gy)
        for i in range(n2):
            u[i] = w[i] - alpha * (gw[i] + lam * s[i])
            sr[i] = s[i] + al * w[i]
        for i in range(m):
            gy[i] += b[i]
        _project_power_inplace(u, radii, total_radius)
        _ball_inplace(sr)
        _entropic_inplace(y, gy, alpha, yr)

        # correction with gradients at the extrapolated point
        _matvec(Qt, yr, gw)
        _matvec(Q, u, gy)
        for i in range(n2):
            w[i] -= alpha * (gw[i] + lam * sr[i])
            s[i] += al * u[i]
        for i in range(m):
            gy[i] += b[i]
        _project_power_inplace(w, radii, total_radius)
        _ball_inplace(s)
        _entropic_inplace(y, gy, alpha, y)

        k = it + 1
        inv = 1.0 / k
        for i in range(n2):
            wavg[i] += (u[i] - wavg[i]) * inv
            savg[i] += (sr[i] - savg[i]) * inv
        for i in range(m):
            yavg[i] += (yr[i] - yavg[i]) * inv
        if k % check_every == 0 or k == max_iter:
            primal, gap = saddle_gap(Q, Qt, b, lam, wavg, yavg, savg, radii,
                                     total_radius)
            gaps[n_checks] = gap
            n_checks += 1
            if not np.isfinite(gap):
                break
            if gap <= eps * max(1.0, abs(primal)):
                converged = True
                break
    return w, y, s, wavg, yavg, savg, gaps[:n_checks], k, converged
