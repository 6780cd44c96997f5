"""First and second order structure of the state and the increments.

Everything here runs off Monte Carlo draws of the per-period affine
transition pairs (J, K): their means give the fixed-point equations

    (I - E J_tau) E U          = E K_tau
    (I - E[J (x) J]) vec(EUU') = (E[K (x) J] + E[J (x) K]) EU + vec(E KK')

for the period-start state U, and nested draws on a shared path give
the cross terms of the lagged state covariance.  No closed forms exist
for these expectations under seasonal Gaussian jumps, so every
estimate carries its replicate count and standard errors.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate

from . import cogarch, semi_levy

__all__ = [
    "StationarityError",
    "PeriodOperators",
    "estimate_period_operators",
    "stationary_mean",
    "stationary_second_moment",
    "state_mean",
    "volatility_mean",
    "state_cov",
    "volatility_cov",
    "increment_moments",
    "squared_increment_cov_mc",
    "scalar_envelope",
]


class StationarityError(RuntimeError):
    """Fixed-point solve attempted outside the stationary regime."""


@dataclass
class PeriodOperators:
    """Per-replicate transition pairs over (0, s] for s on a grid.

    ``j_samples[s]`` has shape (R, q, q) and ``k_samples[s]`` (R, q);
    s = tau is always present.  All draws at different s of one
    replicate share the same driver path (nested windows), which is
    what the lagged-covariance estimator needs.
    """

    tau: float
    s_values: tuple
    j_samples: dict
    k_samples: dict
    replicates: int

    def mean_pair(self, s):
        s = self._key(s)
        return self.j_samples[s].mean(axis=0), self.k_samples[s].mean(axis=0)

    def stderr_pair(self, s):
        s = self._key(s)
        root = math.sqrt(self.replicates)
        return (self.j_samples[s].std(axis=0, ddof=1) / root,
                self.k_samples[s].std(axis=0, ddof=1) / root)

    def samples(self, s):
        s = self._key(s)
        return self.j_samples[s], self.k_samples[s]

    def _key(self, s):
        for cand in self.s_values:
            if abs(cand - s) <= 1e-9 * max(1.0, abs(s)):
                return cand
        raise KeyError(f"s={s} not in the estimated grid; rebuild the operators")

    def subset(self, sl):
        """Operators restricted to a slice of the replicates."""
        j = {s: arr[sl] for s, arr in self.j_samples.items()}
        k = {s: arr[sl] for s, arr in self.k_samples.items()}
        n = len(next(iter(j.values())))
        return PeriodOperators(self.tau, self.s_values, j, k, n)

    def kron_moments(self):
        """(E[J(x)J], E[K(x)J], E[J(x)K], E[KK']) at s = tau."""
        jj, kk = self.samples(self.tau)
        q = jj.shape[1]
        r = self.replicates
        jxj = np.einsum("rij,rkl->rikjl", jj, jj).reshape(r, q * q, q * q).mean(axis=0)
        kxj = np.einsum("ri,rkl->rikl", kk, jj).reshape(r, q * q, q).mean(axis=0)
        jxk = np.einsum("rij,rk->rikj", jj, kk).reshape(r, q * q, q).mean(axis=0)
        kkt = np.einsum("ri,rj->rij", kk, kk).mean(axis=0)
        return jxj, kxj, jxk, kkt

    @property
    def spectral_radius(self):
        jbar, _ = self.mean_pair(self.tau)
        return float(np.max(np.abs(np.linalg.eigvals(jbar))))


def estimate_period_operators(model, params, replicates, s_grid, rng, threads=1):
    """Monte Carlo draws of (J, K) over (0, s] for each s in the grid.

    The grid is augmented with tau.  Replicate r uses child stream r of
    ``rng`` regardless of ``threads``, so results are bit-identical for
    any worker count; 1000+ replicates are recommended for downstream
    solves.
    """
    if replicates < 2:
        raise ValueError("need at least two replicates")
    tau = model.tau
    s_values = np.unique(np.concatenate([np.asarray(s_grid, dtype=float), [tau]]))
    if np.any(s_values < 0) or np.any(s_values > tau + 1e-12):
        raise ValueError("grid values must lie in [0, tau]")
    q = params.q
    j_samples = {float(s): np.empty((replicates, q, q)) for s in s_values}
    k_samples = {float(s): np.empty((replicates, q)) for s in s_values}
    children = rng.spawn(replicates)

    def run_chunk(lo, hi):
        paths = semi_levy.sample_paths_from_children(model, tau, children[lo:hi])
        for r, path in enumerate(paths, start=lo):
            for pair in cogarch.transition_prefixes(params, path, s_values):
                j_samples[pair.t][r] = pair.matrix
                k_samples[pair.t][r] = pair.offset

    if threads <= 1:
        run_chunk(0, replicates)
    else:
        from concurrent.futures import ThreadPoolExecutor
        step = -(-replicates // threads)
        bounds = [(lo, min(lo + step, replicates)) for lo in range(0, replicates, step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda b: run_chunk(*b), bounds))
    return PeriodOperators(tau, tuple(float(s) for s in s_values),
                           j_samples, k_samples, replicates)


def stationary_mean(ops):
    """Solve (I - E J_tau) u = E K_tau for the period-start mean."""
    if ops.spectral_radius >= 1.0:
        raise StationarityError(
            f"spectral radius of E J over one period is {ops.spectral_radius:.4f} >= 1")
    jbar, kbar = ops.mean_pair(ops.tau)
    try:
        return np.linalg.solve(np.eye(len(kbar)) - jbar, kbar)
    except np.linalg.LinAlgError as exc:
        raise StationarityError("mean fixed-point system is singular") from exc


def stationary_second_moment(ops, mean=None):
    """Solve the vectorised fixed point for E UU' and reshape to q x q."""
    mean = stationary_mean(ops) if mean is None else np.asarray(mean)
    q = len(mean)
    jxj, kxj, jxk, kkt = ops.kron_moments()
    rho2 = float(np.max(np.abs(np.linalg.eigvals(jxj))))
    if rho2 >= 1.0:
        raise StationarityError(
            f"spectral radius of E[J(x)J] is {rho2:.4f} >= 1; no finite second moment")
    rhs = (kxj + jxk) @ mean + kkt.reshape(q * q, order="F")
    vec = np.linalg.solve(np.eye(q * q) - jxj, rhs)
    return vec.reshape((q, q), order="F")


def state_mean(ops, t):
    """E Y_t under the periodically stationary law; periodic in t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    t1 = math.fmod(t, ops.tau)
    jbar, kbar = ops.mean_pair(t1)
    return jbar @ stationary_mean(ops) + kbar


def volatility_mean(ops, params, t):
    """E V_t = alpha0 + a' E Y_t."""
    return float(params.alpha0 + params.weights @ state_mean(ops, t))


def _paired_bracket(ops, s_early, s_late, mean, second):
    """E[(J1 U + K1)(J2 U + K2)'] over shared-path draws at nested s."""
    j1, k1 = ops.samples(s_early)
    j2, k2 = ops.samples(s_late)
    term = np.einsum("rij,jk,rlk->ril", j1, second, j2)        # J1 EUU' J2'
    term += np.einsum("rij,j,rk->rik", j1, mean, k2)           # (J1 EU) K2'
    term += np.einsum("ri,rkj,j->rik", k1, j2, mean)           # K1 (J2 EU)'
    term += np.einsum("ri,rk->rik", k1, k2)                    # K1 K2'
    return term.mean(axis=0)


def state_cov(ops, t, h):
    """cov(Y_t, Y_{t+h}) assembled from the period operators.

    Returned as C[i, j] = cov((Y_t)_i, (Y_{t+h})_j).  Nested windows in
    the starting period share Monte Carlo paths; whole periods in
    between and the trailing partial period enter through their means.
    Both within-period offsets must be on the operator grid.
    """
    if t < 0 or h < 0:
        raise ValueError("need t, h >= 0")
    tau = ops.tau
    m, t1 = divmod(t, tau)
    n, t2 = divmod(t + h, tau)
    m, n = int(m), int(n)
    if n < m:
        raise ValueError("t + h decomposes before t")
    mean = stationary_mean(ops)
    second = stationary_second_moment(ops, mean)
    ey_t = state_mean(ops, t1)

    if n == m:
        cross = _paired_bracket(ops, t1, t2, mean, second)
        return cross - np.outer(ey_t, state_mean(ops, t2))

    cross = _paired_bracket(ops, t1, tau, mean, second)
    jbar_tau, kbar_tau = ops.mean_pair(tau)
    bracket = cross - np.outer(ey_t, jbar_tau @ mean + kbar_tau)
    jbar_t2, _ = ops.mean_pair(t2)
    carry = np.linalg.matrix_power(jbar_tau, n - m - 1)
    return bracket @ carry.T @ jbar_t2.T


def volatility_cov(ops, params, t, h):
    """cov(V_t, V_{t+h}) = a' cov(Y_t, Y_{t+h}) a."""
    return float(params.weights @ state_cov(ops, t, h) @ params.weights)


def _mean_vol_interpolant(ops, params):
    s = np.asarray(ops.s_values)
    ev = np.array([volatility_mean(ops, params, si) for si in s])
    if len(s) < 4:
        raise ValueError("operator grid too coarse to interpolate E V; add grid points")
    return interpolate.interp1d(s, ev, kind="cubic", fill_value="extrapolate")


def increment_moments(model, params, ops, t, p):
    """(mean, variance) of the increment G_{t+p} - G_t.

    Requires a centered driver (every season law has mean zero): the
    mean is then exactly zero and the variance is the season-piece sum
    of E(Z_j^2) int E(V_s) lambda(s) ds with E V from the stationary
    period operators.
    """
    if p <= 0:
        raise ValueError("p must be > 0")
    for law in model.partition.laws:
        if abs(law.mean) > 1e-12:
            raise ValueError("increment moments need centered jump laws "
                             "(zero-mean driver); use model.centered()")
    ev = _mean_vol_interpolant(ops, params)
    tau = model.tau
    var = 0.0
    for u0, u1, j in semi_levy.season_segments(model, t, t + p):
        law = model.partition.laws[j]
        integrand = lambda s: float(ev(math.fmod(s, tau)) * model.intensity.rate(s))
        piece, _ = integrate.quad(integrand, u0, u1, epsabs=1e-10, epsrel=1e-10, limit=200)
        var += law.second_moment * piece
    return 0.0, float(var)


def squared_increment_cov_mc(model, params, t, h, p, replicates, rng,
                             burn_periods=10, y0=None):
    """Monte Carlo cov((G_t^{(p)})^2, (G_{t+h}^{(p)})^2) with stderr.

    Each path burns ``burn_periods`` whole periods towards the
    stationary law before the two increments are read off.
    """
    if replicates < 2:
        raise ValueError("need at least two replicates")
    if p <= 0 or h < 0:
        raise ValueError("need p > 0 and h >= 0")
    tau = model.tau
    offset = burn_periods * tau
    horizon = offset + t + h + p
    if model.period_mass <= 0:
        return 0.0, 0.0
    y0 = np.zeros(params.q) if y0 is None else np.asarray(y0, dtype=float)
    paths = semi_levy.sample_paths(model, horizon, replicates, rng)
    g_times = np.array([offset + t, offset + t + p, offset + t + h, offset + t + h + p])
    g_at, _, _ = cogarch.simulate_batch(params, paths, y0, g_times=g_times)
    x = (g_at[:, 1] - g_at[:, 0]) ** 2
    y = (g_at[:, 3] - g_at[:, 2]) ** 2
    prod = (x - x.mean()) * (y - y.mean())
    cov = float(prod.mean())
    stderr = float(prod.std(ddof=1) / math.sqrt(replicates))
    return cov, stderr


def scalar_envelope(params, path, t, r=2):
    """Scalar envelope (J~, K~) dominating the state norm at time t.

    Along any path, ||Y_t|| in the eigenbasis-weighted norm is bounded
    by J~ ||Y_0|| + K~ with

        J~ = exp(eta t + sum_i log(1 + c Z_i^2))
        K~ = alpha0 ||e|| exp(sum_i log(1 + c Z_i^2)) sum_i Z_i^2

    where c is the weighted norm of e a' and the sums run over jumps up
    to t.  This is the order-(1,1) comparison process used as a cheap
    divergence diagnostic.
    """
    if path.jumps is None:
        raise ValueError("driver path has no jump sizes")
    upto = int(np.searchsorted(path.arrivals, t, side="right"))
    z2 = path.jumps[:upto] ** 2
    c = params.bnorm(np.outer(params.last_basis, params.weights), r=r)
    log_kicks = float(np.sum(np.log1p(c * z2)))
    eta = params.spectral_abscissa
    e_norm = params.bnorm_vec(params.last_basis, r=r)
    j_env = math.exp(eta * t + log_kicks)
    k_env = params.alpha0 * e_norm * math.exp(log_kicks) * float(np.sum(z2))
    return j_env, k_env
