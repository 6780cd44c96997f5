"""COGARCH(p,q) state dynamics driven by the seasonal jump process.

State recursion between consecutive jumps at gap dt with jump size z:

    W     = exp(B dt) Y_prev          (deterministic flow)
    V     = alpha0 + a' W             (pre-jump volatility, left limit)
    Y_new = W + e V z^2               (quadratic-variation kick)
    G_new = G_prev + sqrt(V) z        (log-price, pure jump)

B is the q x q companion matrix with -beta reversed in the last row, a
holds (alpha_1..alpha_p, 0.., 0) and e is the last basis vector.

Over any interval (s, t] the composite map is affine,
Y_t = J Y_s + K, with

    Q_n = (I + z_n^2 e a') exp(B (T_n - T_{n-1}))
    J   = exp(B (t - T_last)) Q_last ... Q_2 (I + z_1^2 e a') exp(B (T_1 - s))
    K   = exp(B (t - T_last)) (R_last + Q_last R_{last-1} + ...
          + Q_last ... Q_2 R_1),      R_n = alpha0 z_n^2 e

which is what ``transition_pair`` builds.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

__all__ = [
    "IntegrityError",
    "CogarchParams",
    "CogarchPath",
    "GridSamples",
    "TransitionPair",
    "companion_matrix",
    "matrix_exponential",
    "state_update_at_jump",
    "simulate",
    "simulate_batch",
    "sample_grid",
    "state_at",
    "increments",
    "transition_pair",
    "transition_prefixes",
]

_EIG_COND_LIMIT = 1e8


class IntegrityError(RuntimeError):
    """A simulated quantity violated a structural guarantee."""


def companion_matrix(betas):
    """q x q companion matrix: ones on the superdiagonal, -beta reversed
    in the last row."""
    betas = np.asarray(betas, dtype=float)
    q = len(betas)
    if q == 0:
        raise ValueError("need at least one beta coefficient")
    B = np.zeros((q, q))
    for i in range(q - 1):
        B[i, i + 1] = 1.0
    B[-1, :] = -betas[::-1]
    return B


def matrix_exponential(B, t):
    """exp(B t) via Pade scaling-and-squaring (scipy), eigenbasis route
    when the eigenvector matrix is well conditioned."""
    B = np.asarray(B, dtype=float)
    if not np.all(np.isfinite(B)) or not np.isfinite(t):
        raise ValueError("matrix exponential needs finite input")
    vals, vecs = np.linalg.eig(B)
    if np.linalg.cond(vecs) < _EIG_COND_LIMIT:
        return (vecs @ np.diag(np.exp(vals * t)) @ np.linalg.inv(vecs)).real
    return sla.expm(B * t)


@dataclass
class CogarchParams:
    """Model orders and coefficients, plus cached spectral data.

    Treated as immutable after construction.  ``alphas`` has length p;
    the weight vector is padded with zeros up to q.
    """

    p: int
    q: int
    alpha0: float
    alphas: tuple
    betas: tuple

    def __post_init__(self):
        if not (self.q >= self.p >= 1):
            raise ValueError("need q >= p >= 1")
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be > 0")
        self.alphas = tuple(float(a) for a in self.alphas)
        self.betas = tuple(float(b) for b in self.betas)
        if len(self.alphas) != self.p:
            raise ValueError("need exactly p alpha coefficients")
        if len(self.betas) != self.q:
            raise ValueError("need exactly q beta coefficients")
        if self.alphas[-1] == 0:
            raise ValueError("alpha_p must be non-zero")
        if self.betas[-1] == 0:
            raise ValueError("beta_q must be non-zero")

        self.weights = np.zeros(self.q)
        self.weights[: self.p] = self.alphas
        self.last_basis = np.zeros(self.q)
        self.last_basis[-1] = 1.0
        self.companion = companion_matrix(self.betas)

        vals, vecs = np.linalg.eig(self.companion)
        self.eigenvalues = vals
        self.diagonalizable = float(np.linalg.cond(vecs)) < _EIG_COND_LIMIT
        # rescale eigenvector columns to balance |P^{-1}e| against |P'a|;
        # cuts the eigenbasis norm of e a' down to its infimum over
        # valid diagonalizers, sum_i |(P^{-1}e)_i (P'a)_i|
        if self.diagonalizable:
            u = np.abs(np.linalg.solve(vecs, self.last_basis))
            v = np.abs(vecs.T @ self.weights)
            scale = np.where((u > 0) & (v > 0), np.sqrt(u / np.maximum(v, 1e-300)), 1.0)
            vecs = vecs * scale
        self.eig_cond = float(np.linalg.cond(vecs))
        self.diagonalizable = self.eig_cond < _EIG_COND_LIMIT
        self.eigenbasis = vecs
        self.eigenbasis_inv = np.linalg.inv(vecs)
        self.spectral_abscissa = float(np.max(vals.real))
        self.stationary_precondition = bool(
            np.all(vals.real < 0) and abs(np.linalg.det(self.companion)) > 0
        )

    def expm(self, dt):
        """exp(B dt) for scalar or array dt; batched over the eigenbasis."""
        dt = np.asarray(dt, dtype=float)
        if self.diagonalizable:
            phases = np.exp(np.multiply.outer(dt, self.eigenvalues))
            out = np.einsum("ij,...j,jk->...ik", self.eigenbasis, phases,
                            self.eigenbasis_inv).real
            return out
        if dt.ndim == 0:
            return sla.expm(self.companion * float(dt))
        return np.stack([sla.expm(self.companion * float(d)) for d in np.ravel(dt)]).reshape(
            dt.shape + (self.q, self.q))

    def flow_weighting(self, dt, vector):
        """a' exp(B dt) vector for an array of dt, via the eigenbasis."""
        dt = np.asarray(dt, dtype=float)
        w = (self.eigenbasis.T @ self.weights) * (self.eigenbasis_inv @ np.asarray(vector))
        return (np.exp(np.multiply.outer(dt, self.eigenvalues)) @ w).real

    def bnorm(self, mat, r=2):
        """Eigenbasis-weighted operator norm ||P^{-1} A P||_r, r in {1,2,inf}."""
        if not self.diagonalizable:
            raise ValueError("eigenbasis too ill-conditioned for the weighted norm")
        if r not in (1, 2, np.inf):
            raise ValueError("r must be 1, 2 or inf")
        a = self.eigenbasis_inv @ np.atleast_2d(mat) @ self.eigenbasis
        return float(np.linalg.norm(a, ord=r))

    def bnorm_vec(self, vec, r=2):
        """Eigenbasis-weighted vector norm ||P^{-1} v||_r."""
        if not self.diagonalizable:
            raise ValueError("eigenbasis too ill-conditioned for the weighted norm")
        if r not in (1, 2, np.inf):
            raise ValueError("r must be 1, 2 or inf")
        return float(np.linalg.norm(self.eigenbasis_inv @ np.asarray(vec), ord=r))


@dataclass(frozen=True)
class CogarchPath:
    """Jump-time record of one simulated trajectory.

    ``vols`` holds the pre-jump volatility V at each arrival (the left
    limit that multiplies the jump); ``states`` the post-jump Y.
    """

    times: np.ndarray
    jumps: np.ndarray
    states: np.ndarray
    vols: np.ndarray
    logprice: np.ndarray
    y0: np.ndarray
    horizon: float


@dataclass(frozen=True)
class GridSamples:
    """Equally spaced (t, V, G) samples of a trajectory."""

    t: np.ndarray
    vol: np.ndarray
    logprice: np.ndarray
    step: float


def state_update_at_jump(y_prev, dt, z, params):
    """One recursion step; returns (post-jump state, pre-jump volatility)."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    w = params.expm(dt) @ np.asarray(y_prev, dtype=float)
    vol = params.alpha0 + params.weights @ w
    y_new = w + params.last_basis * (vol * z * z)
    return y_new, float(vol)


def simulate(params, path, y0=None):
    """Run the jump-time recursion along a sampled driver path.

    Negative pre-jump volatility aborts with IntegrityError naming the
    jump time; it signals a parameter set without a volatility floor.
    """
    if path.jumps is None:
        raise ValueError("driver path has no jump sizes")
    y0 = np.zeros(params.q) if y0 is None else np.asarray(y0, dtype=float)
    if y0.shape != (params.q,) or not np.all(np.isfinite(y0)):
        raise ValueError("y0 must be a finite vector of length q")
    if not params.stationary_precondition:
        warnings.warn("companion matrix is not stable; simulation may diverge",
                      RuntimeWarning, stacklevel=2)

    n = path.n_jumps
    gaps = np.diff(np.concatenate([[0.0], path.arrivals]))
    flows = params.expm(gaps) if n else np.empty((0, params.q, params.q))
    states = np.empty((n, params.q))
    vols = np.empty(n)
    logprice = np.empty(n)
    y = y0.copy()
    g = 0.0
    for i in range(n):
        w = flows[i] @ y
        v = params.alpha0 + params.weights @ w
        if v < 0:
            raise IntegrityError(f"negative volatility at t={path.arrivals[i]:.6f}")
        z = path.jumps[i]
        y = w + params.last_basis * (v * z * z)
        g += np.sqrt(v) * z
        states[i] = y
        vols[i] = v
        logprice[i] = g
    return CogarchPath(path.arrivals.copy(), path.jumps.copy(), states, vols,
                       logprice, y0, path.horizon)


def simulate_batch(params, paths, y0, g_times=None, keep_states=False):
    """Vectorised recursion across many driver paths.

    Returns (g_at, min_vol, jump_states) where ``g_at[r, j]`` is G at
    ``g_times[j]`` for path r (G is constant between arrivals) and
    ``min_vol[r]`` the smallest pre-jump volatility seen.  Used by the
    Monte Carlo estimators; semantics match ``simulate`` path by path.
    """
    count = len(paths)
    y0 = np.asarray(y0, dtype=float)
    y0s = np.broadcast_to(y0, (count, params.q))
    lens = np.array([p.n_jumps for p in paths])
    kmax = int(lens.max()) if count else 0
    times = np.full((count, kmax), np.inf)
    zs = np.zeros((count, kmax))
    for r, p in enumerate(paths):
        times[r, : lens[r]] = p.arrivals
        zs[r, : lens[r]] = p.jumps
    gaps = np.diff(np.concatenate([np.zeros((count, 1)), times], axis=1), axis=1)

    y = np.array(y0s, dtype=float)
    g = np.zeros(count)
    min_vol = np.full(count, np.inf)
    g_times = np.asarray([] if g_times is None else g_times, dtype=float)
    g_at = np.zeros((count, len(g_times)))
    filled = np.zeros((count, len(g_times)), dtype=bool)
    jump_states = np.zeros((count, kmax, params.q)) if keep_states else None

    for k in range(kmax):
        act = lens > k
        if not np.any(act):
            break
        dt = np.where(act, gaps[:, k], 0.0)
        flows = params.expm(dt[act])
        w = np.einsum("rij,rj->ri", flows, y[act])
        v = params.alpha0 + w @ params.weights
        if np.any(v < 0):
            r_bad = np.nonzero(act)[0][np.argmin(v)]
            raise IntegrityError(f"negative volatility at t={times[r_bad, k]:.6f}")
        min_vol[act] = np.minimum(min_vol[act], v)
        z = zs[act, k]
        # G at sample times strictly before this arrival is now final
        if len(g_times):
            newly = act[:, None] & ~filled & (g_times[None, :] < times[:, k, None])
            g_at[newly] = np.broadcast_to(g[:, None], g_at.shape)[newly]
            filled |= newly
        y_new = w + np.outer(v * z * z, params.last_basis)
        y[act] = y_new
        g[act] = g[act] + np.sqrt(v) * z
        if keep_states:
            jump_states[act, k] = y_new
    if len(g_times):
        g_at[~filled] = np.broadcast_to(g[:, None], g_at.shape)[~filled]
    return g_at, np.where(np.isfinite(min_vol), min_vol, params.alpha0 + y0s @ params.weights), jump_states


def sample_grid(cpath, params, h):
    """V and G on the grid t = 0, h, 2h, ... up to the horizon.

    V uses the left limit: at a grid point that hits an arrival exactly
    the previous interval's flow applies, so V there is the pre-jump
    value; G is right-continuous (the jump at a hit is included).
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    if h > cpath.horizon:
        raise ValueError("grid step exceeds the horizon")
    n_steps = int(np.floor(cpath.horizon / h + 1e-9))
    t = np.arange(n_steps + 1) * h

    arr = cpath.times
    # strictly-before count gives the left limit at exact hits
    before = np.searchsorted(arr, t, side="left")
    upto = np.searchsorted(arr, t, side="right")

    base_states = np.concatenate([cpath.y0[None, :], cpath.states], axis=0)
    base_times = np.concatenate([[0.0], arr])
    prev = before  # index into base_*
    dt = t - base_times[prev]
    left_limits = np.einsum("tij,tj->ti", params.expm(dt), base_states[prev])
    vol = params.alpha0 + left_limits @ params.weights
    g_all = np.concatenate([[0.0], cpath.logprice])
    logprice = g_all[upto]
    return GridSamples(t, vol, logprice, float(h))


def state_at(cpath, params, s):
    """Y_s (post-jump convention: the jump at s, if any, is included)."""
    if s < 0 or s > cpath.horizon + 1e-12:
        raise ValueError("s outside the simulated horizon")
    idx = int(np.searchsorted(cpath.times, s, side="right"))
    if idx == 0:
        return params.expm(s) @ cpath.y0
    return params.expm(s - cpath.times[idx - 1]) @ cpath.states[idx - 1]


def increments(series, p, h=1.0):
    """Lag-(p/h) first differences of an equally spaced series."""
    series = np.asarray(series, dtype=float)
    lag_f = p / h
    lag = int(round(lag_f))
    if abs(lag_f - lag) > 1e-9 or lag < 1:
        raise ValueError("p must be a positive integer multiple of h")
    return series[lag:] - series[:-lag]


# ---------------------------------------------------------------------------
# affine transition pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransitionPair:
    """Affine map of the state over (s, t]: Y_t = matrix @ Y_s + offset."""

    matrix: np.ndarray
    offset: np.ndarray
    s: float
    t: float

    def compose(self, earlier):
        """Pair over (earlier.s, self.t] from adjoining pairs."""
        if abs(earlier.t - self.s) > 1e-9:
            raise ValueError("pairs do not adjoin")
        return TransitionPair(self.matrix @ earlier.matrix,
                              self.offset + self.matrix @ earlier.offset,
                              earlier.s, self.t)


def _pair_step(params, jmat, kvec, flow, z):
    # multiply by (I + z^2 e a') flow and append R = alpha0 z^2 e
    z2 = z * z
    jm = flow @ jmat
    kv = flow @ kvec
    jm += np.outer(params.last_basis, z2 * (params.weights @ jm))
    kv += params.last_basis * (z2 * (params.weights @ kv) + params.alpha0 * z2)
    return jm, kv


def transition_pair(params, path, s, t):
    """Build the affine pair over (s, t] from the driver jumps inside it.

    ``path`` must contain every arrival of (s, t]; arrivals outside the
    window are ignored, but passing a window outside the path's horizon
    is an integrity error.
    """
    if t < s:
        raise ValueError("need s <= t")
    if s < 0 or t > path.horizon + 1e-12:
        raise IntegrityError("window (s, t] not covered by the driver path")
    if path.jumps is None:
        raise ValueError("driver path has no jump sizes")
    lo = int(np.searchsorted(path.arrivals, s, side="right"))
    hi = int(np.searchsorted(path.arrivals, t, side="right"))
    jmat = np.eye(params.q)
    kvec = np.zeros(params.q)
    prev = s
    for i in range(lo, hi):
        flow = params.expm(path.arrivals[i] - prev)
        jmat, kvec = _pair_step(params, jmat, kvec, flow, path.jumps[i])
        prev = path.arrivals[i]
    tail = params.expm(t - prev)
    return TransitionPair(tail @ jmat, tail @ kvec, s, t)


def transition_prefixes(params, path, s_values):
    """Pairs over (0, s] for an ascending list of s, in one sweep."""
    s_values = np.asarray(s_values, dtype=float)
    if np.any(np.diff(s_values) < 0) or (s_values.size and s_values[0] < 0):
        raise ValueError("s_values must be ascending and non-negative")
    if s_values.size and s_values[-1] > path.horizon + 1e-12:
        raise IntegrityError("prefix end beyond the driver path horizon")
    out = []
    jmat = np.eye(params.q)
    kvec = np.zeros(params.q)
    prev = 0.0
    i = 0
    n = path.n_jumps
    for s in s_values:
        while i < n and path.arrivals[i] <= s:
            flow = params.expm(path.arrivals[i] - prev)
            jmat, kvec = _pair_step(params, jmat, kvec, flow, path.jumps[i])
            prev = path.arrivals[i]
            i += 1
        tail = params.expm(s - prev)
        out.append(TransitionPair(tail @ jmat, tail @ kvec, 0.0, float(s)))
    return out
