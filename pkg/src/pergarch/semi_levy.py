"""Seasonal compound-Poisson driver with periodic intensity.

The driver is a pure-jump process S_t = D_t + sum_{n<=N(t)} Z_n where

* N is an inhomogeneous Poisson process whose intensity lambda(.) is
  periodic with period tau,
* each period is partitioned into l "seasons" [t_{j-1}, t_j) and the
  jump arriving at absolute time u is drawn from the law of the season
  containing u mod tau,
* D is a deterministic periodic drift with D_0 = 0.

Increments of S over intervals shifted by tau are equal in
distribution, which is what downstream modules exploit.

Arrival times are sampled by inversion of the cumulated intensity
Lambda(t) = int_0^t lambda(u) du, never by thinning:
Upsilon_n = Lambda^{-1}(Lambda(Upsilon_{n-1}) - log(1 - U_n)).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "NormalLaw",
    "PointMassLaw",
    "UniformLaw",
    "CosineIntensity",
    "PiecewiseConstantIntensity",
    "SeasonPartition",
    "DriftFunction",
    "SemiLevyModel",
    "SemiLevyPath",
    "cumulative_intensity",
    "inverse_cumulative_intensity",
    "generate_arrivals",
    "sample_jumps",
    "sample_paths",
    "path_value",
    "characteristic_function",
    "increment_characteristic_function",
    "local_levy_measure",
    "season_segments",
]


# ---------------------------------------------------------------------------
# jump-size laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalLaw:
    """Gaussian jump sizes N(mu, sigma2)."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")

    @property
    def mean(self):
        return self.mu

    @property
    def second_moment(self):
        return self.mu * self.mu + self.sigma2

    def cf(self, w):
        """Characteristic function E exp(i w Z)."""
        w = np.asarray(w, dtype=complex)
        return np.exp(1j * w * self.mu - 0.5 * self.sigma2 * w * w)

    def sample(self, rng, size):
        return rng.normal(self.mu, math.sqrt(self.sigma2), size)

    def expected_log1p_quadratic(self, c):
        """E log(1 + c Z^2) by adaptive quadrature (tails cut at 12 sigma)."""
        if c == 0.0:
            return 0.0
        s = math.sqrt(self.sigma2)
        norm = 1.0 / math.sqrt(2.0 * math.pi * self.sigma2)

        def f(z):
            return math.log1p(c * z * z) * norm * math.exp(-(z - self.mu) ** 2 / (2.0 * self.sigma2))

        val, _ = integrate.quad(f, self.mu - 12 * s, self.mu + 12 * s,
                                epsabs=1e-11, epsrel=1e-11, limit=200)
        return val

    def centered(self):
        return NormalLaw(0.0, self.sigma2)


@dataclass(frozen=True)
class PointMassLaw:
    """Degenerate law: every jump equals ``value``."""

    value: float

    @property
    def mean(self):
        return self.value

    @property
    def second_moment(self):
        return self.value * self.value

    def cf(self, w):
        w = np.asarray(w, dtype=complex)
        return np.exp(1j * w * self.value)

    def sample(self, rng, size):
        return np.full(size, self.value)

    def expected_log1p_quadratic(self, c):
        return math.log1p(c * self.value * self.value)

    def centered(self):
        return PointMassLaw(0.0)


@dataclass(frozen=True)
class UniformLaw:
    """Uniform jump sizes on [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("need hi > lo")

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def second_moment(self):
        return (self.lo ** 2 + self.lo * self.hi + self.hi ** 2) / 3.0

    def cf(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.empty(w.shape, dtype=complex)
        small = np.abs(w) < 1e-12
        wn = np.where(small, 1.0, w)
        out = (np.exp(1j * wn * self.hi) - np.exp(1j * wn * self.lo)) / (1j * wn * (self.hi - self.lo))
        return np.where(small, 1.0 + 0.5j * np.asarray(w) * (self.lo + self.hi), out)

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def expected_log1p_quadratic(self, c):
        if c == 0.0:
            return 0.0
        val, _ = integrate.quad(lambda z: math.log1p(c * z * z), self.lo, self.hi,
                                epsabs=1e-11, epsrel=1e-11, limit=200)
        return val / (self.hi - self.lo)

    def centered(self):
        half = 0.5 * (self.hi - self.lo)
        return UniformLaw(-half, half)


# ---------------------------------------------------------------------------
# periodic intensities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CosineIntensity:
    """lambda(t) = a - b cos(2 pi t / tau), requires a >= |b| >= 0."""

    a: float
    b: float
    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.a < abs(self.b):
            raise ValueError("cosine intensity needs a >= |b| for non-negativity")

    @property
    def period_mass(self):
        """Lambda(tau); the cosine term integrates to zero over a period."""
        return self.a * self.tau

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        return self.a - self.b * np.cos(2.0 * np.pi * t / self.tau)

    def cumulative_in_period(self, t):
        """Lambda(t) for t in [0, tau], in closed form."""
        t = np.asarray(t, dtype=float)
        return self.a * t - self.b * self.tau / (2.0 * np.pi) * np.sin(2.0 * np.pi * t / self.tau)

    def inverse_in_period(self, x):
        """Solve Lambda(t) = x for t in [0, tau]; x array-friendly.

        Newton from the mean-rate guess, clipped to the period; the
        derivative lambda is zero at most at isolated points (a == |b|),
        where a bracketed solve takes over.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = np.clip(x / self.a, 0.0, self.tau)
        tol = 1e-12 * np.maximum(1.0, x)
        for _ in range(100):
            resid = self.cumulative_in_period(t) - x
            if np.all(np.abs(resid) <= tol):
                break
            rate = np.maximum(self.rate(t), 1e-14)
            t = np.clip(t - resid / rate, 0.0, self.tau)
        else:
            bad = np.abs(self.cumulative_in_period(t) - x) > tol
            for i in np.nonzero(bad)[0]:
                t[i] = optimize.brentq(
                    lambda u, xi=x[i]: float(self.cumulative_in_period(u) - xi),
                    0.0, self.tau, xtol=1e-13)
        return t


@dataclass(frozen=True)
class PiecewiseConstantIntensity:
    """Piecewise-constant rate table over one period.

    ``breaks`` are the cell edges 0 = b_0 < ... < b_k = tau and
    ``values`` the k non-negative rates.  When the rate vanishes on a
    cell, the inverse maps plateau values to the left endpoint of the
    flat region.
    """

    breaks: tuple
    values: tuple

    def __post_init__(self):
        br = np.asarray(self.breaks, dtype=float)
        va = np.asarray(self.values, dtype=float)
        if br.ndim != 1 or len(br) != len(va) + 1:
            raise ValueError("need len(breaks) == len(values) + 1")
        if br[0] != 0.0 or np.any(np.diff(br) <= 0):
            raise ValueError("breaks must start at 0 and increase")
        if np.any(va < 0):
            raise ValueError("rates must be >= 0")
        object.__setattr__(self, "breaks", tuple(br))
        object.__setattr__(self, "values", tuple(va))

    @property
    def tau(self):
        return self.breaks[-1]

    @property
    def period_mass(self):
        br = np.asarray(self.breaks)
        return float(np.dot(np.diff(br), np.asarray(self.values)))

    def _cum_table(self):
        br = np.asarray(self.breaks)
        return np.concatenate([[0.0], np.cumsum(np.diff(br) * np.asarray(self.values))])

    def rate(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]

    def cumulative_in_period(self, t):
        t = np.asarray(t, dtype=float)
        cum = self._cum_table()
        idx = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.values) - 1)
        br = np.asarray(self.breaks)
        va = np.asarray(self.values)
        return cum[idx] + va[idx] * (t - br[idx])

    def inverse_in_period(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        cum = self._cum_table()
        # side='left' sends plateau values to the left edge of the flat cell
        idx = np.clip(np.searchsorted(cum, x, side="left") - 1, 0, len(self.values) - 1)
        br = np.asarray(self.breaks)
        va = np.asarray(self.values)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(va[idx] > 0, (x - cum[idx]) / va[idx], 0.0)
        return np.minimum(br[idx] + frac, self.tau)


# ---------------------------------------------------------------------------
# seasons, drift, model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeasonPartition:
    """Partition of one period into seasons, each with its jump law.

    Season j (0-based) is the half-open interval [t_j, t_{j+1}) of the
    reduced time u mod tau.
    """

    lengths: tuple
    laws: tuple

    def __post_init__(self):
        lengths = tuple(float(x) for x in self.lengths)
        if len(lengths) != len(self.laws):
            raise ValueError("need one jump law per season")
        if any(x <= 0 for x in lengths):
            raise ValueError("season lengths must be > 0")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "laws", tuple(self.laws))

    @property
    def tau(self):
        return float(sum(self.lengths))

    @property
    def boundaries(self):
        return np.concatenate([[0.0], np.cumsum(self.lengths)])

    @property
    def n_seasons(self):
        return len(self.lengths)

    def season_index(self, u):
        """0-based season of absolute time u (reduced mod tau)."""
        u = np.asarray(u, dtype=float)
        red = np.mod(u, self.tau)
        idx = np.searchsorted(self.boundaries, red, side="right") - 1
        return np.clip(idx, 0, self.n_seasons - 1)

    def centered(self):
        return SeasonPartition(self.lengths, tuple(law.centered() for law in self.laws))


@dataclass(frozen=True)
class DriftFunction:
    """Deterministic periodic drift D_t with D_0 = 0.

    ``form`` is "zero" or "sine"; the sine form is
    D_t = amplitude * sin(2 pi t / tau).
    """

    form: str = "zero"
    amplitude: float = 0.0
    tau: float = 1.0

    def __post_init__(self):
        if self.form not in ("zero", "sine"):
            raise ValueError("drift form must be 'zero' or 'sine'")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "zero":
            return np.zeros(t.shape)
        return self.amplitude * np.sin(2.0 * np.pi * t / self.tau)


@dataclass(frozen=True)
class SemiLevyModel:
    """Intensity + season partition + drift, with a common period."""

    intensity: object
    partition: SeasonPartition
    drift: DriftFunction = None

    def __post_init__(self):
        tau_i = self.intensity.tau
        tau_p = self.partition.tau
        if abs(tau_i - tau_p) > 1e-12 * max(1.0, abs(tau_i)):
            raise ValueError("intensity period and partition length disagree")
        if self.drift is None:
            object.__setattr__(self, "drift", DriftFunction("zero", 0.0, tau_i))
        elif abs(self.drift.tau - tau_i) > 1e-12 * max(1.0, abs(tau_i)):
            raise ValueError("drift period and intensity period disagree")

    @property
    def tau(self):
        return self.intensity.tau

    @property
    def period_mass(self):
        return self.intensity.period_mass

    def centered(self):
        """Same model with every season law replaced by its centered version."""
        return SemiLevyModel(self.intensity, self.partition.centered(), self.drift)


@dataclass(frozen=True)
class SemiLevyPath:
    """One realisation: strictly increasing arrivals in (0, horizon] with
    season marks and (optionally) jump sizes."""

    arrivals: np.ndarray
    marks: np.ndarray
    horizon: float
    jumps: np.ndarray = None

    def __post_init__(self):
        arr = np.asarray(self.arrivals, dtype=float)
        marks = np.asarray(self.marks, dtype=int)
        object.__setattr__(self, "arrivals", arr)
        object.__setattr__(self, "marks", marks)
        if arr.size:
            if np.any(np.diff(arr) <= 0):
                raise ValueError("arrivals must be strictly increasing")
            if arr[0] <= 0 or arr[-1] > self.horizon + 1e-12:
                raise ValueError("arrivals must lie in (0, horizon]")
        if self.jumps is not None:
            jumps = np.asarray(self.jumps, dtype=float)
            if jumps.shape != arr.shape:
                raise ValueError("jumps and arrivals must have equal length")
            object.__setattr__(self, "jumps", jumps)

    @property
    def n_jumps(self):
        return len(self.arrivals)


# ---------------------------------------------------------------------------
# cumulated intensity and its inverse
# ---------------------------------------------------------------------------

def cumulative_intensity(model, t):
    """Expected number of arrivals Lambda(t) on [0, t].

    Splits t into whole periods plus a remainder and uses the closed
    form of the within-period mass; array-friendly in t.
    """
    intensity = model.intensity if isinstance(model, SemiLevyModel) else model
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    tau = intensity.tau
    m = np.floor(t / tau)
    rem = t - m * tau
    over = rem >= tau  # guards float spill at exact period multiples
    m = np.where(over, m + 1, m)
    rem = np.where(over, 0.0, rem)
    out = m * intensity.period_mass + intensity.cumulative_in_period(rem)
    return out if out.ndim else float(out)


def inverse_cumulative_intensity(model, x):
    """Return t with Lambda(t) = x; array-friendly in x.

    Whole periods are peeled off first (x // Lambda(tau)) so the
    bracketed solve only ever runs on [0, tau].
    """
    intensity = model.intensity if isinstance(model, SemiLevyModel) else model
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    if np.any(x < 0):
        raise ValueError("x must be >= 0")
    mass = intensity.period_mass
    if mass <= 0:
        raise ValueError("intensity vanishes identically; no inverse exists")
    m = np.floor(x / mass)
    res = x - m * mass
    over = res >= mass
    m = np.where(over, m + 1, m)
    res = np.where(over, 0.0, res)
    out = np.atleast_1d(m) * intensity.tau + intensity.inverse_in_period(res)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _buffer_size(model, horizon):
    """Uniform draws reserved per path; Poisson tails past +10 sigma top up."""
    mean_count = float(cumulative_intensity(model, horizon))
    return int(mean_count + 10.0 * math.sqrt(mean_count + 1.0) + 20)


def generate_arrivals(model, horizon, rng):
    """Draw arrival times and season marks on (0, horizon].

    Uses Upsilon_n = Lambda^{-1}(Lambda(Upsilon_{n-1}) - log(1-U_n));
    the first point past the horizon is discarded.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if model.period_mass <= 0:
        return SemiLevyPath(np.empty(0), np.empty(0, dtype=int), horizon)
    buf = rng.random(_buffer_size(model, horizon))
    times = []
    x = 0.0
    k = 0
    while True:
        u = buf[k] if k < len(buf) else rng.random()
        k += 1
        x -= math.log1p(-u)
        t = float(inverse_cumulative_intensity(model, x))
        if t > horizon:
            break
        times.append(t)
    times = np.asarray(times)
    marks = model.partition.season_index(times) if times.size else np.empty(0, dtype=int)
    return SemiLevyPath(times, marks, horizon)


def sample_jumps(path, partition, rng):
    """Attach jump sizes to a marked path.

    Jumps of each path are drawn grouped by season, in season order;
    this fixed order is part of the reproducibility contract.
    """
    bad = (path.marks < 0) | (path.marks >= partition.n_seasons)
    if np.any(bad):
        raise ValueError("path carries season marks outside the partition")
    jumps = np.empty(path.n_jumps)
    for j, law in enumerate(partition.laws):
        sel = path.marks == j
        n = int(sel.sum())
        if n:
            jumps[sel] = law.sample(rng, n)
    return SemiLevyPath(path.arrivals, path.marks, path.horizon, jumps)


def sample_paths(model, horizon, count, rng):
    """Draw ``count`` independent paths with jumps.

    Replicate r consumes only the r-th child stream spawned from
    ``rng`` (arrival uniforms first, then jumps grouped by season), so
    a batch reproduces the single-path sampler replicate by replicate.
    The inversion rounds are vectorised across paths.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    return sample_paths_from_children(model, horizon, rng.spawn(count))


def sample_paths_from_children(model, horizon, children):
    """Like ``sample_paths`` but with the replicate streams supplied.

    Lets callers partition replicates across workers while keeping the
    stream assignment, and hence every number drawn, independent of the
    partitioning.
    """
    count = len(children)
    if model.period_mass <= 0:
        empty = SemiLevyPath(np.empty(0), np.empty(0, dtype=int), horizon, np.empty(0))
        return [empty] * count

    kbuf = _buffer_size(model, horizon)
    buf = np.empty((count, kbuf))
    for r, child in enumerate(children):
        buf[r] = child.random(kbuf)

    x = np.zeros(count)
    alive = np.ones(count, dtype=bool)
    rows_acc, times_acc = [], []
    k = 0
    while np.any(alive):
        idx = np.nonzero(alive)[0]
        if k < kbuf:
            u = buf[idx, k]
        else:  # exhausted buffers, top up path by path
            u = np.array([children[i].random() for i in idx])
        k += 1
        x[idx] -= np.log1p(-u)
        t = inverse_cumulative_intensity(model, x[idx])
        done = t > horizon
        alive[idx[done]] = False
        keep = ~done
        rows_acc.append(idx[keep])
        times_acc.append(np.asarray(t)[keep])

    rows = np.concatenate(rows_acc) if rows_acc else np.empty(0, dtype=int)
    times = np.concatenate(times_acc) if times_acc else np.empty(0)
    order = np.argsort(rows, kind="stable")  # within a path, rounds are in time order
    rows, times = rows[order], times[order]
    starts = np.searchsorted(rows, np.arange(count + 1))
    marks_all = model.partition.season_index(times) if times.size else np.empty(0, dtype=int)

    out = []
    for r in range(count):
        sl = slice(starts[r], starts[r + 1])
        p = SemiLevyPath(times[sl], marks_all[sl], horizon)
        out.append(sample_jumps(p, model.partition, children[r]))
    return out


def path_value(path, drift, t):
    """S_t = D_t + sum of jumps with arrival <= t."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > path.horizon + 1e-12):
        raise ValueError("t must lie in [0, horizon]")
    if path.jumps is None:
        raise ValueError("path has no jump sizes; call sample_jumps first")
    csum = np.concatenate([[0.0], np.cumsum(path.jumps)])
    idx = np.searchsorted(path.arrivals, t_arr, side="right")
    out = drift.value(t_arr) + csum[idx]
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# analytic characteristics
# ---------------------------------------------------------------------------

def season_segments(model, s, t):
    """Decompose (s, t] into maximal within-season pieces.

    Returns a list of (u0, u1, season_index) with s <= u0 < u1 <= t and
    each (u0, u1) inside a single season.
    """
    if t < s:
        raise ValueError("need s <= t")
    tau = model.tau
    bounds = model.partition.boundaries
    out = []
    u = s
    while u < t - 1e-14:
        m, red = divmod(u, tau)
        if red >= tau:  # float spill
            m, red = m + 1, 0.0
        j = int(np.searchsorted(bounds, red, side="right") - 1)
        j = min(max(j, 0), model.partition.n_seasons - 1)
        seg_end = m * tau + bounds[j + 1]
        u1 = min(seg_end, t)
        out.append((u, u1, j))
        u = u1
    return out


def characteristic_function(model, t, w):
    """E exp(i w S_t) for the seasonal compound-Poisson driver.

    Product over the within-season pieces of [0, t] of the standard
    compound-Poisson factor exp(dLambda * (phi_j(w) - 1)), times the
    drift phase.  The modulus never exceeds one.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    return increment_characteristic_function(model, 0.0, t, w)


def increment_characteristic_function(model, s, t, w):
    """E exp(i w (S_t - S_s)) in closed form; array-friendly in w."""
    if s < 0 or t < s:
        raise ValueError("need 0 <= s <= t")
    w = np.asarray(w, dtype=float)
    expo = np.zeros(w.shape, dtype=complex)
    for u0, u1, j in season_segments(model, s, t):
        dl = cumulative_intensity(model, u1) - cumulative_intensity(model, u0)
        expo += dl * (model.partition.laws[j].cf(w) - 1.0)
    phase = 1j * w * (model.drift.value(t) - model.drift.value(s))
    out = np.exp(expo + phase)
    return out if out.ndim else complex(out)


def local_levy_measure(model, s):
    """Local jump characteristics at time s: (rate lambda(s), season law).

    The local measure is rate * law(dz); its total mass is lambda(s).
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    rate = float(model.intensity.rate(s))
    j = int(model.partition.season_index(s))
    return rate, model.partition.laws[j]
