"""Squared-coherence detection of periodically correlated structure.

For a real series X_1..X_N with discrete Fourier transform
Xf(lambda_j), lambda_j = 2 pi j / N, the smoothed squared coherence of
a frequency pair over a window of M-1 bins is

    |g(r, s, M)|^2 =
        |sum_{m=1}^{M-1} Xf(l_{r-M/2+m}) conj(Xf(l_{s-M/2+m}))|^2
        -----------------------------------------------------------
        sum |Xf(l_{r-M/2+m})|^2  sum |Xf(l_{s-M/2+m})|^2

which lies in [0, 1] and equals 1 on the main diagonal.  A series that
is periodically correlated with period rho concentrates coherence on
the diagonals |r - s| = k N / rho.  Window indices wrap modulo N.

Under a complex-Gaussian null with independent window bins the
statistic has density (M-1)(1-x)^{M-2}, so values above

    x_alpha = 1 - exp(log(alpha) / (M-1))

are individually significant at level alpha.  With maximal smoothing
(M of order N/2) the entries along one diagonal are strongly
dependent: the whole diagonal rises and falls with one common factor,
so counting threshold exceedances cannot calibrate a detector.
``detect_period`` therefore scores each candidate spacing d by the
mean coherence along the diagonal relative to a wide local background,
combined multiplicatively with the same ratio at the first harmonic
2d, and compares against a Monte Carlo calibrated pure-noise bound.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CoherenceReport",
    "PeriodDetection",
    "dft",
    "alpha_threshold",
    "squared_coherence",
    "coherence_diagonal_means",
    "remove_periodic_mean",
    "detect_period",
    "sample_autocorrelation",
    "analyze_series",
]

# detection tuning; Monte Carlo calibrated on Gaussian noise at
# N=480, M=240 (null max comb score 5.2 over 100 seeds, signal >= 10)
COMB_SCORE_THRESHOLD = 7.0
TOOTH_RATIO_FLOOR = 3.0
BACKGROUND_HALF_WIDTH = 15
BACKGROUND_GAP = 2
FULL_MATRIX_LIMIT = 4096


def dft(series):
    """Discrete Fourier transform at the Fourier frequencies 2 pi j / N.

    The conventional 0-based transform sum_k X_k e^{-i l_j k} is used;
    a 1-based summation convention differs only by the phase factor
    e^{-i l_j}, which cancels in every coherence magnitude.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 1 or len(series) < 2:
        raise ValueError("need a one-dimensional series of length >= 2")
    return np.fft.fft(series)


def alpha_threshold(alpha, m_window):
    """Exceedance threshold x_alpha = 1 - exp(log(alpha)/(M-1))."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if m_window < 2:
        raise ValueError("M must be >= 2")
    return 1.0 - np.exp(np.log(alpha) / (m_window - 1))


def _window_sums(values, m_window, n):
    """Circular sums of M-1 consecutive entries starting at r - M/2 + 1."""
    ext = np.concatenate([values, values[: m_window]])
    csum = np.concatenate([np.zeros(1, dtype=ext.dtype), np.cumsum(ext)])
    starts = (np.arange(n) - m_window // 2 + 1) % n
    return csum[starts + m_window - 1] - csum[starts]


def _check_window(n, m_window):
    if m_window % 2 or not 2 <= m_window <= n:
        raise ValueError("M must be even with 2 <= M <= N")


def _denominators(spectrum, m_window):
    n = len(spectrum)
    power = np.abs(spectrum) ** 2
    return _window_sums(power, m_window, n)


def _diagonal_values(spectrum, m_window, d, denom):
    """Squared coherence along the circular diagonal s = r + d."""
    n = len(spectrum)
    cross = spectrum * np.conj(np.roll(spectrum, -d))
    num = np.abs(_window_sums(cross, m_window, n)) ** 2
    r = np.arange(n)
    den = denom[r] * denom[(r + d) % n]
    vals = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    # only round-off can spill outside [0, 1]
    return np.minimum(np.maximum(vals, 0.0), 1.0)


def squared_coherence(series, m_window):
    """Full N x N squared-coherence matrix over (r, s) frequency pairs.

    Symmetric, ones on the main diagonal wherever the windows carry
    energy; zero where a window has no energy at all.  Guarded to
    moderate N (quadratic storage); use the diagonal helpers beyond.
    """
    series = np.asarray(series, dtype=float)
    n = len(series)
    _check_window(n, m_window)
    if n > FULL_MATRIX_LIMIT:
        raise ValueError("series too long for the full map; "
                         "use coherence_diagonal_means / detect_period")
    spectrum = dft(series)
    denom = _denominators(spectrum, m_window)
    out = np.empty((n, n))
    r = np.arange(n)
    for d in range(n):
        out[r, (r + d) % n] = _diagonal_values(spectrum, m_window, d, denom)
    return out


def coherence_diagonal_means(series, m_window, d_max=None):
    """Mean squared coherence along each circular diagonal d = 0..d_max."""
    series = np.asarray(series, dtype=float)
    n = len(series)
    _check_window(n, m_window)
    if d_max is None:
        d_max = n // 2
    spectrum = dft(series)
    denom = _denominators(spectrum, m_window)
    means = np.empty(d_max + 1)
    for d in range(d_max + 1):
        means[d] = float(np.mean(_diagonal_values(spectrum, m_window, d, denom)))
    return means


def remove_periodic_mean(series, period):
    """Subtract the mean of each residue class k mod period."""
    series = np.asarray(series, dtype=float)
    if period < 1:
        raise ValueError("period must be >= 1")
    if period > len(series):
        raise ValueError("period exceeds the series length")
    out = series.copy()
    for k in range(period):
        out[k::period] -= out[k::period].mean()
    return out


def sample_autocorrelation(series, max_lag):
    """Biased sample ACF, lag 0 normalised to one."""
    series = np.asarray(series, dtype=float)
    n = len(series)
    if not 0 <= max_lag < n:
        raise ValueError("need 0 <= max_lag < len(series)")
    x = series - series.mean()
    denom = float(np.dot(x, x))
    if denom == 0:
        raise ValueError("series has zero variance")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = float(np.dot(x[k:], x[:-k])) / denom
    return out


@dataclass(frozen=True)
class PeriodDetection:
    period: int                 # None when nothing detected
    d_star: int
    comb_score: float
    score_threshold: float
    diagonal_ratios: np.ndarray  # line-to-background ratio per spacing
    diagonal_means: np.ndarray


def _background_ratios(means):
    """Each diagonal mean over the median of a wide punctured window."""
    h = len(means) - 1
    ratios = np.zeros(h + 1)
    for d in range(1, h + 1):
        lo = range(d - BACKGROUND_HALF_WIDTH, d - BACKGROUND_GAP + 1)
        hi = range(d + BACKGROUND_GAP, d + BACKGROUND_HALF_WIDTH + 1)
        nbhd = [e for e in list(lo) + list(hi) if 1 <= e <= h]
        background = float(np.median(means[nbhd]))
        ratios[d] = means[d] / background if background > 0 else 0.0
    return ratios


def detect_period(series, m_window, alpha=0.05,
                  score_threshold=COMB_SCORE_THRESHOLD,
                  tooth_floor=TOOTH_RATIO_FLOOR):
    """Detect a periodic-correlation comb in the coherence diagonals.

    A spacing d is scored by sqrt(ratio(d) * ratio(2d)) where ratio is
    the diagonal mean coherence over its wide local background; the
    harmonic factor is what separates a genuine comb from both random
    single-diagonal excursions and the smooth low-frequency bulk that
    volatility clustering produces.  Detection requires the best score
    to clear ``score_threshold`` with both teeth above ``tooth_floor``;
    among near-equivalent divisors the smaller spacing (longer period)
    wins.  Spacings above N/4 have no in-range harmonic and are out of
    scope.  Returns a PeriodDetection with period=None when nothing
    qualifies.
    """
    means = coherence_diagonal_means(series, m_window)
    return _detect_from_means(means, len(np.asarray(series)),
                              score_threshold, tooth_floor)


def _detect_from_means(means, n, score_threshold, tooth_floor):
    n_half = len(means) - 1
    ratios = _background_ratios(means)

    best_d, best_score = 0, 0.0
    for d in range(2, n_half // 2 + 1):
        score = float(np.sqrt(max(ratios[d], 0.0) * max(ratios[2 * d], 0.0)))
        if min(ratios[d], ratios[2 * d]) < tooth_floor:
            score = 0.0
        if score > best_score + 1e-12:
            best_d, best_score = d, score

    period = None
    if best_d and best_score >= score_threshold:
        # prefer the fundamental: a qualifying divisor spacing wins
        for div in range(2, best_d):
            if best_d % div == 0 and 2 * div <= n_half:
                s = float(np.sqrt(max(ratios[div], 0.0) * max(ratios[2 * div], 0.0)))
                if s >= score_threshold and min(ratios[div], ratios[2 * div]) >= tooth_floor:
                    best_d, best_score = div, s
                    break
        period = int(round(n / best_d))
    return PeriodDetection(period, int(best_d), float(best_score),
                           float(score_threshold), ratios, means)


@dataclass(frozen=True)
class CoherenceReport:
    """Everything the PC test produces for one series."""

    n: int
    m_window: int
    alpha: float
    threshold: float
    exceedances: np.ndarray          # rows (r, s, value), r < s, value > threshold
    diagonal_exceedance_counts: np.ndarray
    detection: PeriodDetection
    removed_period: int = None

    @property
    def periodic(self):
        return self.detection.period is not None


def analyze_series(series, m_window, alpha=0.05, remove_period=None,
                   full_map=False):
    """Run the complete PC test on a series.

    Optionally removes a periodic mean first; computes the threshold,
    per-diagonal exceedance counts, the detection verdict, and (for
    series up to the full-matrix limit, or when ``full_map``) the
    exceedance list ready for plotting.
    """
    series = np.asarray(series, dtype=float)
    n = len(series)
    _check_window(n, m_window)
    if remove_period is not None:
        series = remove_periodic_mean(series, remove_period)
    threshold = alpha_threshold(alpha, m_window)
    spectrum = dft(series)
    denom = _denominators(spectrum, m_window)

    counts = np.zeros(n // 2 + 1, dtype=int)
    means = np.empty(n // 2 + 1)
    rows = []
    r = np.arange(n)
    for d in range(n // 2 + 1):
        vals = _diagonal_values(spectrum, m_window, d, denom)
        means[d] = float(vals.mean())
        if d:
            counts[d] = int(np.sum(vals > threshold))
        if d and (full_map or n <= FULL_MATRIX_LIMIT):
            hot = vals > threshold
            if np.any(hot):
                rr = r[hot]
                ss = (rr + d) % n
                rows.append(np.column_stack([np.minimum(rr, ss), np.maximum(rr, ss),
                                             vals[hot]]))
    exceed = np.concatenate(rows) if rows else np.empty((0, 3))
    if len(exceed):
        exceed = np.unique(exceed, axis=0)
    detection = _detect_from_means(means, n, COMB_SCORE_THRESHOLD, TOOTH_RATIO_FLOOR)
    return CoherenceReport(n, m_window, float(alpha), float(threshold),
                           exceed, counts, detection, remove_period)
