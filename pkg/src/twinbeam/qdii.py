"""Quasi-distributions of integrated intensities (QDII) and non-classicality
diagnostics.

The paired-field density has two regimes separated by a threshold ordering
``s_th``: below it a smooth non-negative modified-Bessel form, above it an
oscillatory sinc-kernel form whose negative strips parallel to the diagonal
are the signature of pairwise emission.  The sinc form is a closed-form
interference expression, not an exact Fourier inversion; as printed it is
not normalized, so by default it is rescaled by its numerically computed
total mass (``normalized=False`` gives the raw expression).  The full-field
QDII is the convolution of the paired density with one multi-thermal noise
density per arm, evaluated by direct quadrature over the noise variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sp

from .errors import DomainError, GridResolutionError, NumericsError, ValidationError
from .model import FieldMoments, QdiiGrid, TwinBeamParams
from .specfun import sinc

__all__ = [
    "OrderingContext",
    "ThresholdDiagnostics",
    "NonclassicalityVerdict",
    "characteristic_function",
    "ordering_threshold",
    "nonclassicality",
    "paired_qdii",
    "thermal_qdii",
    "joint_qdii_grid",
]

NOISE_TAIL_MASS = 1e-9
NORMALIZATION_TOL = 0.05


def _check_ordering(s: float) -> None:
    if not (-1.0 < s <= 1.0):
        raise DomainError(f"ordering parameter must lie in (-1, 1], got {s}")


@dataclass(frozen=True)
class OrderingContext:
    """Derived quantities of the paired field at ordering ``s``.

    ``k_p_s`` changes sign exactly at ``s_th_paired``: positive below
    (Bessel regime), negative above (sinc regime).
    """

    s: float
    b_p_s: float
    d_p: float
    k_p_s: float
    s_th_paired: float

    def __post_init__(self):
        _check_ordering(self.s)
        if not self.b_p_s > 0:
            raise ValidationError(
                "OrderingContext: b_p_s must be positive (vacuum at normal "
                "ordering has a singular density)")

    @classmethod
    def for_params(cls, b_pairs: float, s: float) -> "OrderingContext":
        _check_ordering(s)
        if b_pairs < 0:
            raise DomainError(f"b_pairs must be >= 0, got {b_pairs}")
        b = b_pairs + (1.0 - s) / 2.0
        d = math.sqrt(b_pairs * (b_pairs + 1.0))
        k = -s * b_pairs + (1.0 - s) ** 2 / 4.0
        s_th = 1.0 + 2.0 * (b_pairs - d)
        return cls(s, b, d, k, s_th)


@dataclass(frozen=True)
class ThresholdDiagnostics:
    """Threshold ordering of the full three-component field.

    ``s_th`` is NaN when the radicand is negative (no ordering makes the
    signal-idler difference noiseless); the radicand is reported either way.
    """

    s_th: float
    beta: float
    gamma: float
    radicand: float

    @property
    def is_real(self) -> bool:
        return self.radicand >= 0


@dataclass(frozen=True)
class NonclassicalityVerdict:
    """Moment criterion: paired correlation vs summed noise variances."""

    margin: float
    nonclassical: bool
    paired_correlation: float
    noise_variance: float


def characteristic_function(params: TwinBeamParams, s_s: float, s_i: float) -> complex:
    """Normal-ordering characteristic function of the three-component field."""
    base_s = 1.0 - 1j * s_s * params.b_noise_s
    base_i = 1.0 - 1j * s_i * params.b_noise_i
    bp = params.b_pairs
    base_p = 1.0 - 1j * s_s * bp - 1j * s_i * bp + s_s * s_i * bp
    out = 1.0 + 0.0j
    for base, modes, label in ((base_s, params.m_noise_s, "signal noise"),
                               (base_i, params.m_noise_i, "idler noise"),
                               (base_p, params.m_pairs, "paired")):
        if modes == 0:
            continue
        if abs(base) < 1e-12:
            raise DomainError(
                f"characteristic_function: {label} factor has a pole at "
                f"(s_s={s_s}, s_i={s_i})")
        out *= base ** (-modes)
    return out


def ordering_threshold(params: TwinBeamParams) -> ThresholdDiagnostics:
    """Threshold ordering s_th below which the QDII becomes non-negative.

    Solves for the ordering at which the variance of the signal-idler
    intensity difference vanishes: sigma^2 + 2*beta*sigma + gamma = 0 with
    sigma = (1-s)/2, hence s_th = 1 + 2*(beta - sqrt(beta^2 - gamma)).
    """
    total = params.m_noise_s + params.m_noise_i + 2.0 * params.m_pairs
    if total <= 0:
        raise DomainError("ordering_threshold: all mode counts are zero")
    mbs = params.m_noise_s * params.b_noise_s
    mbi = params.m_noise_i * params.b_noise_i
    mbp = params.m_pairs * params.b_pairs
    beta = (mbs + mbi + 2.0 * mbp) / total
    gamma = (mbs * params.b_noise_s + mbi * params.b_noise_i - 2.0 * mbp) / total
    radicand = beta * beta - gamma
    s_th = 1.0 + 2.0 * (beta - math.sqrt(radicand)) if radicand >= 0 else math.nan
    return ThresholdDiagnostics(s_th, beta, gamma, radicand)


def nonclassicality(fm: FieldMoments) -> NonclassicalityVerdict:
    """Moment criterion of non-classicality.

    The field is non-classical iff twice the mean pair intensity exceeds the
    summed noise variances, which is equivalent to the full-field threshold
    ordering lying below 1.
    """
    paired = 2.0 * fm.mean_p
    noise = fm.var_s + fm.var_i
    margin = float(paired - noise)
    return NonclassicalityVerdict(margin, margin > 0, float(paired), float(noise))


# ---------------------------------------------------------------------------
# paired-field density
# ---------------------------------------------------------------------------

def _log_ive_array(order: float, x: np.ndarray) -> np.ndarray:
    """log I_order(x) for x >= 0, with a series fallback where the scaled
    library routine underflows (large order, small argument)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    pos = x > 0
    scaled = np.zeros_like(x)
    scaled[pos] = sp.ive(order, x[pos])
    ok = pos & (scaled > 1e-290)
    out[ok] = np.log(scaled[ok]) + x[ok]
    hard = pos & ~ok
    if hard.any():
        from .specfun import log_bessel_i
        out[hard] = [log_bessel_i(order, float(v)).log_magnitude for v in x[hard]]
    if (~pos).any():
        out[~pos] = 0.0 if order == 0 else -math.inf
    return out


def _bessel_branch(ctx: OrderingContext, m: float,
                   ws: np.ndarray, wi: np.ndarray) -> np.ndarray:
    k, b, d = ctx.k_p_s, ctx.b_p_s, ctx.d_p
    log_prod = np.log(np.maximum(ws, 1e-300)) + np.log(np.maximum(wi, 1e-300))
    if d == 0.0:
        # uncorrelated limit b_pairs -> 0: product of two gamma densities
        ln = ((m - 1.0) * log_prod - 2.0 * sp.gammaln(m)
              - 2.0 * m * math.log(b) - (ws + wi) / b)
        return np.exp(ln)
    arg = 2.0 * d * np.exp(log_prod / 2.0) / k
    ln = ((m - 1.0) / 2.0 * log_prod - sp.gammaln(m) - math.log(k)
          - (m - 1.0) * math.log(d) - b * (ws + wi) / k + _log_ive_array(m - 1.0, arg))
    return np.exp(ln)


def _sinc_branch_raw(ctx: OrderingContext, m: float,
                     ws: np.ndarray, wi: np.ndarray) -> np.ndarray:
    kt = -ctx.k_p_s
    b = ctx.b_p_s
    a = math.sqrt(kt)
    log_prod = np.log(np.maximum(ws, 1e-300)) + np.log(np.maximum(wi, 1e-300))
    ln = ((m - 1.0) / 2.0 * log_prod - sp.gammaln(m) - m * math.log(b)
          - (ws + wi) / (2.0 * b))
    return np.exp(ln) * a * sinc((ws - wi) / a) / math.pi


def _sinc_kernel_moments(c: np.ndarray, m: float) -> np.ndarray:
    """g(c) = integral_{-1}^{1} (1 - x^2)^{(m-1)/2} sinc(c x) dx.

    Evaluated through x = sin(phi) so the endpoint weight stays smooth for
    m < 1; composite Gauss-Legendre panels resolve the oscillation and the
    node matrix is chunked to bound memory for very large c.
    """
    cmax = float(np.max(np.abs(c))) if c.size else 1.0
    panels = max(8, int(math.ceil(cmax / 3.0)))
    edges = np.linspace(0.0, math.pi / 2.0, panels + 1)
    xg, wg = np.polynomial.legendre.leggauss(8)
    mid = (edges[:-1] + edges[1:]) / 2.0
    half = (edges[1:] - edges[:-1]) / 2.0
    phi = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wq = (half[:, None] * wg[None, :]).ravel()
    weight = wq * np.cos(phi) ** m
    snode = np.sin(phi)
    out = np.empty(c.size)
    chunk = max(1, int(4_000_000 / max(snode.size, 1)))
    flat = np.asarray(c, dtype=float).ravel()
    for i in range(0, flat.size, chunk):
        sl = slice(i, min(i + chunk, flat.size))
        out[sl] = 2.0 * (sinc(np.outer(flat[sl], snode)) @ weight)
    return out.reshape(np.shape(c))


@lru_cache(maxsize=128)
def _sinc_normalization(m: float, b: float, kt: float) -> float:
    """Total mass of the raw sinc-branch expression.

    In rotated coordinates u = (Ws+Wi)/2, v = Ws-Wi the double integral
    factors into a radial u-integral against the sinc kernel moments.
    """
    a = math.sqrt(kt)
    shape = m + 1.0  # radial integrand carries u^m
    u_lo = max(0.0, b * float(sp.gammaincinv(shape, 1e-14)) - 5.0 * a)
    u_hi = b * float(sp.gammainccinv(shape, 1e-14)) + 5.0 * a
    n_u = 3000
    u = np.linspace(max(u_lo, u_hi / n_u**2), u_hi, n_u)
    g = _sinc_kernel_moments(2.0 * u / a, m)
    ln = m * np.log(u) - u / b - sp.gammaln(m) - m * math.log(b)
    rho = 2.0 * a * g * np.exp(ln) / math.pi
    total = float(np.trapezoid(rho, u))
    if not (total > 0 and math.isfinite(total)):
        raise NumericsError(
            f"sinc-branch normalization failed for m={m}, b={b}, kt={kt}")
    return total


def _paired_values(ctx: OrderingContext, m_pairs: float,
                   ws: np.ndarray, wi: np.ndarray,
                   normalized: bool = True) -> np.ndarray:
    """Paired density on arrays; entries with a negative coordinate are 0."""
    ws = np.asarray(ws, dtype=float)
    wi = np.asarray(wi, dtype=float)
    shape = np.broadcast_shapes(ws.shape, wi.shape)
    ws = np.broadcast_to(ws, shape)
    wi = np.broadcast_to(wi, shape)
    out = np.zeros(shape)
    inside = (ws > 0) & (wi > 0)
    edge = ((ws == 0) | (wi == 0)) & (ws >= 0) & (wi >= 0)
    if edge.any():
        if m_pairs > 1.0:
            pass  # density vanishes on the axes
        elif m_pairs == 1.0:
            inside = inside | edge
        else:
            raise DomainError(
                "paired density diverges on the axes for m_pairs < 1; "
                "use strictly positive grid points")
    if inside.any():
        x = np.where(inside, np.maximum(ws, 1e-300), 1.0)
        y = np.where(inside, np.maximum(wi, 1e-300), 1.0)
        if ctx.k_p_s > 0:
            vals = _bessel_branch(ctx, m_pairs, x, y)
        else:
            vals = _sinc_branch_raw(ctx, m_pairs, x, y)
            if normalized:
                vals = vals / _sinc_normalization(m_pairs, ctx.b_p_s, -ctx.k_p_s)
        out[inside] = vals[inside]
    return out


def paired_qdii(ctx: OrderingContext, m_pairs: float,
                w_s: float, w_i: float, *, normalized: bool = True) -> float:
    """Paired-field quasi-distribution value at one intensity point.

    Dispatches on the sign of ``ctx.k_p_s``: the non-negative Bessel form
    below the threshold ordering, the signed sinc form above it.  The branch
    boundary itself is excluded (both closed forms are singular there).
    With ``normalized=True`` (default) the sinc branch is divided by its
    numerically computed total mass; the raw printed expression is available
    with ``normalized=False``.
    """
    if m_pairs <= 0:
        raise DomainError(f"paired_qdii: m_pairs must be > 0, got {m_pairs}")
    if w_s < 0 or w_i < 0:
        raise DomainError("paired_qdii: intensities must be >= 0")
    if ctx.k_p_s == 0.0:
        raise DomainError(
            "paired_qdii: evaluation at the branch boundary s = s_th is "
            "singular; use a one-sided offset")
    value = float(_paired_values(ctx, m_pairs, np.asarray(w_s, dtype=float),
                                 np.asarray(w_i, dtype=float), normalized))
    if math.isinf(value):
        raise NumericsError(
            f"paired_qdii overflow at (w_s={w_s}, w_i={w_i})")
    return value


def thermal_qdii(m_modes: float, b_mean: float, s: float, w: float) -> float:
    """Multi-thermal noise density at ordering ``s`` (a gamma density with
    shape ``m_modes`` and scale ``b_mean + (1-s)/2``)."""
    if m_modes <= 0:
        raise DomainError(f"thermal_qdii: m_modes must be > 0, got {m_modes}")
    if w < 0:
        raise DomainError(f"thermal_qdii: intensity must be >= 0, got {w}")
    b_s = b_mean + (1.0 - s) / 2.0
    if b_s <= 0:
        raise DomainError(f"thermal_qdii: effective scale {b_s} must be > 0")
    if w == 0.0:
        if m_modes > 1:
            return 0.0
        if m_modes == 1:
            return 1.0 / b_s
        raise DomainError("thermal_qdii: density diverges at w = 0 for m_modes < 1")
    ln = ((m_modes - 1.0) * math.log(w) - w / b_s
          - sp.gammaln(m_modes) - m_modes * math.log(b_s))
    return float(math.exp(ln))


# ---------------------------------------------------------------------------
# full-field grid
# ---------------------------------------------------------------------------

def _binned_thermal_kernel(m_modes: float, b_scaled: float, h: float,
                           n_bins: int) -> np.ndarray:
    """Gamma noise measure discretized onto a uniform lattice of pitch h.

    Bin k carries the exact mass of [(k-1/2)h, (k+1/2)h); bin 0 therefore
    absorbs everything the grid resolution cannot distinguish from zero
    shift, which includes the near-1 atom of nearly-zero-shape components.
    """
    edges = (np.arange(n_bins) + 0.5) * h
    cdf = sp.gammainc(m_modes, edges / b_scaled)
    kernel = np.empty(n_bins)
    kernel[0] = cdf[0]
    kernel[1:] = np.diff(cdf)
    return kernel


def _thermal_measure(m_modes: float, b_scaled: float, eps: float,
                     w_cap: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Discretize a gamma noise density as (atom at 0, nodes, weights).

    The mass below ``eps`` (the grid cannot resolve it anyway) becomes a
    point mass at zero; the rest is integrated on log-spaced Gauss-Legendre
    panels up to the smaller of the upper quantile and ``w_cap``.
    """
    if m_modes == 0:
        return 1.0, np.empty(0), np.empty(0)
    atom = float(sp.gammainc(m_modes, eps / b_scaled))
    hi = float(b_scaled * sp.gammainccinv(m_modes, NOISE_TAIL_MASS))
    hi = min(hi, w_cap)
    if hi <= eps:
        return atom, np.empty(0), np.empty(0)
    panels = 10
    edges = np.exp(np.linspace(math.log(eps), math.log(hi), panels + 1))
    xg, wg = np.polynomial.legendre.leggauss(8)
    lo = edges[:-1]
    up = edges[1:]
    ylo = np.log(lo)
    yup = np.log(up)
    y = ((ylo[:, None] + yup[:, None]) / 2.0
         + (yup[:, None] - ylo[:, None]) / 2.0 * xg[None, :]).ravel()
    wq = ((yup[:, None] - ylo[:, None]) / 2.0 * wg[None, :]).ravel()
    x = np.exp(y)
    ln = (m_modes * np.log(x) - x / b_scaled
          - sp.gammaln(m_modes) - m_modes * math.log(b_scaled))
    weights = wq * np.exp(ln)  # extra power of x is the log-substitution jacobian
    return atom, x, weights


def _thermal_values(m_modes: float, b_scaled: float, w: np.ndarray) -> np.ndarray:
    out = np.zeros(w.shape)
    pos = w > 0
    out[pos] = np.exp((m_modes - 1.0) * np.log(w[pos]) - w[pos] / b_scaled
                      - sp.gammaln(m_modes) - m_modes * math.log(b_scaled))
    if (w == 0).any():
        if m_modes == 1:
            out[w == 0] = 1.0 / b_scaled
        elif m_modes < 1:
            raise DomainError(
                "thermal density diverges at w = 0 for m_modes < 1; "
                "use strictly positive grid points")
    return out


def _noise_only_grid(params: TwinBeamParams, s: float,
                     ws: np.ndarray, wi: np.ndarray) -> QdiiGrid:
    """Pairs absent: the QDII factorizes into two thermal densities."""
    if params.m_noise_s == 0 or params.m_noise_i == 0:
        raise DomainError(
            "joint_qdii_grid: an arm with no field is a point mass, "
            "not representable as a density grid")
    sigma = (1.0 - s) / 2.0
    f_s = _thermal_values(params.m_noise_s, params.b_noise_s + sigma, ws)
    f_i = _thermal_values(params.m_noise_i, params.b_noise_i + sigma, wi)
    values = np.outer(f_s, f_i)
    grid = QdiiGrid(ws, wi, values, s,
                    normalization=float(np.trapezoid(
                        np.trapezoid(values, wi, axis=1), ws)))
    if abs(grid.normalization - 1.0) > NORMALIZATION_TOL:
        raise GridResolutionError(
            f"joint_qdii_grid: grid integral {grid.normalization:.4f} deviates "
            "from 1 by more than 5%; enlarge or refine the axes")
    return grid


def _is_uniform(axis: np.ndarray) -> bool:
    d = np.diff(axis)
    return bool(d.max() - d.min() <= 1e-9 * d.mean())


def _convolve_uniform(params: TwinBeamParams, ctx: OrderingContext,
                      ws: np.ndarray, wi: np.ndarray,
                      normalized: bool) -> np.ndarray:
    """Convolution with the noise measures binned onto the grid lattice.

    The paired density is sampled on a lattice extended down toward zero so
    that noise shifts can move mass into the requested window, then convolved
    with the exact per-bin noise masses and cropped.
    """
    from scipy.signal import fftconvolve

    sigma = (1.0 - ctx.s) / 2.0
    h_s = float(ws[1] - ws[0])
    h_i = float(wi[1] - wi[0])
    lo_s = min(int(round(ws[0] / h_s)), len(ws) * 4)
    lo_i = min(int(round(wi[0] / h_i)), len(wi) * 4)
    lat_s = ws[0] + h_s * np.arange(-lo_s, len(ws))
    lat_i = wi[0] + h_i * np.arange(-lo_i, len(wi))
    lat_s = np.maximum(lat_s, 0.0)
    lat_i = np.maximum(lat_i, 0.0)
    gx, gy = np.meshgrid(lat_s, lat_i, indexing="ij")
    paired = _paired_values(ctx, params.m_pairs, gx, gy, normalized)
    k_s = (_binned_thermal_kernel(params.m_noise_s, params.b_noise_s + sigma,
                                  h_s, lat_s.size)
           if params.m_noise_s > 0 else np.array([1.0]))
    k_i = (_binned_thermal_kernel(params.m_noise_i, params.b_noise_i + sigma,
                                  h_i, lat_i.size)
           if params.m_noise_i > 0 else np.array([1.0]))
    full = fftconvolve(paired, np.outer(k_s, k_i))
    return full[lo_s:lo_s + len(ws), lo_i:lo_i + len(wi)]


def _convolve_nodes(params: TwinBeamParams, ctx: OrderingContext,
                    gx: np.ndarray, gy: np.ndarray,
                    ws: np.ndarray, wi: np.ndarray,
                    normalized: bool) -> np.ndarray:
    """Direct quadrature over the noise variables for non-uniform grids.

    Shift pairs with negligible combined weight are skipped; the dropped
    mass is far below the grid normalization tolerance.
    """
    sigma = (1.0 - ctx.s) / 2.0
    eps = 0.5 * min(float(np.min(np.diff(ws))), float(np.min(np.diff(wi))))
    atom_s, xs, wxs = _thermal_measure(
        params.m_noise_s, params.b_noise_s + sigma, eps, float(ws[-1]))
    atom_i, xi, wxi = _thermal_measure(
        params.m_noise_i, params.b_noise_i + sigma, eps, float(wi[-1]))
    shifts_s = np.concatenate(([0.0], xs))
    weights_s = np.concatenate(([atom_s], wxs))
    shifts_i = np.concatenate(([0.0], xi))
    weights_i = np.concatenate(([atom_i], wxi))
    values = np.zeros(gx.shape)
    for x0, wa in zip(shifts_s, weights_s):
        sx = gx - x0
        if np.all(sx < 0):
            continue
        for y0, wb in zip(shifts_i, weights_i):
            if wa * wb < 1e-9:
                continue
            sy = gy - y0
            if np.all(sy < 0):
                continue
            mask = (sx >= 0) & (sy >= 0)
            contrib = np.zeros(gx.shape)
            contrib[mask] = _paired_values(
                ctx, params.m_pairs,
                np.maximum(sx, 0.0), np.maximum(sy, 0.0), normalized)[mask]
            values += (wa * wb) * contrib
    return values


def joint_qdii_grid(params: TwinBeamParams, s: float,
                    w_s_axis, w_i_axis, *,
                    paired_only: bool = False,
                    normalized: bool = True) -> QdiiGrid:
    """Full-field QDII on a rectangular intensity grid.

    Convolves the paired density with the per-arm noise densities: on
    uniform axes the noise measures are binned onto the grid lattice (their
    sub-resolution mass lands in the zero-shift bin) and the convolution runs
    via FFT; on non-uniform axes a direct quadrature over the noise variables
    is used.  Either way the unresolvably-small noise shifts of
    reconstructed states collapse onto a point mass at zero, which keeps the
    nearly-empty noise arms well-behaved.
    """
    _check_ordering(s)
    ws = np.asarray(w_s_axis, dtype=float)
    wi = np.asarray(w_i_axis, dtype=float)
    if params.m_pairs == 0:
        if paired_only:
            raise DomainError("joint_qdii_grid: no paired component to isolate")
        return _noise_only_grid(params, s, ws, wi)
    ctx = OrderingContext.for_params(params.b_pairs, s)
    if ctx.k_p_s == 0.0:
        raise DomainError("joint_qdii_grid: s equals the paired branch boundary")
    gx, gy = np.meshgrid(ws, wi, indexing="ij")

    if paired_only or (params.m_noise_s == 0 and params.m_noise_i == 0):
        values = _paired_values(ctx, params.m_pairs, gx, gy, normalized)
    elif _is_uniform(ws) and _is_uniform(wi):
        values = _convolve_uniform(params, ctx, ws, wi, normalized)
    else:
        values = _convolve_nodes(params, ctx, gx, gy, ws, wi, normalized)

    grid = QdiiGrid(ws, wi, values, s,
                    normalization=float(np.trapezoid(
                        np.trapezoid(values, wi, axis=1), ws)))
    if abs(grid.normalization - 1.0) > NORMALIZATION_TOL:
        raise GridResolutionError(
            f"joint_qdii_grid: grid integral {grid.normalization:.4f} deviates "
            "from 1 by more than 5%; enlarge or refine the axes")
    return grid
