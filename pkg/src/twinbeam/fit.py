"""Least-square declination between model and measured photocount tables and
the one-dimensional search over the paired variance that selects the
reconstructed state.

The declination is scanned on a uniform grid over the allowed ``var_p``
interval and the best bracket is refined by golden-section search.  Family
members whose forward model does not exist (a pre-detection moment would go
negative) are treated as failed scan points; a minimum that sits against
such a point, or against an interval endpoint, is flagged ``at_boundary``.
The experimental optimum of this kind of data typically lives exactly there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    InfeasibleMomentsError,
    ReconstructionError,
    ValidationError,
)
from .model import (
    DetectorModel,
    FieldMoments,
    Histogram2D,
    JointDistribution,
    TwinBeamParams,
)
from .moments import (
    dark_corrected_moments,
    inversion_family,
    invert_at,
    mode_parameters,
    photocount_moments,
)
from .photostat import (
    DetectorResponseTable,
    default_cutoffs,
    joint_photon_distribution,
    photocount_distribution,
    response_table,
)

__all__ = ["ReconstructionResult", "declination", "reconstruct"]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0

TABLE_MARGIN = 16  # extra photocount rows beyond the histogram support


def declination(p_c: JointDistribution, f: Histogram2D) -> float:
    """Euclidean distance between a model count table and a normalized
    histogram, over the union of their supports."""
    if not f.is_normalized:
        raise ValidationError("declination: histogram must be normalized to total 1")
    rows = max(p_c.probs.shape[0], f.counts.shape[0])
    cols = max(p_c.probs.shape[1], f.counts.shape[1])
    diff = np.zeros((rows, cols))
    diff[:p_c.probs.shape[0], :p_c.probs.shape[1]] = p_c.probs
    diff[:f.counts.shape[0], :f.counts.shape[1]] -= f.counts
    return float(math.sqrt(float((diff * diff).sum())))


@dataclass(frozen=True)
class ReconstructionResult:
    """Output of the declination minimization."""

    var_p_opt: float
    params: TwinBeamParams
    field_moments: FieldMoments
    declination: float
    scan: tuple[tuple[float, float], ...]
    at_boundary: bool

    def __post_init__(self):
        if self.declination < 0:
            raise ValidationError("ReconstructionResult: declination must be >= 0")
        vps = [v for v, _ in self.scan]
        if any(b < a for a, b in zip(vps, vps[1:])):
            raise ValidationError("ReconstructionResult: scan must be sorted by var_p")


class _Objective:
    """Declination as a function of var_p, with memoized evaluations."""

    def __init__(self, family, f_norm, table_s, table_i, cutoffs):
        self.family = family
        self.f_norm = f_norm
        self.table_s = table_s
        self.table_i = table_i
        self.cutoffs = cutoffs
        self.evaluations: dict[float, float] = {}

    def full(self, var_p: float):
        fm = invert_at(self.family, var_p)
        params = mode_parameters(fm)
        p = joint_photon_distribution(params, self.cutoffs)
        p_c = photocount_distribution(p, self.table_s, self.table_i)
        return declination(p_c, self.f_norm), params, fm

    def __call__(self, var_p: float) -> float:
        if var_p in self.evaluations:
            return self.evaluations[var_p]
        try:
            value = self.full(var_p)[0]
        except (InfeasibleMomentsError, DomainError):
            value = math.inf
        self.evaluations[var_p] = value
        return value


def _golden_section(obj, lo: float, hi: float, tol: float) -> float:
    """Golden-section minimization tolerant of +inf plateaus at the edges."""
    a, b = lo, hi
    h = b - a
    if h <= tol:
        return (a + b) / 2.0
    steps = max(1, int(math.ceil(math.log(tol / h) / math.log(_INV_PHI))))
    c = a + _INV_PHI_SQ * h
    d = a + _INV_PHI * h
    yc, yd = obj(c), obj(d)
    for _ in range(steps):
        if yc < yd:
            b, d, yd = d, c, yc
            h *= _INV_PHI
            c = a + _INV_PHI_SQ * h
            yc = obj(c)
        else:
            a, c, yc = c, d, yd
            h *= _INV_PHI
            d = a + _INV_PHI * h
            yd = obj(d)
    candidates = [(obj(x), x) for x in (a, c, d, b)]
    return min(candidates)[1]


def reconstruct(f: Histogram2D, dark: Histogram2D,
                d_s: DetectorModel, d_i: DetectorModel,
                scan_points: int = 200, *,
                refine_rel_width: float = 1e-4,
                response_s: DetectorResponseTable | None = None,
                response_i: DetectorResponseTable | None = None) -> ReconstructionResult:
    """Reconstruct the twin-beam state from a histogram and its dark record.

    Pipeline: photocount moments -> dark correction -> feasibility ->
    var_p scan of the declination -> golden-section refinement.  Precomputed
    response tables may be passed to amortize repeated reconstructions with
    the same detectors.
    """
    if scan_points < 2:
        raise DomainError("reconstruct: scan_points must be >= 2")
    detected = dark_corrected_moments(photocount_moments(f), photocount_moments(dark))
    family = inversion_family(detected, d_s.efficiency, d_i.efficiency)

    f_norm = f.normalized()
    # photon cutoffs: worst case over the family is the smallest var_p, where
    # the noise tails are heaviest; the cap keeps the table bounded anyway.
    probe = invert_at(family, family.var_p_max / 2.0, atol=math.inf)
    cutoffs = default_cutoffs(mode_parameters_safe(probe))
    m_max_s = min(d_s.pixels, f.counts.shape[0] - 1 + TABLE_MARGIN)
    m_max_i = min(d_i.pixels, f.counts.shape[1] - 1 + TABLE_MARGIN)
    if response_s is None or response_s.m_max < m_max_s or response_s.n_max < cutoffs[0]:
        response_s = response_table(d_s, m_max_s, cutoffs[0])
    if response_i is None or response_i.m_max < m_max_i or response_i.n_max < cutoffs[1]:
        response_i = response_table(d_i, m_max_i, cutoffs[1])

    obj = _Objective(family, f_norm, response_s, response_i, cutoffs)
    grid = family.var_p_max * np.arange(1, scan_points + 1) / scan_points
    values = np.array([obj(v) for v in grid])
    finite = np.isfinite(values)
    if not finite.any():
        raise ReconstructionError(
            "reconstruct: the forward model failed at every scan point")
    best = int(np.argmin(np.where(finite, values, math.inf)))

    lo = grid[best - 1] if best > 0 else grid[0] / 2.0
    hi = grid[best + 1] if best + 1 < len(grid) else family.var_p_max
    width = refine_rel_width * family.var_p_max
    var_p_opt = _golden_section(obj, lo, hi, width)
    if not math.isfinite(obj(var_p_opt)):
        # golden section may settle onto an infeasible edge; fall back to the
        # best finite evaluation seen so far
        var_p_opt = min((d, v) for v, d in obj.evaluations.items()
                        if math.isfinite(d))[1]

    decl_opt, params_opt, fm_opt = obj.full(var_p_opt)

    boundaries = [family.var_p_max, grid[0]]
    feasible_flags = [math.isfinite(v) for v in values]
    for k in range(1, len(grid)):
        if feasible_flags[k] != feasible_flags[k - 1]:
            boundaries.append((grid[k - 1] + grid[k]) / 2.0)
    at_boundary = any(abs(var_p_opt - b) <= max(width, (grid[1] - grid[0]))
                      for b in boundaries)

    scan = tuple(sorted(obj.evaluations.items()))
    return ReconstructionResult(var_p_opt, params_opt, fm_opt, decl_opt,
                                scan, at_boundary)


def mode_parameters_safe(fm: FieldMoments) -> TwinBeamParams:
    """Mode parameters with degenerate components mapped to absent ones.

    Used only to size truncation cutoffs, where a component that cannot be
    decomposed contributes no support anyway.
    """
    from .moments import component_mode_params

    def comp(mean, var):
        try:
            return component_mode_params(mean, var)
        except DomainError:
            return (0.0, 0.0)

    m_p, b_p = comp(fm.mean_p, fm.var_p)
    m_s, b_s = comp(fm.mean_s, fm.var_s)
    m_i, b_i = comp(fm.mean_i, fm.var_i)
    return TwinBeamParams(m_p, b_p, m_s, b_s, m_i, b_i)
