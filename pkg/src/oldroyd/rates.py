"""Predicted decay exponents, log-log slope fitting, and alignment verdicts.

The exponent table is driven by the single number
``alpha = min(3/2, 3/2 + min(r_u, 1 + r_tau))`` built from the decay
characters of the initial velocity and stress.  All fitted slopes are
ordinary least squares of ``log(value)`` against ``log(1 + t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Column order of every emitted time series.
SCHEMA_COLUMNS = (
    "u_l2sq",
    "u_h1sq",
    "u_h2sq",
    "tau_l2sq",
    "tau_h1sq",
    "tau_h2sq",
    "eps_l2sq",
    "div_u",
    "trace_tau_max",
    "energy",
    "align_cos",
)

_NONNEGATIVE_COLUMNS = frozenset(SCHEMA_COLUMNS) - {"align_cos"}


@dataclass(frozen=True)
class TimeSeries:
    """Sampled diagnostics: strictly increasing times plus named columns."""

    times: np.ndarray
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0):
            raise ValueError("times must be nonnegative and strictly increasing")
        cols = {}
        for name, vals in self.columns.items():
            v = np.asarray(vals, dtype=float)
            if v.shape != t.shape:
                raise ValueError(f"column {name!r} has length {v.size}, expected {t.size}")
            if name in _NONNEGATIVE_COLUMNS and v.size and np.min(v) < 0:
                raise ValueError(f"norm column {name!r} contains negative values")
            cols[name] = v
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "columns", cols)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"series has no column {name!r}")
        return self.columns[name]

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class SlopeFit:
    """OLS slope of log(value) against log(1 + t) inside a window."""

    slope: float
    stderr: float
    window: tuple[float, float]
    n_points: int


@dataclass(frozen=True)
class RatePrediction:
    """Exponent table for the squared norms, keyed by series column name.

    ``exponents`` holds the upper-bound exponents; when the two-sided case
    hypotheses hold, ``case`` is "a" or "b" and ``two_sided_exponent`` gives
    the matching lower/upper rate for the deformation tensor and the stress,
    with ``epsilon_bound_exponent`` the sharpened bound on the elastic
    residual for that case.
    """

    alpha: float
    exponents: dict[str, float]
    case: str | None = None
    two_sided_exponent: float | None = None
    epsilon_bound_exponent: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.5:
            raise ValueError(f"alpha must lie in (0, 3/2], got {self.alpha}")
        e = self.exponents
        if not (
            e["eps_l2sq"] == e["tau_l2sq"] - 1.0 == e["u_h1sq"] - 1.0
            and e["u_h1sq"] == e["u_l2sq"] - 1.0
            and e["u_h2sq"] == e["u_l2sq"] - 2.0
        ):
            raise ValueError("exponent table violates the ordering constraints")


def alpha(r_u: float | None, r_tau: float | None) -> float:
    """Capped rate min(3/2, 3/2 + min(r_u, 1 + r_tau)).

    ``None`` stands for vanishing initial data (no algebraic contribution);
    both arguments must exceed -3/2 when given.
    """
    for name, val in (("r_u", r_u), ("r_tau", r_tau)):
        if val is not None and val <= -1.5:
            raise ValueError(f"{name} must exceed -3/2, got {val}")
    candidates = []
    if r_u is not None:
        candidates.append(r_u)
    if r_tau is not None:
        candidates.append(1.0 + r_tau)
    if not candidates:
        raise ValueError("at least one decay character is required")
    return min(1.5, 1.5 + min(candidates))


def predicted_exponents(r_u: float | None, r_tau: float | None) -> RatePrediction:
    """Fill the exponent table and resolve the two-sided case hypotheses."""
    a = alpha(r_u, r_tau)
    exponents = {
        "z_l2sq": -a,
        "u_l2sq": -a,
        "u_h1sq": -(1.0 + a),
        "u_h2sq": -(2.0 + a),
        "tau_l2sq": -(1.0 + a),
        "tau_h1sq": -(2.0 + a),
        "tau_h2sq": -(2.0 + a),
        "eps_l2sq": -(2.0 + a),
    }
    case = None
    two_sided = None
    eps_bound = None
    ru_eff = math.inf if r_u is None else r_u
    shifted_tau = math.inf if r_tau is None else 1.0 + r_tau
    if ru_eff <= shifted_tau and ru_eff <= 0.0:
        case = "a"
        two_sided = -(2.5 + ru_eff)
        eps_bound = -(3.5 + ru_eff)
    elif shifted_tau <= ru_eff and shifted_tau <= 0.0:
        case = "b"
        two_sided = -(2.5 + shifted_tau)
        eps_bound = -(3.5 + shifted_tau)
    return RatePrediction(
        alpha=a,
        exponents=exponents,
        case=case,
        two_sided_exponent=two_sided,
        epsilon_bound_exponent=eps_bound,
    )


def fit_loglog_slope(series: TimeSeries, column: str, window: tuple[float, float]) -> SlopeFit:
    """Least-squares slope of log(column) vs log(1 + t) inside the window."""
    t_lo, t_hi = window
    t = series.times
    vals = series.column(column)
    mask = (t >= t_lo) & (t <= t_hi)
    if int(np.sum(mask)) < 4:
        raise ValueError(f"need at least 4 samples in window {window}, got {int(np.sum(mask))}")
    v = vals[mask]
    if np.any(v <= 0):
        raise ValueError(f"column {column!r} has nonpositive values inside the fit window")
    x = np.log1p(t[mask])
    y = np.log(v)
    n = x.size
    xm = x - x.mean()
    sxx = float(np.dot(xm, xm))
    slope = float(np.dot(xm, y) / sxx)
    resid = y - y.mean() - slope * xm
    ssr = float(np.dot(resid, resid))
    stderr = math.sqrt(max(ssr, 0.0) / (n - 2) / sxx) if n > 2 else 0.0
    return SlopeFit(slope=slope, stderr=stderr, window=(t_lo, t_hi), n_points=n)


@dataclass(frozen=True)
class AlignmentReport:
    """Verdict on the stress tensor tracking its Newtonian part."""

    ratio_slope: float | None
    ratio_stderr: float | None
    cos_start: float
    cos_end: float
    window: tuple[float, float]
    trivial: bool
    aligned: bool
    ratio_slope_max: float
    cos_threshold: float


def alignment_report(
    series: TimeSeries,
    window: tuple[float, float],
    ratio_slope_max: float = -0.7,
    cos_threshold: float = 0.9,
) -> AlignmentReport:
    """Fit the elastic-to-total stress ratio and check the cosine trend.

    Passes when the fitted slope of ``eps_l2sq / tau_l2sq`` is at most
    ``ratio_slope_max`` and the alignment cosine both grows across the window
    and ends above ``cos_threshold``.  Exact alignment (identically zero
    residual) passes trivially.
    """
    tau = series.column("tau_l2sq")
    if not np.any(tau > 0):
        raise ValueError("tau_l2sq is identically zero; alignment is undefined")
    eps = series.column("eps_l2sq")
    t = series.times
    mask = (t >= window[0]) & (t <= window[1])
    cos = series.column("align_cos")[mask]
    cos_start = float(cos[0])
    cos_end = float(cos[-1])
    if not np.any(eps[mask] > 0):
        return AlignmentReport(
            ratio_slope=None,
            ratio_stderr=None,
            cos_start=cos_start,
            cos_end=cos_end,
            window=window,
            trivial=True,
            aligned=True,
            ratio_slope_max=ratio_slope_max,
            cos_threshold=cos_threshold,
        )
    ratio = TimeSeries(t[mask], {"ratio": eps[mask] / tau[mask]})
    fit = fit_loglog_slope(ratio, "ratio", window)
    aligned = (
        fit.slope <= ratio_slope_max
        and cos_end > cos_start
        and cos_end > cos_threshold
    )
    return AlignmentReport(
        ratio_slope=fit.slope,
        ratio_stderr=fit.stderr,
        cos_start=cos_start,
        cos_end=cos_end,
        window=window,
        trivial=False,
        aligned=aligned,
        ratio_slope_max=ratio_slope_max,
        cos_threshold=cos_threshold,
    )


def ball_energy(field, radius: float) -> float:
    """Spectral energy inside the ball |k| <= radius.

    Lattice fields get a shell-restricted Parseval sum; continuum profiles
    (anything exposing a radial law) are integrated by quadrature.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    from . import spectral

    if isinstance(field, (spectral.SpectralVectorField, spectral.SpectralTensorField,
                          spectral.AntisymmetricTensorField)):
        grid = field.grid
        w = spectral._component_weights(field)
        mags = np.einsum("c,c...->...", w, np.abs(field.coeffs) ** 2)
        inside = grid.k_mag <= radius
        return float(grid.volume * np.sum(mags[inside]))
    from . import decay

    return decay.profile_ball_energy(field, radius)


@dataclass(frozen=True)
class TwoSidedVerdict:
    """Per-column verdicts for the two-sided rate check."""

    applicable: bool
    case: str | None
    exponent: float | None
    window: tuple[float, float]
    tolerance: float
    verdicts: dict[str, str] = field(default_factory=dict)
    slopes: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.applicable and all(v == "pass" for v in self.verdicts.values())


def two_sided_check(
    series: TimeSeries,
    prediction: RatePrediction,
    window: tuple[float, float],
    tol: float,
) -> TwoSidedVerdict:
    """Check that the deformation and stress norms obey the two-sided rate.

    The squared deformation-tensor norm equals half of ``u_h1sq`` for
    divergence-free velocity, so its slope is read off that column.  Outside
    the case hypotheses the verdict is "not applicable", never a silent pass.
    """
    if prediction.case is None:
        return TwoSidedVerdict(
            applicable=False,
            case=None,
            exponent=None,
            window=window,
            tolerance=tol,
        )
    exponent = prediction.two_sided_exponent
    verdicts = {}
    slopes = {}
    for column in ("u_h1sq", "tau_l2sq"):
        fit = fit_loglog_slope(series, column, window)
        slopes[column] = fit.slope
        verdicts[column] = "pass" if abs(fit.slope - exponent) <= tol else "fail"
    return TwoSidedVerdict(
        applicable=True,
        case=prediction.case,
        exponent=exponent,
        window=window,
        tolerance=tol,
        verdicts=verdicts,
        slopes=slopes,
    )
