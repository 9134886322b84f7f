"""Spectral zeta, Weyl constant, and boundary concentration profiles.

The boundary profile of the supercritical regime is

    B(x) = l_cl / C * sum_k d * int_0^{lambda_k^{-1/2}} t^d |phi_k(t x)|^2 dt,

with phi_k the reference eigenfunctions at unit coupling, d the effective
dimension and C = l_cl * sum_k lambda_k^{-d/2}. With C taken as the partial
sum over the same k-range as the profile sum, int B = 1 holds identically and
the recorded normalization defect measures pure quadrature error; the
truncated zeta tail is reported separately. A(u) is B transported to the
physical transverse coordinate by the measure-preserving substitution
x = (1 - alpha/2)^{-1} u^{1 - alpha/2}.

Each profile term keeps most of its mass out to x of order lambda_k^{1/2+1/beta},
so the public grid is continued internally by a geometric tail grid plus an
exact power-law remainder when recording the normalization defect.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._emit import format_float
from .core import GrushinParams, beta_of_alpha, map_u_to_x, map_x_to_u
from .errors import (
    ConsistencyError,
    IncompleteTableError,
    ParameterDomainError,
    RegimeError,
    SupportWarning,
)
from .scaling import ReferenceSpectrum, fit_eigenvalue_growth, powerlaw_tail_sum

_trapz = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "QuadratureConfig",
    "WeylConstant",
    "BoundaryProfile",
    "spectral_zeta",
    "weyl_constant",
    "compute_profile_B",
    "compute_profile_A",
    "profile_quantile",
    "profile_csv_bytes",
    "profile_json_obj",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Grid sizes for the profile quadrature.

    x_points uniform output points on [0, x_pad * lambda_1^{-1/2} * support];
    t_points per-mode trapezoid nodes; the defect integral continues the grid
    geometrically with extension_points up to extension_pad times the largest
    mode's spread lambda_K^{1/2} * support.
    """

    x_points: int = 400
    t_points: int = 256
    x_pad: float = 1.2
    extension_points: int = 512
    extension_pad: float = 1.05
    support_threshold: float = 1e-8

    def __post_init__(self):
        if self.x_points < 2 or self.t_points < 2 or self.extension_points < 2:
            raise ParameterDomainError("quadrature grids need at least 2 points")
        if self.x_pad <= 0.0 or self.extension_pad < 1.0:
            raise ParameterDomainError("invalid quadrature padding")


@dataclass(frozen=True)
class WeylConstant:
    """C = l_cl * zeta_value with the truncation tail reported alongside."""

    value: float
    zeta_value: float
    k_used: int
    tail_estimate: float


@dataclass(frozen=True)
class BoundaryProfile:
    """Sampled concentration profile, kind 'B_of_x' or 'A_of_u'.

    abscissae/values are the public grid. ext_abscissae/ext_values continue
    the profile beyond the grid (starting at the last public point) and
    ext_remainder is the exact power-law mass beyond the continuation; the
    three together produce total_integral, whose distance from 1 is
    normalization_defect.
    """

    abscissae: np.ndarray
    values: np.ndarray
    kind: str
    params: GrushinParams
    normalization_defect: float
    k_used: int
    zeta_tail_estimate: float
    total_integral: float
    vanishing_order: float
    alpha: float | None = None
    ext_abscissae: np.ndarray | None = None
    ext_values: np.ndarray | None = None
    ext_remainder: float = 0.0

    def __post_init__(self):
        if self.kind not in ("B_of_x", "A_of_u"):
            raise ParameterDomainError(f"unknown profile kind {self.kind!r}")
        x = np.asarray(self.abscissae, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ParameterDomainError("profile needs matching 1-d grids")
        if np.any(np.diff(x) <= 0.0):
            raise ParameterDomainError("profile abscissae must be strictly ascending")
        if np.any(v < 0.0):
            raise ParameterDomainError("profile values must be nonnegative")
        object.__setattr__(self, "abscissae", x)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        """Linear interpolation over the public grid and its continuation."""
        xs, vs = self.abscissae, self.values
        if self.ext_abscissae is not None:
            xs = np.concatenate([xs, self.ext_abscissae[1:]])
            vs = np.concatenate([vs, self.ext_values[1:]])
        return np.interp(np.asarray(x, dtype=float), xs, vs, left=0.0, right=0.0)


def spectral_zeta(
    ref: ReferenceSpectrum, exponent: float, k_used: int | None = None
) -> tuple[float, float]:
    """Partial sum sum_{k<=k_used} lambda_k^{-exponent} and a tail estimate.

    The tail comes from the fitted one-term growth law lambda_k ~ c k^p,
    p = 2 beta/(beta+2); the series converges iff exponent*p > 1, anything
    else is rejected with RegimeError.
    """
    if not math.isfinite(exponent):
        raise ParameterDomainError("exponent must be finite")
    beta = ref.params.beta
    p = 2.0 * beta / (beta + 2.0)
    if exponent * p <= 1.0:
        raise RegimeError(
            f"zeta exponent {exponent:g} gives decay rate {exponent * p:g} <= 1: "
            f"series diverges (supercritical regime requires beta > 2/n)"
        )
    if k_used is None:
        k_used = ref.k_max
    if not 1 <= k_used <= ref.k_max:
        raise IncompleteTableError(
            f"k_used={k_used} outside the computed table 1..{ref.k_max}"
        )
    value = float(np.sum(ref.eigenvalues[:k_used] ** -exponent))
    c_fit, p_fit = fit_eigenvalue_growth(ref)
    tail = powerlaw_tail_sum(c_fit, p_fit, exponent, k_used)
    return value, tail


def weyl_constant(ref: ReferenceSpectrum) -> WeylConstant:
    """C = l_cl * zeta(d/2) from the reference table (supercritical only)."""
    if not ref.params.supercritical:
        raise RegimeError(
            f"Weyl constant needs the supercritical regime, got {ref.params.regime}"
        )
    value, tail = spectral_zeta(ref, ref.params.d / 2.0)
    return WeylConstant(
        value=ref.params.l_cl * value,
        zeta_value=value,
        k_used=ref.k_max,
        tail_estimate=tail,
    )


def _interp_tables(ref: ReferenceSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """Eigenfunction samples padded with the Dirichlet zeros at both ends."""
    nodes = np.concatenate(([0.0], ref.grid.nodes, [ref.grid.x_max]))
    k = ref.k_max
    vals = np.empty((k, nodes.size))
    vals[:, 0] = 0.0
    vals[:, -1] = 0.0
    vals[:, 1:-1] = ref.eigenfunctions
    return nodes, vals


def _profile_values(
    ref: ReferenceSpectrum, x: np.ndarray, k_used: int, t_points: int
) -> np.ndarray:
    """l_cl/C * sum_k d * trapz(t^d |phi_k(t x)|^2) on all of x at once."""
    d = ref.params.d
    nodes, vals = _interp_tables(ref)
    acc = np.zeros(x.size)
    for k in range(k_used):
        t = np.linspace(0.0, ref.eigenvalues[k] ** -0.5, t_points)
        phi = np.interp(np.outer(t, x), nodes, vals[k])
        integrand = (t**d)[:, None] * phi * phi
        acc += d * _trapz(integrand, t, axis=0)
    c_partial = float(np.sum(ref.eigenvalues[:k_used] ** (-d / 2.0)))
    return acc / c_partial


def _term_masses(ref: ReferenceSpectrum, k_used: int) -> np.ndarray:
    """M_k = int_0^{x_max} y^d phi_k(y)^2 dy, the saturated moment that sets
    each term's exact x^{-(d+1)} far tail."""
    d = ref.params.d
    y = np.concatenate(([0.0], ref.grid.nodes))
    out = np.empty(k_used)
    for k in range(k_used):
        f = np.concatenate(([0.0], y[1:] ** d * ref.eigenfunctions[k] ** 2))
        out[k] = _trapz(f, y)
    return out


def compute_profile_B(
    ref: ReferenceSpectrum,
    x_grid: np.ndarray | None = None,
    quadrature_cfg: QuadratureConfig | None = None,
    k_used: int | None = None,
) -> BoundaryProfile:
    """Boundary profile B on x_grid (default: x_points uniform points up to
    x_pad * lambda_1^{-1/2} * support radius).

    The t-integral of each mode is a composite trapezoid with eigenfunction
    values linearly interpolated from the reference grid; modes are summed in
    fixed ascending order. The normalization defect integrates the profile
    over the grid, a geometric continuation out to the largest mode's spread,
    and the exact power-law remainder beyond it.
    """
    if not ref.params.supercritical:
        raise RegimeError(
            f"profile needs the supercritical regime, got {ref.params.regime}"
        )
    cfg = quadrature_cfg if quadrature_cfg is not None else QuadratureConfig()
    if k_used is None:
        k_used = ref.k_max
    if not 1 <= k_used <= ref.k_max:
        raise IncompleteTableError(
            f"k_used={k_used} outside the computed table 1..{ref.k_max}"
        )
    d = ref.params.d
    lam = ref.eigenvalues
    support = ref.support_radius(cfg.support_threshold)
    reliable = lam[0] ** -0.5 * ref.x_max
    if x_grid is None:
        x_grid = np.linspace(0.0, cfg.x_pad * lam[0] ** -0.5 * support, cfg.x_points)
    else:
        x_grid = np.asarray(x_grid, dtype=float)
        if x_grid.ndim != 1 or x_grid.size < 2 or np.any(np.diff(x_grid) <= 0.0):
            raise ParameterDomainError("x_grid must be 1-d strictly ascending")
        if x_grid[0] < 0.0:
            raise ParameterDomainError("x_grid must start at x >= 0")
    if x_grid[-1] > reliable:
        warnings.warn(
            f"x_grid reaches {x_grid[-1]:g}, beyond the reliable support "
            f"lambda_1^-1/2 * x_max = {reliable:g}; far values rest on the "
            f"truncated tails of the reference eigenfunctions",
            SupportWarning,
            stacklevel=2,
        )

    # Continuation grid: geometric from the last public point out to the
    # largest mode's spread, where every term has entered its power-law tail.
    x_far = cfg.extension_pad * math.sqrt(lam[k_used - 1]) * max(support, 1e-300)
    x_last = x_grid[-1]
    if x_far > x_last > 0.0:
        ext = x_last * (x_far / x_last) ** (
            np.arange(1, cfg.extension_points + 1) / cfg.extension_points
        )
    else:
        ext = np.empty(0)

    full_x = np.concatenate([x_grid, ext])
    # _profile_values already carries the 1/sum(lambda^{-d/2}) normalization;
    # the l_cl factors of the definition cancel between numerator and C.
    full_v = _profile_values(ref, full_x, k_used, cfg.t_points)
    n_pub = x_grid.size
    values = full_v[:n_pub]
    ext_x = np.concatenate([[x_last], ext])
    ext_v = np.concatenate([[values[-1]], full_v[n_pub:]])

    masses = _term_masses(ref, k_used)
    c_partial = float(np.sum(lam[:k_used] ** (-d / 2.0)))
    x_end = ext_x[-1] if ext.size else x_last
    remainder = float(np.sum(masses) * x_end**-d / c_partial)

    total = float(_trapz(values, x_grid))
    if ext.size:
        total += float(_trapz(ext_v, ext_x))
    total += remainder
    defect = abs(total - 1.0)

    _, zeta_tail = spectral_zeta(ref, d / 2.0, k_used)
    order = _vanishing_order(x_grid, values)
    return BoundaryProfile(
        abscissae=x_grid,
        values=np.maximum(values, 0.0),
        kind="B_of_x",
        params=ref.params,
        normalization_defect=defect,
        k_used=k_used,
        zeta_tail_estimate=zeta_tail,
        total_integral=total,
        vanishing_order=order,
        ext_abscissae=ext_x if ext.size else None,
        ext_values=np.maximum(ext_v, 0.0) if ext.size else None,
        ext_remainder=remainder,
    )


def _vanishing_order(x: np.ndarray, v: np.ndarray) -> float:
    """Log-log slope of the profile over its first few positive samples."""
    pos = np.nonzero((x > 0.0) & (v > 0.0))[0][:6]
    if pos.size < 2:
        return math.nan
    coeffs = np.polyfit(np.log(x[pos]), np.log(v[pos]), 1)
    return float(coeffs[0])


def _transport(b_values: np.ndarray, u: np.ndarray, alpha: float) -> np.ndarray:
    """B values times u^{-alpha/2}, with the u = 0 endpoint set to its limit 0
    (the profile vanishes faster than the weight blows up)."""
    out = np.zeros_like(u)
    pos = u > 0.0
    out[pos] = b_values[pos] * u[pos] ** (-alpha / 2.0)
    return out


def compute_profile_A(
    profile_b: BoundaryProfile,
    alpha: float,
    u_grid: np.ndarray | None = None,
) -> BoundaryProfile:
    """Physical-coordinate profile A(u) = B(x(u)) * u^{-alpha/2} with
    x(u) = (1 - alpha/2)^{-1} u^{1-alpha/2}.

    The default u-grid is the exact image of B's grid, on which values follow
    pointwise; the substitution is measure-preserving, so the continuation and
    remainder transport too and the defect stays comparable to B's.
    """
    if not (0.0 < alpha < 2.0):
        raise ParameterDomainError(f"alpha must be in (0, 2), got {alpha:g}")
    if profile_b.kind != "B_of_x":
        raise ConsistencyError("compute_profile_A needs a B_of_x profile")
    beta = beta_of_alpha(alpha)
    if not math.isclose(beta, profile_b.params.beta, rel_tol=1e-12, abs_tol=1e-12):
        raise ConsistencyError(
            f"alpha={alpha:g} maps to beta={beta:g}, but the profile was built "
            f"at beta={profile_b.params.beta:g}"
        )

    if u_grid is None:
        u = map_x_to_u(profile_b.abscissae, alpha)
        vals = _transport(profile_b.values, u, alpha)
    else:
        u = np.asarray(u_grid, dtype=float)
        if u.ndim != 1 or u.size < 2 or np.any(np.diff(u) <= 0.0):
            raise ParameterDomainError("u_grid must be 1-d strictly ascending")
        if u[0] < 0.0:
            raise ParameterDomainError("u_grid must start at u >= 0")
        vals = _transport(profile_b(map_u_to_x(u, alpha)), u, alpha)

    ext_u = ext_v = None
    if profile_b.ext_abscissae is not None:
        ext_u = map_x_to_u(profile_b.ext_abscissae, alpha)
        ext_v = _transport(profile_b.ext_values, ext_u, alpha)

    total = float(_trapz(vals, u))
    if ext_u is not None:
        total += float(_trapz(ext_v, ext_u))
    total += profile_b.ext_remainder
    return BoundaryProfile(
        abscissae=u,
        values=np.maximum(vals, 0.0),
        kind="A_of_u",
        params=profile_b.params,
        normalization_defect=abs(total - 1.0),
        k_used=profile_b.k_used,
        zeta_tail_estimate=profile_b.zeta_tail_estimate,
        total_integral=total,
        vanishing_order=_vanishing_order(u, vals),
        alpha=alpha,
        ext_abscissae=ext_u,
        ext_values=np.maximum(ext_v, 0.0) if ext_v is not None else None,
        ext_remainder=profile_b.ext_remainder,
    )


def profile_quantile(profile: BoundaryProfile, p: float) -> float:
    """Smallest grid abscissa whose cumulative trapezoid mass reaches p times
    the recorded total integral (clamped to the grid ends)."""
    if not (0.0 <= p <= 1.0):
        raise ParameterDomainError(f"quantile level must be in [0, 1], got {p:g}")
    x, v = profile.abscissae, profile.values
    if profile.ext_abscissae is not None:
        x = np.concatenate([x, profile.ext_abscissae[1:]])
        v = np.concatenate([v, profile.ext_values[1:]])
    cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(x) * (v[1:] + v[:-1]))))
    target = p * profile.total_integral
    idx = np.nonzero(cum >= target)[0]
    if idx.size == 0:
        return float(x[-1])
    return float(x[idx[0]])


def profile_csv_bytes(profile: BoundaryProfile) -> bytes:
    """CSV per the documented schema: a metadata comment line, then rows of
    abscissa,value over the public grid."""
    kind = "B" if profile.kind == "B_of_x" else "A"
    var = "x" if kind == "B" else "u"
    head = (
        f"# kind={kind} n={profile.params.n} "
        f"beta={format_float(profile.params.beta)}"
    )
    if profile.alpha is not None:
        head += f" alpha={format_float(profile.alpha)}"
    head += (
        f" k_used={profile.k_used} "
        f"defect={format_float(profile.normalization_defect)}"
    )
    lines = [head, f"{var},value"]
    for xi, vi in zip(profile.abscissae, profile.values):
        lines.append(f"{format_float(xi)},{format_float(vi)}")
    return ("\n".join(lines) + "\n").encode("ascii")


def profile_json_obj(profile: BoundaryProfile) -> dict:
    """JSON mirror of the CSV schema (public grid only)."""
    kind = "B" if profile.kind == "B_of_x" else "A"
    obj = {"kind": kind, "n": profile.params.n, "beta": profile.params.beta}
    if profile.alpha is not None:
        obj["alpha"] = profile.alpha
    obj.update(
        {
            "k_used": profile.k_used,
            "defect": profile.normalization_defect,
            "zeta_tail_estimate": profile.zeta_tail_estimate,
            "total_integral": profile.total_integral,
            "vanishing_order": profile.vanishing_order,
            "abscissae": profile.abscissae,
            "values": profile.values,
        }
    )
    return obj
