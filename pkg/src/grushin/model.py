"""Product-model spectra over a compact cross manifold.

Separation of variables reduces the operator on [0, x_max] x M to a
direct sum over cross modes mu_j of half-line operators

    P_{mu_j} = -d^2/dx^2 + c_beta/x^2 + mu_j * x^beta   (+ optional potential)

with a Dirichlet condition at x = 0. This module assembles complete
eigenvalue tables below a target energy and evaluates the derived
spectral statistics: the counting function, log-log Weyl fits, Riesz
means, traces with rescaled potentials and their scaling-limit targets,
spectral density moments against separable observables, boundary mass
capture, and a finite-difference check of first-order eigenvalue
perturbation sums.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

from ._emit import csv_bytes
from .core import CrossSpectrum, GrushinParams
from .errors import (
    ConsistencyError,
    DegeneracyError,
    IncompleteTableError,
    IterationError,
    ParameterDomainError,
    QuadratureError,
    RegimeError,
    ResolutionError,
    TableRangeError,
)
from .scaling import (
    ReferenceSpectrum,
    cutoff_S,
    fit_eigenvalue_growth,
    n_s,
    powerlaw_tail_sum,
)
from .sturm1d import (
    Grid1D,
    GridPolicy,
    Potential,
    PotentialSpec,
    count_below,
    discretize,
    eigenfunction,
    eigenvalues_below,
)

_trapz = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "CrossObservable",
    "ModelOperator",
    "EigenTable",
    "MomentReport",
    "WeylFit",
    "HFReport",
    "SQuadratureConfig",
    "assemble_spectrum",
    "counting_function",
    "riesz_mean",
    "weyl_fit",
    "trace_with_potential",
    "lemma1_rhs",
    "density_moment",
    "mass_capture",
    "hellmann_feynman",
    "required_mu_max",
    "eigen_table_csv_bytes",
    "moment_report_json_obj",
]


@dataclass(frozen=True)
class CrossObservable:
    """Separable observable factor on the cross manifold.

    kind 'const' is the constant `value`. kind 'cos' is
    value*cos(frequency*y) along the first circle coordinate with integer
    frequency >= 1. Both have an exact mean over the cross: the constant
    itself, or zero. The zero mean is exact mode by mode because every
    repeated cross eigenvalue carries a full sin/cos pair whose summed
    density is constant in y.
    """

    kind: str
    value: float = 1.0
    frequency: int = 1

    def __post_init__(self):
        if self.kind not in ("const", "cos"):
            raise ParameterDomainError(
                f"cross observable kind must be const|cos, got {self.kind!r}"
            )
        if not math.isfinite(self.value):
            raise ParameterDomainError("cross observable value must be finite")
        if self.kind == "cos":
            if int(self.frequency) != self.frequency or self.frequency < 1:
                raise ParameterDomainError("cos frequency must be an integer >= 1")

    @property
    def cross_mean(self) -> float:
        """Mean value over the cross manifold (volume-normalized)."""
        return self.value if self.kind == "const" else 0.0


@dataclass(frozen=True)
class ModelOperator:
    """The assembled product model: parameters, cross spectrum, half-line box.

    x_max is the truncation length of the singular axis, right_bc the
    boundary condition imposed there, and policy the grid density rule
    used for every mode eigensolve.
    """

    params: GrushinParams
    cross: CrossSpectrum
    x_max: float = 1.0
    right_bc: str = "dirichlet"
    policy: GridPolicy = field(default_factory=GridPolicy)

    def __post_init__(self):
        if not (self.x_max > 0.0 and math.isfinite(self.x_max)):
            raise ParameterDomainError("x_max must be finite and > 0")
        if self.right_bc not in ("dirichlet", "neumann"):
            raise ParameterDomainError(
                f"right_bc must be dirichlet|neumann, got {self.right_bc!r}"
            )

    def mode_potential(self, mu: float, extra: Potential | None = None) -> PotentialSpec:
        return PotentialSpec(
            c_coef=self.params.c_beta,
            mu=float(mu),
            beta=self.params.beta,
            extra=extra,
        )


@dataclass(frozen=True)
class EigenTable:
    """Complete model spectrum strictly below lambda_max.

    Entries are indexed by (j, k): j is the 0-based cross-mode index into
    the generating CrossSpectrum, k the 1-based longitudinal index within
    the mode. Multiplicities come from the cross entry. `vectors`, when
    present, maps (j, k) to the grid-sampled longitudinal eigenfunction,
    normalized to h * sum(v^2) = 1.
    """

    js: np.ndarray
    ks: np.ndarray
    lambdas: np.ndarray
    mults: np.ndarray
    lambda_max: float
    grid: Grid1D
    right_bc: str
    params: GrushinParams
    cross_label: str
    volume: float
    vectors: dict | None = None

    def __post_init__(self):
        js = np.asarray(self.js, dtype=np.int64)
        ks = np.asarray(self.ks, dtype=np.int64)
        lam = np.asarray(self.lambdas, dtype=float)
        mults = np.asarray(self.mults, dtype=np.int64)
        if not (js.shape == ks.shape == lam.shape == mults.shape) or js.ndim != 1:
            raise ConsistencyError("table columns must be 1-d arrays of equal length")
        if lam.size and (np.any(lam >= self.lambda_max) or np.any(mults < 1)):
            raise ConsistencyError("table entries must sit below lambda_max with mult >= 1")
        object.__setattr__(self, "js", js)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "mults", mults)

    @property
    def n_entries(self) -> int:
        return int(self.lambdas.size)

    @cached_property
    def _sorted_steps(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.lambdas, kind="stable")
        return self.lambdas[order], np.cumsum(self.mults[order])


class WeylFit(NamedTuple):
    slope: float
    constant: float
    residuals: np.ndarray


class HFReport(NamedTuple):
    fd_value: float
    pairing_value: float
    gap: float


@dataclass(frozen=True)
class MomentReport:
    """Spectral density moment against a separable observable, with target."""

    lam: float
    n_of_lambda: int
    moment: float
    target: float
    abs_gap: float
    rel_gap: float


def _eigen_tol(lambda_max: float) -> float:
    return 1e-11 * max(1.0, abs(lambda_max))


def _mode_range_cutoff(model: ModelOperator, grid: Grid1D, kappa: float, extra=None) -> int:
    """First mode index whose operator has no spectrum below kappa.

    Valid as a cutoff because the mode potentials increase pointwise with
    mu, so the per-mode ground level is non-decreasing along the table.
    Raises IncompleteTableError when even the last cross entry still has
    spectrum below kappa (no cutoff witness inside the table).
    """

    mus = model.cross.mus

    def has_spectrum(j: int) -> bool:
        op = discretize(model.mode_potential(mus[j], extra), grid, model.right_bc)
        return count_below(op, kappa) > 0

    last = len(mus) - 1
    if has_spectrum(last):
        raise IncompleteTableError(
            f"cross spectrum ends at mu={mus[last]:g} whose mode still has "
            f"eigenvalues below {kappa:g}; extend the cross table",
            certificate="mode_cutoff",
        )
    if not has_spectrum(0):
        return 0
    lo, hi = 0, last
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if has_spectrum(mid):
            lo = mid
        else:
            hi = mid
    return hi


def assemble_spectrum(
    model: ModelOperator,
    lambda_max: float,
    want_vectors: bool = False,
    workers: int = 1,
) -> EigenTable:
    """All model eigenvalues strictly below lambda_max, with multiplicities.

    Modes are scanned in ascending mu with early termination at the first
    mode without spectrum below lambda_max. Mode eigensolves are
    independent tasks; aggregation is in (j, k) order, so the result is
    identical for any worker count.
    """

    if not (lambda_max > 0.0 and math.isfinite(lambda_max)):
        raise ParameterDomainError("lambda_max must be finite and > 0")
    if workers < 1:
        raise ParameterDomainError("workers must be >= 1")
    grid = model.policy.grid_for(model.x_max, lambda_max)
    tol = _eigen_tol(lambda_max)
    j_cut = _mode_range_cutoff(model, grid, lambda_max)

    def solve_mode(j: int):
        op = discretize(model.mode_potential(model.cross.mus[j]), grid, model.right_bc)
        evs = eigenvalues_below(op, lambda_max, tol)
        if want_vectors:
            vecs = [eigenfunction(op, float(ev)) for ev in evs]
        else:
            vecs = None
        return evs, vecs

    if j_cut == 0:
        results = []
    elif workers == 1:
        results = [solve_mode(j) for j in range(j_cut)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_mode, range(j_cut)))

    js, ks, lams, mults = [], [], [], []
    vectors: dict | None = {} if want_vectors else None
    for j, (evs, vecs) in enumerate(results):
        mult = int(model.cross.mults[j])
        for i, ev in enumerate(evs):
            js.append(j)
            ks.append(i + 1)
            lams.append(float(ev))
            mults.append(mult)
            if want_vectors:
                vectors[(j, i + 1)] = vecs[i]
    return EigenTable(
        js=np.asarray(js, dtype=np.int64),
        ks=np.asarray(ks, dtype=np.int64),
        lambdas=np.asarray(lams, dtype=float),
        mults=np.asarray(mults, dtype=np.int64),
        lambda_max=float(lambda_max),
        grid=grid,
        right_bc=model.right_bc,
        params=model.params,
        cross_label=model.cross.label,
        volume=model.cross.volume,
        vectors=vectors,
    )


def _check_range(table: EigenTable, lam: float) -> None:
    if not math.isfinite(lam):
        raise ParameterDomainError("lambda must be finite")
    if lam > table.lambda_max:
        raise TableRangeError(
            f"lambda={lam:g} above the table range {table.lambda_max:g}"
        )


def counting_function(table: EigenTable, lam: float) -> int:
    """N(lambda): multiplicity-weighted count of eigenvalues <= lambda."""
    _check_range(table, lam)
    lam_sorted, cum = table._sorted_steps
    idx = int(np.searchsorted(lam_sorted, lam, side="right"))
    return int(cum[idx - 1]) if idx > 0 else 0


def riesz_mean(table: EigenTable, lam: float) -> float:
    """First Riesz mean sum(mult * (lambda - lambda_i)_+) over the table."""
    _check_range(table, lam)
    if table.n_entries == 0:
        return 0.0
    return float(np.sum(table.mults * np.clip(lam - table.lambdas, 0.0, None)))


def weyl_fit(table: EigenTable, lambda_samples) -> WeylFit:
    """Least-squares line through (log lambda, log N(lambda)).

    Returns the slope, exp(intercept), and per-sample log residuals. Any
    sample with N(lambda) = 0 is rejected rather than silently dropped.
    """

    samples = np.asarray(lambda_samples, dtype=float)
    if samples.ndim != 1 or samples.size < 3:
        raise ParameterDomainError("need at least 3 lambda samples for a fit")
    if np.any(samples <= 0.0) or not np.all(np.isfinite(samples)):
        raise ParameterDomainError("lambda samples must be finite and > 0")
    counts = np.empty(samples.size, dtype=float)
    for i, lam in enumerate(samples):
        n = counting_function(table, float(lam))
        if n == 0:
            raise ParameterDomainError(
                f"counting function vanishes at lambda={lam:g}; enlarge the samples"
            )
        counts[i] = float(n)
    logx = np.log(samples)
    logy = np.log(counts)
    slope, intercept = np.polyfit(logx, logy, 1)
    residuals = logy - (slope * logx + intercept)
    return WeylFit(float(slope), float(math.exp(intercept)), residuals)


def trace_with_potential(
    model: ModelOperator,
    lam: float,
    v_desc: Potential | None = None,
    workers: int = 1,
) -> float:
    """Tr(H + V_lam - lam)_- with the rescaled term V_lam(x) = lam*V(sqrt(lam)x).

    The potential term is added to every mode operator before the
    eigensolve; modes are cut off exactly as in assemble_spectrum (the
    shared extra term preserves the mu-monotonicity of ground levels).
    """

    if not (lam > 0.0 and math.isfinite(lam)):
        raise ParameterDomainError("lambda must be finite and > 0")
    if workers < 1:
        raise ParameterDomainError("workers must be >= 1")
    extra = v_desc.scaled(lam) if v_desc is not None else None
    grid = model.policy.grid_for(model.x_max, lam)
    tol = _eigen_tol(lam)
    j_cut = _mode_range_cutoff(model, grid, lam, extra)

    def mode_trace(j: int) -> float:
        op = discretize(model.mode_potential(model.cross.mus[j], extra), grid, model.right_bc)
        evs = eigenvalues_below(op, lam, tol)
        if evs.size == 0:
            return 0.0
        return float(np.sum(lam - evs))

    if j_cut == 0:
        return 0.0
    if workers == 1:
        traces = [mode_trace(j) for j in range(j_cut)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(mode_trace, range(j_cut)))
    total = 0.0
    for j, tr in enumerate(traces):
        total += int(model.cross.mults[j]) * tr
    return total


@dataclass(frozen=True)
class SQuadratureConfig:
    """Controls for the scaling-parameter quadrature in lemma1_rhs.

    The integral over s is split at `delta`: below it the integrand is
    evaluated in closed form from the certified reference eigenvalues
    (plus a fitted power-law tail for modes beyond the table), above it
    by a graded trapezoid rule with node doubling, each node being a
    Richardson-certified truncated eigensolve.
    """

    nodes_initial: int = 33
    max_doublings: int = 7
    rel_tol: float = 1e-4
    delta: float | None = None
    model_match_rel: float = 3e-4
    ev_tol: float = 1e-10
    node_energy_tol: float = 1e-5
    wkb_decay: float = 20.0
    max_nodes_1d: int = 400_000

    def __post_init__(self):
        if self.nodes_initial < 5:
            raise ParameterDomainError("nodes_initial must be >= 5")
        if self.max_doublings < 1:
            raise ParameterDomainError("max_doublings must be >= 1")
        for name in ("rel_tol", "model_match_rel", "ev_tol", "node_energy_tol", "wkb_decay"):
            val = getattr(self, name)
            if not (val > 0.0 and math.isfinite(val)):
                raise ParameterDomainError(f"{name} must be finite and > 0")
        if self.delta is not None and not (self.delta > 0.0 and math.isfinite(self.delta)):
            raise ParameterDomainError("delta must be finite and > 0 when given")


def _wkb_domain(pot: PotentialSpec, kappa: float, x_turn: float, decay: float) -> float:
    """Truncation length: the point past the classical turning radius where
    the tunneling integral of sqrt((q - kappa)_+) reaches `decay`."""
    xs = x_turn * np.geomspace(1.0, 64.0, 513)
    q = pot.q(xs)
    integrand = np.sqrt(np.clip(q - kappa, 0.0, None))
    steps = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(xs)
    accumulated = np.concatenate(([0.0], np.cumsum(steps)))
    idx = int(np.searchsorted(accumulated, decay))
    if idx >= xs.size:
        return float(xs[-1])
    return float(xs[idx])


def _feature_scale(v_desc: Potential | None) -> float:
    """Smallest length scale of the potential term that the grid must resolve."""
    if v_desc is None:
        return math.inf
    if v_desc.kind == "exp" and v_desc.b > 0.0:
        return 1.0 / v_desc.b
    if v_desc.kind == "indicator":
        return v_desc.b
    if v_desc.kind == "table":
        return float(np.min(np.diff(v_desc.xs)))
    return math.inf


def _node_count(x_dom: float, h_target: float, cap: int) -> int:
    n = max(int(math.ceil(x_dom / h_target)) - 1, 64)
    if n > cap:
        raise ResolutionError(
            f"node eigensolve needs {n} points, cap is {cap}", certificate="grid_policy"
        )
    return n


def lemma1_rhs(
    ref: ReferenceSpectrum,
    v_desc: Potential | None = None,
    cfg: SQuadratureConfig | None = None,
    volume: float = 1.0,
) -> float:
    """Scaling-limit trace density l_cl * volume * int_0^S' Tr(P_s + V - 1)_- ds.

    P_s is the half-line normal form at coupling mu = s^(2/n) and V a
    bounded potential descriptor constant in the cross variable. S' is the
    spectral cutoff shifted by the sup norm of V. The s-integral is split
    at an automatically chosen delta: the closed-form piece below delta
    uses the certified reference eigenvalues and the fitted growth tail,
    the numeric piece above delta uses a graded trapezoid rule whose nodes
    are Richardson-certified eigensolves, doubled until the result settles
    to rel_tol (QuadratureError otherwise).
    """

    cfg = cfg if cfg is not None else SQuadratureConfig()
    params = ref.params
    if not params.supercritical:
        raise RegimeError(
            f"trace density needs the supercritical regime, got n*beta={params.n * params.beta:g}"
        )
    if not (volume > 0.0 and math.isfinite(volume)):
        raise ParameterDomainError("volume must be finite and > 0")
    vsup = v_desc.sup_norm if v_desc is not None else 0.0
    theta = 1.0 - (v_desc.tail_value if v_desc is not None else 0.0)
    d = params.d
    lam = ref.eigenvalues
    k_table = lam.size
    s_cut = cutoff_S(ref, 1.0 + vsup)
    c_fit, p_fit = fit_eigenvalue_growth(ref)

    lam_next = c_fit * float(k_table + 1) ** p_fit
    s_next = (theta / lam_next) ** (d / 2.0) if theta > 0.0 else 0.0

    local_exp = (params.n * params.beta / 2.0 + 3.0) / d
    if cfg.delta is not None:
        delta = float(cfg.delta)
        if not (0.0 < delta < s_cut):
            raise ParameterDomainError("delta must lie inside (0, S')")
        if theta > 0.0 and delta < 1.02 * s_next:
            raise ParameterDomainError(
                "delta below the fitted-tail threshold; raise k_max or delta"
            )
    else:
        delta = min(0.25 * s_cut, cfg.model_match_rel ** (1.0 / local_exp))
        if theta > 0.0:
            s_last = (theta / float(lam[-1])) ** (d / 2.0)
            delta = max(delta, 3.0 * s_last, 1.05 * s_next)
        delta = min(delta, 0.5 * s_cut)

    # closed-form piece over [0, delta]
    closed = 0.0
    if theta > 0.0:
        s_star = (theta / lam) ** (d / 2.0)
        done = s_star <= delta
        if np.any(done):
            closed += (
                (2.0 / (d + 2.0))
                * theta ** ((d + 2.0) / 2.0)
                * float(np.sum(lam[done] ** (-d / 2.0)))
            )
        partial = ~done
        if np.any(partial):
            closed += float(
                np.sum(
                    theta * delta
                    - lam[partial] * (d / (d + 2.0)) * delta ** ((d + 2.0) / d)
                )
            )
        closed += (
            (2.0 / (d + 2.0))
            * theta ** ((d + 2.0) / 2.0)
            * powerlaw_tail_sum(c_fit, p_fit, d / 2.0, k_table)
        )

    # numeric piece over [delta, S'], graded substitution s = sigma^m
    nb = params.n * params.beta
    m_grade = int(min(8, max(3, math.ceil(2.0 * nb / (nb - 2.0)))))
    sig_a = delta ** (1.0 / m_grade)
    sig_b = s_cut ** (1.0 / m_grade)
    kappa_prime = 1.0 + vsup
    h_target = min(
        math.sqrt(12.0 * cfg.node_energy_tol / kappa_prime),
        2.0 * math.pi / (20.0 * math.sqrt(kappa_prime)),
        _feature_scale(v_desc) / 8.0,
    )

    def node_trace(pot: PotentialSpec, x_dom: float, n: int) -> float:
        op = discretize(pot, Grid1D(x_max=x_dom, n_points=n), "dirichlet")
        evs = eigenvalues_below(op, 1.0, cfg.ev_tol)
        if evs.size == 0:
            return 0.0
        return float(np.sum(1.0 - evs))

    def integrand(s: float) -> float:
        mu = s ** (2.0 / params.n)
        pot = PotentialSpec(
            c_coef=params.c_beta, mu=mu, beta=params.beta,
            extra=v_desc if vsup > 0.0 else None,
        )
        x_turn = (kappa_prime / mu) ** (1.0 / params.beta)
        x_dom = _wkb_domain(pot, kappa_prime, x_turn, cfg.wkb_decay)
        n = _node_count(x_dom, h_target, cfg.max_nodes_1d)
        coarse = node_trace(pot, x_dom, n)
        fine = node_trace(pot, x_dom, 2 * n + 1)
        return fine + (fine - coarse) / 3.0

    levels = cfg.max_doublings
    n_finest = (cfg.nodes_initial - 1) * (1 << levels) + 1
    f_cache: dict[int, float] = {}

    def f_at(idx: int) -> float:
        val = f_cache.get(idx)
        if val is None:
            sigma = sig_a + (sig_b - sig_a) * (idx / (n_finest - 1))
            s = sigma**m_grade
            val = integrand(s) * m_grade * sigma ** (m_grade - 1)
            f_cache[idx] = val
        return val

    numeric = None
    for level in range(levels + 1):
        stride = 1 << (levels - level)
        indices = range(0, n_finest, stride)
        h_sig = (sig_b - sig_a) * stride / (n_finest - 1)
        vals = [f_at(i) for i in indices]
        current = h_sig * (0.5 * (vals[0] + vals[-1]) + sum(vals[1:-1]))
        if numeric is not None:
            scale = max(abs(closed) + abs(current), 1e-300)
            if abs(current - numeric) <= cfg.rel_tol * scale:
                numeric = current
                break
        numeric = current
    else:
        raise QuadratureError(
            f"s-quadrature did not settle to rel_tol={cfg.rel_tol:g} "
            f"after {levels} node doublings",
            certificate="node_doubling",
        )

    return params.l_cl * volume * (closed + numeric)


def density_moment(
    table: EigenTable,
    lam: float,
    v1: Potential,
    v2: CrossObservable,
    profile_b=None,
) -> MomentReport:
    """Normalized spectral density moment against V1(sqrt(lam) x) * V2(y).

    moment = N^(-1) sum mult * [h sum_i phi^2(x_i) V1(sqrt(lam) x_i)] * w(V2)
    with w(V2) the exact cross mean. When a boundary profile is supplied,
    the report carries the limit target (integral of B*V1) * w(V2) and the
    gaps to it; otherwise the target fields are NaN.
    """

    if table.vectors is None:
        raise ConsistencyError("density moment needs a table assembled with vectors")
    if not (lam > 0.0 and math.isfinite(lam)):
        raise ParameterDomainError("lambda must be finite and > 0")
    _check_range(table, lam)
    n_lam = counting_function(table, lam)
    if n_lam == 0:
        raise ParameterDomainError(f"no spectrum at or below lambda={lam:g}")
    weight = v2.cross_mean
    nodes = table.grid.nodes
    h = table.grid.h
    v1_vals = np.asarray(v1(math.sqrt(lam) * nodes), dtype=float)
    total = 0.0
    sel = np.flatnonzero(table.lambdas <= lam)
    for idx in sel:
        vec = table.vectors[(int(table.js[idx]), int(table.ks[idx]))]
        total += int(table.mults[idx]) * h * float(np.dot(vec * vec, v1_vals))
    moment = weight * total / n_lam

    if profile_b is not None:
        xs = profile_b.abscissae
        vals = profile_b.values
        if profile_b.ext_abscissae is not None:
            xs = np.concatenate([xs, profile_b.ext_abscissae])
            vals = np.concatenate([vals, profile_b.ext_values])
        integrand = vals * np.asarray(v1(xs), dtype=float)
        target_x = float(_trapz(integrand, xs))
        target_x += profile_b.ext_remainder * v1.tail_value
        target = weight * target_x
        abs_gap = abs(moment - target)
        rel_gap = abs_gap / abs(target) if target != 0.0 else math.inf
    else:
        target = math.nan
        abs_gap = math.nan
        rel_gap = math.nan
    return MomentReport(
        lam=float(lam),
        n_of_lambda=n_lam,
        moment=float(moment),
        target=float(target),
        abs_gap=float(abs_gap),
        rel_gap=float(rel_gap),
    )


def mass_capture(table: EigenTable, lam: float, length: float) -> float:
    """Fraction of normalized spectral mass inside x <= length/sqrt(lam)."""
    if table.vectors is None:
        raise ConsistencyError("mass capture needs a table assembled with vectors")
    if not (lam > 0.0 and math.isfinite(lam)):
        raise ParameterDomainError("lambda must be finite and > 0")
    if not (length >= 0.0 and math.isfinite(length)):
        raise ParameterDomainError("capture length must be finite and >= 0")
    _check_range(table, lam)
    n_lam = counting_function(table, lam)
    if n_lam == 0:
        raise ParameterDomainError(f"no spectrum at or below lambda={lam:g}")
    nodes = table.grid.nodes
    h = table.grid.h
    inside = nodes <= length / math.sqrt(lam)
    total = 0.0
    for idx in np.flatnonzero(table.lambdas <= lam):
        vec = table.vectors[(int(table.js[idx]), int(table.ks[idx]))]
        total += int(table.mults[idx]) * h * float(np.sum(vec[inside] ** 2))
    return min(1.0, max(0.0, total / n_lam))


def hellmann_feynman(
    ref: ReferenceSpectrum,
    s: float,
    v_desc: Potential,
    epsilon: float,
) -> HFReport:
    """First-order perturbation check at fixed coupling.

    fd_value is the symmetric-threshold finite difference
    eps^(-1) [Tr(P_mu - 1)_- - Tr(P_mu + eps V - 1)_-] computed from one
    pair of eigensolves on a shared grid; pairing_value is the sum of
    integral(phi_k^2 V) over the reference eigenfunctions scaled to
    coupling mu = s^(2/n), for k up to the threshold count n_s(1, s).
    Raises DegeneracyError when an eigenvalue sits within the
    non-resonance window 10*eps*supnorm(V) of the threshold.
    """

    params = ref.params
    if not (s > 0.0 and math.isfinite(s)):
        raise ParameterDomainError("s must be finite and > 0")
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise ParameterDomainError("epsilon must be finite and > 0")
    mu = s ** (2.0 / params.n)
    vsup = v_desc.sup_norm
    window = 10.0 * epsilon * vsup

    scaled = s ** (2.0 / params.d) * ref.eigenvalues
    if window > 0.0 and bool(np.any(np.abs(scaled - 1.0) < window)):
        raise DegeneracyError(
            f"an eigenvalue sits within {window:g} of the threshold at s={s:g}"
        )
    n_threshold = n_s(ref, 1.0, s)

    kappa_dom = 1.0 + (1.0 + epsilon) * vsup
    pot0 = PotentialSpec(c_coef=params.c_beta, mu=mu, beta=params.beta)
    x_turn = (kappa_dom / mu) ** (1.0 / params.beta)
    x_dom = _wkb_domain(pot0, kappa_dom, x_turn, 20.0)
    h_target = min(
        math.sqrt(12.0 * 1e-7 / kappa_dom),
        _feature_scale(v_desc) / 8.0,
    )
    n = _node_count(x_dom, h_target, 2_000_000)
    grid = Grid1D(x_max=x_dom, n_points=n)
    op_a = discretize(pot0, grid, "dirichlet")
    tol = 1e-13
    evs_a = eigenvalues_below(op_a, 1.0, tol)
    if window > 0.0:
        if count_below(op_a, 1.0 + window) != evs_a.size:
            raise DegeneracyError(
                f"a discrete eigenvalue sits within {window:g} above the threshold"
            )
        if count_below(op_a, 1.0 - window) != evs_a.size:
            raise DegeneracyError(
                f"a discrete eigenvalue sits within {window:g} below the threshold"
            )
    if evs_a.size != n_threshold:
        raise ConsistencyError(
            f"discrete threshold count {evs_a.size} disagrees with the "
            f"reference count {n_threshold}"
        )
    tr_a = float(np.sum(1.0 - evs_a)) if evs_a.size else 0.0
    if v_desc.kind == "const":
        # a constant term commutes with the discretization, so the
        # perturbed matrix is the unperturbed one with the threshold
        # moved by eps*c; the window check above certifies that no
        # eigenvalue lies between the two thresholds, hence the mode set
        # below threshold is exactly evs_a and no second solve (with its
        # roundoff absorption into the 2/h^2 diagonal) is needed
        shift = epsilon * v_desc.a
        tr_b = float(np.sum((1.0 - shift) - evs_a)) if evs_a.size else 0.0
    else:
        op_b = discretize(
            PotentialSpec(
                c_coef=params.c_beta, mu=mu, beta=params.beta,
                extra=v_desc.amplified(epsilon),
            ),
            grid,
            "dirichlet",
        )
        evs_b = eigenvalues_below(op_b, 1.0, tol)
        if evs_b.size != evs_a.size:
            raise DegeneracyError(
                "perturbation moves an eigenvalue across the threshold; shrink epsilon"
            )
        tr_b = float(np.sum(1.0 - evs_b)) if evs_b.size else 0.0
    fd_value = (tr_a - tr_b) / epsilon

    rate = mu ** (1.0 / (2.0 + params.beta))
    v_vals = np.asarray(v_desc(ref.grid.nodes / rate), dtype=float)
    if n_threshold > 0:
        pairing = float(
            np.sum(ref.eigenfunctions[:n_threshold] ** 2 @ v_vals) * ref.grid.h
        )
    else:
        pairing = 0.0
    return HFReport(fd_value, pairing, abs(fd_value - pairing))


def required_mu_max(
    params: GrushinParams,
    lambda_max: float,
    x_max: float = 1.0,
    right_bc: str = "dirichlet",
    policy: GridPolicy | None = None,
) -> float:
    """A coupling whose mode has no spectrum below lambda_max.

    Doubling probe; build the cross table with mu_max at least 4x this
    value so the cutoff witness is guaranteed to land inside the table.
    """

    if not (lambda_max > 0.0 and math.isfinite(lambda_max)):
        raise ParameterDomainError("lambda_max must be finite and > 0")
    policy = policy if policy is not None else GridPolicy()
    grid = policy.grid_for(x_max, lambda_max)
    mu = 1.0
    for _ in range(200):
        pot = PotentialSpec(c_coef=params.c_beta, mu=mu, beta=params.beta)
        op = discretize(pot, grid, right_bc)
        if count_below(op, lambda_max) == 0:
            return mu
        mu *= 4.0
    raise IterationError("mode cutoff probe did not terminate", certificate="mu_probe")


def eigen_table_csv_bytes(table: EigenTable) -> bytes:
    rows = [
        (int(table.js[i]), int(table.ks[i]), int(table.mults[i]), float(table.lambdas[i]))
        for i in range(table.n_entries)
    ]
    return csv_bytes("j,k,multiplicity,lambda", rows)


def moment_report_json_obj(report: MomentReport) -> dict:
    return {
        "lambda": report.lam,
        "N": report.n_of_lambda,
        "moment": report.moment,
        "target": report.target,
        "abs_gap": report.abs_gap,
        "rel_gap": report.rel_gap,
    }
