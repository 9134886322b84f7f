"""Finite-difference eigensolver for half-line model operators.

Operators have the form

    H u = -u'' + q(x) u,   q(x) = c_coef/x^2 + mu*x^beta + extra(x)

on (0, x_max] with an implicit Dirichlet condition at 0 (the grid never
contains x = 0) and Dirichlet or Neumann at x_max. Discretization is the
standard second-order three-point stencil on a uniform interior grid;
eigenvalues come from Sturm-sequence counting plus bisection, eigenvectors
from seeded inverse iteration, and refined solves Richardson-extrapolate a
pair of solutions at N and 2N+1 interior nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    ConsistencyError,
    DegeneracyError,
    DiscretizationError,
    IterationError,
    ParameterDomainError,
    ResolutionError,
    SchemaError,
    ToleranceError,
)

__all__ = [
    "Grid1D",
    "GridPolicy",
    "Potential",
    "PotentialSpec",
    "TridiagonalOperator",
    "EigenSolveReport",
    "discretize",
    "count_below",
    "eigenvalues_below",
    "smallest_eigenvalues",
    "eigenfunction",
    "trace_neg",
    "solve_with_refinement",
    "load_tabulated_potential",
]

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class Grid1D:
    """Uniform interior grid on (0, x_max]: nodes i*h, i = 1..n_points."""

    x_max: float
    n_points: int

    def __post_init__(self):
        if not (self.x_max > 0.0 and math.isfinite(self.x_max)):
            raise ParameterDomainError("x_max must be finite and > 0")
        if self.n_points < 1:
            raise ParameterDomainError("n_points must be >= 1")

    @property
    def h(self) -> float:
        return self.x_max / (self.n_points + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n_points + 1)


@dataclass(frozen=True)
class GridPolicy:
    """Grid density rule: at least `nodes_per_wavelength` nodes per local
    wavelength 2*pi/sqrt(kappa) at the target energy kappa."""

    nodes_per_wavelength: float = 20.0
    min_nodes: int = 64
    max_nodes: int = 2_000_000

    def n_for(self, x_max: float, kappa: float) -> int:
        kappa = max(float(kappa), 1.0)
        h = 2.0 * math.pi / (self.nodes_per_wavelength * math.sqrt(kappa))
        n = max(int(math.ceil(x_max / h)) - 1, self.min_nodes)
        if n > self.max_nodes:
            raise ResolutionError(
                f"grid policy needs {n} nodes at kappa={kappa:g}, cap is {self.max_nodes}",
                certificate="grid_policy",
            )
        return n

    def grid_for(self, x_max: float, kappa: float) -> Grid1D:
        return Grid1D(x_max=x_max, n_points=self.n_for(x_max, kappa))


@dataclass(frozen=True)
class Potential:
    """Bounded potential descriptor, closed under the (lambda, sqrt(lambda))
    rescaling used by the trace functionals.

    Kinds: 'const' a; 'exp' a*e^(-b*x); 'indicator' a*1[x <= b];
    'table' linear interpolation of (xs, vs) with clamped ends.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    xs: np.ndarray | None = None
    vs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("const", "exp", "indicator", "table"):
            raise ParameterDomainError(f"unknown potential kind {self.kind!r}")
        if self.kind == "table":
            xs = np.asarray(self.xs, dtype=float)
            vs = np.asarray(self.vs, dtype=float)
            if xs.ndim != 1 or xs.shape != vs.shape or xs.size < 2:
                raise ParameterDomainError("tabulated potential needs matching x/V arrays")
            if np.any(np.diff(xs) <= 0.0):
                raise ParameterDomainError("tabulated abscissae must be strictly ascending")
            if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(vs))):
                raise ParameterDomainError("tabulated potential must be finite")
            object.__setattr__(self, "xs", xs)
            object.__setattr__(self, "vs", vs)
        else:
            if not (math.isfinite(self.a) and math.isfinite(self.b)):
                raise ParameterDomainError("potential parameters must be finite")
            if self.kind == "exp" and self.b < 0.0:
                raise ParameterDomainError("exp potential needs decay rate b >= 0")
            if self.kind == "indicator" and self.b <= 0.0:
                raise ParameterDomainError("indicator potential needs width b > 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.full_like(x, self.a)
        if self.kind == "exp":
            return self.a * np.exp(-self.b * x)
        if self.kind == "indicator":
            return np.where(x <= self.b, self.a, 0.0)
        return np.interp(x, self.xs, self.vs)

    def scaled(self, lam: float) -> "Potential":
        """The rescaled descriptor V_lam(x) = lam * V(sqrt(lam) * x)."""
        if not (lam > 0.0 and math.isfinite(lam)):
            raise ParameterDomainError("scaling parameter must be finite and > 0")
        r = math.sqrt(lam)
        if self.kind == "const":
            return Potential("const", a=lam * self.a)
        if self.kind == "exp":
            return Potential("exp", a=lam * self.a, b=self.b * r)
        if self.kind == "indicator":
            return Potential("indicator", a=lam * self.a, b=self.b / r)
        return Potential("table", xs=self.xs / r, vs=lam * self.vs)

    def amplified(self, factor: float) -> "Potential":
        """The descriptor for factor * V(x) (amplitude only, no rescaling)."""
        if not math.isfinite(factor):
            raise ParameterDomainError("amplitude factor must be finite")
        if self.kind == "table":
            return Potential("table", xs=self.xs, vs=factor * self.vs)
        return Potential(self.kind, a=factor * self.a, b=self.b)

    @property
    def sup_norm(self) -> float:
        if self.kind == "table":
            return float(np.max(np.abs(self.vs)))
        if self.kind == "exp" and self.b > 0.0:
            return abs(self.a)
        return abs(self.a)

    @property
    def tail_value(self) -> float:
        """Limit value at x -> +inf (tables extrapolate their last sample)."""
        if self.kind == "const":
            return self.a
        if self.kind == "exp":
            return 0.0 if self.b > 0.0 else self.a
        if self.kind == "indicator":
            return 0.0
        return float(self.vs[-1])


@dataclass(frozen=True)
class PotentialSpec:
    """q(x) = c_coef/x^2 + mu*x^beta + extra(x)."""

    c_coef: float
    mu: float
    beta: float
    extra: Potential | None = None

    def __post_init__(self):
        if not (self.c_coef >= 0.0 and math.isfinite(self.c_coef)):
            raise ParameterDomainError("c_coef must be finite and >= 0")
        if not (self.mu >= 0.0 and math.isfinite(self.mu)):
            raise ParameterDomainError("mu must be finite and >= 0")
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ParameterDomainError("beta must be finite and > 0")

    def q(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.c_coef != 0.0:
            out += self.c_coef / (x * x)
        if self.mu != 0.0:
            out += self.mu * x**self.beta
        if self.extra is not None:
            out += self.extra(x)
        return out


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric tridiagonal discretization of H on a Grid1D."""

    diag: np.ndarray
    off: np.ndarray
    grid: Grid1D
    right_bc: str

    @property
    def n(self) -> int:
        return int(self.diag.size)


@dataclass(frozen=True)
class EigenSolveReport:
    eigenvalues: np.ndarray
    tolerance_achieved: float
    converged: bool
    grid: Grid1D
    refinement: dict = field(default_factory=dict)


def discretize(pot: PotentialSpec, grid: Grid1D, right_bc: str = "dirichlet") -> TridiagonalOperator:
    """Three-point stencil: diag 2/h^2 + q(x_i), off-diagonal -1/h^2.

    Dirichlet at x = 0 is implicit (no node there). right_bc 'dirichlet'
    drops the node at x_max; 'neumann' closes the last row as 1/h^2 + q(x_N).
    """
    if right_bc not in ("dirichlet", "neumann"):
        raise ParameterDomainError(f"right_bc must be dirichlet|neumann, got {right_bc!r}")
    h = grid.h
    x = grid.nodes
    q = pot.q(x)
    inv_h2 = 1.0 / (h * h)
    diag = 2.0 * inv_h2 + q
    if right_bc == "neumann":
        diag = diag.copy()
        diag[-1] = inv_h2 + q[-1]
    off = np.full(grid.n_points - 1, -inv_h2)
    if not np.all(np.isfinite(diag)):
        raise DiscretizationError(
            "potential overflows float64 on this grid (q or 1/h^2 not finite)"
        )
    return TridiagonalOperator(diag=diag, off=off, grid=grid, right_bc=right_bc)


def count_below(op: TridiagonalOperator, kappa: float) -> int:
    """Number of eigenvalues strictly below kappa (Sturm inertia count)."""
    if not math.isfinite(kappa):
        raise ParameterDomainError("kappa must be finite")
    return int(_kernels.sturm_count(op.diag, op.off, float(kappa)))


def _tol_floor(lo: float, hi: float) -> float:
    return 4.0 * _EPS * max(abs(lo), abs(hi), 1e-300)


def eigenvalues_below(op: TridiagonalOperator, kappa: float, tol: float) -> np.ndarray:
    """All eigenvalues strictly below kappa, ascending, to absolute width tol."""
    if not math.isfinite(kappa):
        raise ParameterDomainError("kappa must be finite")
    lo, hi = _kernels.gershgorin(op.diag, op.off)
    floor = _tol_floor(lo, kappa)
    if not (tol > 0.0) or tol < floor:
        raise ToleranceError(
            f"tol={tol:g} below achievable resolution {floor:g} for this operator"
        )
    return _kernels.bisect_below(op.diag, op.off, float(kappa), float(tol))


def smallest_eigenvalues(
    op: TridiagonalOperator, k: int, tol: float, kappa_hint: float = 1.0
) -> np.ndarray:
    """The k smallest eigenvalues, ascending."""
    if k < 1:
        raise ParameterDomainError("k must be >= 1")
    if k > op.n:
        raise ParameterDomainError(f"k={k} exceeds matrix size {op.n}")
    lo, _ = _kernels.gershgorin(op.diag, op.off)
    kappa = _kernels.raise_until_count(op.diag, op.off, k, max(kappa_hint, 1.0))
    floor = _tol_floor(lo, kappa)
    if not (tol > 0.0) or tol < floor:
        raise ToleranceError(
            f"tol={tol:g} below achievable resolution {floor:g} for this operator"
        )
    return _kernels._bisect(op.diag, op.off, k, lo, kappa, float(tol))


def eigenfunction(
    op: TridiagonalOperator,
    lambda_hat: float,
    tol: float | None = None,
    maxiter: int = 50,
) -> np.ndarray:
    """Eigenvector for the isolated eigenvalue nearest lambda_hat.

    Inverse iteration from the fixed seed ((i mod 7) + 1)/7. The result is
    normalized to h * sum v^2 = 1 and signed so the first entry of magnitude
    above 1e-8 is positive.
    """
    if tol is None:
        tol = 1e-8 * (1.0 + abs(lambda_hat))
    c_hi = count_below(op, lambda_hat + 10.0 * tol)
    c_lo = count_below(op, lambda_hat - 10.0 * tol)
    if c_hi - c_lo >= 2:
        raise DegeneracyError(
            f"two eigenvalues within 10*tol={10 * tol:g} of shift {lambda_hat:g}"
        )
    if c_hi - c_lo == 0:
        raise ConsistencyError(
            f"no eigenvalue within 10*tol={10 * tol:g} of shift {lambda_hat:g}"
        )
    v, iters, ok = _kernels.inverse_iteration(
        op.diag, op.off, float(lambda_hat), maxiter, 1e-13
    )
    if not ok:
        raise IterationError(
            f"inverse iteration did not converge in {iters} iterations at shift {lambda_hat:g}",
            certificate="inverse_iteration",
        )
    v = v / math.sqrt(op.grid.h)  # euclidean -> discrete L2 normalization
    for val in v:
        if abs(val) > 1e-8:
            if val < 0.0:
                v = -v
            break
    return v


def trace_neg(op: TridiagonalOperator, kappa: float, tol: float | None = None) -> float:
    """Riesz trace sum((kappa - lambda_i)_+) over eigenvalues below kappa."""
    if tol is None:
        tol = max(1e-11 * max(1.0, abs(kappa)), _tol_floor(0.0, kappa))
    evs = eigenvalues_below(op, kappa, tol)
    if evs.size == 0:
        return 0.0
    return float(np.sum(kappa - evs))


def solve_with_refinement(
    pot: PotentialSpec,
    x_max: float,
    right_bc: str,
    k_wanted: int,
    target_tol: float,
    policy: GridPolicy | None = None,
    kappa_hint: float | None = None,
    n_initial: int | None = None,
) -> EigenSolveReport:
    """Richardson-refined solve for the k_wanted smallest eigenvalues.

    Solves at N and 2N+1 interior nodes, extrapolates assuming second-order
    convergence, and doubles the grid until the relative (N vs 2N+1)
    discrepancy meets target_tol or the node cap is hit; in the latter case
    the best result is returned flagged non-converged.

    Parameters
    ----------
    pot, x_max, right_bc : operator description as in discretize.
    k_wanted : number of low eigenvalues to certify.
    target_tol : relative discrepancy target for max_k |l_N - l_2N|/l_2N.
    policy : grid policy; its minimum and cap bound the refinement ladder.
    kappa_hint : optional energy scale used to seed the initial grid density.
    n_initial : explicit starting node count, overriding the policy seed
        (still clipped to the policy cap).
    """
    if policy is None:
        policy = GridPolicy()
    if target_tol <= 0.0:
        raise ParameterDomainError("target_tol must be > 0")
    if n_initial is not None:
        n = min(int(n_initial), policy.max_nodes)
    elif kappa_hint is not None and kappa_hint > 0:
        n = policy.n_for(x_max, kappa_hint)
    else:
        n = max(policy.min_nodes, 256)
    n = max(n, 2 * k_wanted + 1, policy.min_nodes)

    def _solve(n_pts: int) -> np.ndarray:
        grid = Grid1D(x_max=x_max, n_points=n_pts)
        op = discretize(pot, grid, right_bc)
        lo, hi = _kernels.gershgorin(op.diag, op.off)
        tol_b = max(1e-12 * max(1.0, kappa_hint or 1.0), _tol_floor(lo, hi))
        return smallest_eigenvalues(op, k_wanted, tol_b, kappa_hint or 1.0)

    coarse = _solve(n)
    best = None
    while True:
        n_fine = 2 * n + 1
        if n_fine > policy.max_nodes:
            if best is None:
                grid = Grid1D(x_max=x_max, n_points=n)
                best = EigenSolveReport(
                    eigenvalues=coarse,
                    tolerance_achieved=math.inf,
                    converged=False,
                    grid=grid,
                    refinement={},
                )
            return best
        fine = _solve(n_fine)
        extrapolated = fine + (fine - coarse) / 3.0
        disc = np.abs(fine - coarse)
        rel = float(np.max(disc / np.maximum(np.abs(fine), 1e-300)))
        best = EigenSolveReport(
            eigenvalues=extrapolated,
            tolerance_achieved=rel,
            converged=rel <= target_tol,
            grid=Grid1D(x_max=x_max, n_points=n_fine),
            refinement={"coarse": coarse, "fine": fine, "extrapolated": extrapolated},
        )
        if best.converged:
            return best
        n, coarse = n_fine, fine


def load_tabulated_potential(path) -> Potential:
    """Read a tabulated potential from two-column CSV 'x,V', ascending in x."""
    xs, vs = [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise SchemaError(f"{path}: line {lineno}: expected 'x,V'")
            try:
                xs.append(float(parts[0]))
                vs.append(float(parts[1]))
            except ValueError:
                raise SchemaError(f"{path}: line {lineno}: bad row {line!r}") from None
    if len(xs) < 2:
        raise SchemaError(f"{path}: need at least two samples")
    try:
        return Potential("table", xs=np.array(xs), vs=np.array(vs))
    except ParameterDomainError as exc:
        raise SchemaError(f"{path}: {exc}") from None
