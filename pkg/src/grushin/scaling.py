"""Reference half-line spectrum and the scaling relations built on it.

The operator with unit coupling,

    P_1 = -d^2/dx^2 + c_beta/x^2 + x^beta   on (0, inf), Dirichlet at 0,

determines the whole family P_mu = -d^2/dx^2 + c_beta/x^2 + mu*x^beta through
the rescaling x -> mu^{1/(2+beta)} x: eigenvalues scale by mu^{2/(2+beta)} and
eigenfunctions by the matching unitary stretch. This module computes the first
K eigenpairs of P_1 on a certified truncation (Dirichlet and Neumann outer
conditions bracket the half-line eigenvalue, so their relative gap is a
rigorous error certificate), exposes the scaling relations, the eigenvalue
counting function n_s and its cutoff, and a JSON cache of the whole table.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from ._emit import to_json_bytes
from .core import GrushinParams, derive_params
from .errors import (
    IncompleteTableError,
    InconclusiveCountError,
    ParameterDomainError,
    SchemaError,
    TruncationError,
)
from .sturm1d import (
    Grid1D,
    GridPolicy,
    PotentialSpec,
    discretize,
    eigenfunction,
    smallest_eigenvalues,
    solve_with_refinement,
)

__all__ = [
    "ReferenceSpectrum",
    "reference_spectrum",
    "cached_reference_spectrum",
    "scaled_eigenvalue",
    "scaled_eigenfunction",
    "n_s",
    "cutoff_S",
    "fit_eigenvalue_growth",
    "powerlaw_tail_sum",
    "save_reference",
    "load_reference",
]


@dataclass(frozen=True)
class ReferenceSpectrum:
    """First K certified eigenpairs of the unit-coupling half-line operator.

    eigenvalues are Richardson-extrapolated Dirichlet values, ascending;
    eigenfunctions[k-1] samples the k-th eigenfunction on grid.nodes with
    discrete L2 normalization h*sum(v^2) = 1 (and v(0) = 0 implicitly);
    dn_gap[k-1] is the relative Dirichlet/Neumann truncation gap, each
    certified <= certificate_tol.
    """

    params: GrushinParams
    eigenvalues: np.ndarray
    grid: Grid1D
    eigenfunctions: np.ndarray
    dn_gap: np.ndarray
    certificate_tol: float

    def __post_init__(self):
        evs = np.asarray(self.eigenvalues, dtype=float)
        if evs.ndim != 1 or evs.size < 1:
            raise ParameterDomainError("eigenvalues must be a nonempty 1-d array")
        if not np.all(np.isfinite(evs)):
            raise ParameterDomainError("eigenvalues must be finite")
        if evs[0] <= 0.0:
            raise ParameterDomainError("lowest eigenvalue must be > 0")
        if np.any(np.diff(evs) <= 0.0):
            raise ParameterDomainError("eigenvalues must be strictly ascending")
        funcs = np.asarray(self.eigenfunctions, dtype=float)
        if funcs.shape != (evs.size, self.grid.n_points):
            raise ParameterDomainError(
                f"eigenfunctions must have shape (K, n_points) = "
                f"({evs.size}, {self.grid.n_points}), got {funcs.shape}"
            )
        gaps = np.asarray(self.dn_gap, dtype=float)
        if gaps.shape != evs.shape:
            raise ParameterDomainError("dn_gap must match eigenvalues in shape")
        if np.any(gaps > self.certificate_tol):
            raise ParameterDomainError(
                "truncation gap exceeds the declared certificate tolerance"
            )
        object.__setattr__(self, "eigenvalues", evs)
        object.__setattr__(self, "eigenfunctions", funcs)
        object.__setattr__(self, "dn_gap", gaps)

    @property
    def k_max(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def x_max(self) -> float:
        return self.grid.x_max

    def support_radius(self, threshold: float = 1e-8) -> float:
        """Largest node where any retained eigenfunction still exceeds
        threshold times its own sup norm."""
        nodes = self.grid.nodes
        radius = 0.0
        for row in self.eigenfunctions:
            big = np.abs(row) > threshold * np.max(np.abs(row))
            if np.any(big):
                radius = max(radius, float(nodes[np.nonzero(big)[0][-1]]))
        return radius


def _weyl_energy_guess(params: GrushinParams, k_max: int) -> float:
    """Energy near the k_max-th eigenvalue from the one-term phase-space law
    N(E) ~ (1/pi) E^{1/2 + 1/beta} * B(1/beta) for the x^beta well."""
    beta = params.beta
    phase = (
        math.gamma(1.0 + 1.0 / beta)
        * math.gamma(1.5)
        / math.gamma(1.5 + 1.0 / beta)
    ) / math.pi
    sigma = 0.5 + 1.0 / beta
    return (k_max / phase) ** (1.0 / sigma)


def reference_spectrum(
    params: GrushinParams,
    k_max: int = 200,
    certificate_tol: float = 1e-4,
    target_tol: float = 1e-5,
    policy: GridPolicy | None = None,
    max_growth: int = 5,
    func_ppw: float = 40.0,
    func_cap: int = 60000,
) -> ReferenceSpectrum:
    """Compute the first k_max certified eigenpairs of P_1.

    The truncation length starts at the classical turning point of the
    estimated top eigenvalue with a safety factor and grows by 1.4x until the
    Dirichlet/Neumann relative gap of every retained eigenvalue is below
    certificate_tol; failure after max_growth attempts raises TruncationError.

    Eigenvalues are certified on the Richardson refinement ladder, which may
    end on a very fine grid; the stored eigenfunctions live on a dedicated
    grid with func_ppw nodes per top-eigenvalue wavelength (at most func_cap
    nodes), enough for the downstream interpolating quadratures while keeping
    the table serializable.
    """
    if k_max < 1:
        raise ParameterDomainError("k_max must be >= 1")
    if not (0.0 < certificate_tol < 1.0):
        raise ParameterDomainError("certificate_tol must be in (0, 1)")
    if policy is None:
        policy = GridPolicy()
    pot = PotentialSpec(c_coef=params.c_beta, mu=1.0, beta=params.beta)
    energy = 1.3 * _weyl_energy_guess(params, k_max)
    x_max = energy ** (1.0 / params.beta) / 0.6

    gap = None
    rep_d = rep_n = None
    for _ in range(max_growth):
        # Seed near the accuracy requirement: the leading eigenvalue error of
        # the stencil is about h^2 * energy / 12 relatively, so starting at
        # that density saves most of the doubling ladder.
        h_acc = math.sqrt(12.0 * target_tol / energy)
        n0 = max(
            policy.n_for(x_max, energy),
            int(math.ceil(x_max / h_acc)),
        )
        n0 = min(n0, policy.max_nodes)
        rep_d = solve_with_refinement(
            pot, x_max, "dirichlet", k_max, target_tol, policy,
            kappa_hint=energy, n_initial=n0,
        )
        rep_n = solve_with_refinement(
            pot, x_max, "neumann", k_max, target_tol, policy,
            kappa_hint=energy, n_initial=n0,
        )
        if not (rep_d.converged and rep_n.converged):
            raise TruncationError(
                f"refinement stalled at rel. discrepancy "
                f"{max(rep_d.tolerance_achieved, rep_n.tolerance_achieved):g} "
                f"(target {target_tol:g}) at x_max={x_max:g}",
                certificate="richardson_refinement",
            )
        gap = np.abs(rep_d.eigenvalues - rep_n.eigenvalues) / np.abs(rep_d.eigenvalues)
        if float(np.max(gap)) <= certificate_tol:
            break
        x_max *= 1.4
    else:
        raise TruncationError(
            f"Dirichlet/Neumann gap {float(np.max(gap)):g} above certificate "
            f"tolerance {certificate_tol:g} after {max_growth} domain growths "
            f"(last x_max={x_max:g})",
            certificate="dirichlet_neumann_gap",
        )

    lam_top = float(rep_d.eigenvalues[-1])
    h_func = 2.0 * math.pi / (func_ppw * math.sqrt(max(lam_top, 1.0)))
    n_func = int(min(max(math.ceil(x_max / h_func), 2048), func_cap))
    func_grid = Grid1D(x_max=x_max, n_points=n_func)
    op = discretize(pot, func_grid, "dirichlet")
    shift_tol = 1e-9 * max(1.0, lam_top)
    shifts = smallest_eigenvalues(op, k_max, tol=shift_tol, kappa_hint=1.05 * lam_top)
    funcs = np.empty((k_max, n_func))
    for i in range(k_max):
        funcs[i] = eigenfunction(op, float(shifts[i]), tol=shift_tol)
    return ReferenceSpectrum(
        params=params,
        eigenvalues=rep_d.eigenvalues,
        grid=func_grid,
        eigenfunctions=funcs,
        dn_gap=gap,
        certificate_tol=certificate_tol,
    )


def scaled_eigenvalue(ref: ReferenceSpectrum, k: int, mu: float) -> float:
    """k-th eigenvalue of P_mu: mu^{2/(2+beta)} * lambda_k(P_1), k = 1..K."""
    if not 1 <= k <= ref.k_max:
        raise IncompleteTableError(
            f"k={k} outside the computed table 1..{ref.k_max}"
        )
    if not (mu > 0.0 and math.isfinite(mu)):
        raise ParameterDomainError("mu must be finite and > 0")
    return float(mu ** (2.0 / (2.0 + ref.params.beta)) * ref.eigenvalues[k - 1])


def scaled_eigenfunction(
    ref: ReferenceSpectrum, k: int, mu: float, x: np.ndarray
) -> np.ndarray:
    """k-th eigenfunction of P_mu sampled at x via the scaling unitary:
    phi_k(x; mu) = r^{1/2} phi_k^{(1)}(r x) with r = mu^{1/(2+beta)}."""
    if not 1 <= k <= ref.k_max:
        raise IncompleteTableError(
            f"k={k} outside the computed table 1..{ref.k_max}"
        )
    if not (mu > 0.0 and math.isfinite(mu)):
        raise ParameterDomainError("mu must be finite and > 0")
    r = mu ** (1.0 / (2.0 + ref.params.beta))
    nodes = np.concatenate(([0.0], ref.grid.nodes, [ref.grid.x_max]))
    vals = np.concatenate(([0.0], ref.eigenfunctions[k - 1], [0.0]))
    return math.sqrt(r) * np.interp(r * np.asarray(x, dtype=float), nodes, vals)


def n_s(ref: ReferenceSpectrum, kappa: float, s: float) -> int:
    """#{k <= K : s^{2/d} lambda_k(P_1) < kappa} for the fiber at weight s.

    Raises InconclusiveCountError when every retained eigenvalue is below
    kappa, since eigenvalues beyond the table could also contribute.
    """
    if not (s > 0.0 and math.isfinite(s)):
        raise ParameterDomainError("s must be finite and > 0")
    if not math.isfinite(kappa):
        raise ParameterDomainError("kappa must be finite")
    scale = s ** (2.0 / ref.params.d)
    count = int(np.searchsorted(scale * ref.eigenvalues, kappa, side="left"))
    if count == ref.k_max:
        raise InconclusiveCountError(
            f"all {ref.k_max} retained eigenvalues lie below kappa={kappa:g} "
            f"at s={s:g}; raise k_max to certify the count"
        )
    return count


def cutoff_S(ref: ReferenceSpectrum, kappa: float) -> float:
    """S = (kappa/lambda_1)^{d/2}: n_s(kappa, s) = 0 for every s > S."""
    if not (kappa > 0.0 and math.isfinite(kappa)):
        raise ParameterDomainError("kappa must be finite and > 0")
    return float((kappa / ref.eigenvalues[0]) ** (ref.params.d / 2.0))


def fit_eigenvalue_growth(ref: ReferenceSpectrum) -> tuple[float, float]:
    """One-term growth law lambda_k ~ c * k^p with p = 2*beta/(beta+2) fixed
    and c the geometric mean of lambda_k/k^p over the last decade of k."""
    beta = ref.params.beta
    p = 2.0 * beta / (beta + 2.0)
    k_hi = ref.k_max
    k_lo = max(1, (k_hi + 9) // 10)
    ks = np.arange(k_lo, k_hi + 1, dtype=float)
    logs = np.log(ref.eigenvalues[k_lo - 1 : k_hi]) - p * np.log(ks)
    return float(np.exp(np.mean(logs))), p


def powerlaw_tail_sum(c: float, p: float, exponent: float, k_from: int) -> float:
    """Euler-Maclaurin estimate of sum_{k > k_from} (c*k^p)^{-exponent}."""
    q = p * exponent
    if q <= 1.0:
        raise ParameterDomainError(
            f"tail exponent p*exponent = {q:g} <= 1: series diverges"
        )
    n = float(k_from)
    tail = n ** (1.0 - q) / (q - 1.0) - 0.5 * n**-q + (q / 12.0) * n ** (-q - 1.0)
    return float(c**-exponent * tail)


def _reference_to_dict(ref: ReferenceSpectrum) -> dict:
    return {
        "n": ref.params.n,
        "beta": ref.params.beta,
        "k_max": ref.k_max,
        "certificate_tol": ref.certificate_tol,
        "params": {
            "c_beta": ref.params.c_beta,
            "d": ref.params.d,
            "l_cl": ref.params.l_cl,
            "regime": ref.params.regime,
        },
        "eigenvalues": ref.eigenvalues,
        "dn_gap": ref.dn_gap,
        "grid": {"x_max": ref.grid.x_max, "n_points": ref.grid.n_points},
        "eigenfunctions": ref.eigenfunctions,
    }


def save_reference(ref: ReferenceSpectrum, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_json_bytes(_reference_to_dict(ref)))


def load_reference(path) -> ReferenceSpectrum:
    with open(path, "r", encoding="ascii") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    try:
        params = derive_params(int(doc["n"]), float(doc["beta"]))
        grid = Grid1D(
            x_max=float(doc["grid"]["x_max"]),
            n_points=int(doc["grid"]["n_points"]),
        )
        return ReferenceSpectrum(
            params=params,
            eigenvalues=np.asarray(doc["eigenvalues"], dtype=float),
            grid=grid,
            eigenfunctions=np.asarray(doc["eigenfunctions"], dtype=float),
            dn_gap=np.asarray(doc["dn_gap"], dtype=float),
            certificate_tol=float(doc["certificate_tol"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed reference table ({exc})") from None


def _cache_path(cache_dir: str, params: GrushinParams, k_max: int, tol: float) -> str:
    tag = f"n{params.n}_beta{params.beta:.17g}_k{k_max}_tol{tol:.17g}"
    safe = tag.replace(".", "p").replace("-", "m").replace("+", "")
    return os.path.join(cache_dir, f"reference_{safe}.json")


def cached_reference_spectrum(
    params: GrushinParams,
    k_max: int = 200,
    certificate_tol: float = 1e-4,
    cache_dir: str | None = None,
    **kwargs,
) -> ReferenceSpectrum:
    """reference_spectrum with a JSON file cache.

    cache_dir defaults to the GRUSHIN_CACHE_DIR environment variable; with
    neither set the computation is simply not cached. A cached table is used
    only if (n, beta, k_max, certificate_tol) all match exactly; any mismatch
    or parse failure triggers recomputation and overwrite.
    """
    if cache_dir is None:
        cache_dir = os.environ.get("GRUSHIN_CACHE_DIR")
    if not cache_dir:
        return reference_spectrum(params, k_max, certificate_tol, **kwargs)
    path = _cache_path(cache_dir, params, k_max, certificate_tol)
    if os.path.exists(path):
        try:
            ref = load_reference(path)
            if (
                ref.params.n == params.n
                and ref.params.beta == params.beta
                and ref.k_max == k_max
                and ref.certificate_tol == certificate_tol
            ):
                return ref
        except (SchemaError, ParameterDomainError):
            pass
    ref = reference_spectrum(params, k_max, certificate_tol, **kwargs)
    os.makedirs(cache_dir, exist_ok=True)
    save_reference(ref, path)
    return ref
