"""Parameter derivations, coordinate maps, and cross-section spectra.

Everything downstream is driven by a pair (n, beta): n is the dimension of
the closed cross manifold M, beta > 0 the degeneracy exponent of the metric.
Derived constants:

    c_beta = (beta*n/4) * (1 + beta*n/4)     inverse-square coefficient
    d      = n * (1 + beta/2)                effective (Hausdorff) dimension
    l_cl   = (4*pi)^(-n/2) / Gamma(1 + n/2)  semiclassical constant

The regime split is supercritical (n*beta > 2), critical (= 2), subcritical
(< 2); boundary-concentration profiles only exist in the supercritical one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ParameterDomainError, SchemaError

__all__ = [
    "GrushinParams",
    "GasPlanetParams",
    "CrossSpectrum",
    "derive_params",
    "derive_gas_planet",
    "alpha_of_beta",
    "beta_of_alpha",
    "map_u_to_x",
    "map_x_to_u",
    "circle_spectrum",
    "torus_spectrum",
    "load_cross_spectrum",
    "save_cross_spectrum",
]

SUPERCRITICAL = "supercritical"
CRITICAL = "critical"
SUBCRITICAL = "subcritical"


@dataclass(frozen=True)
class GrushinParams:
    """Derived constants for one (n, beta) pair."""

    n: int
    beta: float
    c_beta: float
    d: float
    l_cl: float
    regime: str

    @property
    def supercritical(self) -> bool:
        return self.regime == SUPERCRITICAL


@dataclass(frozen=True)
class GasPlanetParams:
    """Gas-planet parametrization: density vanishing like dist^alpha."""

    alpha: float
    grushin: GrushinParams
    rate_exponent: float  # boundary-convergence rate exponent 1/(2 - alpha)
    theorem_range: bool  # alpha inside (2/(n+1), 2), equivalently supercritical


def _semiclassical_constant(n: int) -> float:
    return (4.0 * math.pi) ** (-n / 2.0) / math.gamma(1.0 + n / 2.0)


def _classify(n: int, beta) -> str:
    # Exact comparison when beta is rational (int or Fraction); plain float
    # comparison otherwise, no tolerance band.
    if isinstance(beta, (int, Fraction)):
        prod = Fraction(n) * Fraction(beta)
        two = Fraction(2)
    else:
        prod = n * beta
        two = 2.0
    if prod > two:
        return SUPERCRITICAL
    if prod == two:
        return CRITICAL
    return SUBCRITICAL


def derive_params(n: int, beta) -> GrushinParams:
    """Derive c_beta, d, l_cl and the regime for integer n >= 1, beta > 0.

    beta may be an int or Fraction to get exact regime classification at
    the critical boundary n*beta = 2.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise ParameterDomainError(f"n must be an integer >= 1, got {n!r}")
    bval = float(beta)
    if not math.isfinite(bval) or bval <= 0.0:
        raise ParameterDomainError(f"beta must be finite and > 0, got {beta!r}")
    regime = _classify(int(n), beta)
    nb4 = bval * n / 4.0
    return GrushinParams(
        n=int(n),
        beta=bval,
        c_beta=nb4 * (1.0 + nb4),
        d=n * (1.0 + bval / 2.0),
        l_cl=_semiclassical_constant(int(n)),
        regime=regime,
    )


def alpha_of_beta(beta):
    """Map degeneracy exponent to density exponent: alpha = 2*beta/(2+beta)."""
    beta = np.asarray(beta, dtype=float) if np.ndim(beta) else float(beta)
    if np.any(np.asarray(beta) <= 0.0):
        raise ParameterDomainError("beta must be > 0")
    return 2.0 * beta / (2.0 + beta)


def beta_of_alpha(alpha):
    """Inverse map: beta = 2*alpha/(2-alpha) for alpha in (0, 2)."""
    alpha = np.asarray(alpha, dtype=float) if np.ndim(alpha) else float(alpha)
    a = np.asarray(alpha)
    if np.any(a <= 0.0) or np.any(a >= 2.0):
        raise ParameterDomainError("alpha must lie in (0, 2)")
    return 2.0 * alpha / (2.0 - alpha)


def derive_gas_planet(n: int, alpha: float) -> GasPlanetParams:
    """Derive the Grushin normal-form parameters for a gas-planet exponent."""
    a = float(alpha)
    if not (0.0 < a < 2.0):
        raise ParameterDomainError(f"alpha must lie in (0, 2), got {alpha!r}")
    grushin = derive_params(n, beta_of_alpha(a))
    return GasPlanetParams(
        alpha=a,
        grushin=grushin,
        rate_exponent=1.0 / (2.0 - a),
        theorem_range=grushin.supercritical,
    )


def map_u_to_x(u, alpha: float):
    """Physical boundary distance u to normal-form coordinate x.

    x = (1 - alpha/2)^(-1) * u^(1 - alpha/2); strictly increasing on u >= 0.
    """
    a = float(alpha)
    if not (0.0 < a < 2.0):
        raise ParameterDomainError("alpha must lie in (0, 2)")
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0.0):
        raise ParameterDomainError("u must be >= 0")
    p = 1.0 - a / 2.0
    out = (u_arr**p) / p
    return out if np.ndim(u) else float(out)


def map_x_to_u(x, alpha: float):
    """Inverse of map_u_to_x: u = ((1 - alpha/2) * x)^(2/(2 - alpha))."""
    a = float(alpha)
    if not (0.0 < a < 2.0):
        raise ParameterDomainError("alpha must lie in (0, 2)")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0.0):
        raise ParameterDomainError("x must be >= 0")
    p = 1.0 - a / 2.0
    out = (p * x_arr) ** (1.0 / p)
    return out if np.ndim(x) else float(out)


@dataclass(frozen=True)
class CrossSpectrum:
    """Laplace spectrum of the closed cross manifold M.

    mus are the distinct eigenvalues in strictly ascending order, mults the
    multiplicities. volume is the Riemannian volume v_G(M).
    """

    mus: np.ndarray
    mults: np.ndarray
    volume: float
    label: str = ""

    def __post_init__(self):
        mus = np.asarray(self.mus, dtype=float)
        mults = np.asarray(self.mults, dtype=np.int64)
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "mults", mults)
        if mus.ndim != 1 or mults.shape != mus.shape or mus.size == 0:
            raise ParameterDomainError("cross spectrum needs matching 1-d mu/mult arrays")
        if mus[0] != 0.0:
            raise ParameterDomainError("closed-manifold spectrum must start at mu = 0")
        if np.any(np.diff(mus) <= 0.0):
            raise ParameterDomainError("cross eigenvalues must be strictly ascending")
        if np.any(mults < 1):
            raise ParameterDomainError("multiplicities must be >= 1")
        if not (self.volume > 0.0 and math.isfinite(self.volume)):
            raise ParameterDomainError("volume must be finite and > 0")

    def __len__(self) -> int:
        return int(self.mus.size)

    def counting(self, t) -> np.ndarray:
        """Number of eigenvalues <= t counted with multiplicity."""
        t_arr = np.asarray(t, dtype=float)
        csum = np.concatenate(([0], np.cumsum(self.mults)))
        idx = np.searchsorted(self.mus, t_arr, side="right")
        out = csum[idx]
        return out if np.ndim(t) else int(out)

    def c_m(self, params: GrushinParams) -> float:
        """Metric normalization constant c_M = (l_cl * v_G)^(-2/n)."""
        return (params.l_cl * self.volume) ** (-2.0 / params.n)

    def weyl_residuals(self, params: GrushinParams, t_samples) -> np.ndarray:
        """Relative residuals of the counting function against l_cl*v_G*t^(n/2).

        Recorded, not asserted: built-in spectra are checked against this in
        the tests with the residuals printed alongside.
        """
        t_arr = np.asarray(t_samples, dtype=float)
        pred = params.l_cl * self.volume * t_arr ** (params.n / 2.0)
        return (self.counting(t_arr) - pred) / pred


def circle_spectrum(length: float, mu_max: float) -> CrossSpectrum:
    """Spectrum of -d^2/dy^2 on a circle of circumference `length`.

    Eigenvalues (2*pi*j/length)^2: multiplicity 1 for j = 0, else 2.
    """
    if not (length > 0.0 and math.isfinite(length)):
        raise ParameterDomainError("circle length must be finite and > 0")
    if not (mu_max >= 0.0):
        raise ParameterDomainError("mu_max must be >= 0")
    base = 2.0 * math.pi / length
    j_max = int(math.floor(math.sqrt(mu_max) / base))
    j = np.arange(j_max + 1)
    mus = (base * j) ** 2
    keep = mus <= mu_max
    mus = mus[keep]
    mults = np.where(j[keep] == 0, 1, 2).astype(np.int64)
    return CrossSpectrum(mus=mus, mults=mults, volume=length, label=f"circle:{length:g}")


def torus_spectrum(lengths: tuple[float, float], mu_max: float) -> CrossSpectrum:
    """Spectrum of the flat torus with side lengths (L1, L2).

    Eigenvalues (2*pi*k1/L1)^2 + (2*pi*k2/L2)^2 over integer lattice points;
    multiplicities come from exact coincidences only (sign flips always, plus
    arithmetic coincidences grouped via integer arithmetic when L1 == L2).
    """
    l1, l2 = (float(lengths[0]), float(lengths[1]))
    if not (l1 > 0.0 and l2 > 0.0 and math.isfinite(l1) and math.isfinite(l2)):
        raise ParameterDomainError("torus side lengths must be finite and > 0")
    if not (mu_max >= 0.0):
        raise ParameterDomainError("mu_max must be >= 0")
    b1 = (2.0 * math.pi / l1) ** 2
    b2 = (2.0 * math.pi / l2) ** 2
    k1_max = int(math.floor(math.sqrt(mu_max / b1)))
    counts: dict[float, int] = {}
    if l1 == l2:
        # Group by the integer k1^2 + k2^2 so arithmetic degeneracies are exact.
        norms: dict[int, int] = {}
        for k1 in range(-k1_max, k1_max + 1):
            rem = mu_max / b1 - k1 * k1
            if rem < 0.0:
                continue
            k2_max = int(math.floor(math.sqrt(rem)))
            for k2 in range(-k2_max, k2_max + 1):
                q = k1 * k1 + k2 * k2
                norms[q] = norms.get(q, 0) + 1
        counts = {b1 * q: m for q, m in norms.items() if b1 * q <= mu_max}
    else:
        for k1 in range(-k1_max, k1_max + 1):
            rem = mu_max - b1 * k1 * k1
            if rem < 0.0:
                continue
            k2_max = int(math.floor(math.sqrt(rem / b2)))
            for k2 in range(-k2_max, k2_max + 1):
                mu = b1 * (k1 * k1) + b2 * (k2 * k2)
                if mu <= mu_max:
                    counts[mu] = counts.get(mu, 0) + 1
    mus = np.array(sorted(counts), dtype=float)
    mults = np.array([counts[m] for m in mus], dtype=np.int64)
    return CrossSpectrum(
        mus=mus, mults=mults, volume=l1 * l2, label=f"torus:{l1:g}x{l2:g}"
    )


def load_cross_spectrum(path) -> CrossSpectrum:
    """Read a cross spectrum from CSV.

    Format: first line '# volume=<float> label=<text>', then one 'mu,mult'
    row per distinct eigenvalue, ascending. Schema errors name the 1-based
    line they occur on.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError(f"{path}: line 1: empty cross-spectrum file")
    head = lines[0]
    if not head.startswith("# volume="):
        raise SchemaError(f"{path}: line 1: expected '# volume=<float> label=<text>'")
    body = head[len("# volume=") :]
    vol_part, _, label_part = body.partition(" label=")
    try:
        volume = float(vol_part)
    except ValueError:
        raise SchemaError(f"{path}: line 1: bad volume {vol_part!r}") from None
    mus, mults = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 2:
            raise SchemaError(f"{path}: line {lineno}: expected 'mu,multiplicity'")
        try:
            mu = float(parts[0])
            mult = int(parts[1])
        except ValueError:
            raise SchemaError(
                f"{path}: line {lineno}: bad row {raw!r} (need float,int)"
            ) from None
        mus.append(mu)
        mults.append(mult)
    if not mus:
        raise SchemaError(f"{path}: line 2: no eigenvalue rows")
    try:
        return CrossSpectrum(
            mus=np.array(mus), mults=np.array(mults), volume=volume, label=label_part
        )
    except ParameterDomainError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def save_cross_spectrum(cross: CrossSpectrum, path) -> None:
    """Write a cross spectrum in the load_cross_spectrum CSV format."""
    rows = [f"# volume={cross.volume:.17g} label={cross.label}"]
    rows += [
        f"{mu:.17g},{int(m)}" for mu, m in zip(cross.mus, cross.mults)
    ]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
