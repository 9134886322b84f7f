"""Spectral zeta, the Weyl constant, and the boundary concentration
profiles in normal-form and physical coordinates."""

import math

import numpy as np
import pytest
import scipy.integrate

from grushin import (
    ConsistencyError,
    RegimeError,
    SupportWarning,
    WeylConstant,
    compute_profile_A,
    compute_profile_B,
    derive_params,
    profile_csv_bytes,
    profile_quantile,
    reference_spectrum,
    spectral_zeta,
    weyl_constant,
)
from grushin.profile import QuadratureConfig

# psi'(5/4)/16, the exact value of sum_{k>=0} (4k+5)^{-2}; frozen from a
# 30-digit evaluation before the build. The closed-form spectrum is 4k+5.
ZETA_N2B2_EXACT = 0.07483307215669442

_trapz = getattr(np, "trapezoid", None) or np.trapz


@pytest.fixture(scope="module")
def ref_n2b2():
    return reference_spectrum(derive_params(2, 2), k_max=48, certificate_tol=1e-4)


def test_spectral_zeta_oracle(ref_n2b2):
    value, tail = spectral_zeta(ref_n2b2, 2.0)
    assert value + tail == pytest.approx(ZETA_N2B2_EXACT, abs=5e-4)
    exact_partial = float(np.sum((4.0 * np.arange(48) + 5.0) ** -2.0))
    assert value == pytest.approx(exact_partial, rel=2e-3)


def test_spectral_zeta_divergent_rejected(ref_critical):
    with pytest.raises(RegimeError):
        spectral_zeta(ref_critical, 1.0)


def test_spectral_zeta_tail_monotone(ref200):
    tails = [spectral_zeta(ref200, 1.25, k)[1] for k in (25, 50, 100, 200)]
    assert all(b < a for a, b in zip(tails, tails[1:]))


def test_weyl_constant_identity(ref_n2b2):
    wc = weyl_constant(ref_n2b2)
    zeta, _ = spectral_zeta(ref_n2b2, 2.0)
    assert wc.value == ref_n2b2.params.l_cl * zeta
    l_cl = ref_n2b2.params.l_cl
    completed = wc.value + l_cl * wc.tail_estimate
    assert completed == pytest.approx(ZETA_N2B2_EXACT / (4.0 * math.pi), abs=5e-5)
    doubled = WeylConstant(
        value=l_cl * (2.0 * zeta),
        zeta_value=2.0 * zeta,
        k_used=wc.k_used,
        tail_estimate=wc.tail_estimate,
    )
    assert doubled.value == 2.0 * wc.value


def test_weyl_constant_regime(ref_critical):
    with pytest.raises(RegimeError):
        weyl_constant(ref_critical)


def test_profile_b_basic(profile_b):
    assert profile_b.kind == "B_of_x"
    assert profile_b.values[0] == 0.0
    assert np.all(profile_b.values >= 0.0)
    assert profile_b.normalization_defect <= 1e-2
    assert profile_b.total_integral == pytest.approx(1.0, abs=1e-2)
    assert math.isfinite(profile_b.vanishing_order)


def test_profile_b_regime(ref_critical):
    with pytest.raises(RegimeError):
        compute_profile_B(ref_critical)


def test_profile_b_per_mode_mass(ref200):
    """The k = 1 term must integrate over x to its weight lambda_1^{-d/2}.
    Independent route: simpson quadrature of the double integral from the raw
    eigenfunction, plus the exact power-law remainder beyond the box image."""
    d = ref200.params.d
    lam1 = float(ref200.eigenvalues[0])
    nodes = np.concatenate(([0.0], ref200.grid.nodes, [ref200.x_max]))
    phi = np.concatenate(([0.0], ref200.eigenfunctions[0], [0.0]))

    t_max = lam1 ** -0.5
    x_end = ref200.x_max / t_max
    ts = np.linspace(0.0, t_max, 801)
    xs = np.linspace(0.0, x_end, 4001)
    phi_tx = np.interp(np.outer(xs, ts), nodes, phi, right=0.0) ** 2
    inner = scipy.integrate.simpson(d * ts**d * phi_tx, x=ts, axis=1)
    mass = scipy.integrate.simpson(inner, x=xs)
    # Beyond x_end the term is d * M1 * x^{-(d+1)} with the saturated moment
    # M1 = int y^d phi^2 dy, so the missing mass is M1 * x_end^{-d} exactly.
    m1 = scipy.integrate.simpson(nodes**d * phi**2, x=nodes)
    mass += m1 * x_end**-d
    assert mass == pytest.approx(lam1 ** (-d / 2.0), rel=1e-3)


def test_profile_b_quadrature_stability(ref200, profile_b):
    finer = compute_profile_B(
        ref200,
        x_grid=profile_b.abscissae,
        quadrature_cfg=QuadratureConfig(t_points=512),
    )
    assert float(np.max(np.abs(finer.values - profile_b.values))) < 1e-3


def test_profile_b_k_truncation_stability(ref200, profile_b):
    half = compute_profile_B(ref200, x_grid=profile_b.abscissae, k_used=100)
    value, tail = spectral_zeta(ref200, ref200.params.d / 2.0, 100)
    assert abs(half.total_integral - profile_b.total_integral) <= tail / value


def test_profile_b_support_warning(ref200):
    reliable = ref200.eigenvalues[0] ** -0.5 * ref200.x_max
    with pytest.warns(SupportWarning):
        compute_profile_B(ref200, x_grid=np.linspace(0.0, 1.5 * reliable, 64))


def test_profile_a_normalization(profile_b):
    alpha = 1.2
    profile_a = compute_profile_A(profile_b, alpha)
    assert profile_a.kind == "A_of_u"
    assert profile_a.alpha == alpha
    assert np.all(profile_a.values >= 0.0)
    assert abs(profile_a.total_integral - 1.0) <= 2.0 * max(
        profile_b.normalization_defect, 1e-2
    )


def test_profile_a_back_substitution(profile_b):
    """Pulling A back to x must recover B within 1% in L1."""
    alpha = 1.2
    profile_a = compute_profile_A(profile_b, alpha)
    x = profile_b.abscissae[1:]
    p = 1.0 - alpha / 2.0
    u = (p * x) ** (1.0 / p)
    recovered = profile_a(u) * u ** (alpha / 2.0)
    l1_err = float(_trapz(np.abs(recovered - profile_b.values[1:]), x))
    l1_ref = float(_trapz(profile_b.values[1:], x))
    assert l1_err / l1_ref < 0.01


def test_profile_a_alpha1_spot_value(ref_n2b2):
    """alpha = 1 means A(u) = B(2 sqrt(u))/sqrt(u), so A(0.25) = 2 B(1)."""
    profile_b = compute_profile_B(ref_n2b2)
    profile_a = compute_profile_A(profile_b, 1.0)
    a_at = float(profile_a(0.25))
    b_at = float(profile_b(1.0))
    assert a_at == pytest.approx(2.0 * b_at, rel=1e-2)


def test_profile_a_mismatched_alpha(profile_b):
    with pytest.raises(ConsistencyError):
        compute_profile_A(profile_b, 1.0)


def test_profile_quantile(profile_b):
    assert profile_quantile(profile_b, 0.0) == 0.0
    if profile_b.ext_abscissae is not None:
        last = profile_b.ext_abscissae[-1]
    else:
        last = profile_b.abscissae[-1]
    assert profile_quantile(profile_b, 1.0) == last
    levels = [0.1, 0.5, 0.9, 0.95, 0.99]
    qs = [profile_quantile(profile_b, p) for p in levels]
    assert all(a <= b for a, b in zip(qs, qs[1:]))
    assert qs[0] > 0.0


def test_profile_csv_schema(profile_b):
    text = profile_csv_bytes(profile_b).decode("ascii")
    lines = text.splitlines()
    assert lines[0].startswith("# kind=B n=1 beta=3")
    assert "k_used=200" in lines[0]
    assert "defect=" in lines[0]
    assert lines[1] == "x,value"
    assert len(lines) == 2 + profile_b.abscissae.size
    assert text.endswith("\n") and "\r" not in text
