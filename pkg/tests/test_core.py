"""Derived parameters, the alpha/beta and u/x coordinate maps, and the
cross-manifold spectra."""

import math
from fractions import Fraction

import numpy as np
import pytest

from grushin import (
    CrossSpectrum,
    ParameterDomainError,
    SchemaError,
    alpha_of_beta,
    beta_of_alpha,
    circle_spectrum,
    derive_gas_planet,
    derive_params,
    load_cross_spectrum,
    map_u_to_x,
    map_x_to_u,
    save_cross_spectrum,
    torus_spectrum,
)


def test_derived_constants_n1_beta3():
    p = derive_params(1, 3)
    assert p.c_beta == 0.75 * 1.75 == 1.3125
    assert p.d == 2.5
    assert p.l_cl == pytest.approx(1.0 / math.pi, rel=1e-15)
    assert p.regime == "supercritical"
    assert p.supercritical


def test_derived_constants_other_dims():
    assert derive_params(2, 2).l_cl == pytest.approx(1.0 / (4.0 * math.pi), rel=1e-15)
    assert derive_params(1, 2).regime == "critical"
    assert derive_params(2, 0.5).regime == "subcritical"
    # exact rational classification at the critical threshold
    assert derive_params(3, Fraction(2, 3)).regime == "critical"


def test_regime_matches_product_rule():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        beta = float(rng.uniform(0.05, 8.0))
        p = derive_params(n, beta)
        assert p.c_beta > 0.0
        assert p.d > n
        assert p.supercritical == (n * beta > 2.0)


def test_parameter_domain_rejections():
    with pytest.raises(ParameterDomainError):
        derive_params(0, 3)
    with pytest.raises(ParameterDomainError):
        derive_params(1, -1.0)
    with pytest.raises(ParameterDomainError):
        derive_gas_planet(1, 2.0)


def test_alpha_beta_examples():
    assert beta_of_alpha(1.0) == pytest.approx(2.0, rel=1e-14)
    assert beta_of_alpha(4.0 / 3.0) == pytest.approx(4.0, rel=1e-12)
    gp = derive_gas_planet(1, 1.0)
    assert gp.rate_exponent == pytest.approx(1.0, rel=1e-14)
    assert derive_gas_planet(1, 1.2).theorem_range
    assert not derive_gas_planet(1, 0.5).theorem_range


def test_alpha_beta_round_trip_property():
    rng = np.random.default_rng(11)
    alphas = rng.uniform(1e-4, 2.0 - 1e-4, size=1000)
    for a in alphas:
        b = beta_of_alpha(float(a))
        assert b > 0.0
        assert alpha_of_beta(b) == pytest.approx(float(a), rel=1e-12)


def test_map_u_to_x_properties():
    assert map_u_to_x(0.0, 1.2) == 0.0
    u = np.linspace(0.0, 5.0, 200)
    x = map_u_to_x(u, 1.2)
    assert np.all(np.diff(x) > 0.0)
    for u0 in (0.1, 1.0, 10.0):
        assert map_x_to_u(map_u_to_x(u0, 0.7), 0.7) == pytest.approx(u0, rel=1e-12)


def test_circle_spectrum_examples():
    cs = circle_spectrum(2.0 * math.pi, 5.0)
    assert np.array_equal(cs.mus, [0.0, 1.0, 4.0])
    assert np.array_equal(cs.mults, [1, 2, 2])
    assert cs.volume == pytest.approx(2.0 * math.pi, rel=1e-15)

    tiny = circle_spectrum(2.0 * math.pi, 0.5)
    assert np.array_equal(tiny.mus, [0.0])
    assert np.array_equal(tiny.mults, [1])


def test_circle_weyl_count():
    p = derive_params(1, 3)
    t = 1.0e4
    cs = circle_spectrum(2.0 * math.pi, t)
    pred = p.l_cl * cs.volume * math.sqrt(t)
    assert abs(cs.counting(t) / pred - 1.0) < 0.10
    res = cs.weyl_residuals(p, [1.0e2, 1.0e3, 1.0e4])
    assert np.all(np.abs(res) < 0.25)


def test_torus_weyl_count():
    p = derive_params(2, 2)
    t = 1.0e4
    ts = torus_spectrum((2.0 * math.pi, 2.0 * math.pi), t)
    pred = p.l_cl * ts.volume * t
    assert abs(ts.counting(t) / pred - 1.0) < 0.10
    assert ts.volume == pytest.approx(4.0 * math.pi**2, rel=1e-15)
    # sign flips give even multiplicities above the bottom eigenvalue
    assert ts.mults[0] == 1
    assert np.all(ts.mults[1:] % 2 == 0)


def test_torus_rectangular_sides():
    ts = torus_spectrum((2.0 * math.pi, math.pi), 5.0)
    # mu = k1^2 + 4 k2^2 below 5: {0, 1, 4 (both routes), 5}
    assert np.array_equal(ts.mus, [0.0, 1.0, 4.0, 5.0])
    assert np.array_equal(ts.mults, [1, 2, 4, 4])


def test_c_m_accessor():
    p = derive_params(1, 3)
    cs = circle_spectrum(2.0 * math.pi, 5.0)
    assert cs.c_m(p) == pytest.approx((p.l_cl * cs.volume) ** -2.0, rel=1e-14)


def test_cross_file_round_trip(tmp_path):
    path = tmp_path / "cross.csv"
    cs = circle_spectrum(2.0 * math.pi, 1.5)
    save_cross_spectrum(cs, path)
    text = path.read_text(encoding="ascii")
    assert text.startswith("# volume=")
    assert "\r" not in text
    back = load_cross_spectrum(path)
    assert np.array_equal(back.mus, cs.mus)
    assert np.array_equal(back.mults, cs.mults)
    assert back.volume == cs.volume


def test_cross_file_matches_circle(tmp_path):
    path = tmp_path / "cross.csv"
    path.write_text("# volume=6.2831853 label=custom\n0,1\n1,2\n", encoding="ascii")
    cs = load_cross_spectrum(path)
    ref = circle_spectrum(2.0 * math.pi, 1.5)
    assert np.array_equal(cs.mus, ref.mus)
    assert np.array_equal(cs.mults, ref.mults)
    assert cs.volume == pytest.approx(ref.volume, rel=1e-7)


def test_cross_file_schema_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("# volume=1.0 label=x\n", encoding="ascii")
    with pytest.raises(SchemaError):
        load_cross_spectrum(empty)

    neg = tmp_path / "neg.csv"
    neg.write_text("# volume=1.0 label=x\n0,1\n1,-2\n", encoding="ascii")
    with pytest.raises(SchemaError):
        load_cross_spectrum(neg)

    nohead = tmp_path / "nohead.csv"
    nohead.write_text("0,1\n", encoding="ascii")
    with pytest.raises(SchemaError):
        load_cross_spectrum(nohead)


def test_cross_spectrum_validation():
    with pytest.raises(ParameterDomainError):
        CrossSpectrum(mus=np.array([1.0, 2.0]), mults=np.array([1, 1]), volume=1.0)
    with pytest.raises(ParameterDomainError):
        CrossSpectrum(mus=np.array([0.0, 2.0]), mults=np.array([1, 0]), volume=1.0)
    with pytest.raises(ParameterDomainError):
        CrossSpectrum(mus=np.array([0.0, 2.0]), mults=np.array([1, 1]), volume=-1.0)
