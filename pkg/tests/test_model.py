"""Product-model assembly, counting statistics, trace functionals, the
halfline trace density, density moments, and the perturbation check."""

import math

import numpy as np
import pytest

from grushin import (
    ConsistencyError,
    CrossObservable,
    CrossSpectrum,
    DegeneracyError,
    EigenTable,
    Grid1D,
    GridPolicy,
    IncompleteTableError,
    ModelOperator,
    ParameterDomainError,
    Potential,
    PotentialSpec,
    RegimeError,
    ResolutionError,
    TableRangeError,
    assemble_spectrum,
    count_below,
    counting_function,
    density_moment,
    derive_params,
    discretize,
    eigen_table_csv_bytes,
    hellmann_feynman,
    lemma1_rhs,
    mass_capture,
    n_s,
    required_mu_max,
    riesz_mean,
    spectral_zeta,
    trace_with_potential,
    weyl_fit,
)

# First Dirichlet eigenvalue of -u'' + 1.3125/x^2 on (0, 1): the squared
# first positive zero of the Bessel function J_{5/4}. Frozen from scipy
# brentq on jv(1.25, .) before the build.
BESSEL_GROUND_BOX1 = 17.350776131369486


def _synthetic_table(mult_scale=1):
    """Exact power-law counting data: N(16) = 224, N(256) = 7168,
    N(4096) = 229376, i.e. N(lambda) = 7 lambda^{5/4} at those points."""
    params = derive_params(1, 3)
    grid = Grid1D(x_max=1.0, n_points=8)
    mults = mult_scale * np.array([224, 6944, 222208], dtype=np.int64)
    return EigenTable(
        js=np.array([0, 0, 0], dtype=np.int64),
        ks=np.array([1, 2, 3], dtype=np.int64),
        lambdas=np.array([16.0, 256.0, 4096.0]),
        mults=mults,
        lambda_max=5000.0,
        grid=grid,
        right_bc="dirichlet",
        params=params,
        cross_label="synthetic",
        volume=1.0,
    )


def test_table_within_mode_ascending(table_small):
    for j in np.unique(table_small.js):
        sel = table_small.js == j
        ks = table_small.ks[sel]
        lams = table_small.lambdas[sel]
        order = np.argsort(ks)
        assert np.all(np.diff(ks[order]) == 1) and ks[order][0] == 1
        assert np.all(np.diff(lams[order]) > 0.0)


def test_mu_zero_mode_is_bessel(table_small):
    sel = (table_small.js == 0) & (table_small.ks == 1)
    assert np.count_nonzero(sel) == 1
    lam01 = float(table_small.lambdas[sel][0])
    assert lam01 == pytest.approx(BESSEL_GROUND_BOX1, rel=1e-3)


def test_ground_levels_increase_with_mode(table_small):
    js = np.unique(table_small.js)
    grounds = [
        float(table_small.lambdas[(table_small.js == j) & (table_small.ks == 1)][0])
        for j in js
    ]
    assert all(a < b for a, b in zip(grounds, grounds[1:]))


def test_neumann_counting_dominates(model_small, table_small):
    model_n = ModelOperator(
        model_small.params,
        model_small.cross,
        x_max=model_small.x_max,
        right_bc="neumann",
    )
    table_n = assemble_spectrum(model_n, table_small.lambda_max)
    for lam in (25.0, 60.0, 120.0, 200.0, 300.0):
        assert counting_function(table_n, lam) >= counting_function(
            table_small, lam
        )


def test_counting_function_steps(table_small):
    assert counting_function(table_small, 0.0) == 0
    lams = np.linspace(0.0, table_small.lambda_max, 173)
    counts = [counting_function(table_small, float(t)) for t in lams]
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] == int(np.sum(table_small.mults))
    top = float(np.max(table_small.lambdas))
    eps = 1e-9 * top
    jump = counting_function(table_small, top) - counting_function(table_small, top - eps)
    assert jump >= 1
    with pytest.raises(TableRangeError):
        counting_function(table_small, 2.0 * table_small.lambda_max)


def test_weyl_fit_exact_powerlaw():
    fit = weyl_fit(_synthetic_table(), (16.0, 256.0, 4096.0))
    assert fit.slope == pytest.approx(1.25, abs=1e-10)
    assert fit.constant == pytest.approx(7.0, rel=1e-10)
    assert float(np.max(np.abs(fit.residuals))) < 1e-12


def test_weyl_fit_multiplicity_doubling():
    fit2 = weyl_fit(_synthetic_table(mult_scale=2), (16.0, 256.0, 4096.0))
    assert fit2.slope == pytest.approx(1.25, abs=1e-10)
    assert fit2.constant == pytest.approx(14.0, rel=1e-10)


def test_weyl_fit_rejects_empty_counts():
    with pytest.raises(ParameterDomainError):
        weyl_fit(_synthetic_table(), (1.0, 256.0, 4096.0))
    with pytest.raises(ParameterDomainError):
        weyl_fit(_synthetic_table(), (16.0, 256.0))


def _integral_of_counting(table, lam):
    """Breakpoint-exact integral of N(t) over [0, lam] via rectangles."""
    order = np.argsort(table.lambdas, kind="stable")
    lams = table.lambdas[order]
    cum = np.cumsum(table.mults[order])
    total = 0.0
    for i in range(lams.size):
        lo = lams[i]
        if lo >= lam:
            break
        hi = lams[i + 1] if i + 1 < lams.size else math.inf
        total += cum[i] * (min(hi, lam) - lo)
    return total


def test_riesz_mean_is_integrated_counting(table_small):
    rng = np.random.default_rng(20260817)
    top = table_small.lambda_max
    assert riesz_mean(table_small, 1.0) == 0.0
    for lam in rng.uniform(5.0, top, size=20):
        lhs = riesz_mean(table_small, float(lam))
        rhs = _integral_of_counting(table_small, float(lam))
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_trace_free_matches_riesz(model_small, table_small):
    lam = table_small.lambda_max
    tr = trace_with_potential(model_small, lam)
    rz = riesz_mean(table_small, lam)
    assert tr == pytest.approx(rz, rel=1e-10)


def test_trace_monotone_in_constant_potential(model_small):
    traces = [
        trace_with_potential(model_small, 150.0, Potential("const", a=c))
        for c in (0.0, 0.25, 0.5)
    ]
    assert traces[0] > traces[1] > traces[2] > 0.0


@pytest.fixture(scope="module")
def lemma_free(ref200):
    return lemma1_rhs(ref200)


def test_lemma1_rhs_closed_forms(ref200, lemma_free):
    d = ref200.params.d
    zeta, tail = spectral_zeta(ref200, d / 2.0)
    base = ref200.params.l_cl * (2.0 / (d + 2.0)) * (zeta + tail)

    assert lemma_free == pytest.approx(base, rel=1e-3)

    c = 0.3
    shifted = lemma1_rhs(ref200, Potential("const", a=c))
    assert shifted == pytest.approx(base * (1.0 - c) ** ((d + 2.0) / 2.0), rel=1e-3)

    vol = 2.0 * math.pi
    assert lemma1_rhs(ref200, volume=vol) == pytest.approx(vol * lemma_free, rel=1e-9)


def test_lemma1_rhs_monotone_in_potential(ref200, lemma_free):
    up = lemma1_rhs(ref200, Potential("const", a=0.5))
    assert 0.0 < up < lemma_free


def test_lemma1_rhs_regime(ref_critical):
    with pytest.raises(RegimeError):
        lemma1_rhs(ref_critical)


def test_density_moment_unit_observables(table_small):
    lam = table_small.lambda_max
    report = density_moment(
        table_small, lam, Potential("const", a=1.0), CrossObservable("const", value=1.0)
    )
    assert report.moment == pytest.approx(1.0, abs=1e-12)
    assert report.n_of_lambda == counting_function(table_small, lam)
    assert math.isnan(report.target) and math.isnan(report.rel_gap)


def test_density_moment_mean_zero_cross(table_small):
    report = density_moment(
        table_small,
        table_small.lambda_max,
        Potential("exp", a=1.0, b=1.0),
        CrossObservable("cos", frequency=1),
    )
    assert abs(report.moment) <= 1e-12


def test_density_moment_needs_vectors():
    with pytest.raises(ConsistencyError):
        density_moment(
            _synthetic_table(),
            100.0,
            Potential("const", a=1.0),
            CrossObservable("const", value=1.0),
        )


def test_mass_capture_saturation(table_small):
    lam = table_small.lambda_max
    full = mass_capture(table_small, lam, math.sqrt(lam) * table_small.grid.x_max)
    assert full == pytest.approx(1.0, abs=1e-12)
    assert mass_capture(table_small, lam, 0.0) == 0.0
    lengths = (1.0, 3.0, 6.0, 12.0, 17.0)
    caps = [mass_capture(table_small, lam, el) for el in lengths]
    assert all(a <= b for a, b in zip(caps, caps[1:]))
    assert 0.0 < caps[0] < 1.0


def test_hellmann_feynman_constant_exact(ref200):
    c = 0.25
    s = 0.05
    report = hellmann_feynman(ref200, s, Potential("const", a=c), 1e-3)
    expected = c * n_s(ref200, 1.0, s)
    assert report.pairing_value == pytest.approx(expected, rel=1e-12)
    assert report.gap <= 1e-10


def test_hellmann_feynman_halving(ref200):
    v = Potential("exp", a=1.0, b=1.0)
    gaps = [
        hellmann_feynman(ref200, 0.035, v, eps).gap
        for eps in (1e-2, 5e-3, 2.5e-3)
    ]
    assert gaps[1] / gaps[0] <= 0.6
    assert gaps[2] / gaps[1] <= 0.6


def test_hellmann_feynman_antisymmetry(ref200):
    v = Potential("exp", a=1.0, b=1.0)
    eps = 1e-2
    sums = []
    for e in (eps, eps / 2.0):
        plus = hellmann_feynman(ref200, 0.035, v, e).fd_value
        minus = hellmann_feynman(ref200, 0.035, v.amplified(-1.0), e).fd_value
        sums.append(abs(plus + minus))
    assert sums[1] <= 0.6 * sums[0]


def test_hellmann_feynman_degenerate_rejected(ref200):
    with pytest.raises(DegeneracyError):
        hellmann_feynman(ref200, 0.05, Potential("exp", a=1.0, b=1.0), 1e-2)


def test_required_mu_max_is_cutoff_witness(params13):
    lam = 300.0
    policy = GridPolicy()
    mu = required_mu_max(params13, lam, x_max=1.0, policy=policy)
    grid = policy.grid_for(1.0, lam)

    def count_at(m):
        pot = PotentialSpec(c_coef=params13.c_beta, mu=m, beta=params13.beta)
        return count_below(discretize(pot, grid, "dirichlet"), lam)

    assert count_at(mu) == 0
    assert count_at(mu / 4.0) > 0


def test_assemble_incomplete_cross_rejected(params13):
    tiny = CrossSpectrum(np.array([0.0, 1.0]), np.array([1, 2]), 2.0 * math.pi, "tiny")
    model = ModelOperator(params13, tiny, x_max=1.0)
    with pytest.raises(IncompleteTableError) as exc_info:
        assemble_spectrum(model, 300.0)
    assert exc_info.value.certificate == "mode_cutoff"


def test_grid_policy_cap(model_small):
    strict = ModelOperator(
        model_small.params,
        model_small.cross,
        x_max=model_small.x_max,
        policy=GridPolicy(max_nodes=128),
    )
    with pytest.raises(ResolutionError):
        assemble_spectrum(strict, 1e6)


def test_assemble_worker_determinism(model_small, table_small):
    for workers in (2, 8):
        again = assemble_spectrum(model_small, table_small.lambda_max, workers=workers)
        assert np.array_equal(again.lambdas, table_small.lambdas)
        assert np.array_equal(again.js, table_small.js)
        assert np.array_equal(again.mults, table_small.mults)
        assert eigen_table_csv_bytes(again) == eigen_table_csv_bytes(table_small)
