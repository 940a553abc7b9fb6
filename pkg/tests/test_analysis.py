import math

import numpy as np
import pytest
from scipy import integrate

from sgqi import analysis, grids, recovery


def box_set(kmax):
    levels = tuple(sorted(np.ndindex(*[m + 1 for m in kmax])))
    return grids.LevelSet(d=len(kmax), levels=levels, xi=float(max(kmax)),
                          family="box")


MIXED = grids.SmoothnessSpec(d=2, r=4, p=2.0, theta=1.0, q=2.0,
                             kind="mixed", a=(1.0, 2.0))
HYB = grids.SmoothnessSpec(d=2, r=4, p=2.0, theta=1.0, q=2.0,
                           kind="hybrid", alpha=1.0, beta=0.5)
ENERGY = grids.SmoothnessSpec(d=2, r=4, p=2.0, theta=2.0, q=2.0,
                              kind="hybrid", alpha=2.0, beta=0.0, gamma=1.0)


def test_frozen_sup_error_nearest_neighbour():
    # order 1 snaps to the nearest level-3 node, so the identity function
    # is off by exactly 2^-4 at cell midpoints
    rec = recovery.build(lambda x: x, box_set((3,)), 1)
    err = analysis.discrete_lq_error(lambda x: x, rec, math.inf,
                                     resolution=4097)
    assert err == 1.0 / 16.0


def test_lq_monotone_in_q():
    rec = recovery.build(lambda x: x, box_set((3,)), 1)
    errs = [analysis.discrete_lq_error(lambda x: x, rec, q, resolution=2049)
            for q in (1.0, 2.0, math.inf)]
    assert errs[0] <= errs[1] <= errs[2]


def test_self_error_and_constant_shift():
    f = lambda X: np.sin(X[:, 0]) * X[:, 1]
    rec = recovery.build(f, box_set((2, 2)), 2)
    recf = lambda X: recovery.evaluate_batch(rec, X)
    for q in (1.0, 2.0, math.inf):
        assert analysis.discrete_lq_error(recf, rec, q, resolution=65) == 0.0
        shifted = lambda X: recovery.evaluate_batch(rec, X) + 0.25
        got = analysis.discrete_lq_error(shifted, rec, q, resolution=65)
        assert abs(got - 0.25) < 1e-13


def test_sampling_estimators_agree_roughly():
    f = lambda X: np.sin(3.0 * X[:, 0] + X[:, 1])
    rec = recovery.build(f, box_set((2, 2)), 2)
    lat = analysis.discrete_lq_error(f, rec, 2.0, resolution=257)
    hal = analysis.discrete_lq_error(f, rec, 2.0, method="halton",
                                     points=20000, seed=3)
    mc = analysis.discrete_lq_error(f, rec, 2.0, method="mc",
                                    points=20000, seed=3)
    assert abs(hal - lat) < 0.1 * lat
    assert abs(mc - lat) < 0.15 * lat


def test_oversized_lattice_falls_back_to_sampling():
    f = lambda X: np.sin(3.0 * X[:, 0] + X[:, 1])
    rec = recovery.build(f, box_set((2, 2)), 2)
    lat = analysis.discrete_lq_error(f, rec, 2.0, resolution=257)
    # requested lattice would have 6000^2 > 2^24 nodes
    est = analysis.discrete_lq_error(f, rec, 2.0, resolution=6000,
                                     points=20000, seed=3)
    assert abs(est - lat) < 0.1 * lat


def test_estimator_validation():
    rec = recovery.build(lambda x: x, box_set((2,)), 2)
    with pytest.raises(ValueError, match="q must be positive"):
        analysis.discrete_lq_error(lambda x: x, rec, 0.0)
    with pytest.raises(ValueError, match="unknown error estimation"):
        analysis.discrete_lq_error(lambda x: x, rec, 2.0, method="grid")
    with pytest.raises(ValueError, match="resolution length"):
        analysis.discrete_lq_error(lambda x: x, rec, 2.0,
                                   resolution=(65, 65))
    with pytest.raises(ValueError, match="at least 2"):
        analysis.discrete_lq_error(lambda x: x, rec, 2.0, resolution=1)


def test_threaded_lattice_matches_serial(monkeypatch):
    f = lambda X: np.cos(2.0 * X[:, 0]) + X[:, 1] ** 2
    rec = recovery.build(f, box_set((2, 1)), 2)
    serial = analysis.discrete_lq_error(f, rec, 2.0, resolution=301)
    monkeypatch.setenv("SGQI_MAX_THREADS", "3")
    threaded = analysis.discrete_lq_error(f, rec, 2.0, resolution=301)
    assert serial == threaded


def test_max_threads_parsing(monkeypatch):
    monkeypatch.delenv("SGQI_MAX_THREADS", raising=False)
    assert analysis.max_threads() == 1
    monkeypatch.setenv("SGQI_MAX_THREADS", "4")
    assert analysis.max_threads() == 4
    monkeypatch.setenv("SGQI_MAX_THREADS", "0")
    assert analysis.max_threads() == 1
    monkeypatch.setenv("SGQI_MAX_THREADS", "junk")
    assert analysis.max_threads() == 1


def test_quasinorm_single_level_identity():
    f = lambda X: np.sin(X[:, 0] + 2.0 * X[:, 1])
    one = grids.LevelSet(d=2, levels=((0, 0),), xi=0.0, family="t")
    rec = recovery.build(f, one, 2)
    got = analysis.besov_quasinorm_B3(rec, MIXED)
    want = analysis._coeff_norm(rec.surplus[(0, 0)].coeffs, 2.0)
    assert math.isclose(got, want)
    # weight of a single level (1,1): 2^(a.k - |k|_1/p) = 2^2
    two = grids.LevelSet(d=2, levels=((0, 0), (0, 1), (1, 0), (1, 1)),
                         xi=0.0, family="t")
    rec2 = recovery.build(f, two, 2)
    spec_inf = grids.SmoothnessSpec(d=2, r=4, p=2.0, theta=math.inf, q=2.0,
                                    kind="mixed", a=(1.0, 2.0))
    got = analysis.besov_quasinorm_B3(rec2, spec_inf, truncation=None)
    terms = []
    for k, lvl in rec2.surplus.items():
        lg = np.dot((1.0, 2.0), k) - sum(k) / 2.0
        terms.append(2.0 ** lg * analysis._coeff_norm(lvl.coeffs, 2.0))
    assert math.isclose(got, max(terms))


def test_quasinorm_homogeneous_and_truncated():
    f = lambda X: np.sin(X[:, 0] + 2.0 * X[:, 1])
    g = lambda X: 3.0 * f(X)
    delta = grids.delta_mixed(3.0, MIXED)
    rf = recovery.build(f, delta, 2)
    rg = recovery.build(g, delta, 2)
    a = analysis.besov_quasinorm_B3(rf, MIXED)
    b = analysis.besov_quasinorm_B3(rg, MIXED)
    assert math.isclose(b, 3.0 * a, rel_tol=1e-12)
    only0 = analysis.besov_quasinorm_B3(rf, MIXED, truncation=0)
    want = analysis._coeff_norm(rf.surplus[(0, 0)].coeffs, 2.0)
    assert math.isclose(only0, want)


def test_surrogate_vanishes_on_reproduced_polynomial():
    f = lambda X: X[:, 0] ** 3 * X[:, 1]
    delta = grids.delta_energy(4.0, ENERGY, True)
    rec = recovery.build(f, delta, 4)
    ref = grids.delta_energy(7.0, ENERGY, True)
    val = analysis.energy_error_surrogate(f, rec, ENERGY, 2.0, reference=ref)
    assert val < 1e-8


def test_surrogate_monotone_in_gamma():
    f = lambda X: np.sin(3.0 * X[:, 0]) * np.cos(2.0 * X[:, 1])
    rec = recovery.build(f, grids.delta_energy(3.0, ENERGY, True), 4)
    ref = grids.delta_energy(6.0, ENERGY, True)
    vals = [analysis.energy_error_surrogate(f, rec, ENERGY, 2.0,
                                            reference=ref, gamma=g)
            for g in (0.5, 1.0, 1.5)]
    assert vals[0] < vals[1] < vals[2]


def test_surrogate_reference_handling():
    f = lambda X: np.sin(X[:, 0] + X[:, 1])
    delta = grids.delta_energy(3.0, ENERGY, True)
    rec = recovery.build(f, delta, 4)
    with pytest.raises(ValueError, match="strictly contain"):
        analysis.energy_error_surrogate(f, rec, ENERGY, 2.0, reference=delta)
    with pytest.raises(ValueError, match="reference level set or"):
        analysis.energy_error_surrogate(f, rec, ENERGY, 2.0)
    spec_nog = grids.SmoothnessSpec(d=2, r=4, p=2.0, theta=1.0, q=2.0,
                                    kind="hybrid", alpha=1.0, beta=0.5)
    rec2 = recovery.build(f, grids.delta_hybrid(3.0, spec_nog), 4)
    with pytest.raises(ValueError, match="gamma"):
        analysis.energy_error_surrogate(f, rec2, spec_nog, 2.0, truncation=5)
    # a truncation box is shorthand for the full-grid reference
    via_box = analysis.energy_error_surrogate(f, rec, ENERGY, 2.0,
                                              truncation=5)
    via_ref = analysis.energy_error_surrogate(
        f, rec, ENERGY, 2.0,
        reference=grids.comparison_sets(5.0, 1.0, "fullgrid", 2))
    assert math.isclose(via_box, via_ref)


def test_fit_rate_exact_and_noisy():
    ns = [100, 200, 400, 800, 1600, 3200]
    fit = analysis.fit_rate([(n, 8.0 / n) for n in ns])
    assert math.isclose(fit.slope, -1.0, abs_tol=1e-12)
    assert math.isclose(fit.intercept, 3.0, abs_tol=1e-12)
    assert fit.residual < 1e-12
    rng = np.random.default_rng(5)
    noisy = [(n, n ** -1.5 * (1.0 + 0.02 * rng.standard_normal()))
             for n in ns]
    fit = analysis.fit_rate(noisy)
    assert abs(fit.slope + 1.5) < 0.02
    assert fit.residual > 0.0


def test_fit_rate_validation():
    with pytest.raises(ValueError, match="at least 4"):
        analysis.fit_rate([(10, 1.0), (20, 0.5), (40, 0.25)])
    with pytest.raises(ValueError, match="strictly increasing"):
        analysis.fit_rate([(10, 1.0), (10, 0.5), (40, 0.25), (80, 0.1)])
    with pytest.raises(ValueError, match="nonpositive"):
        analysis.fit_rate([(10, 1.0), (20, 0.0), (40, 0.25), (80, 0.1)])


def test_corpus_labels_and_integrals():
    funcs = analysis.corpus(2, 4, MIXED)
    assert [tf.label for tf in funcs] == ["poly", "sinprod", "kink"]
    poly, sinprod, kink = funcs
    assert math.isclose(poly.exact_integral, 1.0 / 16.0)
    assert math.isclose(sinprod.exact_integral, (2.0 / math.pi) ** 2)
    # mixed exponents a_i - 1/p = (0.5, 1.5)
    want = analysis.kink_integral_1d(0.5) * analysis.kink_integral_1d(1.5)
    assert math.isclose(kink.exact_integral, want)
    num, _ = integrate.dblquad(
        lambda y, x: abs(x - 0.5) ** 0.5 * abs(y - 0.5) ** 1.5,
        0.0, 1.0, 0.0, 1.0)
    assert math.isclose(kink.exact_integral, num, rel_tol=1e-9)
    for tf in funcs:
        assert tf.membership


def test_corpus_kink_univariate_for_hybrid():
    kink = analysis.corpus(2, 4, HYB)[2]
    X = np.array([[0.3, 0.1], [0.3, 0.9]])
    vals = kink.handle(X)
    assert vals[0] == vals[1]  # constant in the second coordinate
    # exponent alpha + beta - 1/p = 1.0
    assert math.isclose(vals[0], 0.2)
    num, _ = integrate.quad(lambda t: abs(t - 0.5), 0.0, 1.0)
    assert math.isclose(kink.exact_integral, num, rel_tol=1e-12)


def test_kink_exponent_clipping():
    rough = grids.SmoothnessSpec(d=1, r=2, p=2.0, theta=1.0, q=2.0,
                                 kind="mixed", a=(3.0,))
    lams = analysis._kink_exponents(rough, 2)
    assert all(0.0 < l < 1.0 for l in lams)


def test_kink_integral_value():
    assert math.isclose(analysis.kink_integral_1d(1.0), 0.25)
    num, _ = integrate.quad(lambda t: abs(t - 0.5) ** 0.5, 0.0, 1.0)
    assert math.isclose(analysis.kink_integral_1d(0.5), num, rel_tol=1e-12)
