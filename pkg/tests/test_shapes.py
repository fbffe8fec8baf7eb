import numpy as np
import pytest
from numpy.testing import assert_allclose

import frailty_shapes as fs
from frailty_shapes.shapes import (
    KPOINT_EXAMPLES,
    TailClass,
    classify_tail,
    crf_at,
    curve,
    curve_sidecar,
    curve_to_csv,
    rfv_at,
    rfv_closed_at,
    rfv_derivative,
    stationary_points,
    zmp_derivative_terms,
)

LN2 = np.log(2.0)

ALL_FAMILIES = [
    fs.NegBin(pi=0.5, nu=2.0),
    fs.NegBinPositive(pi=0.4, nu=2.0),
    fs.Binomial(pi=0.3, n=5),
    fs.Poisson(eta=2.0),
    fs.Shifted(inner=fs.Poisson(eta=2.0), p=1.0),
    fs.Shifted(inner=fs.NegBin(pi=0.5, nu=2.0), p=0.4),
    fs.ZeroModifiedPoisson(eta=3.0, phi=0.05),
    fs.Addams(alpha=-0.3, gamma=0.5),
    fs.KPoint(support=(0.0, 0.5, 1.7), probs=(0.2, 0.5, 0.3)),
    fs.GammaFrailty(mean=1.0, variance=0.5),
]


class TestClosedForms:
    def test_poisson(self):
        # conditional frailty stays Poisson(eta e^-lam), rfv is its inverse mean
        assert_allclose(rfv_at(fs.Poisson(eta=2.0), 1.0), np.e / 2.0, rtol=1e-14)

    def test_negbin(self):
        assert_allclose(rfv_at(fs.NegBin(pi=0.5, nu=2.0), LN2), 2.0, rtol=1e-14)

    def test_addams_is_pure_exponential(self):
        lam = np.linspace(0.0, 4.0, 9)
        got = rfv_at(fs.Addams(alpha=0.3, gamma=0.5), lam)
        assert_allclose(got, 0.5 * np.exp(0.3 * lam), rtol=1e-13)

    def test_gamma_never_moves(self):
        lam = np.array([0.0, 1.0, 10.0, 100.0])
        assert_allclose(rfv_at(fs.GammaFrailty(mean=1.0, variance=0.5), lam),
                        0.5, rtol=1e-14)

    def test_crf_is_one_plus_rfv(self):
        fam = fs.NegBin(pi=0.5, nu=2.0)
        lam = np.linspace(0.0, 3.0, 7)
        assert_allclose(crf_at(fam, lam), np.asarray(rfv_at(fam, lam)) + 1.0,
                        rtol=1e-15)

    @pytest.mark.parametrize("fam", ALL_FAMILIES, ids=lambda f: type(f).__name__)
    def test_closed_route_equals_transform_route(self, fam):
        lam = np.linspace(0.0, 6.0, 25)
        ratio = np.asarray(rfv_at(fam, lam))
        closed = np.asarray(rfv_closed_at(fam, lam))
        assert_allclose(closed, ratio, rtol=1e-9, atol=1e-12)

    def test_rfv_at_zero_is_squared_coefficient_of_variation(self):
        for fam in ALL_FAMILIES:
            mean, var = fs.moments(fam)
            assert_allclose(float(rfv_at(fam, 0.0)), var / mean ** 2,
                            rtol=1e-10, atol=1e-13)

    def test_scalar_in_scalar_out(self):
        out = rfv_at(fs.Poisson(eta=2.0), 1.0)
        assert np.ndim(out) == 0


class TestDerivative:
    @pytest.mark.parametrize("fam", ALL_FAMILIES, ids=lambda f: type(f).__name__)
    def test_matches_central_difference(self, fam):
        h = 1e-6
        for lam in (0.3, 1.1, 2.7):
            fd = (float(rfv_at(fam, lam + h)) - float(rfv_at(fam, lam - h))) / (2 * h)
            assert_allclose(float(rfv_derivative(fam, lam)), fd,
                            rtol=5e-5, atol=1e-8)

    def test_two_point_family_exactly_exponential(self):
        # P(Z=0)=P(Z=1)=1/2 gives rfv = e^lam, so the derivative is e^lam too
        kp = fs.KPoint(support=(0.0, 1.0), probs=(0.5, 0.5))
        lam = np.linspace(0.0, 5.0, 11)
        assert_allclose(rfv_derivative(kp, lam), np.exp(lam), rtol=1e-12)

    def test_poisson_always_rising(self):
        lam = np.linspace(0.0, 10.0, 21)
        assert np.all(np.asarray(rfv_derivative(fs.Poisson(eta=2.0), lam)) > 0.0)

    def test_positive_negbin_always_falling(self):
        lam = np.linspace(0.0, 10.0, 21)
        d = np.asarray(rfv_derivative(fs.NegBinPositive(pi=0.4, nu=2.0), lam))
        assert np.all(d < 0.0)


class TestStationaryPoints:
    @pytest.mark.parametrize("fam,where", [
        (fs.Shifted(inner=fs.Poisson(eta=2.0), p=1.0), np.log(2.0)),
        (fs.Shifted(inner=fs.NegBin(pi=0.5, nu=2.0), p=0.4), np.log(2.0)),
        (fs.Shifted(inner=fs.Binomial(pi=0.5, n=4), p=1.0), np.log(5.0)),
    ])
    def test_shifted_peak_location(self, fam, where):
        pts = stationary_points(fam, 8.0)
        assert [p.kind for p in pts] == ["max"]
        assert_allclose(pts[0].lam, where, atol=1e-10)

    def test_monotone_families_have_none(self):
        for fam in (fs.Poisson(eta=2.0), fs.NegBin(pi=0.5, nu=2.0),
                    fs.NegBinPositive(pi=0.4, nu=2.0),
                    fs.GammaFrailty(mean=1.0, variance=0.5)):
            assert stationary_points(fam, 10.0) == ()

    def test_zero_deflated_poisson_max_then_min(self):
        pts = stationary_points(fs.ZeroModifiedPoisson(eta=3.0, phi=0.05), 8.0)
        assert [p.kind for p in pts] == ["max", "min"]
        assert pts[0].lam < pts[1].lam

    def test_extrema_appear_and_vanish_at_the_fold(self):
        # The pair of extrema exists exactly while (1-phi)/(1-phi e^-eta)
        # stays above the dip of e^u/(1+u+u^2); the boundary value of phi
        # solves that ratio against e/3.
        eta = 3.0
        phi_star = (3.0 - np.e) / (3.0 - np.exp(1.0 - eta))
        below = stationary_points(fs.ZeroModifiedPoisson(eta=eta, phi=phi_star - 0.01), 8.0)
        above = stationary_points(fs.ZeroModifiedPoisson(eta=eta, phi=phi_star + 0.01), 8.0)
        assert [p.kind for p in below] == ["max", "min"]
        assert above == ()


class TestZmpDerivativeTerms:
    def test_ratio_at_zero(self):
        eta = 3.0
        _, ratio = zmp_derivative_terms(fs.ZeroModifiedPoisson(eta=eta, phi=0.05), 0.0)
        assert_allclose(ratio, np.exp(eta) / (eta * eta + eta + 1.0), rtol=1e-14)

    def test_ratio_dips_to_e_thirds_at_log_eta(self):
        fam = fs.ZeroModifiedPoisson(eta=3.0, phi=0.05)
        _, at_min = zmp_derivative_terms(fam, np.log(3.0))
        assert_allclose(at_min, np.e / 3.0, rtol=1e-14)
        lam = np.linspace(0.0, 8.0, 161)
        _, r = zmp_derivative_terms(fam, lam)
        assert np.min(r) >= np.e / 3.0 - 1e-12

    def test_offset_vanishes_for_plain_poisson(self):
        offset, _ = zmp_derivative_terms(fs.ZeroModifiedPoisson(eta=2.0, phi=1.0), 1.0)
        assert offset == 0.0


class TestTailClassification:
    @pytest.mark.parametrize("fam,want", [
        (fs.Poisson(eta=2.0), TailClass.INCREASING_TO_INFINITY),
        (fs.NegBin(pi=0.5, nu=2.0), TailClass.INCREASING_TO_INFINITY),
        (fs.Binomial(pi=0.3, n=5), TailClass.INCREASING_TO_INFINITY),
        (fs.NegBinPositive(pi=0.4, nu=2.0), TailClass.DECREASING_TO_ZERO),
        (fs.Shifted(inner=fs.Poisson(eta=2.0), p=1.0), TailClass.DECREASING_TO_ZERO),
        (fs.Shifted(inner=fs.Poisson(eta=2.0), p=0.0), TailClass.INCREASING_TO_INFINITY),
        (fs.ZeroModifiedPoisson(eta=3.0, phi=0.05), TailClass.INCREASING_TO_INFINITY),
        (fs.ZeroModifiedPoisson(eta=0.8, phi=0.0), TailClass.DECREASING_TO_ZERO),
        (fs.Addams(alpha=0.3, gamma=0.5), TailClass.INCREASING_TO_INFINITY),
        (fs.Addams(alpha=-0.3, gamma=0.5), TailClass.DECREASING_TO_ZERO),
        (fs.Addams(alpha=0.0, gamma=0.5), TailClass.CONSTANT),
        (fs.GammaFrailty(mean=1.0, variance=0.5), TailClass.CONSTANT),
        (KPOINT_EXAMPLES["set1"], TailClass.DECREASING_TO_ZERO),
        (KPOINT_EXAMPLES["set2"], TailClass.INCREASING_TO_INFINITY),
    ])
    def test_family_map(self, fam, want):
        assert classify_tail(fam) is want

    def test_tail_limits_actually_hold(self):
        # spot-check the classification against far-out evaluations
        up = np.asarray(rfv_at(fs.Poisson(eta=2.0), np.array([10.0, 20.0])))
        assert up[1] > 100.0 * up[0]
        down = np.asarray(rfv_at(fs.NegBinPositive(pi=0.4, nu=2.0),
                                 np.array([10.0, 20.0])))
        assert down[1] < down[0] / 100.0


class TestCurve:
    def test_contains_everything(self):
        fam = fs.Shifted(inner=fs.Poisson(eta=2.0), p=1.0)
        grid = np.linspace(0.0, 4.0, 17)
        shape = curve(fam, grid)
        assert shape.family is fam
        assert_allclose(shape.crf, shape.rfv + 1.0, rtol=1e-15)
        assert [p.kind for p in shape.stationary_points] == ["max"]
        assert shape.tail is TailClass.DECREASING_TO_ZERO
        assert not shape.overflow.any()

    def test_rejects_unsorted_grid(self):
        with pytest.raises(fs.ParameterOutOfRange):
            curve(fs.Poisson(eta=2.0), [0.0, 2.0, 1.0])

    def test_overflow_is_flagged_not_raised(self):
        # e^lam passes the float ceiling around lam ~ 709
        shape = curve(fs.Poisson(eta=2.0), [0.0, 1.0, 750.0])
        assert shape.overflow.tolist() == [False, False, True]
        assert np.isposinf(shape.rfv[-1])

    def test_csv_round_trip(self, tmp_path):
        fam = fs.NegBin(pi=0.5, nu=2.0)
        shape = curve(fam, np.linspace(0.0, 2.0, 5))
        path = tmp_path / "curve.csv"
        curve_to_csv(shape, path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().strip().split("\n")
        assert lines[0] == "lambda,rfv,crf"
        back = np.genfromtxt(path, delimiter=",", skip_header=1)
        assert_allclose(back[:, 0], shape.grid, rtol=1e-16)
        assert_allclose(back[:, 1], shape.rfv, rtol=1e-16)

    def test_sidecar_payload(self):
        shape = curve(fs.Shifted(inner=fs.Poisson(eta=2.0), p=1.0),
                      np.linspace(0.0, 4.0, 9))
        side = curve_sidecar(shape)
        assert side["tail"] == "DecreasingToZero"
        assert len(side["stationary_points"]) == 1
        assert side["stationary_points"][0]["kind"] == "max"
        assert side["family"]["family"] == "shifted"


def test_builtin_example_sets_are_distributions():
    assert set(KPOINT_EXAMPLES) == {"set1", "set2", "set3", "set4"}
    for fam in KPOINT_EXAMPLES.values():
        assert len(fam.support) == 8
        assert_allclose(np.sum(fam.probs), 1.0, atol=1e-12)
        assert np.all(np.diff(fam.support) > 0.0)
