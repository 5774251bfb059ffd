"""Tests for the self-paced regularizer families.

The closed-form weight rules are validated against an independent argmin
oracle (bounded scalar minimization of v*l + f(v, lam) over [0, 1]), the
analytic gradients against central finite differences, and the implicit
loss against numerical quadrature of the weight rule.
"""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

import agepath.regularizers as R
from agepath.regularizers import SpRegularizer

# ---------------------------------------------------------------------------
# independent oracles


def argmin_oracle(reg: SpRegularizer, loss: float, lam: float) -> float:
    """Minimize v*loss + f(v, lam) over [0,1] without the closed forms."""

    def h(v):
        return v * loss + float(R.penalty(reg, v, lam))

    res = minimize_scalar(h, bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-12})
    cands = [(h(0.0), 0.0), (h(1.0), 1.0), (res.fun, float(res.x))]
    return min(cands)[1]


def quad_oracle(reg: SpRegularizer, loss: float, lam: float) -> float:
    val, err = quad(lambda t: R.weight(reg, t, lam), 0.0, loss,
                    limit=200, epsabs=1e-12, epsrel=1e-12)
    assert err < 1e-9
    return val


def fd_grads(reg: SpRegularizer, loss: float, lam: float, h: float = 1e-6):
    dl = (R.weight(reg, loss + h, lam) - R.weight(reg, loss - h, lam)) / (2 * h)
    dlam = (R.weight(reg, loss, lam + h) - R.weight(reg, loss, lam - h)) / (2 * h)
    return dl, dlam


def make_reg(family: str) -> SpRegularizer:
    return SpRegularizer(family, 1.0 if family == "mixture" else None)


FAMILIES = ["hard", "linear", "mixture"]


# ---------------------------------------------------------------------------
# construction


class TestConstruction:
    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            SpRegularizer("quadratic")

    def test_mixture_requires_positive_gamma(self):
        with pytest.raises(ValueError):
            SpRegularizer("mixture")
        with pytest.raises(ValueError):
            SpRegularizer("mixture", -1.0)

    def test_gamma_rejected_for_other_families(self):
        with pytest.raises(ValueError):
            SpRegularizer("linear", 1.0)

    def test_thresholds(self):
        lin = make_reg("linear")
        assert lin.lower_threshold(2.0) == 2.0
        assert lin.upper_threshold(2.0) == 2.0
        mix = SpRegularizer("mixture", 1.0)
        lam = 2.0
        assert mix.lower_threshold(lam) == pytest.approx((2.0 / 3.0) ** 2)
        assert mix.upper_threshold(lam) == 4.0


# ---------------------------------------------------------------------------
# weight rule


class TestWeights:
    def test_frozen_linear_example(self):
        assert R.weight(make_reg("linear"), 0.5, 1.0) == pytest.approx(0.5)

    def test_frozen_mixture_example(self):
        # oracle-derived: gamma=1, lam=2, l=1 -> v = 1/sqrt(1) - 1/2 = 0.5
        reg = SpRegularizer("mixture", 1.0)
        assert R.weight(reg, 1.0, 2.0) == pytest.approx(0.5)
        assert R.weight(reg, 1.0, 2.0) == pytest.approx(
            argmin_oracle(reg, 1.0, 2.0), abs=1e-6)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_argmin_oracle_agreement(self, family):
        reg = make_reg(family)
        rng = np.random.default_rng(0)
        for _ in range(300):
            lam = float(rng.uniform(0.1, 5.0))
            loss = float(rng.uniform(0.0, 3.0 * reg.upper_threshold(lam)))
            # skip exact flats where the argmin is not unique
            if family == "hard" and abs(loss - lam) < 1e-3:
                continue
            assert R.weight(reg, loss, lam) == pytest.approx(
                argmin_oracle(reg, loss, lam), abs=1e-6)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_axioms(self, family):
        reg = make_reg(family)
        rng = np.random.default_rng(1)
        lams = rng.uniform(0.1, 5.0, size=50)
        for lam in lams:
            lam = float(lam)
            losses = np.sort(rng.uniform(0.0, 2.0 * reg.upper_threshold(lam), 100))
            v = R.weights(reg, losses, lam)
            assert np.all(np.diff(v) <= 1e-12)          # non-increasing in loss
            assert R.weight(reg, 0.0, lam) == 1.0
            assert R.weight(reg, 1e6 * lam, lam) <= 1e-6
            v2 = R.weights(reg, losses, lam * 1.3)       # non-decreasing in lam
            assert np.all(v2 - v >= -1e-12)
            assert np.all((v >= 0.0) & (v <= 1.0))

    def test_input_validation(self):
        reg = make_reg("linear")
        with pytest.raises(ValueError):
            R.weight(reg, -1.0, 1.0)
        with pytest.raises(ValueError):
            R.weight(reg, np.nan, 1.0)
        with pytest.raises(ValueError):
            R.weight(reg, 1.0, 0.0)
        with pytest.raises(ValueError):
            R.weight(reg, 1.0, -2.0)


# ---------------------------------------------------------------------------
# regions and tie rules


class TestRegions:
    def test_linear_regions_and_tie(self):
        reg = make_reg("linear")
        assert R.region(reg, 0.5, 1.0) == "E"
        assert R.region(reg, 1.0, 1.0) == "D"   # tie goes to discarded
        assert R.region(reg, 2.0, 1.0) == "D"

    def test_mixture_regions_and_ties(self):
        reg = SpRegularizer("mixture", 1.0)
        lam = 2.0
        t1, t2 = reg.lower_threshold(lam), reg.upper_threshold(lam)
        assert R.region(reg, 0.5 * t1, lam) == "E"
        assert R.region(reg, t1, lam) == "M"    # boundaries inclusive into M
        assert R.region(reg, 0.5 * (t1 + t2), lam) == "M"
        assert R.region(reg, t2, lam) == "M"
        assert R.region(reg, 1.5 * t2, lam) == "D"

    def test_regions_match_weights(self):
        rng = np.random.default_rng(2)
        for family in FAMILIES:
            reg = make_reg(family)
            lam = 1.7
            losses = rng.uniform(0.0, 2.0 * reg.upper_threshold(lam), 200)
            v = R.weights(reg, losses, lam)
            lab = R.regions(reg, losses, lam)
            assert np.all(v[lab == "D"] == 0.0)
            if family == "hard":
                assert np.all(v[lab == "E"] == 1.0)
            elif family == "linear":
                e = lab == "E"  # fractional weight 1 - l/lam on E
                assert np.all((v[e] > 0.0) & (v[e] <= 1.0))
            else:
                assert np.all(v[lab == "E"] == 1.0)
                m = lab == "M"
                assert np.all((v[m] > 0.0) & (v[m] <= 1.0))


# ---------------------------------------------------------------------------
# gradients


class TestWeightGrads:
    @pytest.mark.parametrize("family", ["linear", "mixture"])
    def test_matches_finite_differences(self, family):
        reg = make_reg(family)
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 100:
            lam = float(rng.uniform(0.3, 4.0))
            loss = float(rng.uniform(1e-3, 1.5 * reg.upper_threshold(lam)))
            t1, t2 = reg.lower_threshold(lam), reg.upper_threshold(lam)
            if min(abs(loss - t1), abs(loss - t2)) < 1e-4:
                continue  # FD stencil must not straddle a region boundary
            dl, dlam = R.weight_grads(reg, loss, lam)
            fdl, fdlam = fd_grads(reg, loss, lam)
            assert dl == pytest.approx(fdl, abs=1e-6)
            assert dlam == pytest.approx(fdlam, abs=1e-6)
            checked += 1

    def test_boundary_raises(self):
        reg = make_reg("linear")
        with pytest.raises(ValueError):
            R.weight_grads(reg, 1.0, 1.0)

    def test_vectorized_consistency(self):
        reg = SpRegularizer("mixture", 0.7)
        lam = 1.3
        losses = np.array([0.01, 0.3, 0.9, 2.5])
        v, dl, dlam = R.weights_and_grads(reg, losses, lam)
        assert np.allclose(v, R.weights(reg, losses, lam))
        for i, l in enumerate(losses):
            gdl, gdlam = R.weight_grads(reg, float(l), lam)
            assert dl[i] == pytest.approx(gdl)
            assert dlam[i] == pytest.approx(gdlam)


# ---------------------------------------------------------------------------
# implicit loss


class TestImplicitLoss:
    def test_frozen_linear_values(self):
        reg = make_reg("linear")
        # integral of (1 - t/lam) from 0 to 0.5 at lam=1: 0.5 - 0.125 = 0.375
        assert R.implicit_loss(reg, 0.5, 1.0) == pytest.approx(0.375)
        # saturates at lam/2 once the sample is discarded
        assert R.implicit_loss(reg, 5.0, 1.0) == pytest.approx(0.5)
        assert R.implicit_loss(reg, 7.0, 3.0) == pytest.approx(1.5)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_matches_quadrature(self, family):
        reg = make_reg(family)
        rng = np.random.default_rng(4)
        for _ in range(20):
            lam = float(rng.uniform(0.3, 3.0))
            loss = float(rng.uniform(1e-3, 2.0 * reg.upper_threshold(lam)))
            assert R.implicit_loss(reg, loss, lam) == pytest.approx(
                quad_oracle(reg, loss, lam), abs=1e-8)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_monotone_and_zero_at_origin(self, family):
        reg = make_reg(family)
        lam = 1.1
        assert R.implicit_loss(reg, 0.0, lam) == 0.0
        ls = np.linspace(0.0, 3.0 * reg.upper_threshold(lam), 200)
        F = R.implicit_losses(reg, ls, lam)
        assert np.all(np.diff(F) >= -1e-12)
