import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskratio import (
    Categorical,
    Dataset,
    Intercept,
    Interaction,
    Main,
    Spline,
    build_design_matrix,
    default_knots,
    fit_robust_poisson,
    parse_spec,
    rcs_basis,
)
from riskratio.errors import (
    DegenerateColumn,
    NonIncreasingKnots,
    SpecParseError,
    UnknownColumn,
)
from riskratio.rng import stream


def oracle_rcs(x, knots):
    """Independent scalar-loop evaluation of the truncated-power formula."""
    t = list(knots)
    k = len(t)
    out = np.zeros((len(x), k - 1))
    for i, xi in enumerate(x):
        out[i, 0] = xi
        for j in range(k - 2):
            def p3(u):
                return max(u, 0.0) ** 3
            val = (
                p3(xi - t[j])
                - p3(xi - t[k - 2]) * (t[k - 1] - t[j]) / (t[k - 1] - t[k - 2])
                + p3(xi - t[k - 1]) * (t[k - 2] - t[j]) / (t[k - 1] - t[k - 2])
            )
            out[i, j + 1] = val / (t[k - 1] - t[0]) ** 2
    return out


def small_dataset():
    return Dataset(
        y=np.array([0.0, 1.0, 0.0]),
        columns={"A": np.array([0.0, 1.0, 1.0]), "L": np.array([1.5, -0.5, 2.0])},
    )


class TestBuildDesignMatrix:
    def test_identity_encoding(self):
        data = small_dataset()
        dm = build_design_matrix(data, [Intercept(), Main("A"), Main("L")])
        assert dm.X.shape == (3, 3)
        np.testing.assert_array_equal(dm.X[:, 0], 1.0)
        np.testing.assert_array_equal(dm.X[:, 1], data.column("A"))
        np.testing.assert_array_equal(dm.X[:, 2], data.column("L"))

    def test_categorical_dummy_coding(self):
        rng = stream(5, 0)
        levels = rng.integers(1, 6, size=200).astype(float)
        data = Dataset(y=(rng.random(200) < 0.3).astype(float), columns={"A": levels})
        dm = build_design_matrix(
            data, [Intercept(), Categorical("A", reference=1.0)], exposure="A"
        )
        dummies = dm.X[:, 1:]
        assert dummies.shape[1] == 4
        assert np.all(dummies.sum(axis=1) <= 1.0)
        assert dm.exposure_cols == (1, 2, 3, 4)

    def test_dummy_coding_completeness(self):
        # intercept plus k-1 dummies span every level indicator
        rng = stream(5, 1)
        levels = rng.integers(0, 4, size=100).astype(float)
        data = Dataset(y=np.zeros(100), columns={"A": levels})
        dm = build_design_matrix(data, [Intercept(), Categorical("A", reference=0.0)])
        for level in range(4):
            indicator = (levels == level).astype(float)
            coef, *_ = np.linalg.lstsq(dm.X, indicator, rcond=None)
            assert np.max(np.abs(dm.X @ coef - indicator)) < 1e-10

    def test_unknown_column(self):
        with pytest.raises(UnknownColumn):
            build_design_matrix(small_dataset(), [Intercept(), Main("missing")])

    def test_degenerate_column(self):
        data = Dataset(y=np.array([0.0, 1.0]), columns={"C": np.array([2.0, 2.0])})
        with pytest.raises(DegenerateColumn):
            build_design_matrix(data, [Intercept(), Main("C")])

    def test_rank_deficiency_flag(self):
        rng = stream(5, 2)
        x = rng.standard_normal(50)
        data = Dataset(
            y=(rng.random(50) < 0.3).astype(float),
            columns={"X1": x, "X2": 2.0 * x},
        )
        dm = build_design_matrix(data, [Intercept(), Main("X1"), Main("X2")])
        assert dm.rank_deficient

    def test_interaction_product(self):
        data = small_dataset()
        dm = build_design_matrix(
            data, [Intercept(), Interaction(Main("A"), Main("L"))]
        )
        np.testing.assert_allclose(
            dm.X[:, 1], data.column("A") * data.column("L")
        )


class TestRcsBasis:
    def test_linear_below_first_knot(self):
        x = np.linspace(-5.0, -1.0, 20)
        basis = rcs_basis(x, [0.0, 1.0, 2.0, 3.0])
        np.testing.assert_array_equal(basis[:, 1:], 0.0)
        np.testing.assert_array_equal(basis[:, 0], x)

    def test_value_at_last_knot_and_flat_second_derivative(self):
        knots = np.array([-1.0, 0.0, 0.5, 2.0])
        x = np.array([2.0])
        np.testing.assert_allclose(rcs_basis(x, knots), oracle_rcs(x, knots), atol=1e-14)
        # second derivative vanishes beyond the last knot
        h = 1e-3
        for x0 in (2.5, 4.0, 10.0):
            vals = oracle_rcs(np.array([x0 - h, x0, x0 + h]), knots)
            second = (vals[0] - 2 * vals[1] + vals[2]) / h**2
            assert np.max(np.abs(second)) < 1e-6

    def test_matches_oracle_on_sample(self):
        rng = stream(11, 0)
        x = rng.standard_normal(1000)
        knots = default_knots(x, 4)
        np.testing.assert_allclose(
            np.quantile(x, [0.05, 0.35, 0.65, 0.95]), knots, atol=0
        )
        np.testing.assert_allclose(rcs_basis(x, knots), oracle_rcs(x, knots), atol=1e-12)

    def test_golden_values(self):
        # frozen from the scalar oracle: knots (-1, 0, 1, 2), probe points
        knots = [-1.0, 0.0, 1.0, 2.0]
        x = np.array([-2.0, -0.5, 0.25, 1.5, 3.0])
        golden = np.array([
            [-2.0, 0.0, 0.0],
            [-0.5, 0.013888888888888888, 0.0],
            [0.25, 0.2170138888888889, 0.001736111111111111],
            [1.5, 1.6944444444444444, 0.3472222222222222],
            [3.0, 4.666666666666667, 1.3333333333333333],
        ])
        np.testing.assert_allclose(rcs_basis(x, knots), golden, atol=1e-10)

    def test_spline_column_count(self):
        rng = stream(11, 1)
        x = rng.standard_normal(1000)
        data = Dataset(y=np.zeros(1000), columns={"L1": x})
        dm = build_design_matrix(data, [Spline("L1", nknots=4)])
        assert dm.X.shape[1] == 3  # linear + 2 restricted cubic columns

    def test_bad_knots(self):
        with pytest.raises(NonIncreasingKnots):
            rcs_basis(np.zeros(3), [0.0, 0.0, 1.0])
        with pytest.raises(NonIncreasingKnots):
            rcs_basis(np.zeros(3), [0.0, 1.0])

    def test_duplicate_knots_collapse(self):
        # discrete covariate: quantiles tie, duplicates collapse, <3 errors
        x = np.repeat([0.0, 1.0, 2.0, 3.0], 25)
        knots = default_knots(x, 5)
        assert np.all(np.diff(knots) > 0)
        binary = np.repeat([0.0, 1.0], 50)
        with pytest.raises(NonIncreasingKnots):
            default_knots(binary, 4)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_tail_linearity(self, seed):
        rng = stream(seed, 3)
        x = rng.standard_normal(500)
        knots = default_knots(x, 4)
        lo = knots[0] - 1.0 - 2.0 * rng.random(3)
        hi = knots[-1] + 1.0 + 2.0 * rng.random(3)
        for triple in (np.sort(lo), np.sort(hi)):
            basis = rcs_basis(triple, knots)
            scale = max(np.max(np.abs(rcs_basis(x, knots))), 1.0)
            # second finite (divided) difference of each column is ~0
            for j in range(basis.shape[1]):
                d1 = (basis[1, j] - basis[0, j]) / (triple[1] - triple[0])
                d2 = (basis[2, j] - basis[1, j]) / (triple[2] - triple[1])
                assert abs(d2 - d1) < 1e-8 * scale


class TestSpecLanguage:
    def test_parse_full_spec(self):
        terms = parse_spec("1 + A + L1 + rcs(L1,4) + L1:L2 + cat(A,ref=1)")
        assert terms == [
            Intercept(),
            Main("A"),
            Main("L1"),
            Spline("L1", nknots=4),
            Interaction(Main("L1"), Main("L2")),
            Categorical("A", reference=1.0),
        ]

    @pytest.mark.parametrize("bad", ["", "1 +", "rcs(L1)", "A + + B", "f(x)"])
    def test_parse_errors(self, bad):
        with pytest.raises(SpecParseError):
            parse_spec(bad)


def test_affine_encoding_invariance():
    # shifting a covariate changes only intercept and that coefficient;
    # fitted means are unchanged
    rng = stream(21, 0)
    n = 400
    l = rng.standard_normal(n)
    a = (rng.random(n) < 0.5).astype(float)
    y = (rng.random(n) < np.exp(-1.2 + 0.3 * a - 0.2 * l)).astype(float)
    base = Dataset(y=y, columns={"A": a, "L": l})
    shifted = base.with_column("L", l + 3.7)
    spec = [Intercept(), Main("A"), Main("L")]
    fit0 = fit_robust_poisson(build_design_matrix(base, spec), y)
    fit1 = fit_robust_poisson(build_design_matrix(shifted, spec), y)
    np.testing.assert_allclose(fit0.mu_hat, fit1.mu_hat, atol=1e-8)
    np.testing.assert_allclose(fit0.beta[1], fit1.beta[1], atol=1e-8)  # exposure
    np.testing.assert_allclose(fit0.beta[2], fit1.beta[2], atol=1e-8)  # slope
    assert abs(fit0.beta[0] - fit1.beta[0]) > 0.1  # intercept absorbs the shift
