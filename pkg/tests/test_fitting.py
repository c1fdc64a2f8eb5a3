import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquet_ghz.errors import ConfigError
from floquet_ghz.fitting import fit_power_law


class TestPowerLaw:
    def test_exact_data(self):
        L = np.array([8, 12, 16, 20, 24])
        fit = fit_power_law(L, L**-0.5)
        assert fit.slope == pytest.approx(-0.5, abs=1e-10)
        assert fit.intercept == pytest.approx(0.0, abs=1e-10)
        assert fit.residual_norm < 1e-12
        assert fit.window == (8.0, 24.0)
        assert fit.n_points == 5

    def test_log_model(self):
        L = np.array([16.0, 32, 64, 128])
        y = 3.0 * L**0.7 * np.log(L)
        fit = fit_power_law(L, y, model="power-law-log")
        assert fit.slope == pytest.approx(0.7, abs=1e-10)
        assert np.exp(fit.intercept) == pytest.approx(3.0)

    @settings(max_examples=40, deadline=None)
    @given(slope=st.floats(-3, 3), amp=st.floats(0.01, 100))
    def test_recovers_any_power(self, slope, amp):
        L = np.array([4.0, 8, 16, 32])
        assert fit_power_law(L, amp * L**slope).slope == pytest.approx(slope, abs=1e-9)

    def test_weighted_against_normal_equations(self, rng):
        L = np.array([8.0, 12, 16, 20, 24])
        y = L**-0.5 * np.exp(rng.normal(scale=0.05, size=5))
        sigma = 0.02 * y * np.array([1, 2, 1, 3, 1])
        fit = fit_power_law(L, y, sigma=sigma)
        W = np.diag((y / sigma) ** 2)
        X = np.column_stack([np.log(L), np.ones(5)])
        cov = np.linalg.inv(X.T @ W @ X)
        beta = cov @ X.T @ W @ np.log(y)
        assert fit.slope == pytest.approx(beta[0], rel=1e-10)
        assert fit.slope_err == pytest.approx(np.sqrt(cov[0, 0]), rel=1e-10)

    def test_unweighted_error_from_residuals(self, rng):
        L = np.array([8.0, 12, 16, 20, 24])
        y = L**-0.5 * np.exp(rng.normal(scale=0.05, size=5))
        fit = fit_power_law(L, y)
        p, cov = np.polyfit(np.log(L), np.log(y), 1, cov=True)
        assert fit.slope == pytest.approx(p[0], rel=1e-10)
        # polyfit scales by chi2 / (n - 2), same as the unweighted estimate
        assert fit.slope_err == pytest.approx(np.sqrt(cov[0, 0]), rel=1e-8)

    @pytest.mark.parametrize(
        "L,y,model",
        [
            ([1, 2], [1, 2], "power-law"),
            ([4, 4, 4], [1, 2, 3], "power-law"),
            ([2, 3, 4], [1, -1, 2], "power-law"),
            ([1, 2, 3], [1, 2, 3], "power-law-log"),
            ([2, 3, 4], [1, 2, 3], "cubic"),
        ],
    )
    def test_rejects(self, L, y, model):
        with pytest.raises(ConfigError):
            fit_power_law(L, y, model=model)

    def test_to_dict(self):
        d = fit_power_law([2, 4, 8], [1, 0.5, 0.25]).to_dict()
        assert d["model"] == "power-law" and d["slope"] == pytest.approx(-1)
