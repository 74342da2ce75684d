"""Interface-calculus layer: material properties, regularized geometry, and
the discrete-derivative surrogates exposed to the assembly."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrolevel import interface_calculus as ic

MODEL = ic.InterfaceModel(rho1=100.0, rho2=1.0, mu1=10.0, mu2=1.0,
                          eps_width=0.5)
phis = st.floats(min_value=-2.0, max_value=2.0,
                 allow_nan=False, allow_infinity=False)


class TestValidation:
    def test_bad_model(self):
        with pytest.raises(ValueError):
            ic.InterfaceModel(rho1=0.0, rho2=1, mu1=0, mu2=0, eps_width=1)
        with pytest.raises(ValueError):
            ic.InterfaceModel(rho1=1, rho2=1, mu1=-1, mu2=0, eps_width=1)
        with pytest.raises(ValueError):
            ic.InterfaceModel(rho1=1, rho2=1, mu1=0, mu2=0, eps_width=0)

    def test_bad_groups(self):
        with pytest.raises(ValueError):
            ic.DimensionlessGroups(Re=0.0, We=1.0)
        with pytest.raises(ValueError):
            ic.DimensionlessGroups(Re=1.0, We=1.0, Fr_inv_sq=-1.0)

    def test_bad_deriv_order(self):
        with pytest.raises(ValueError):
            ic.heaviside_deriv(0.0, 0)
        with pytest.raises(ValueError):
            ic.heaviside_deriv(0.0, 6)


class TestGroups:
    def test_from_physical(self):
        # [TRIVIAL] unit-scale convention: We = 1/sigma, Re = 1/mu1, g as is
        g = ic.DimensionlessGroups.from_physical(sigma=73.0, mu1=0.5,
                                                 gravity=9.81)
        assert g.We == 1.0 / 73.0
        assert g.Re == 2.0
        assert g.Fr_inv_sq == 9.81

    def test_inviscid_pair(self):
        g = ic.DimensionlessGroups.from_physical(sigma=1.0, mu1=0.0)
        assert np.isinf(g.Re)


class TestMaterialFields:
    @given(phi=phis)
    @settings(max_examples=300, deadline=None)
    def test_density_bounds(self, phi):
        rho = float(ic.density(phi, MODEL))
        assert MODEL.rho2 <= rho <= MODEL.rho1
        mu = float(ic.viscosity(phi, MODEL))
        assert MODEL.mu2 <= mu <= MODEL.mu1

    def test_far_field_values_exact(self):
        # [TRIVIAL] pure phases outside the transition band
        assert ic.density(MODEL.eps_width, MODEL) == MODEL.rho1
        assert ic.density(-MODEL.eps_width, MODEL) == MODEL.rho2
        assert ic.viscosity(10.0, MODEL) == MODEL.mu1

    def test_dirac_support_and_positivity(self):
        phi = np.linspace(-2, 2, 801)
        d = ic.dirac(phi, MODEL)
        assert np.all(d >= 0)
        assert np.all(d[np.abs(phi) >= MODEL.eps_width] == 0)
        # [DERIVED] peak value 1.25 / eps at the interface
        assert ic.dirac(0.0, MODEL) == 1.25 / MODEL.eps_width

    def test_dirac_area_in_phi(self):
        # [DERIVED] integral of delta_eps over phi is 1 for any eps
        xg, wg = np.polynomial.legendre.leggauss(10)
        e = MODEL.eps_width
        total = sum(0.5 * (b - a) * np.dot(
            wg, ic.dirac(0.5 * (b - a) * xg + 0.5 * (a + b), MODEL))
            for a, b in ((-e, 0.0), (0.0, e)))
        assert abs(total - 1.0) <= 1e-14


class TestGeometry:
    def test_reg_norm(self):
        b = np.array([3.0, 4.0])
        assert ic.reg_norm(b, 0.0) == 5.0
        assert ic.reg_norm(np.zeros(2), 1e-3) == 1e-3
        assert ic.reg_norm(b, 1e-8) >= 5.0

    def test_circle_curvature(self):
        # [DERIVED] for the signed distance phi = R - |x - c| (positive
        # inside), kappa = -(d-1)/|x - c| with the div(nu) convention
        c = np.array([1.0, -2.0])
        pts = c + np.array([[0.5, 0.0], [0.0, 1.5], [0.6, 0.8], [-1.0, 1.0]])
        r = np.linalg.norm(pts - c, axis=-1)
        grad = -(pts - c) / r[:, None]
        eye = np.eye(2)
        hess = np.stack([
            -(eye / ri - np.outer(x - c, x - c) / ri**3)
            for x, ri in zip(pts, r)])
        nu, kappa, pt = ic.normal_curvature(grad, hess, eps=0.0)
        np.testing.assert_allclose(kappa, -1.0 / r, rtol=1e-12)
        np.testing.assert_allclose(nu, grad, rtol=1e-12)
        # P_T is the projector onto the tangent: P_T nu = 0, P_T^2 = P_T
        np.testing.assert_allclose(
            np.einsum("pij,pj->pi", pt, nu), 0.0, atol=1e-12)
        np.testing.assert_allclose(
            np.einsum("pij,pjk->pik", pt, pt), pt, atol=1e-12)


class TestSurrogates:
    @given(p0=phis, p1=phis)
    @settings(max_examples=300, deadline=None)
    def test_density_chain_rule_exact(self, p0, p1):
        lhs = float(ic.density(p1, MODEL)) - float(ic.density(p0, MODEL))
        rhs = float(ic.rho_prime_aux(p0, p1, MODEL)) * (p1 - p0)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1e-3 * MODEL.drho)

    @given(p0=phis, p1=phis)
    @settings(max_examples=300, deadline=None)
    def test_dirac_chain_rule_exact(self, p0, p1):
        lhs = float(ic.dirac(p1, MODEL)) - float(ic.dirac(p0, MODEL))
        rhs = float(ic.dirac_prime_aux(p0, p1, MODEL)) * (p1 - p0)
        assert abs(lhs - rhs) <= 1e-12 * (1.25 / MODEL.eps_width)

    def test_momentum_surrogate_is_pointwise_derivative(self):
        phi = np.linspace(-0.6, 0.6, 41)
        h = 1e-7
        fd = (ic.density(phi + h, MODEL) - ic.density(phi - h, MODEL)) / (2*h)
        np.testing.assert_allclose(ic.rho_prime_mom(phi, MODEL), fd,
                                   rtol=0, atol=1e-5 * MODEL.drho)

    def test_with_derivs_consistent(self):
        rng = np.random.default_rng(3)
        p0 = rng.uniform(-1, 1, 256)
        p1 = rng.uniform(-1, 1, 256)
        ra, _, sg, _ = ic.aux_surrogates_with_derivs(p0, p1, MODEL)
        np.testing.assert_array_equal(ra, ic.rho_prime_aux(p0, p1, MODEL))
        np.testing.assert_array_equal(sg, ic.dirac_prime_aux(p0, p1, MODEL))
