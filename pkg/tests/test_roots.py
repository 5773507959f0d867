import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.cfrac import BoundaryVector, ContinuedFraction, DriftForm
from src.errors import AssumptionViolatedError
from src.model import ModelParams
from src.roots import (
    ZeroFinder,
    ZeroFinding,
    ZeroMethod,
    check_assumption1,
    find_alpha_tilde,
    rationalize_g,
)

from .conftest import random_stable_params


def _cubic(params: ModelParams) -> np.ndarray:
    lam, mu, r = params.lam, params.mu, params.r
    return np.array(
        [
            lam ** 3 * (r + 1) - lam ** 2 * mu - 2 * lam * mu ** 2,
            3 * lam ** 2 * (r + 1) + mu * lam * r - lam * mu - mu ** 2,
            3 * lam * (r + 1) + mu * r,
            r + 1,
        ]
    )


class TestRationalizedPolynomial:
    def test_single_server_closed_form(self, pole_params):
        g = rationalize_g(pole_params)
        # −2μα[(r+1)α − μ + λ(r+1)] for (λ, μ, r) = (1, 3, 1)
        assert g.coef == pytest.approx([0.0, 6.0, -12.0], abs=1e-12)

    def test_single_server_proportional_to_printed_form(self, rng):
        for _ in range(100):
            params = random_stable_params(rng, 1)
            lam, mu, r = params.lam, params.mu, params.r
            printed = np.array([0.0, lam * (r + 1) - mu, r + 1])
            g = rationalize_g(params).coef
            # the constant term is a cancellation of products of size ~mu**3
            assert g[0] == pytest.approx(0.0, abs=1e-12 * mu ** 3 / lam)
            assert g[1:] / g[2] == pytest.approx(printed[1:] / printed[2], rel=1e-10)

    def test_two_server_unit_form_matches_cubic(self, rng):
        for _ in range(100):
            params = random_stable_params(rng, 2)
            g = rationalize_g(params, DriftForm.UNIT_DRIFT)
            assert abs(g.coef[0]) <= 1e-12 * np.abs(g.coef).max()
            reduced = g.coef[1:]
            cubic = _cubic(params)
            assert reduced / reduced[-1] == pytest.approx(cubic / cubic[-1], rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("form", list(DriftForm))
    def test_two_server_cubic_is_reduced_g(self, rng, form):
        for _ in range(100):
            params = random_stable_params(rng, 2)
            finder = ZeroFinder(params, form)
            reduced = finder.rationalize_g().coef[1:]
            cubic = finder.cubic_c2().coef
            assert reduced / reduced[-1] == pytest.approx(cubic / cubic[-1], rel=1e-9, abs=1e-9)

    def test_unit_cubic_is_the_printed_one(self, rng):
        for _ in range(20):
            params = random_stable_params(rng, 2)
            assert ZeroFinder(params, DriftForm.UNIT_DRIFT).cubic_c2().coef == pytest.approx(_cubic(params), rel=1e-12)

    @pytest.mark.parametrize("form", list(DriftForm))
    def test_two_server_cubic_is_convex(self, rng, form):
        for _ in range(20):
            params = random_stable_params(rng, 2)
            curvature = ZeroFinder(params, form).cubic_c2().deriv(2)
            assert np.all(curvature(np.linspace(0.0, 10.0, 50)) > 0.0)

    def test_cubic_needs_two_servers(self, branch_params):
        with pytest.raises(ValueError):
            ZeroFinder(branch_params).cubic_c2()

    @pytest.mark.parametrize("form", list(DriftForm))
    def test_four_is_never_a_root(self, branch_params, form):
        g = rationalize_g(branch_params, form)
        denominator = ContinuedFraction(branch_params, form).chain[-1].denominator
        factor = -2.0 * branch_params.lam * (branch_params.cmu / branch_params.lam) ** branch_params.c
        # P² − 70P + 1800 ≥ 575 for real P
        bracket = g(4.0) / (factor * float(denominator(4.0)) ** 2)
        assert bracket >= 575.0 * (1 - 1e-9)

    def test_roots_are_recorded(self, branch_params):
        finding = find_alpha_tilde(branch_params)
        assert len(finding.all_roots) == rationalize_g(branch_params).degree()
        assert np.any(np.isclose(finding.roots_complex(), 0.0))


class TestFindAlphaTilde:
    def test_pole_tuple(self, pole_params):
        finding = find_alpha_tilde(pole_params)
        assert finding.method is ZeroMethod.CLOSED_FORM_C1
        assert finding.alpha_tilde == pytest.approx(0.5, rel=1e-12)
        assert finding.multiplicity == 1
        assert finding.derivative == pytest.approx(3.0, rel=1e-10)
        assert finding.alpha1 == pytest.approx(4.0 - 2.0 * math.sqrt(3.0))

    @pytest.mark.parametrize("general", [False, True])
    def test_tie_with_branch_point(self, branch_tie_params, general):
        finding = find_alpha_tilde(branch_tie_params, general=general)
        assert finding.at_branch_point
        assert finding.alpha_tilde == pytest.approx(1.0, rel=1e-9)
        assert finding.derivative is None

    def test_three_server_tuple_has_no_zero(self, branch_params):
        finding = find_alpha_tilde(branch_params)
        assert finding.alpha_tilde is None
        assert finding.method is ZeroMethod.RATIONALIZED

    def test_root_of_g_off_the_z0_branch_is_rejected(self, branch_params):
        finder = ZeroFinder(branch_params)
        finding = find_alpha_tilde(branch_params)
        roots = finding.roots_complex()
        inside = roots[(np.abs(roots.imag) < 1e-9) & (roots.real > 0.0) & (roots.real < finder.alpha1)]
        assert len(inside) >= 1
        grid = np.linspace(1e-3, 1.0, 400) * finder.alpha1
        signs = np.sign([finder.branch_value(a) for a in grid])
        assert np.all(signs == signs[0])
        assert finding.alpha_tilde is None

    def test_three_server_unit_form_has_spurious_zero(self, branch_params):
        finding = find_alpha_tilde(branch_params, DriftForm.UNIT_DRIFT)
        assert finding.alpha_tilde is not None
        assert 0.0 < finding.alpha_tilde < finding.alpha1
        finder = ZeroFinder(branch_params, DriftForm.UNIT_DRIFT)
        assert abs(finder.branch_value(finding.alpha_tilde)) < 1e-8 * finding.scale

    @pytest.mark.parametrize("form", list(DriftForm))
    def test_two_server_tuple(self, two_server_params, form):
        finding = find_alpha_tilde(two_server_params, form)
        assert finding.method is ZeroMethod.CUBIC_C2
        assert 0.0 < finding.alpha_tilde < finding.alpha1
        assert finding.alpha1 == pytest.approx((math.sqrt(2.0) - 1.0) ** 2 / 2.0)
        assert abs(ZeroFinder(two_server_params, form).branch_value(finding.alpha_tilde)) < 1e-8 * finding.scale

    @pytest.mark.parametrize("form", list(DriftForm))
    def test_two_server_cubic_agrees_with_general_path(self, rng, form):
        for _ in range(100):
            params = random_stable_params(rng, 2)
            cubic = find_alpha_tilde(params, form)
            general = find_alpha_tilde(params, form, general=True)
            assert cubic.method is ZeroMethod.CUBIC_C2
            assert general.method is ZeroMethod.RATIONALIZED
            if general.alpha_tilde is None:
                assert cubic.alpha_tilde is None
            else:
                assert cubic.alpha_tilde == pytest.approx(general.alpha_tilde, rel=1e-10)

    def test_single_server_general_path_agrees(self, rng):
        checked = 0
        while checked < 200:
            params = random_stable_params(rng, 1)
            ratio = params.mu / (params.lam * (params.r + 1.0) ** 2)
            if abs(ratio - 1.0) < 0.1:
                continue
            general = find_alpha_tilde(params, general=True)
            closed = find_alpha_tilde(params)
            if ratio <= 1.0:
                expected = params.mu / (params.r + 1.0) - params.lam
                assert general.alpha_tilde == pytest.approx(expected, rel=1e-10)
                assert closed.alpha_tilde == pytest.approx(expected, rel=1e-12)
            else:
                assert general.alpha_tilde is None
                assert closed.alpha_tilde is None
            checked += 1

    def test_sign_changes_are_found(self, rng):
        for _ in range(60):
            params = random_stable_params(rng, int(rng.integers(2, 7)))
            finder = ZeroFinder(params)
            finding = find_alpha_tilde(params)
            grid = np.linspace(0.01, 0.99, 200) * finder.alpha1
            values = np.array([finder.branch_value(a) for a in grid])
            crossings = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
            if len(crossings):
                assert finding.alpha_tilde is not None
                assert grid[crossings[0]] <= finding.alpha_tilde <= grid[crossings[0] + 1]
            if finding.alpha_tilde is not None and not finding.at_branch_point:
                assert 0.0 < finding.alpha_tilde < finding.alpha1
                assert abs(finder.branch_value(finding.alpha_tilde)) < 1e-8 * finding.scale


class TestAssumption1:
    def test_single_server(self, pole_params, pole_boundary):
        report = check_assumption1(pole_params, find_alpha_tilde(pole_params), pole_boundary)
        assert report.value == pytest.approx(0.25, rel=1e-12)
        assert report.closed_form == pytest.approx(report.value, rel=1e-12)
        assert not report.degenerate

    @pytest.mark.parametrize("form", list(DriftForm))
    def test_two_server_closed_form(self, two_server_params, two_server_boundary, form):
        report = check_assumption1(two_server_params, find_alpha_tilde(two_server_params, form), two_server_boundary, form)
        assert report.closed_form == pytest.approx(report.value, rel=1e-9, abs=1e-14)

    def test_needs_a_zero(self, branch_params, branch_boundary):
        with pytest.raises(AssumptionViolatedError):
            check_assumption1(branch_params, find_alpha_tilde(branch_params), branch_boundary)

    def test_degenerate_boundary_is_flagged(self, pole_params):
        report = check_assumption1(pole_params, find_alpha_tilde(pole_params), BoundaryVector(pi0=[0.0]))
        assert report.degenerate


def test_zero_finding_is_frozen(pole_params):
    finding = find_alpha_tilde(pole_params)
    assert isinstance(finding, ZeroFinding)
    with pytest.raises(ValidationError):
        finding.alpha_tilde = 0.1
