import math

import numpy as np
import pytest

from src.asymptotics import (
    TailCase,
    analyze,
    boundary_tail,
    classify,
    constant_c1,
    consistency_residual,
    density_prefactors,
    joint_tail,
    laplace_limit,
    marginal_factor,
    marginal_tail,
    phi_lower_chain_tail,
)
from src.cfrac import BoundaryVector, DriftForm, boundary_from_drift_balance
from src.errors import UnstableModelError, ZeroDenominatorError
from src.model import ModelParams, phase_stationary
from src.roots import ZeroFinding, ZeroMethod, find_alpha_tilde

from .conftest import random_stable_params


@pytest.fixture
def pole_report(pole_params, pole_boundary):
    return analyze(pole_params, pole_boundary)


class TestClassification:
    def test_pole(self, pole_params):
        case, alpha_star = classify(pole_params, find_alpha_tilde(pole_params))
        assert case is TailCase.POLE
        assert alpha_star == pytest.approx(0.5)

    def test_pole_at_branch(self, branch_tie_params):
        case, alpha_star = classify(branch_tie_params, find_alpha_tilde(branch_tie_params))
        assert case is TailCase.POLE_AT_BRANCH
        assert alpha_star == pytest.approx(1.0)

    def test_branch(self, branch_params):
        case, alpha_star = classify(branch_params, find_alpha_tilde(branch_params))
        assert case is TailCase.BRANCH
        assert alpha_star == pytest.approx((math.sqrt(90.0) - math.sqrt(20.0)) ** 2 / 10.0)

    def test_unstable(self):
        params = ModelParams(c=1, lam=1.0, mu=3.0, r=3.0)
        with pytest.raises(UnstableModelError):
            analyze(params, BoundaryVector(pi0=[0.1]))


class TestPoleTuple:
    def test_constants(self, pole_report):
        assert pole_report.case_tag is TailCase.POLE
        assert pole_report.alpha_star == pytest.approx(0.5)
        assert pole_report.z_star == pytest.approx(1.5)
        assert pole_report.c_const == pytest.approx(1.0 / 12.0, rel=1e-10)
        assert pole_report.C_const == pytest.approx(1.0 / 12.0, rel=1e-10)
        assert pole_report.power == 0.0
        assert pole_report.C_tilde == pytest.approx(1.0 / 6.0, rel=1e-10)
        assert pole_report.phase_ratio == pytest.approx(0.5)
        assert pole_report.d_ztilde == pytest.approx(2.0, rel=1e-12)
        assert pole_report.lower_multipliers == []

    def test_laplace_limit(self, pole_params, pole_boundary, pole_report):
        limit = laplace_limit(pole_params, pole_boundary, pole_report)
        assert limit == pytest.approx(pole_report.c_const, rel=1e-4)

    def test_joint_tail(self, pole_params, pole_report):
        tail = joint_tail(3, pole_report, pole_params)
        assert tail.prefactor == pytest.approx(pole_report.C_const * 0.5 ** 3)
        assert tail.limit == pytest.approx(phase_stationary(pole_params).xi(3))
        assert tail.rate == pole_report.alpha_star

    def test_joint_tail_rejects_lower_phases(self, two_server_params, two_server_boundary):
        report = analyze(two_server_params, two_server_boundary)
        with pytest.raises(ValueError):
            joint_tail(0, report, two_server_params)

    def test_marginal_tail(self, pole_params, pole_report):
        tail = marginal_tail(pole_report, pole_params)
        assert tail.phase is None
        assert tail.limit == 1.0
        assert tail.cdf_prefactor == pytest.approx(-(1.0 / 6.0) / 0.5)

    def test_descriptor_evaluation(self, pole_params, pole_report):
        tail = joint_tail(0, pole_report, pole_params)
        x = np.array([10.0, 20.0])
        assert tail.density(x) == pytest.approx(np.exp(-0.5 * x) / 12.0)
        assert tail.cdf(x) == pytest.approx(2.0 / 3.0 - np.exp(-0.5 * x) / 6.0)

    def test_zero_boundary_gives_zero_constant(self, pole_params):
        zero = find_alpha_tilde(pole_params)
        assert constant_c1(pole_params, BoundaryVector(pi0=[0.0]), zero) == 0.0

    def test_vanishing_derivative(self, pole_params, pole_boundary):
        finding = ZeroFinding(
            alpha_tilde=0.3,
            method=ZeroMethod.CLOSED_FORM_C1,
            all_roots=[],
            alpha1=4.0 - 2.0 * math.sqrt(3.0),
            derivative=0.0,
        )
        with pytest.raises(ZeroDenominatorError):
            constant_c1(pole_params, pole_boundary, finding)


class TestSingleServerFamily:
    def test_constants_match_laplace_limit(self, rng):
        checked = 0
        while checked < 30:
            params = random_stable_params(rng, 1)
            alpha_tilde = params.mu / (params.r + 1.0) - params.lam
            alpha1 = (math.sqrt(params.mu) - math.sqrt(params.lam)) ** 2 / params.r
            if params.mu > 0.9 * params.lam * (params.r + 1.0) ** 2 or alpha_tilde < 0.1 or alpha1 - alpha_tilde < 0.05:
                continue
            boundary = boundary_from_drift_balance(params)
            report = analyze(params, boundary)
            assert report.case_tag is TailCase.POLE
            assert laplace_limit(params, boundary, report) == pytest.approx(report.c_const, rel=1e-4)
            assert report.C_tilde == pytest.approx((params.r + 1.0) / params.r * report.C_const, rel=1e-10)
            checked += 1

    def test_marginal_factor(self, pole_params):
        assert marginal_factor(pole_params, 0.5) == pytest.approx(2.0)


class TestPoleAtBranch:
    def test_constants(self, branch_tie_params, branch_tie_boundary):
        report = analyze(branch_tie_params, branch_tie_boundary)
        assert report.case_tag is TailCase.POLE_AT_BRANCH
        assert report.alpha_star == pytest.approx(1.0)
        assert report.z_star == pytest.approx(2.0)
        assert report.c_const == pytest.approx(1.0 / math.sqrt(8.0), rel=1e-9)
        assert report.C_const == pytest.approx(0.19947, rel=1e-4)
        assert report.power == -0.5

    def test_laplace_limit(self, branch_tie_params, branch_tie_boundary):
        report = analyze(branch_tie_params, branch_tie_boundary)
        assert laplace_limit(branch_tie_params, branch_tie_boundary, report) == pytest.approx(report.c_const, rel=1e-2)


class TestBranchTuple:
    def test_constants(self, branch_params, branch_boundary):
        report = analyze(branch_params, branch_boundary)
        assert report.case_tag is TailCase.BRANCH
        assert report.alpha_tilde is None
        assert report.c_const > 0.0
        assert report.C_const == pytest.approx(report.c_const / math.sqrt(math.pi))
        assert report.power == -1.5
        assert report.z_star == pytest.approx(math.sqrt(branch_params.z_tilde), rel=1e-10)
        assert report.phase_ratio == pytest.approx(1.0 / report.z_star, rel=1e-10)
        assert len(report.lower_multipliers) == 2
        assert report.boundary_source == "spectral"

    def test_laplace_limit(self, branch_params, branch_boundary):
        report = analyze(branch_params, branch_boundary)
        assert laplace_limit(branch_params, branch_boundary, report) == pytest.approx(report.c_const, rel=1e-2)

    def test_lower_chain_tails(self, branch_params, branch_boundary):
        report = analyze(branch_params, branch_boundary)
        for phase in range(branch_params.c - 1):
            tail = phi_lower_chain_tail(phase, report, branch_params)
            assert tail.prefactor == pytest.approx(report.lower_multipliers[phase] * report.C_const)
            assert tail.power == -1.5
        with pytest.raises(ValueError):
            phi_lower_chain_tail(branch_params.c - 1, report, branch_params)


class TestTwoServer:
    @pytest.mark.parametrize("form", list(DriftForm))
    def test_pole_case(self, two_server_params, two_server_boundary, form):
        report = analyze(two_server_params, two_server_boundary, form)
        assert report.case_tag is TailCase.POLE
        assert report.form is form
        assert laplace_limit(two_server_params, two_server_boundary, report) == pytest.approx(report.c_const, rel=1e-4)

    def test_lower_multiplier(self, two_server_params, two_server_boundary):
        report = analyze(two_server_params, two_server_boundary)
        expected = two_server_params.mu / (2.0 * report.alpha_star + two_server_params.lam)
        assert report.lower_multipliers == pytest.approx([expected])
        tail = phi_lower_chain_tail(0, report, two_server_params)
        assert tail.prefactor == pytest.approx(expected * report.C_const)


class TestDensityPrefactors:
    @pytest.mark.parametrize(
        "case, k, expected",
        [
            (TailCase.POLE, 1, (0.3, 0.0)),
            (TailCase.POLE, 2, (0.3, 1.0)),
            (TailCase.POLE, 3, (0.15, 2.0)),
            (TailCase.POLE_AT_BRANCH, 1, (0.3 / math.sqrt(math.pi), -0.5)),
            (TailCase.BRANCH, 1, (0.3 / math.sqrt(math.pi), -1.5)),
        ],
    )
    def test_values(self, case, k, expected):
        assert density_prefactors(case, 0.3, k) == pytest.approx(expected)

    def test_accepts_tag(self):
        assert density_prefactors("III", 1.0)[1] == -1.5


class TestInvariants:
    def test_consistency_identity(self, pole_report, branch_params, branch_boundary, two_server_params, two_server_boundary):
        reports = [pole_report, analyze(branch_params, branch_boundary), analyze(two_server_params, two_server_boundary)]
        for report in reports:
            assert abs(report.consistency_residual) < 1e-10

    def test_consistency_residual_detects_mismatch(self, pole_params):
        assert abs(consistency_residual(pole_params, 0.5, 1.6)) > 1e-3

    @pytest.mark.parametrize("form", list(DriftForm))
    def test_boundary_tail_identity(self, form, pole_params, pole_boundary, two_server_params, two_server_boundary, branch_params, branch_boundary):
        cases = [(pole_params, pole_boundary), (two_server_params, two_server_boundary), (branch_params, branch_boundary)]
        for params, boundary in cases:
            tail = boundary_tail(params, boundary, form)
            assert tail.d_ztilde > 0.0
            assert tail.d_ztilde == pytest.approx(tail.identity_value, rel=1e-8)
            assert abs(tail.alpha_at_z_tilde) < 1e-12 * max(1.0, params.cmu)
            assert tail.ratio == pytest.approx(params.tail_ratio)
            assert tail.mass(2) == pytest.approx(tail.d_ztilde * params.tail_ratio ** 3)

    def test_error_bars_are_reported(self, branch_params, branch_boundary):
        report = analyze(branch_params, branch_boundary)
        assert report.C_error >= 0.0
        assert report.C_error < 1e-3 * report.C_const
