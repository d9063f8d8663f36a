import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PT_A, PT_B, PT_C, broken_params, maxabs, unbroken_params
from ptlab.dynamics import ket, propagator
from ptlab.errors import (
    DegenerateSpectrum,
    NonRealSpectrum,
    RegimeMismatch,
    VanishingTrace,
    WeightSumViolation,
)
from ptlab.formalisms import (
    DensityState,
    Formalism,
    biorthogonal_rhs,
    density_from_ensemble,
    eigenbasis_mixed,
    entropy,
    evolve_density,
    evolve_series,
    hermitian_adjoint_rhs,
    lindblad_rhs,
    map_to_isospectral,
    maximally_mixed,
    normalize,
    purity,
    rank,
    source_rhs,
    spectrum,
    trace_rate,
)
from ptlab.operators import (
    IDENTITY,
    ModelParams,
    Normalization,
    build_hamiltonian,
    c_source,
    dyson_map,
    eigensystem,
    isospectral_hamiltonian,
    metric,
)

HA, BI, ISO = Formalism.HERMITIAN_ADJOINT, Formalism.BIORTHOGONAL, Formalism.ISOSPECTRAL
LN2 = math.log(2)
UNBROKEN_POINT = ModelParams(1.0, 0.95, 0.9)


def random_biorthogonal(rng, p):
    """``A g`` with ``A`` Hermitian positive, scaled to unit trace."""
    x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    a = x @ x.conj().T
    rho = a @ metric(p)
    return rho / np.trace(rho)


def times_for(p, gamma_t=20.0):
    return np.linspace(0.0, gamma_t / p.damping_rate, 81)


class TestConstruction:
    def test_maximally_mixed_hermitian_adjoint(self):
        np.testing.assert_allclose(maximally_mixed(HA, PT_C).rho, IDENTITY / 2)

    @pytest.mark.parametrize("p", [PT_A, PT_C, UNBROKEN_POINT])
    @pytest.mark.parametrize("form", [BI, ISO])
    def test_maximally_mixed_non_hermitian(self, p, form):
        assert maxabs(maximally_mixed(form, p).rho - IDENTITY / 2) < 1e-12

    @pytest.mark.parametrize("p", [PT_A, PT_C])
    def test_pure_state_squared_normalization(self, p):
        g = metric(p)
        psi = ket("0")
        norm = (psi.conj() @ g @ psi).real
        expected = np.outer(psi, psi.conj() @ g) / norm**2
        got = density_from_ensemble([(1.0, psi)], BI, p, cpt_norm_power=2).rho
        assert maxabs(got - expected) < 1e-14
        plain = density_from_ensemble([(1.0, psi)], BI, p).rho
        assert abs(np.trace(plain) - 1) < 1e-14

    def test_weight_checks(self):
        with pytest.raises(WeightSumViolation):
            density_from_ensemble([(0.5, ket("0"))], HA, PT_A)
        with pytest.raises(WeightSumViolation):
            density_from_ensemble([(1.5, ket("0")), (-0.5, ket("1"))], HA, PT_A)

    def test_metric_undefined_at_ep(self):
        with pytest.raises(DegenerateSpectrum):
            density_from_ensemble([(1.0, ket("0"))], BI, PT_B)

    def test_isospectral_is_mapped_biorthogonal(self):
        eta, eta_inv = dyson_map(PT_C)
        b = density_from_ensemble([(0.3, ket("0")), (0.7, ket("-i"))], BI, PT_C)
        i = density_from_ensemble([(0.3, ket("0")), (0.7, ket("-i"))], ISO, PT_C)
        assert maxabs(i.rho - eta @ b.rho @ eta_inv) < 1e-14


class TestEvolution:
    def test_hermitian_limit_trace_conserved(self):
        p = ModelParams(1, 0.6, 0)
        rho0 = density_from_ensemble([(0.2, ket("+")), (0.8, ket("1"))], HA, p)
        for st_ in evolve_series(rho0, np.linspace(0, 30, 61)):
            assert abs(st_.trace - 1) < 1e-10

    @given(unbroken_params, st.floats(0, 20))
    def test_hermitian_adjoint_matches_expm(self, p, t):
        rho0 = density_from_ensemble([(1.0, ket("0"))], HA, p)
        U = scipy.linalg.expm(-1j * build_hamiltonian(p) * t)
        ref = U @ rho0.rho @ U.conj().T
        assert maxabs(evolve_density(rho0, t).rho - ref) < 1e-9 * max(1.0, maxabs(ref))

    def test_biorthogonal_unbroken_trace_static(self):
        rho0 = density_from_ensemble([(1.0, ket("0"))], BI, UNBROKEN_POINT)
        for st_ in evolve_series(rho0, np.linspace(0, 20, 41)):
            assert abs(st_.trace - rho0.trace) < 1e-10

    @settings(deadline=None, max_examples=30)
    @given(broken_params, st.integers(0, 2**32 - 1))
    def test_broken_biorthogonal_matches_closed_form(self, p, seed):
        # rho_b = A g evolves into U A U^dagger g
        rng = np.random.default_rng(seed)
        rho0 = random_biorthogonal(rng, p)
        g = metric(p)
        a0 = rho0 @ np.linalg.inv(g)
        ts = np.linspace(0, 5 / p.damping_rate, 6)
        for st_ in evolve_series(DensityState(rho0, BI, p), ts):
            U = propagator(p, st_.t)
            ref = U @ a0 @ U.conj().T @ g
            assert maxabs(st_.rho - ref) < 1e-9 * maxabs(ref)

    def test_backward_and_unsorted_times(self):
        rho0 = maximally_mixed(BI, PT_C)
        ts = [2.0, -1.0, 0.0, 0.5]
        out = evolve_series(rho0, ts)
        assert [s.t for s in out] == ts
        for s in out:
            assert maxabs(s.rho - evolve_density(rho0, s.t).rho) < 1e-10 * maxabs(s.rho)

    def test_isospectral_unbroken_flat_evolution(self):
        p = UNBROKEN_POINT
        h = isospectral_hamiltonian(p)
        rho0 = density_from_ensemble([(0.4, ket("0")), (0.6, ket("+i"))], ISO, p)
        for t in (0.0, 1.3, 7.0):
            V = scipy.linalg.expm(-1j * h * t)
            ref = V @ rho0.rho @ V.conj().T
            assert maxabs(evolve_density(rho0, t).rho - ref) < 1e-10

    def test_biorthogonal_refuses_ep(self):
        rho0 = DensityState(IDENTITY / 2, BI, PT_B)
        with pytest.raises(DegenerateSpectrum):
            evolve_series(rho0, [1.0])


class TestRightHandSides:
    @pytest.mark.parametrize("p", [PT_C, ModelParams(1, 0.3, 1.2), ModelParams(2.0, 0.5, -0.8)])
    def test_broken_forms_agree(self, p, rng):
        for _ in range(100):
            rho = random_biorthogonal(rng, p)
            ref = biorthogonal_rhs(rho, p)
            assert maxabs(source_rhs(rho, p) - ref) < 1e-10
            assert maxabs(lindblad_rhs(rho, p) - ref) < 1e-12 * max(1.0, maxabs(ref))

    def test_damping_rate_value(self):
        assert PT_C.damping_rate == pytest.approx(0.6245, abs=1e-4)

    def test_sink_projector_is_a_pure_mode(self):
        sd = eigensystem(PT_C, Normalization.CPT)
        rho = np.outer(sd.v_plus, sd.v_plus.conj() @ metric(PT_C))
        out = lindblad_rhs(rho, PT_C)
        assert maxabs(out - PT_C.damping_rate * rho) < 1e-12

    def test_lindblad_regime(self):
        with pytest.raises(RegimeMismatch):
            lindblad_rhs(IDENTITY / 2, PT_A)

    @given(unbroken_params)
    def test_unbroken_biorthogonal_is_commutator(self, p):
        rho = np.array([[0.3, 0.1j], [0.2, 0.7]])
        H = build_hamiltonian(p)
        assert maxabs(biorthogonal_rhs(rho, p) + 1j * (H @ rho - rho @ H)) < 1e-10 * max(1.0, maxabs(H))

    def test_hermitian_adjoint_rhs(self):
        H = build_hamiltonian(PT_A)
        rho = IDENTITY / 2
        assert maxabs(hermitian_adjoint_rhs(rho, PT_A) + 0.5j * (H - H.conj().T)) < 1e-15


class TestTraceRate:
    @staticmethod
    def _fd(rho0, t, h=1e-4):
        a, b = evolve_series(rho0, [t - h, t + h])
        return (b.trace - a.trace) / (2 * h)

    @pytest.mark.parametrize("p", [PT_A, PT_C, UNBROKEN_POINT])
    @pytest.mark.parametrize("form", [HA, BI, ISO])
    def test_finite_difference(self, p, form):
        rho0 = density_from_ensemble([(0.6, ket("0")), (0.4, ket("-"))], form, p)
        for t in (0.0, 0.7, 2.1):
            st_ = evolve_density(rho0, t)
            assert abs(trace_rate(st_) - self._fd(rho0, t)) < 1e-6 * max(1.0, abs(st_.trace))

    def test_unbroken_biorthogonal_zero(self):
        assert trace_rate(maximally_mixed(BI, UNBROKEN_POINT)) == 0

    def test_mixed_state_at_start(self):
        assert abs(trace_rate(maximally_mixed(HA, PT_A))) < 1e-15

    def test_broken_source_form(self):
        rho = maximally_mixed(BI, PT_C)
        expected = -PT_C.damping_rate * np.trace(c_source(PT_C) @ rho.rho)
        assert trace_rate(rho) == pytest.approx(expected)


class TestObservables:
    def test_normalize(self):
        rho = DensityState(np.array([[2.0, 0.5], [0.5, 2.0]]), HA, PT_A)
        once = normalize(rho)
        assert abs(once.trace - 1) < 1e-15
        assert maxabs(normalize(once).rho - once.rho) < 1e-15
        scaled = DensityState(3.7 * rho.rho, HA, PT_A)
        assert maxabs(normalize(scaled).rho - once.rho) < 1e-15
        with pytest.raises(VanishingTrace):
            normalize(DensityState(np.zeros((2, 2)), HA, PT_A))

    def test_purity_extremes(self):
        assert purity(np.outer(ket("+"), ket("+").conj())) == pytest.approx(1.0)
        assert purity(IDENTITY / 2) == pytest.approx(0.5)

    def test_entropy_extremes(self):
        assert entropy(IDENTITY / 2).von_neumann == pytest.approx(LN2, abs=1e-15)
        assert entropy(np.outer(ket("0"), ket("0"))).von_neumann == 0.0

    @given(st.floats(0.0, 1.0), st.floats(0.1, 4.0))
    def test_renyi_relations(self, lam, alpha):
        rho = np.diag([lam, 1 - lam]).astype(complex)
        rep = entropy(rho, [2.0, 1.0, alpha])
        assert rep.renyi[2.0] == pytest.approx(-math.log(rep.purity), abs=1e-12)
        assert rep.renyi[1.0] == rep.von_neumann
        assert -1e-12 <= rep.von_neumann <= LN2 + 1e-12
        near_one = entropy(rho, [1 + 1e-7]).renyi[1 + 1e-7]
        assert near_one == pytest.approx(rep.von_neumann, abs=1e-5)

    def test_non_real_spectrum(self):
        with pytest.raises(NonRealSpectrum):
            entropy(np.array([[0.5, 1.0], [-1.0, 0.5]]))
        with pytest.raises(NonRealSpectrum):
            spectrum(np.diag([1.5, -0.5]))

    def test_renyi_order_must_be_positive(self):
        with pytest.raises(ValueError):
            entropy(IDENTITY / 2, [0.0])

    def test_map_to_isospectral(self):
        rho_b = density_from_ensemble([(0.25, ket("0")), (0.75, ket("+"))], BI, PT_C)
        iso = map_to_isospectral(rho_b)
        assert iso.formalism is ISO
        assert abs(iso.trace - rho_b.trace) < 1e-12
        assert abs(purity(iso) - purity(rho_b)) < 1e-12
        with pytest.raises(ValueError):
            map_to_isospectral(iso)

    def test_isospectral_unbroken_hermitian_psd(self):
        rho_b = density_from_ensemble([(0.25, ket("0")), (0.75, ket("+"))], BI, UNBROKEN_POINT)
        for st_ in evolve_series(rho_b, np.linspace(0, 10, 11)):
            iso = map_to_isospectral(st_).rho
            assert maxabs(iso - iso.conj().T) < 1e-12
            assert np.linalg.eigvalsh(iso).min() > -1e-12


class TestHermitianAdjointLaws:
    def test_trace_oscillation(self):
        p = UNBROKEN_POINT
        period = math.pi / p.omega.real
        rho0 = density_from_ensemble([(1.0, ket("0"))], HA, p)
        ts = np.linspace(0, 3 * period, 601)
        tr = np.array([s.trace.real for s in evolve_series(rho0, ts)])
        shifted = np.array([s.trace.real for s in evolve_series(rho0, ts + period)])
        assert maxabs(tr - shifted) < 1e-10
        assert tr.min() >= 0 and tr.max() >= 1

    def test_period_average_is_static(self):
        p = UNBROKEN_POINT
        period = math.pi / p.omega.real
        rho0 = density_from_ensemble([(1.0, ket("0"))], HA, p)

        def average(t0):
            ts = t0 + np.linspace(0, period, 2001)
            vals = [s.trace.real for s in evolve_series(rho0, ts)]
            return np.trapezoid(vals, ts) / period

        assert average(0.0) == pytest.approx(average(1.234), abs=1e-10)

    def test_purity_and_entropy_revival(self):
        p = UNBROKEN_POINT
        period = math.pi / p.omega.real
        rho0 = maximally_mixed(HA, p)
        ts = np.linspace(0, 2 * period, 201)[1:-1]
        ts = ts[np.abs(ts - period) > 1e-6]
        for s in evolve_series(rho0, ts):
            rep = entropy(s)
            assert 0.5 < rep.purity < 1 and rep.von_neumann < LN2
        for k in (1, 2, 3):
            rep = entropy(evolve_density(rho0, k * period))
            assert abs(rep.purity - 0.5) < 1e-10 and abs(rep.von_neumann - LN2) < 1e-10


class TestBrokenLaws:
    @pytest.mark.parametrize("form", [HA, BI])
    def test_growth_slope(self, form):
        p = PT_C
        ts = np.linspace(10, 20, 51) / p.damping_rate
        rho0 = maximally_mixed(form, p)
        tr = [s.trace.real for s in evolve_series(rho0, ts)]
        slope = np.polyfit(ts, np.log(tr), 1)[0]
        expected = 2 * abs(eigensystem(p).e_plus.imag)
        assert abs(slope - expected) / expected < 0.05

    @pytest.mark.parametrize("form", [HA, BI, ISO])
    def test_purification(self, form):
        p = PT_C
        out = evolve_series(maximally_mixed(form, p), times_for(p))
        pur = [purity(s) for s in out]
        assert pur[-1] > 0.999 and entropy(out[-1]).von_neumann < 0.01
        tail = pur[len(pur) // 4:]
        assert np.all(np.diff(tail) >= -1e-12)

    def test_polynomial_growth_at_ep(self):
        rho0 = maximally_mixed(HA, PT_B)
        t1, t2 = 100.0, 200.0
        a, b = (evolve_density(rho0, t).trace.real for t in (t1, t2))
        exponent = math.log(b / a) / math.log(t2 / t1)
        assert 1.9 < exponent < 2.1

    @pytest.mark.parametrize("form", [HA, BI])
    @pytest.mark.parametrize("pure", [True, False])
    def test_rank_preserved(self, form, pure):
        weights = [(1.0, ket("+"))] if pure else [(0.3, ket("0")), (0.7, ket("1"))]
        rho0 = density_from_ensemble(weights, form, PT_C)
        r0 = rank(rho0)
        assert r0 == (1 if pure else 2)
        for s in evolve_series(rho0, np.linspace(0, 10, 21)):
            assert rank(s) == r0

    def test_cbpt_product_not_conserved(self):
        p = PT_C
        g = metric(p)
        psi0, phi0 = np.array([0.3, 1.0 + 0.2j]), np.array([1.0, -0.4j])

        def overlap(t):
            U = propagator(p, t)
            return (U @ psi0).conj() @ g @ (U @ phi0)

        h = 1e-4
        deriv = (overlap(1.0 + h) - overlap(1.0 - h)) / (2 * h)
        assert abs(deriv) > 10 * 1e-10


def test_formalism_equivalence():
    for p in (PT_C, UNBROKEN_POINT, ModelParams(1, 0.5, 1.4)):
        rho_b = density_from_ensemble([(0.6, ket("0")), (0.4, ket("+i"))], BI, p)
        iso0 = map_to_isospectral(rho_b)
        ts = np.linspace(0, 15, 31)
        for b, i in zip(evolve_series(rho_b, ts), evolve_series(iso0, ts)):
            rb, ri = entropy(b), entropy(i)
            scale = max(1.0, abs(b.trace))
            assert abs(b.trace - i.trace) < 1e-10 * scale
            assert abs(rb.purity - ri.purity) < 1e-10
            for a in rb.renyi:
                # orders below 1 amplify round-off in a tiny eigenvalue as
                # eps / sqrt(lambda_min); compare them only while well conditioned
                if a < 1 and min(rb.eigenvalues) < 1e-6:
                    continue
                assert abs(rb.renyi[a] - ri.renyi[a]) < 1e-10


def test_eigenbasis_mixture_is_half_identity():
    for p in (PT_C, UNBROKEN_POINT):
        assert maxabs(eigenbasis_mixed(BI, p).rho - IDENTITY / 2) < 1e-12
