import numpy as np
import pytest

from hermiton.canonical import (
    PhasePoint,
    canonical_frozen_flow,
    darboux_momentum,
    darboux_reduce,
    dirac_flow,
    hamilton_flow_check,
    hamiltonian,
    lagrange_multipliers,
    lagrangian_flow_through_legendre,
    legendre_inverse,
    legendre_regular,
    legendre_singular,
    primary_constraints,
    reduced_bracket_flow,
)
from hermiton.dynamics import rhs_schrodinger
from hermiton.errors import NotPositiveDefinite, ZeroAlpha2
from hermiton.models import (
    FullState,
    ModelParams,
    PotentialSpec,
    apply_omega_inverse,
    energy,
    p_tensor,
    theta1,
)

from conftest import rand_herm, rand_pd, rand_vec


def full_params(**overrides):
    base = dict(alpha1=0.4, alpha2=0.3, alpha3=0.15, alpha4=0.2, alpha5=-1.0,
                alpha6=0.9, alpha7=0.25, alpha8=0.2, alpha9=0.15, kappa=0.1)
    base.update(overrides)
    return ModelParams(**base)


def random_state(rng, n):
    return FullState(psi=rand_vec(rng, n), psi_dot=rand_vec(rng, n),
                     gamma=rand_pd(rng, n), gamma_dot=rand_herm(rng, n, 0.5))


class TestSingularSector:
    def test_zero_state(self, rng):
        pi, pi_bar = legendre_singular(np.zeros(2), rand_pd(rng, 2), 1.0)
        assert np.allclose(pi, 0.0) and np.allclose(pi_bar, 0.0)

    def test_scalar_value(self):
        pi, _ = legendre_singular(np.array([1.0]), np.eye(1), alpha=1.0)
        assert pi[0] == pytest.approx(1j)

    def test_conjugate_consistency(self, rng):
        pi, pi_bar = legendre_singular(rand_vec(rng, 3), rand_pd(rng, 3), 0.7)
        assert np.allclose(pi_bar, np.conj(pi))

    def test_constraints_vanish_on_image(self, rng):
        psi, gamma = rand_vec(rng, 2), rand_pd(rng, 2)
        pi, _ = legendre_singular(psi, gamma, 0.9)
        point = PhasePoint(psi=psi, pi=pi, gamma=gamma)
        assert primary_constraints(point, 0.9).max_violation() < 1e-14

    def test_constraints_linear_in_perturbation(self, rng):
        psi, gamma = rand_vec(rng, 2), rand_pd(rng, 2)
        pi, _ = legendre_singular(psi, gamma, 0.9)
        delta = rand_vec(rng, 2)
        point = PhasePoint(psi=psi, pi=pi + delta, gamma=gamma)
        assert np.allclose(primary_constraints(point, 0.9).phi, delta)

    def test_constraints_hand_formula(self, rng):
        psi, gamma, pi = rand_vec(rng, 2), rand_pd(rng, 2), rand_vec(rng, 2)
        point = PhasePoint(psi=psi, pi=pi, gamma=gamma)
        phi = primary_constraints(point, 1.2).phi
        by_hand = pi - 1.2j * np.array(
            [sum(np.conj(psi[b]) * gamma[b, a] for b in range(2)) for a in range(2)])
        assert np.allclose(phi, by_hand)

    def test_darboux_momentum_is_twice_pi(self, rng):
        psi, gamma = rand_vec(rng, 3), rand_pd(rng, 3)
        pi, _ = legendre_singular(psi, gamma, 0.8)
        assert np.allclose(darboux_momentum(psi, gamma, 0.8), 2.0 * pi)


class TestMultipliers:
    def test_scalar_schrodinger(self):
        hbar, e_level = 1.0, 1.4
        psi = np.array([0.7 + 0.2j])
        lam = lagrange_multipliers(psi, np.eye(1), e_level * np.eye(1),
                                   alpha=hbar, gamma_coeff=2.0)
        assert np.allclose(lam, -1j * e_level * psi / hbar)

    def test_zero_state(self, rng):
        lam = lagrange_multipliers(np.zeros(2), rand_pd(rng, 2), rand_herm(rng, 2),
                                   1.0, 2.0)
        assert np.allclose(lam, 0.0)

    def test_quartic_extra_term(self, rng):
        n = 2
        kappa = 0.6
        spec = PotentialSpec(kind="quartic_pure", kappa=kappa)
        psi, gamma, chi = rand_vec(rng, n), rand_pd(rng, n), rand_herm(rng, n)
        lam = lagrange_multipliers(psi, gamma, chi, 1.0, 2.0, spec)
        lam0 = lagrange_multipliers(psi, gamma, chi, 1.0, 2.0)
        extra = -0.5j * 2.0 * kappa * theta1(psi, gamma) * psi
        assert np.allclose(lam - lam0, extra, atol=1e-12)

    def test_bracket_flow_equals_schrodinger_rhs(self, rng):
        n = 3
        psi, gamma, chi = rand_vec(rng, n), rand_pd(rng, n), rand_herm(rng, n)
        flow = reduced_bracket_flow(psi, gamma, chi, alpha=1.0)
        assert np.allclose(flow, rhs_schrodinger(psi, gamma, chi, 1.0, 2.0),
                           atol=1e-14)

    def test_bracket_flow_scalar_quartic(self):
        # n=1, gamma=1: i hbar psid = E psi + kappa theta1 psi
        hbar, e_level, kappa = 1.0, 1.1, 0.5
        spec = PotentialSpec(kind="quartic_pure", kappa=kappa)
        psi = np.array([0.8 + 0.1j])
        flow = reduced_bracket_flow(psi, np.eye(1), e_level * np.eye(1), hbar, spec)
        th = abs(psi[0]) ** 2
        assert np.allclose(1j * hbar * flow, e_level * psi + kappa * th * psi)

    def test_zero_psi(self, rng):
        assert np.allclose(reduced_bracket_flow(np.zeros(2), rand_pd(rng, 2),
                                                rand_herm(rng, 2), 1.0), 0.0)


class TestDiracFlow:
    def test_constraint_persistence(self, rng):
        # RK4 on the extended phase space keeps phi at zero
        n = 2
        alpha, gamma_c = 1.0, 2.0
        spec = PotentialSpec(kind="quartic_pure", kappa=0.3)
        gamma, chi = rand_pd(rng, n), rand_herm(rng, n)
        psi = rand_vec(rng, n)
        pi, _ = legendre_singular(psi, gamma, alpha)
        y = np.concatenate([psi, pi])
        dt = 1e-3

        def f(y):
            psid, pid = dirac_flow(y[:n], y[n:], gamma, chi, alpha, gamma_c, spec)
            return np.concatenate([psid, pid])

        for _ in range(1000):
            k1 = f(y)
            k2 = f(y + dt / 2 * k1)
            k3 = f(y + dt / 2 * k2)
            k4 = f(y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        point = PhasePoint(psi=y[:n], pi=y[n:], gamma=gamma)
        assert primary_constraints(point, alpha).max_violation() < 1e-8

    def test_flow_velocity_is_multiplier(self, rng):
        n = 2
        gamma, chi = rand_pd(rng, n), rand_herm(rng, n)
        psi = rand_vec(rng, n)
        pi, _ = legendre_singular(psi, gamma, 1.0)
        psid, _ = dirac_flow(psi, pi, gamma, chi, 1.0, 2.0)
        assert np.allclose(psid, lagrange_multipliers(psi, gamma, chi, 1.0, 2.0))


class TestDarboux:
    def test_canonical_case(self):
        alpha = 0.5
        chart = darboux_reduce(np.eye(2), np.diag([1.0, 2.0]), alpha)
        assert chart.canonical
        assert np.array_equal(chart.S, np.eye(2))
        assert np.array_equal(chart.A, np.zeros((2, 2)))
        assert np.array_equal(chart.form_xy, -np.eye(2))
        assert np.allclose(chart.form_xx, 0.0) and np.allclose(chart.form_yy, 0.0)

    def test_harmonic_oscillator_hamiltonian(self, rng):
        # gamma = I/(2 alpha), chi real symmetric: H = (gamma_c/2) sigma (yy + xx)
        alpha = 0.7
        sigma = np.array([[1.0, 0.2], [0.2, 2.0]])
        chart = darboux_reduce(np.eye(2) / (2 * alpha), sigma, alpha)
        x, y = rng.normal(size=2), rng.normal(size=2)
        expected = float(x @ sigma @ x + y @ sigma @ y)
        assert chart.hamiltonian_value(x, y) == pytest.approx(expected, rel=1e-12)
        assert np.allclose(chart.ham_xy, 0.0)

    def test_n2_hand_expansion_with_imaginary_part(self):
        alpha = 0.5
        gamma = np.array([[1.0, 0.3j], [-0.3j, 2.0]])
        chi = np.array([[1.0, 0.2 + 0.1j], [0.2 - 0.1j, 3.0]])
        chart = darboux_reduce(gamma, chi, alpha)
        assert np.allclose(chart.S, np.diag([1.0, 2.0]))
        assert np.allclose(chart.A, np.array([[0.0, 0.3], [-0.3, 0.0]]))
        assert np.allclose(chart.form_xy, -np.diag([1.0, 2.0]))
        assert np.allclose(chart.form_xx, -0.5 * np.array([[0.0, 0.3], [-0.3, 0.0]]))
        assert np.allclose(chart.sigma, np.array([[1.0, 0.2], [0.2, 3.0]]))
        assert np.allclose(chart.alpha_mat, np.array([[0.0, 0.1], [-0.1, 0.0]]))
        assert np.allclose(chart.ham_xx, chart.sigma)
        assert np.allclose(chart.ham_xy, -2.0 * chart.alpha_mat)

    def test_form_matches_direct_pullback(self, rng):
        # reconstructed two-form equals 2 i alpha Gamma(du, dv) - conj on
        # random tangent pairs
        n = 3
        alpha = 0.8
        gamma = rand_pd(rng, n)
        chart = darboux_reduce(gamma, rand_herm(rng, n), alpha)
        for _ in range(20):
            ux, uy = rng.normal(size=n), rng.normal(size=n)
            vx, vy = rng.normal(size=n), rng.normal(size=n)
            u = (ux + 1j * uy) / np.sqrt(2.0)
            v = (vx + 1j * vy) / np.sqrt(2.0)
            direct = 2j * alpha * (np.conj(u) @ gamma @ v - np.conj(v) @ gamma @ u)
            assert abs(direct.imag) < 1e-12
            assert chart.form_value(ux, uy, vx, vy) == pytest.approx(
                direct.real, abs=1e-10)

    def test_hamiltonian_matches_direct_restriction(self, rng):
        # chart coefficients reproduce gamma_c * psi^ chi psi on the diagonal
        n = 2
        chi = rand_herm(rng, n)
        chart = darboux_reduce(rand_pd(rng, n), chi, 0.6)
        for _ in range(10):
            x, y = rng.normal(size=n), rng.normal(size=n)
            psi = (x + 1j * y) / np.sqrt(2.0)
            direct = chart.gamma_coeff * float((np.conj(psi) @ chi @ psi).real)
            assert chart.hamiltonian_value(x, y) == pytest.approx(direct, abs=1e-12)

    def test_real_legendre_maps(self, rng):
        # u = alpha(Ax + Sy), v = alpha(-Sx + Ay); canonical case halves y, -x
        n = 2
        alpha = 0.5
        gamma = rand_pd(rng, n)
        chart = darboux_reduce(gamma, np.eye(n), alpha)
        x, y = rng.normal(size=n), rng.normal(size=n)
        psi = (x + 1j * y) / np.sqrt(2.0)
        pi, _ = legendre_singular(psi, gamma, alpha)
        u = np.sqrt(2.0) * pi.real
        v = -np.sqrt(2.0) * pi.imag
        assert np.allclose(chart.legendre_ux @ x + chart.legendre_uy @ y, u, atol=1e-12)
        assert np.allclose(chart.legendre_vx @ x + chart.legendre_vy @ y, v, atol=1e-12)

        chart_c = darboux_reduce(np.eye(n) / (2 * alpha), np.eye(n), alpha)
        assert np.allclose(chart_c.legendre_uy, 0.5 * np.eye(n))
        assert np.allclose(chart_c.legendre_vx, -0.5 * np.eye(n))

    def test_chart_construction(self, rng):
        n = 2
        alpha = 0.4
        gamma = rand_pd(rng, n)
        chart = darboux_reduce(gamma, np.eye(n), alpha)
        c = chart.chart_matrix
        assert np.allclose(c.conj().T @ gamma @ c, np.eye(n) / (2 * alpha), atol=1e-12)

    def test_indefinite_chart_refused(self):
        gamma = np.diag([1.0, -1.0])
        chart = darboux_reduce(gamma, np.eye(2), 0.5)
        assert chart.chart_matrix is None and not chart.canonical
        with pytest.raises(NotPositiveDefinite):
            darboux_reduce(gamma, np.eye(2), 0.5, require_chart=True)

    def test_generalized_g(self, rng):
        alpha = 0.5
        g = np.array([[2.0, 0.3], [0.3, 4.0]])
        gamma = (g / (2 * alpha) + 1j * np.array([[0.0, 0.2], [-0.2, 0.0]]))
        chi = np.array([[1.0, 0.2 + 0.1j], [0.2 - 0.1j, 2.0]])
        chart = darboux_reduce(gamma, chi, alpha, g=g)
        g_inv = np.linalg.inv(g)
        assert np.allclose(chart.ham_g_pp, g_inv @ chart.sigma @ g_inv)

        # the lowered-momentum Hamiltonian coefficients agree with the plain
        # chart evaluated at y = g^{-1} y_low
        for _ in range(5):
            x, y = rng.normal(size=2), rng.normal(size=2)
            y_low = g @ y
            via_g = float(x @ chart.ham_xx @ x + y_low @ chart.ham_g_pp @ y_low
                          + x @ chart.ham_g_xp @ y_low)
            assert via_g == pytest.approx(chart.hamiltonian_value(x, y), abs=1e-12)

        # the lowered-momentum two-form (dy_a ^ dx^a plus the raised-index
        # magnetic corrections) agrees with the plain coefficients
        for _ in range(5):
            ux, uy = rng.normal(size=2), rng.normal(size=2)
            vx, vy = rng.normal(size=2), rng.normal(size=2)
            uyl, vyl = g @ uy, g @ vy
            via_g = float(uyl @ vx - vyl @ ux
                          - alpha * (ux @ chart.A @ vx - vx @ chart.A @ ux)
                          - alpha * (uyl @ chart.g_A_raised @ vyl
                                     - vyl @ chart.g_A_raised @ uyl))
            assert via_g == pytest.approx(chart.form_value(ux, uy, vx, vy), abs=1e-12)

        with pytest.raises(ValueError):
            darboux_reduce(np.eye(2), chi, alpha, g=g)


class TestRegularSector:
    def test_momenta_static_gamma_alpha3_zero(self, rng):
        n = 2
        params = full_params(alpha3=0.0)
        state = FullState(psi=rand_vec(rng, n), psi_dot=rand_vec(rng, n),
                          gamma=rand_pd(rng, n), gamma_dot=np.zeros((n, n)))
        point = legendre_regular(state, params)
        assert np.allclose(point.pi_gamma, 0.0)

    def test_velocity_free_momentum(self, rng):
        n = 2
        params = full_params()
        gamma = rand_pd(rng, n)
        psi = rand_vec(rng, n)
        state = FullState(psi=psi, psi_dot=np.zeros(n), gamma=gamma,
                          gamma_dot=rand_herm(rng, n, 0.4))
        point = legendre_regular(state, params)
        assert np.allclose(point.pi, 1j * params.alpha1 * (np.conj(psi) @ gamma))

    def test_round_trip(self, rng):
        params = full_params()
        for _ in range(10):
            n = int(rng.integers(1, 4))
            state = random_state(rng, n)
            point = legendre_regular(state, params)
            psid, gd = legendre_inverse(point, params)
            assert np.max(np.abs(psid - state.psi_dot)) < 1e-10
            assert np.max(np.abs(gd - state.gamma_dot)) < 1e-10

    def test_inverse_requires_alpha2(self, rng):
        params = full_params()
        point = legendre_regular(random_state(rng, 2), params)
        with pytest.raises(ZeroAlpha2):
            legendre_inverse(point, full_params(alpha2=0.0))

    def test_hamiltonian_is_energy_pullback(self, rng):
        params = full_params()
        chi = rand_herm(rng, 2)
        for _ in range(100):
            state = random_state(rng, 2)
            point = legendre_regular(state, params)
            assert hamiltonian(point, params, chi) == pytest.approx(
                energy(state, params, chi), rel=1e-10, abs=1e-10)

    def test_gamma_sector_isolation(self, rng):
        # psi = 0, pi = 0, alpha3 = 0: only the quadratic pi_gamma term remains
        n = 2
        params = full_params(alpha3=0.0, kappa=0.0)
        gamma = rand_pd(rng, n)
        pg = rand_herm(rng, n)
        point = PhasePoint(psi=np.zeros(n), pi=np.zeros(n), gamma=gamma, pi_gamma=pg)
        val = hamiltonian(point, params, np.zeros((n, n)))
        x = apply_omega_inverse(np.zeros(n), gamma, params, pg)
        assert val == pytest.approx(0.25 * float(np.trace(pg @ x).real), rel=1e-12)

    def test_kappa_term_additive(self, rng):
        params = full_params(kappa=0.0)
        params_k = full_params(kappa=0.7)
        chi = rand_herm(rng, 2)
        state = random_state(rng, 2)
        point = legendre_regular(state, params)
        point_k = legendre_regular(state, params_k)
        th = theta1(state.psi, state.gamma)
        assert hamiltonian(point_k, params_k, chi) - hamiltonian(point, params, chi) \
            == pytest.approx(0.7 * th * th, rel=1e-10)


class TestHamiltonFlow:
    def test_equilibrium_zero_flow(self, rng):
        n = 2
        params = full_params(alpha4=0.0, kappa=0.0)
        gamma = rand_pd(rng, n)
        pg = params.alpha3 * p_tensor(np.zeros(n), gamma, params.alpha9)
        point = PhasePoint(psi=np.zeros(n), pi=np.zeros(n), gamma=gamma, pi_gamma=pg)
        flow = hamilton_flow_check(point, params, np.zeros((n, n)))
        assert np.max(np.abs(flow.psi_dot)) < 1e-9
        assert np.max(np.abs(flow.pi_dot)) < 1e-9
        assert np.max(np.abs(flow.gamma_dot)) < 1e-9
        assert np.max(np.abs(flow.pi_gamma_dot)) < 1e-9

    def test_frozen_sector_matches_second_order(self, rng):
        # L(1,2) canonical flow: FD derivatives of the Hamiltonian against
        # the Lagrangian push and the analytic canonical equations
        n = 2
        params = ModelParams.from_legacy(alpha=0.6, beta=0.5, gamma=2.0)
        gamma, chi = rand_pd(rng, n), rand_herm(rng, n)
        state = FullState(psi=rand_vec(rng, n), psi_dot=rand_vec(rng, n),
                          gamma=gamma, gamma_dot=np.zeros((n, n)))
        pi = params.alpha2 * (np.conj(state.psi_dot) @ gamma) \
            + 1j * params.alpha1 * (np.conj(state.psi) @ gamma)
        point = PhasePoint(psi=state.psi, pi=pi, gamma=gamma)
        flow_fd = hamilton_flow_check(point, params, chi)
        flow_lag = lagrangian_flow_through_legendre(point, params, chi)
        assert np.max(np.abs(flow_fd.psi_dot - flow_lag.psi_dot)) < 1e-6
        assert np.max(np.abs(flow_fd.pi_dot - flow_lag.pi_dot)) < 1e-6
        psid_an, pid_an = canonical_frozen_flow(point.psi, point.pi, gamma, params, chi)
        assert np.max(np.abs(flow_fd.psi_dot - psid_an)) < 1e-6
        assert np.max(np.abs(flow_fd.pi_dot - pid_an)) < 1e-6
        assert np.allclose(flow_lag.psi_dot, state.psi_dot, atol=1e-12)

    def test_full_model_two_path(self, rng):
        params = full_params()
        chi = rand_herm(rng, 2)
        for _ in range(5):
            point = legendre_regular(random_state(rng, 2), params)
            flow_fd = hamilton_flow_check(point, params, chi)
            flow_lag = lagrangian_flow_through_legendre(point, params, chi)
            scale = max(1.0, np.max(np.abs(flow_lag.pi_gamma_dot)))
            assert np.max(np.abs(flow_fd.psi_dot - flow_lag.psi_dot)) < 1e-5 * scale
            assert np.max(np.abs(flow_fd.pi_dot - flow_lag.pi_dot)) < 1e-5 * scale
            assert np.max(np.abs(flow_fd.gamma_dot - flow_lag.gamma_dot)) < 1e-5 * scale
            assert np.max(np.abs(flow_fd.pi_gamma_dot - flow_lag.pi_gamma_dot)) \
                < 1e-5 * scale


def test_hamiltonian_conserved_along_fd_flow(rng):
    # integrating the finite-difference canonical flow itself keeps the
    # Hamiltonian within 1e-5 relative over 1e3 small steps
    n = 1
    params = full_params()
    chi = rand_herm(rng, n)
    state = random_state(rng, n)
    point = legendre_regular(state, params)
    h0 = hamiltonian(point, params, chi)

    def unpack(y):
        return PhasePoint(psi=y[0:1], pi=y[1:2], gamma=np.array([[y[2].real]]),
                          pi_gamma=np.array([[y[3].real]]))

    def f(y):
        flow = hamilton_flow_check(unpack(y), params, chi)
        return np.array([flow.psi_dot[0], flow.pi_dot[0],
                         flow.gamma_dot[0, 0], flow.pi_gamma_dot[0, 0]])

    y = np.array([point.psi[0], point.pi[0], point.gamma[0, 0],
                  point.pi_gamma[0, 0]], dtype=complex)
    dt = 1e-3
    for _ in range(1000):
        k1 = f(y)
        k2 = f(y + dt / 2 * k1)
        k3 = f(y + dt / 2 * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    h1 = hamiltonian(unpack(y), params, chi)
    assert abs(h1 - h0) < 1e-5 * max(1.0, abs(h0))


def test_implicit_midpoint_symplectic_smoke():
    # regular canonical system (beta != 0, frozen gamma): the Hamiltonian is
    # quadratic, so the midpoint rule keeps it without secular drift
    from hermiton.integrate import IntegratorConfig, integrate

    params = ModelParams.from_legacy(alpha=0.5, beta=0.8, gamma=2.0)
    chi = np.array([[1.3]])
    point = PhasePoint(psi=np.array([0.9 + 0.3j]), pi=np.array([0.2 - 0.4j]),
                       gamma=np.eye(1))
    n_steps = 10 ** 5
    dt = 0.01
    cfg = IntegratorConfig(dt=dt, t_end=n_steps * dt, method="implicit_midpoint",
                           sample_stride=500)
    traj = integrate(point, "canonical_frozen", cfg, params, chi)
    energies = traj.series("energy")
    drift = np.abs(energies - energies[0])
    # the Hamiltonian is a quadratic invariant, so the midpoint rule keeps it
    # to stage-solver accuracy over the whole run; a non-symplectic method of
    # the same order would show a secular O(dt^2 * T) trend instead
    assert drift.max() < 1e-9 * max(1.0, abs(energies[0]))
