import numpy as np
import pytest

from hermiton.errors import StepFailure
from hermiton.integrate import IntegratorConfig, Trajectory, convergence_order, integrate
from hermiton.models import FullState, ModelParams
from hermiton.oracles import GammaExponentialSolution, exact_gamma, exact_schrodinger

from conftest import rand_herm, rand_pd, rand_vec


def schrodinger_setup(rng, n=2):
    params = ModelParams(alpha1=0.5, alpha5=-1.0)
    gamma = rand_pd(rng, n)
    chi = rand_herm(rng, n)
    psi0 = rand_vec(rng, n)
    state = FullState(psi=psi0, psi_dot=np.zeros(n), gamma=gamma,
                      gamma_dot=np.zeros((n, n)))
    return params, gamma, chi, psi0, state


class TestFixedStep:
    def test_frozen_schrodinger_matches_exponential(self, rng):
        params, gamma, chi, psi0, state = schrodinger_setup(rng)
        cfg = IntegratorConfig(dt=1e-3, t_end=1.0, sample_stride=100)
        traj = integrate(state, "schrodinger", cfg, params, chi)
        exact = exact_schrodinger(psi0, np.linalg.solve(gamma, chi), 1.0, 1.0)
        assert np.max(np.abs(traj.final_state.psi - exact)) < 1e-9

    def test_gamma_geodesic_matches_exponential(self, rng):
        n = 2
        g = rand_pd(rng, n)
        e = np.linalg.solve(g, rand_herm(rng, n, 0.5))
        sol = GammaExponentialSolution(G=g, E=e)
        params = ModelParams.from_legacy(A=2.0, B=0.4)
        state = FullState(psi=np.zeros(n), psi_dot=np.zeros(n),
                          gamma=g, gamma_dot=g @ e)
        cfg = IntegratorConfig(dt=1e-3, t_end=1.0, sample_stride=200)
        traj = integrate(state, "gamma_geodesic", cfg, params)
        assert np.max(np.abs(traj.final_state.gamma - exact_gamma(sol, 1.0))) < 1e-7

    def test_constant_trajectory(self, rng):
        n = 2
        state = FullState(psi=rand_vec(rng, n), psi_dot=np.zeros(n),
                          gamma=rand_pd(rng, n), gamma_dot=np.zeros((n, n)))
        params = ModelParams(alpha1=1.0, alpha2=0.5, alpha6=1.0, alpha7=0.1)
        cfg = IntegratorConfig(dt=1e-2, t_end=0.5)
        traj = integrate(state, "full", cfg, params, np.zeros((n, n)))
        assert np.max(np.abs(traj.final_state.psi - state.psi)) < 1e-13
        assert np.max(np.abs(traj.final_state.gamma - state.gamma)) < 1e-13

    def test_trajectory_invariants(self, rng):
        params, gamma, chi, psi0, state = schrodinger_setup(rng)
        cfg = IntegratorConfig(dt=1e-2, t_end=0.2, sample_stride=5)
        traj = integrate(state, "schrodinger", cfg, params, chi)
        assert np.all(np.diff(traj.times) > 0)
        assert len(traj.states) == traj.times.size == len(traj.diagnostics)
        for key in ("energy", "theta1", "herm_drift"):
            assert key in traj.diagnostics[0]

    def test_trajectory_count_validation(self):
        with pytest.raises(ValueError):
            Trajectory(times=np.array([0.0, 1.0]), states=[None], diagnostics=[{}])
        with pytest.raises(ValueError):
            Trajectory(times=np.array([0.0, 0.0]), states=[None, None],
                       diagnostics=[{}, {}])


class TestAdaptive:
    def test_rk45_matches_exact(self, rng):
        params, gamma, chi, psi0, state = schrodinger_setup(rng)
        cfg = IntegratorConfig(dt=1e-2, t_end=1.0, method="rk45_adaptive",
                               rel_tol=1e-10, abs_tol=1e-12)
        traj = integrate(state, "schrodinger", cfg, params, chi)
        exact = exact_schrodinger(psi0, np.linalg.solve(gamma, chi), 1.0, 1.0)
        assert traj.times[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(traj.final_state.psi - exact)) < 1e-7

    def test_rk45_adapts_step(self, rng):
        params, gamma, chi, psi0, state = schrodinger_setup(rng)
        loose = IntegratorConfig(dt=1e-3, t_end=1.0, method="rk45_adaptive",
                                 rel_tol=1e-5, abs_tol=1e-7)
        tight = IntegratorConfig(dt=1e-3, t_end=1.0, method="rk45_adaptive",
                                 rel_tol=1e-11, abs_tol=1e-13)
        n_loose = integrate(state, "schrodinger", loose, params, chi).times.size
        n_tight = integrate(state, "schrodinger", tight, params, chi).times.size
        assert n_tight > n_loose


class TestResymmetrize:
    def test_structural_and_full_agree(self, rng):
        n = 2
        g = rand_pd(rng, n)
        e = np.linalg.solve(g, rand_herm(rng, n, 0.5))
        params = ModelParams.from_legacy(A=2.0, B=0.4)
        state = FullState(psi=np.zeros(n), psi_dot=np.zeros(n),
                          gamma=g, gamma_dot=g @ e)
        base = dict(dt=1e-3, t_end=0.5, sample_stride=100)
        t_full = integrate(state, "gamma_geodesic",
                           IntegratorConfig(**base), params)
        t_struct = integrate(state, "gamma_geodesic",
                             IntegratorConfig(**base, resymmetrize_gamma=True), params)
        assert np.max(np.abs(t_full.final_state.gamma
                             - t_struct.final_state.gamma)) < 1e-12

    def test_drift_recorded_both_modes(self, rng):
        n = 2
        g = rand_pd(rng, n)
        e = np.linalg.solve(g, rand_herm(rng, n, 0.5))
        params = ModelParams.from_legacy(A=2.0, B=0.4)
        state = FullState(psi=np.zeros(n), psi_dot=np.zeros(n),
                          gamma=g, gamma_dot=g @ e)
        for structural in (False, True):
            cfg = IntegratorConfig(dt=1e-2, t_end=0.2,
                                   resymmetrize_gamma=structural)
            traj = integrate(state, "gamma_geodesic", cfg, params)
            drifts = traj.series("herm_drift")
            assert np.all(drifts >= 0.0) and drifts.max() < 1e-9


class TestFailures:
    def test_degenerate_kinetic_becomes_step_failure(self, rng):
        n = 2
        state = FullState(psi=rand_vec(rng, n), psi_dot=rand_vec(rng, n),
                          gamma=rand_pd(rng, n), gamma_dot=rand_herm(rng, n))
        params = ModelParams(alpha1=0.4, alpha2=0.3, alpha6=2.0, alpha7=-1.0)
        cfg = IntegratorConfig(dt=1e-2, t_end=0.1)
        with pytest.raises(StepFailure) as err:
            integrate(state, "full", cfg, params, np.zeros((n, n)))
        assert err.value.last_good_t == pytest.approx(0.0)
        assert "full" in str(err.value)

    def test_unknown_tier(self, rng):
        state = FullState(psi=np.ones(1), psi_dot=np.zeros(1),
                          gamma=np.eye(1), gamma_dot=np.zeros((1, 1)))
        with pytest.raises(ValueError):
            integrate(state, "nope", IntegratorConfig(dt=0.1, t_end=1.0),
                      ModelParams())


class TestConvergenceOrder:
    def test_rk4_is_fourth_order(self, rng):
        params, gamma, chi, psi0, state = schrodinger_setup(rng, n=3)
        cfg = IntegratorConfig(dt=1e-2, t_end=0.5)
        order = convergence_order(state, "schrodinger", cfg, params, chi,
                                  dt_list=[2e-2, 1e-2, 5e-3, 2.5e-3])
        assert order == pytest.approx(4.0, abs=0.3)

    def test_midpoint_is_second_order(self, rng):
        params, gamma, chi, psi0, state = schrodinger_setup(rng, n=3)
        cfg = IntegratorConfig(dt=1e-2, t_end=0.5, method="implicit_midpoint")
        order = convergence_order(state, "schrodinger", cfg, params, chi,
                                  dt_list=[2e-2, 1e-2, 5e-3, 2.5e-3])
        assert order == pytest.approx(2.0, abs=0.3)

    def test_constant_solution_indeterminate(self, rng):
        n = 2
        state = FullState(psi=rand_vec(rng, n), psi_dot=np.zeros(n),
                          gamma=rand_pd(rng, n), gamma_dot=np.zeros((n, n)))
        cfg = IntegratorConfig(dt=1e-2, t_end=0.5)
        order = convergence_order(state, "schrodinger", cfg,
                                  ModelParams(alpha1=1.0, alpha5=-1.0),
                                  np.zeros((n, n)),
                                  dt_list=[2e-2, 1e-2, 5e-3])
        assert np.isnan(order)

    def test_needs_geometric_progression(self, rng):
        params, gamma, chi, psi0, state = schrodinger_setup(rng)
        cfg = IntegratorConfig(dt=1e-2, t_end=0.5)
        with pytest.raises(ValueError):
            convergence_order(state, "schrodinger", cfg, params, chi,
                              dt_list=[1e-2, 5e-3, 3e-3])


def test_modified_first_order_tier_runs(rng):
    n = 2
    params = ModelParams(alpha1=0.5, alpha3=0.1, alpha5=-1.0, alpha6=1.0,
                         alpha7=0.2, alpha8=0.1, alpha9=0.1, kappa=0.05)
    state = FullState(psi=rand_vec(rng, n), psi_dot=np.zeros(n),
                      gamma=rand_pd(rng, n), gamma_dot=rand_herm(rng, n, 0.2))
    chi = rand_herm(rng, n)
    cfg = IntegratorConfig(dt=1e-3, t_end=0.3, sample_stride=50)
    traj = integrate(state, "modified_first_order", cfg, params, chi)
    energies = traj.series("energy")
    assert (energies.max() - energies.min()) < 1e-8 * max(1.0, abs(energies[0]))


def test_second_order_tier_with_gamma_tilde(rng):
    n = 2
    params = ModelParams.from_legacy(alpha=0.7, beta=0.5, gamma=2.0)
    gamma = rand_pd(rng, n)
    gamma_tilde = rand_pd(rng, n)
    chi = rand_herm(rng, n)
    state = FullState(psi=rand_vec(rng, n), psi_dot=rand_vec(rng, n, 0.3),
                      gamma=gamma, gamma_dot=np.zeros((n, n)))
    cfg = IntegratorConfig(dt=1e-3, t_end=0.5, sample_stride=100)
    traj = integrate(state, "second_order", cfg, params, chi, gamma_tilde=gamma_tilde)
    assert traj.times[-1] == pytest.approx(0.5)


def test_time_dependent_chi_callback(rng):
    # chi(t) support: a slowly rotating Hamiltonian form still integrates
    n = 2
    params = ModelParams(alpha1=0.5, alpha5=-1.0)
    gamma = np.eye(n)
    base = rand_herm(rng, n)

    def chi(t):
        return np.cos(0.3 * t) * base

    state = FullState(psi=rand_vec(rng, n), psi_dot=np.zeros(n),
                      gamma=gamma, gamma_dot=np.zeros((n, n)))
    cfg = IntegratorConfig(dt=1e-3, t_end=0.5, sample_stride=100)
    traj = integrate(state, "schrodinger", cfg, params, chi)
    th = traj.series("theta1")
    assert (th.max() - th.min()) < 1e-10  # hermitian generator keeps the norm
