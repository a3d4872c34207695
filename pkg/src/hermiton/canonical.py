"""Legendre transformations, Hamiltonians and the Dirac constraint analysis.

The singular (velocity-linear) sector follows the closed forms of the
constrained formalism: primary constraints, unique Lagrange multipliers,
reduced brackets and the real Darboux reduction.  The regular sector
(alpha2 != 0, dynamical gamma) gets the forward/inverse Legendre maps, the
globally defined Hamiltonian and a finite-difference canonical flow used
as a two-path oracle against the Lagrangian equations.

Conjugate variables are never stored twice: pi_bar and psi_bar are always
obtained by conjugation on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import _apply_omega_dot, _p_dot, rhs_full, rhs_second_order
from .errors import (
    DegenerateKinetic,
    NotPositiveDefinite,
    ZeroAlpha2,
)
from .hermitian_algebra import (
    complex_vector,
    hermitian_form,
    hermitian_part,
    invert_form,
    raise_first_index,
    real_decompose,
)
from .models import (
    FullState,
    ModelParams,
    PotentialSpec,
    apply_omega,
    apply_omega_inverse,
    p_tensor,
    potential_gradient,
    resolve_chi,
)

__all__ = [
    "PhasePoint",
    "ConstraintValue",
    "DarbouxChart",
    "CanonicalFlow",
    "legendre_singular",
    "primary_constraints",
    "lagrange_multipliers",
    "reduced_bracket_flow",
    "dirac_flow",
    "darboux_momentum",
    "darboux_reduce",
    "legendre_regular",
    "legendre_inverse",
    "hamiltonian",
    "hamilton_flow_check",
    "lagrangian_flow_through_legendre",
    "canonical_frozen_flow",
]


@dataclass(frozen=True)
class PhasePoint:
    """Canonical variables (psi, pi, gamma, pi_gamma) at time t.

    pi is the covariant momentum conjugate to psi (its conjugate partner is
    implied); pi_gamma is the contravariant Hermitian momentum conjugate to
    gamma, or None for frozen-gamma models.
    """

    psi: np.ndarray
    pi: np.ndarray
    gamma: np.ndarray
    pi_gamma: Optional[np.ndarray] = None
    t: float = 0.0

    def __post_init__(self):
        psi = complex_vector(self.psi)
        pi = complex_vector(self.pi)
        gamma = hermitian_form(self.gamma)
        if psi.size != pi.size or gamma.shape != (psi.size, psi.size):
            raise ValueError("inconsistent dimensions in PhasePoint")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "gamma", gamma)
        if self.pi_gamma is not None:
            pg = hermitian_form(self.pi_gamma, require_invertible=False)
            if pg.shape != gamma.shape:
                raise ValueError("pi_gamma has inconsistent shape")
            object.__setattr__(self, "pi_gamma", pg)

    @property
    def pi_bar(self) -> np.ndarray:
        return np.conj(self.pi)

    @property
    def n(self) -> int:
        return self.psi.size


@dataclass(frozen=True)
class ConstraintValue:
    """Primary constraint covector phi (the conjugate copy is redundant)."""

    phi: np.ndarray

    @property
    def phi_bar(self) -> np.ndarray:
        return np.conj(self.phi)

    def max_violation(self) -> float:
        return float(np.max(np.abs(self.phi)))


def legendre_singular(psi, gamma, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Momenta of the velocity-linear model: pi = i*alpha * psi^ Gamma.

    They are independent of the velocities, so the Legendre map is singular
    and its image is the primary-constraint manifold.
    """
    psi = np.asarray(psi, dtype=complex)
    g = np.asarray(gamma, dtype=complex)
    pi = 1j * alpha * (np.conj(psi) @ g)
    return pi, np.conj(pi)


def primary_constraints(p: PhasePoint, alpha: float) -> ConstraintValue:
    """phi = pi - i*alpha * psi^ Gamma; zero exactly on the singular image."""
    phi = p.pi - 1j * alpha * (np.conj(p.psi) @ p.gamma)
    return ConstraintValue(phi=phi)


def lagrange_multipliers(psi, gamma, chi, alpha: float, gamma_coeff: float,
                         spec: PotentialSpec | None = None) -> np.ndarray:
    """Unique multipliers of the Dirac tangency conditions.

    lambda = -(i/2)(gamma_coeff/alpha) H psi - (i / 2 alpha) Gamma^{-1} dV/d(conj psi);
    on the constraint manifold these are exactly the psi velocities.
    """
    psi = np.asarray(psi, dtype=complex)
    h = raise_first_index(gamma, chi)
    lam = -0.5j * (gamma_coeff / alpha) * (h @ psi)
    if spec is not None and spec.kind != "none":
        grad = potential_gradient(psi, gamma, spec)
        lam = lam - (0.5j / alpha) * (invert_form(gamma) @ grad)
    return lam


def reduced_bracket_flow(psi, gamma, chi, alpha: float,
                         spec: PotentialSpec | None = None) -> np.ndarray:
    """psi velocity from the reduced bracket {psi, psi^}_M = Gamma^{-1} / 2i alpha
    applied to the on-shell Hamiltonian gamma_coeff * psi^ chi psi + V with
    gamma_coeff = 2 (the normalisation in which the bracket result is the
    plain nonlinear evolution i*hbar*psid = H psi + Gamma^{-1} dV/d(conj psi) / 2)."""
    psi = np.asarray(psi, dtype=complex)
    grad = 2.0 * np.asarray(chi, dtype=complex) @ psi
    if spec is not None and spec.kind != "none":
        grad = grad + potential_gradient(psi, gamma, spec)
    return (invert_form(gamma) @ grad) / (2.0j * alpha)


def dirac_flow(psi, pi, gamma, chi, alpha: float, gamma_coeff: float,
               spec: PotentialSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Phase-space vector field of the constrained Hamiltonian.

    The multipliers are substituted from the tangency conditions, which
    makes the primary constraints exactly invariant in continuous time;
    conjugate variables evolve by conjugation.
    """
    psi = np.asarray(psi, dtype=complex)
    g = np.asarray(gamma, dtype=complex)
    chi = np.asarray(chi, dtype=complex)
    lam = lagrange_multipliers(psi, g, chi, alpha, gamma_coeff, spec)
    pi_dot = -gamma_coeff * (np.conj(psi) @ chi)
    if spec is not None and spec.kind != "none":
        pi_dot = pi_dot - np.conj(potential_gradient(psi, g, spec))
    pi_dot = pi_dot - 1j * alpha * (np.conj(lam) @ g)
    return lam, pi_dot


def darboux_momentum(psi, gamma, alpha: float) -> np.ndarray:
    """Constraint-manifold Darboux momentum Pi = 2 i alpha psi^ Gamma,
    twice the singular Legendre momentum restricted to the manifold."""
    psi = np.asarray(psi, dtype=complex)
    return 2.0j * alpha * (np.conj(psi) @ np.asarray(gamma, dtype=complex))


@dataclass(frozen=True)
class DarbouxChart:
    """Real reduction data of the constrained velocity-linear model.

    The restricted two-form in the real coordinates (x, y) of psi is

        sum form_xy[a,b] dx^a ^ dy^b
        + sum form_xx[a,b] dx^a ^ dx^b + sum form_yy[a,b] dy^a ^ dy^b

    (double sums over all index pairs), and the reduced Hamiltonian is

        sum ham_xx[a,b] x^a x^b + ham_yy[a,b] y^a y^b + ham_xy[a,b] x^a y^b.

    The real Legendre maps read u = legendre_ux x + legendre_uy y and
    v = legendre_vx x + legendre_vy y.  ``chart_matrix``, when present, is
    a basis change C with C^ Gamma C = I / (2 alpha), which brings the form
    to dy ^ dx.  The generalized (g-metric) pieces are populated when a
    real symmetric g with S = g / (2 alpha) is supplied.
    """

    alpha: float
    gamma_coeff: float
    S: np.ndarray
    A: np.ndarray
    sigma: np.ndarray
    alpha_mat: np.ndarray
    form_xy: np.ndarray
    form_xx: np.ndarray
    form_yy: np.ndarray
    ham_xx: np.ndarray
    ham_yy: np.ndarray
    ham_xy: np.ndarray
    legendre_ux: np.ndarray
    legendre_uy: np.ndarray
    legendre_vx: np.ndarray
    legendre_vy: np.ndarray
    canonical: bool
    chart_matrix: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    g_A_raised: Optional[np.ndarray] = None
    ham_g_pp: Optional[np.ndarray] = None
    ham_g_xp: Optional[np.ndarray] = None

    def form_value(self, ux, uy, vx, vy) -> float:
        """Evaluate the reduced two-form on two tangent vectors (ux, uy), (vx, vy)."""
        val = ux @ self.form_xy @ vy - vx @ self.form_xy @ uy
        val += ux @ self.form_xx @ vx - vx @ self.form_xx @ ux
        val += uy @ self.form_yy @ vy - vy @ self.form_yy @ uy
        return float(val)

    def hamiltonian_value(self, x, y) -> float:
        return float(x @ self.ham_xx @ x + y @ self.ham_yy @ y + x @ self.ham_xy @ y)


def darboux_reduce(gamma, chi, alpha: float, g=None,
                   require_chart: bool = False, tol: float = 1e-10) -> DarbouxChart:
    """Real Darboux reduction of the constrained velocity-linear model.

    Splits gamma = S + iA and chi = sigma + i*alpha_mat into real parts,
    emits the restricted two-form, the reduced Hamiltonian (with the
    gamma_coeff = 2 normalisation) and the real Legendre maps.  A canonical
    chart (basis change making the form exactly dy ^ dx) is attempted via a
    Cholesky factor; if gamma is not positive definite the chart is refused
    (silently unless ``require_chart``).
    """
    gamma = hermitian_form(gamma)
    chi = hermitian_form(np.asarray(chi, dtype=complex), require_invertible=False)
    gamma_coeff = 2.0
    s, a = real_decompose(gamma)
    sigma, alpha_mat = real_decompose(chi)
    n = gamma.shape[0]

    form_xy = -2.0 * alpha * s
    form_xx = -alpha * a
    form_yy = -alpha * a
    ham_xx = 0.5 * gamma_coeff * sigma
    ham_yy = 0.5 * gamma_coeff * sigma
    ham_xy = -gamma_coeff * alpha_mat
    legendre_ux = alpha * a
    legendre_uy = alpha * s
    legendre_vx = -alpha * s
    legendre_vy = alpha * a

    canonical = bool(np.max(np.abs(a)) <= tol
                     and np.max(np.abs(s - np.eye(n) / (2.0 * alpha))) <= tol)

    chart = None
    try:
        low = np.linalg.cholesky(gamma)
        chart = np.linalg.inv(low.conj().T) / np.sqrt(2.0 * alpha)
    except np.linalg.LinAlgError:
        if require_chart:
            raise NotPositiveDefinite(
                "canonical chart requested for an indefinite scalar product")

    g_arr = g_a_raised = ham_g_pp = ham_g_xp = None
    if g is not None:
        g_arr = np.asarray(g, dtype=float)
        if np.max(np.abs(g_arr - g_arr.T)) > tol * max(np.linalg.norm(g_arr), 1.0):
            raise ValueError("g must be real symmetric")
        if np.max(np.abs(s - g_arr / (2.0 * alpha))) > tol * max(np.linalg.norm(s), 1.0):
            raise ValueError("g is inconsistent with gamma: need S == g / (2 alpha)")
        g_inv = np.linalg.inv(g_arr)
        g_a_raised = g_inv @ a @ g_inv
        ham_g_pp = 0.5 * gamma_coeff * (g_inv @ sigma @ g_inv)
        g_alpha_lr = g_inv @ alpha_mat          # (g alpha)^b_a with rows raised
        ham_g_xp = 0.5 * gamma_coeff * (g_alpha_lr.T - alpha_mat @ g_inv)

    return DarbouxChart(
        alpha=alpha, gamma_coeff=gamma_coeff, S=s, A=a, sigma=sigma,
        alpha_mat=alpha_mat, form_xy=form_xy, form_xx=form_xx, form_yy=form_yy,
        ham_xx=ham_xx, ham_yy=ham_yy, ham_xy=ham_xy,
        legendre_ux=legendre_ux, legendre_uy=legendre_uy,
        legendre_vx=legendre_vx, legendre_vy=legendre_vy,
        canonical=canonical, chart_matrix=chart, g=g_arr,
        g_A_raised=g_a_raised, ham_g_pp=ham_g_pp, ham_g_xp=ham_g_xp)


def legendre_regular(state: FullState, params: ModelParams) -> PhasePoint:
    """Forward Legendre map of the total model."""
    psi, psid = state.psi, state.psi_dot
    g, gd = state.gamma, state.gamma_dot
    pi = params.alpha2 * (np.conj(psid) @ g) + 1j * params.alpha1 * (np.conj(psi) @ g)
    p = p_tensor(psi, g, params.alpha9)
    pi_gamma = params.alpha3 * p + 2.0 * apply_omega(psi, g, params, gd)
    return PhasePoint(psi=psi, pi=pi, gamma=g,
                      pi_gamma=hermitian_part(pi_gamma), t=state.t)


def legendre_inverse(p: PhasePoint, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Velocities (psid, gamma_dot) from a phase point; exact inverse of
    :func:`legendre_regular`."""
    if params.alpha2 == 0.0:
        raise ZeroAlpha2("the psi-sector Legendre map is singular for alpha2 == 0")
    if p.pi_gamma is None:
        raise ValueError("phase point has no gamma-sector momentum")
    ginv = invert_form(p.gamma)
    psid = (ginv @ np.conj(p.pi)) / params.alpha2 \
        + (1j * params.alpha1 / params.alpha2) * p.psi
    y = p.pi_gamma - params.alpha3 * p_tensor(p.psi, p.gamma, params.alpha9)
    gamma_dot = 0.5 * apply_omega_inverse(p.psi, p.gamma, params, y)
    return psid, hermitian_part(gamma_dot)


def _potential_value_ext(spec: PotentialSpec, x):
    """Potential profile on the analytic extension (complex argument)."""
    if spec.kind == "none":
        return 0.0
    if spec.kind == "quartic_pure":
        return spec.kappa * x * x
    if spec.kind == "quartic_shifted":
        return spec.kappa * (x - spec.shift) ** 2
    return spec.f(x)


def _hamiltonian_ext(psi, psibar, pi, pibar, gamma, pi_gamma, params: ModelParams,
                     chi_matrix, t: float) -> complex:
    """Hamiltonian on the analytic extension: psi/pi and their bars are
    treated as independent arguments and no entry of gamma or pi_gamma is
    conjugated, so the value is analytic in every variable separately.
    Restricted to the diagonal (bars equal to conjugates, Hermitian
    matrices) it is real."""
    a1, a2 = params.alpha1, params.alpha2
    if a2 == 0.0:
        raise ZeroAlpha2("the regular Hamiltonian needs alpha2 != 0")
    g = np.asarray(gamma, dtype=complex)
    ginv = np.linalg.inv(g)
    theta1c = psibar @ g @ psi

    val = (pi @ ginv @ pibar) / a2
    val += (a1 / a2) * 1j * (pi @ psi - psibar @ pibar)
    val -= (params.alpha4 - a1 * a1 / a2) * theta1c + params.alpha5 * (psibar @ chi_matrix @ psi)
    val += _potential_value_ext(params.effective_potential, theta1c)
    if params.forcing is not None:
        f = np.asarray(params.forcing(t), dtype=complex)
        val -= f @ psi + np.conj(f) @ psibar

    if pi_gamma is not None:
        n = psi.size
        a6, a7, a8, a9 = params.alpha6, params.alpha7, params.alpha8, params.alpha9
        if abs(a6) <= 1e-10 or abs(a6 + n * a7) <= 1e-10:
            raise DegenerateKinetic("kinetic inverse denominators vanish")
        den9 = 1.0 + a9 * theta1c
        if abs(den9) <= 1e-10:
            raise DegenerateKinetic("1 + alpha9*theta1 vanished")
        lam = g - (a9 / den9) * np.outer(g @ psi, psibar @ g)
        c7 = a7 / (a6 * (a6 + n * a7))
        ratio = theta1c / den9
        theta2c = (a6 + (n - 1) * a7) / (a6 * (a6 + n * a7)) * ratio ** 2
        den8 = 1.0 + a8 * theta2c
        if abs(den8) <= 1e-10:
            raise DegenerateKinetic("1 + alpha8*theta2 vanished")
        s8 = a8 / den8
        u = (1.0 / a6) * np.outer(lam @ psi, psibar @ lam) - c7 * (psibar @ lam @ psi) * lam

        p_full = ginv + a9 * np.outer(psi, psibar)
        y = np.asarray(pi_gamma, dtype=complex) - params.alpha3 * p_full
        x = (1.0 / a6) * (lam @ y @ lam) - c7 * np.trace(lam @ y) * lam - s8 * np.trace(u @ y) * u
        val += 0.25 * np.trace(y @ x)
    return complex(val)


def hamiltonian(p: PhasePoint, params: ModelParams, chi) -> float:
    """Globally defined Hamiltonian of the regular model (alpha2 != 0).

    For frozen-gamma phase points (pi_gamma None) the gamma-sector terms
    are absent.  Equals the energy pulled back through the inverse
    Legendre map.
    """
    chi_m = resolve_chi(chi, p.t)
    val = _hamiltonian_ext(p.psi, np.conj(p.psi), p.pi, np.conj(p.pi),
                           p.gamma, p.pi_gamma, params, chi_m, p.t)
    if abs(val.imag) > 1e-9 * max(abs(val), 1.0):
        raise ValueError(f"Hamiltonian acquired an imaginary part {val.imag:.3e}")
    return val.real


@dataclass(frozen=True)
class CanonicalFlow:
    psi_dot: np.ndarray
    pi_dot: np.ndarray
    gamma_dot: Optional[np.ndarray]
    pi_gamma_dot: Optional[np.ndarray]


def hamilton_flow_check(p: PhasePoint, params: ModelParams, chi,
                        fd_step: float = 1e-6) -> CanonicalFlow:
    """Canonical flow by central differences of the Hamiltonian.

    This is an oracle, not a production integrator: every partial
    derivative is taken on the analytic extension, where single-entry
    perturbations of psi, pi, gamma and pi_gamma are legitimate.
    """
    chi_m = resolve_chi(chi, p.t)
    psi, pi = p.psi, p.pi
    psibar, pibar = np.conj(psi), np.conj(pi)
    n = p.n

    def ham(psi_=None, psibar_=None, pi_=None, pibar_=None, g_=None, pg_=None):
        return _hamiltonian_ext(
            psi if psi_ is None else psi_,
            psibar if psibar_ is None else psibar_,
            pi if pi_ is None else pi_,
            pibar if pibar_ is None else pibar_,
            p.gamma if g_ is None else g_,
            p.pi_gamma if pg_ is None else pg_,
            params, chi_m, p.t)

    def diff(setter, base_abs: float) -> complex:
        h = fd_step * max(1.0, base_abs)
        return (ham(**setter(+h)) - ham(**setter(-h))) / (2.0 * h)

    psi_dot = np.zeros(n, dtype=complex)
    pi_dot = np.zeros(n, dtype=complex)
    for a in range(n):
        def set_pi(h, a=a):
            v = pi.copy(); v[a] += h
            return {"pi_": v}

        def set_psi(h, a=a):
            v = psi.copy(); v[a] += h
            return {"psi_": v}

        psi_dot[a] = diff(set_pi, abs(pi[a]))
        pi_dot[a] = -diff(set_psi, abs(psi[a]))

    gamma_dot = pi_gamma_dot = None
    if p.pi_gamma is not None:
        gamma_dot = np.zeros((n, n), dtype=complex)
        pi_gamma_dot = np.zeros((n, n), dtype=complex)
        for a in range(n):
            for b in range(n):
                def set_pg(h, a=a, b=b):
                    m = p.pi_gamma.copy(); m[b, a] += h
                    return {"pg_": m}

                def set_g(h, a=a, b=b):
                    m = p.gamma.copy(); m[a, b] += h
                    return {"g_": m}

                gamma_dot[a, b] = diff(set_pg, abs(p.pi_gamma[b, a]))
                pi_gamma_dot[b, a] = -diff(set_g, abs(p.gamma[a, b]))
    return CanonicalFlow(psi_dot=psi_dot, pi_dot=pi_dot,
                         gamma_dot=gamma_dot, pi_gamma_dot=pi_gamma_dot)


def lagrangian_flow_through_legendre(p: PhasePoint, params: ModelParams,
                                     chi) -> CanonicalFlow:
    """Lagrangian flow pushed through the differential of the Legendre map.

    Velocities come from the inverse Legendre map, accelerations from the
    explicit equations of motion, and the momentum rates from
    differentiating the forward map in time.
    """
    chi_m = resolve_chi(chi, p.t)
    psi, g = p.psi, p.gamma
    if p.pi_gamma is not None:
        psid, gd = legendre_inverse(p, params)
        state = FullState(psi=psi, psi_dot=psid, gamma=g, gamma_dot=gd, t=p.t)
        psi_ddot, gamma_ddot = rhs_full(state, params, chi_m)
        pi_dot = params.alpha2 * (np.conj(psi_ddot) @ g + np.conj(psid) @ gd) \
            + 1j * params.alpha1 * (np.conj(psid) @ g + np.conj(psi) @ gd)
        pdot = _p_dot(psi, psid, g, gd, params.alpha9)
        pi_gamma_dot = params.alpha3 * pdot \
            + 2.0 * _apply_omega_dot(psi, psid, g, gd, params, gd) \
            + 2.0 * apply_omega(psi, g, params, gamma_ddot)
        return CanonicalFlow(psi_dot=psid, pi_dot=pi_dot, gamma_dot=gd,
                             pi_gamma_dot=pi_gamma_dot)

    # frozen-gamma second-order sector
    if params.alpha2 == 0.0:
        raise ZeroAlpha2("the psi-sector Legendre map is singular for alpha2 == 0")
    ginv = invert_form(g)
    psid = (ginv @ np.conj(p.pi)) / params.alpha2 \
        + (1j * params.alpha1 / params.alpha2) * psi
    zero = np.zeros_like(g)
    state = FullState(psi=psi, psi_dot=psid, gamma=g, gamma_dot=zero, t=p.t)
    psi_ddot = rhs_second_order(state, chi_m, params)
    pi_dot = params.alpha2 * (np.conj(psi_ddot) @ g) + 1j * params.alpha1 * (np.conj(psid) @ g)
    return CanonicalFlow(psi_dot=psid, pi_dot=pi_dot, gamma_dot=None, pi_gamma_dot=None)


def canonical_frozen_flow(psi, pi, gamma, params: ModelParams, chi_matrix,
                          t: float = 0.0, ginv=None) -> tuple[np.ndarray, np.ndarray]:
    """Analytic canonical equations of the frozen-gamma regular model
    (alpha2 != 0): psid = dH/dpi, pid = -dH/dpsi.  ``ginv`` may be passed
    precomputed for tight integration loops."""
    a1, a2 = params.alpha1, params.alpha2
    if a2 == 0.0:
        raise ZeroAlpha2("frozen-gamma canonical flow needs alpha2 != 0")
    psi = np.asarray(psi, dtype=complex)
    pi = np.asarray(pi, dtype=complex)
    g = np.asarray(gamma, dtype=complex)
    chi_m = np.asarray(chi_matrix, dtype=complex)
    if ginv is None:
        ginv = invert_form(g)
    psibar = np.conj(psi)

    psi_dot = (ginv @ np.conj(pi)) / a2 + (1j * a1 / a2) * psi
    pi_dot = -(1j * a1 / a2) * pi \
        + psibar @ ((params.alpha4 - a1 * a1 / a2) * g + params.alpha5 * chi_m)
    fprime = params.effective_potential.derivative(float((psibar @ g @ psi).real))
    pi_dot = pi_dot - fprime * (psibar @ g)
    if params.forcing is not None:
        pi_dot = pi_dot + np.asarray(params.forcing(t), dtype=complex)
    return psi_dot, pi_dot
