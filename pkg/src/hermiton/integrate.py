"""Time-stepping engines and trajectory recording for all model tiers.

States are flattened to real vectors for stepping.  The psi sector always
uses a real/imaginary split.  The gamma sector has two layouts:

* ``resymmetrize_gamma=True``: gamma and gamma_dot are stored in the
  n^2-real Hermitian parametrization (diagonal reals plus off-diagonal
  real/imaginary pairs), which enforces hermiticity structurally; the
  hermiticity defect of the raw right-hand side is still recorded at
  sample times (the "pre-projection" drift).
* ``resymmetrize_gamma=False``: the full complex matrices are stepped
  (2 n^2 reals each) and the hermiticity drift of the state itself is
  recorded, unprojected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .canonical import PhasePoint, canonical_frozen_flow, hamiltonian
from .dynamics import (
    _full_accelerations_raw,
    _modified_first_order_raw,
    rhs_direct_nonlinear_raw,
    rhs_gamma_geodesic,
    rhs_second_order,
)
from .errors import HermitonError, NonFinite, StepFailure
from .hermitian_algebra import (
    hermitian_part,
    hermitian_to_real,
    hermiticity_drift,
    real_to_hermitian,
)
from .models import FullState, ModelParams, energy, resolve_chi, theta1

__all__ = ["IntegratorConfig", "Trajectory", "integrate", "convergence_order"]

MODEL_TIERS = (
    "schrodinger",
    "second_order",
    "direct_nonlinear",
    "gamma_geodesic",
    "full",
    "modified_first_order",
    "canonical_frozen",
)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    t_start: float = 0.0
    method: str = "rk4"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    resymmetrize_gamma: bool = False
    sample_stride: int = 1
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45_adaptive", "implicit_midpoint"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: list
    diagnostics: list

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if len(self.states) != times.size or len(self.diagnostics) != times.size:
            raise ValueError("state/diagnostic count must match time count")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)

    @property
    def final_state(self):
        return self.states[-1]

    def series(self, key: str) -> np.ndarray:
        return np.array([d[key] for d in self.diagnostics])


def _c2r(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex).ravel()
    return np.concatenate([z.real, z.imag])


def _r2c(x: np.ndarray, shape) -> np.ndarray:
    half = x.size // 2
    return (x[:half] + 1j * x[half:]).reshape(shape)


class _GammaCodec:
    """Pack/unpack a Hermitian matrix block per the configured layout."""

    def __init__(self, n: int, structural: bool):
        self.n = n
        self.structural = structural
        self.size = n * n if structural else 2 * n * n

    def pack(self, m: np.ndarray) -> np.ndarray:
        if self.structural:
            return hermitian_to_real(hermitian_part(m))
        return _c2r(m)

    def unpack(self, x: np.ndarray) -> np.ndarray:
        if self.structural:
            return real_to_hermitian(x, self.n)
        return _r2c(x, (self.n, self.n))


@dataclass
class _System:
    """Flattened-vector view of one model tier."""

    y0: np.ndarray
    deriv: Callable[[float, np.ndarray], np.ndarray]
    record: Callable[[float, np.ndarray], tuple]
    t0: float


def _build_system(initial, tier: str, cfg: IntegratorConfig, params: ModelParams,
                  chi, gamma_tilde=None) -> _System:
    if tier not in MODEL_TIERS:
        raise ValueError(f"unknown model tier {tier!r}; choose from {MODEL_TIERS}")

    if tier == "canonical_frozen":
        p0: PhasePoint = initial
        n = p0.n
        gamma0 = p0.gamma
        ginv0 = np.linalg.inv(gamma0)

        def deriv(t, y):
            psi = _r2c(y[:2 * n], (n,))
            pi = _r2c(y[2 * n:], (n,))
            psid, pid = canonical_frozen_flow(psi, pi, gamma0, params,
                                              resolve_chi(chi, t), t, ginv=ginv0)
            return np.concatenate([_c2r(psid), _c2r(pid)])

        def record(t, y):
            psi = _r2c(y[:2 * n], (n,))
            pi = _r2c(y[2 * n:], (n,))
            point = PhasePoint(psi=psi, pi=pi, gamma=gamma0, t=t)
            diag = {
                "t": t,
                "energy": hamiltonian(point, params, chi),
                "theta1": theta1(psi, gamma0),
                "herm_drift": 0.0,
            }
            return point, diag

        y0 = np.concatenate([_c2r(p0.psi), _c2r(p0.pi)])
        return _System(y0=y0, deriv=deriv, record=record, t0=p0.t)

    state0: FullState = initial
    n = state0.n
    codec = _GammaCodec(n, cfg.resymmetrize_gamma)
    gamma0, gamma_dot0 = state0.gamma, state0.gamma_dot

    def _full_state(t, psi, psid, g, gd) -> FullState:
        return FullState(psi=psi, psi_dot=psid, gamma=hermitian_part(g),
                         gamma_dot=hermitian_part(gd), t=t)

    if tier in ("schrodinger", "direct_nonlinear"):
        def deriv(t, y):
            psi = _r2c(y, (n,))
            return _c2r(rhs_direct_nonlinear_raw(psi, gamma0, params,
                                                 resolve_chi(chi, t), t))

        def record(t, y):
            psi = _r2c(y, (n,))
            psid = rhs_direct_nonlinear_raw(psi, gamma0, params, resolve_chi(chi, t), t)
            state = _full_state(t, psi, psid, gamma0, np.zeros((n, n)))
            diag = {"t": t, "energy": energy(state, params, chi),
                    "theta1": theta1(psi, gamma0), "herm_drift": 0.0}
            return state, diag

        return _System(y0=_c2r(state0.psi), deriv=deriv, record=record, t0=state0.t)

    if tier == "second_order":
        kin = gamma_tilde

        def deriv(t, y):
            psi = _r2c(y[:2 * n], (n,))
            psid = _r2c(y[2 * n:], (n,))
            state = _full_state(t, psi, psid, gamma0, np.zeros((n, n)))
            acc = rhs_second_order(state, resolve_chi(chi, t), params, kin)
            return np.concatenate([_c2r(psid), _c2r(acc)])

        def record(t, y):
            psi = _r2c(y[:2 * n], (n,))
            psid = _r2c(y[2 * n:], (n,))
            state = _full_state(t, psi, psid, gamma0, np.zeros((n, n)))
            diag = {"t": t, "energy": energy(state, params, chi),
                    "theta1": theta1(psi, gamma0), "herm_drift": 0.0}
            return state, diag

        y0 = np.concatenate([_c2r(state0.psi), _c2r(state0.psi_dot)])
        return _System(y0=y0, deriv=deriv, record=record, t0=state0.t)

    if tier == "gamma_geodesic":
        big_a, big_b = params.big_a, params.big_b

        def raw_rhs(g, gd):
            return rhs_gamma_geodesic(g, gd, big_a, big_b)

        def deriv(t, y):
            g = codec.unpack(y[:codec.size])
            gd = codec.unpack(y[codec.size:])
            return np.concatenate([codec.pack(gd), codec.pack(raw_rhs(g, gd))])

        def record(t, y):
            g = codec.unpack(y[:codec.size])
            gd = codec.unpack(y[codec.size:])
            if cfg.resymmetrize_gamma:
                drift = hermiticity_drift(raw_rhs(g, gd))
            else:
                drift = hermiticity_drift(g)
            psi0 = np.zeros(n, dtype=complex)
            state = _full_state(t, psi0, psi0, g, gd)
            diag = {"t": t, "energy": energy(state, params, chi),
                    "theta1": 0.0, "herm_drift": drift}
            return state, diag

        y0 = np.concatenate([codec.pack(gamma0), codec.pack(gamma_dot0)])
        return _System(y0=y0, deriv=deriv, record=record, t0=state0.t)

    if tier == "full":
        def deriv(t, y):
            psi = _r2c(y[:2 * n], (n,))
            psid = _r2c(y[2 * n:4 * n], (n,))
            g = codec.unpack(y[4 * n:4 * n + codec.size])
            gd = codec.unpack(y[4 * n + codec.size:])
            acc_psi, acc_g = _full_accelerations_raw(psi, psid, g, gd, params,
                                                     resolve_chi(chi, t), t)
            return np.concatenate([_c2r(psid), _c2r(acc_psi),
                                   codec.pack(gd), codec.pack(acc_g)])

        def record(t, y):
            psi = _r2c(y[:2 * n], (n,))
            psid = _r2c(y[2 * n:4 * n], (n,))
            g = codec.unpack(y[4 * n:4 * n + codec.size])
            gd = codec.unpack(y[4 * n + codec.size:])
            if cfg.resymmetrize_gamma:
                _, acc_g = _full_accelerations_raw(psi, psid, g, gd, params,
                                                   resolve_chi(chi, t), t)
                drift = hermiticity_drift(acc_g)
            else:
                drift = hermiticity_drift(g)
            state = _full_state(t, psi, psid, g, gd)
            diag = {"t": t, "energy": energy(state, params, chi),
                    "theta1": theta1(psi, state.gamma), "herm_drift": drift}
            return state, diag

        y0 = np.concatenate([_c2r(state0.psi), _c2r(state0.psi_dot),
                             codec.pack(gamma0), codec.pack(gamma_dot0)])
        return _System(y0=y0, deriv=deriv, record=record, t0=state0.t)

    # modified_first_order
    def deriv(t, y):
        psi = _r2c(y[:2 * n], (n,))
        g = codec.unpack(y[2 * n:2 * n + codec.size])
        gd = codec.unpack(y[2 * n + codec.size:])
        psid, acc_g = _modified_first_order_raw(psi, g, gd, params,
                                                resolve_chi(chi, t), t)
        return np.concatenate([_c2r(psid), codec.pack(gd), codec.pack(acc_g)])

    def record(t, y):
        psi = _r2c(y[:2 * n], (n,))
        g = codec.unpack(y[2 * n:2 * n + codec.size])
        gd = codec.unpack(y[2 * n + codec.size:])
        psid, acc_g = _modified_first_order_raw(psi, g, gd, params,
                                                resolve_chi(chi, t), t)
        drift = hermiticity_drift(acc_g) if cfg.resymmetrize_gamma else hermiticity_drift(g)
        state = _full_state(t, psi, psid, g, gd)
        diag = {"t": t, "energy": energy(state, params, chi),
                "theta1": theta1(psi, state.gamma), "herm_drift": drift}
        return state, diag

    y0 = np.concatenate([_c2r(state0.psi), codec.pack(gamma0), codec.pack(gamma_dot0)])
    return _System(y0=y0, deriv=deriv, record=record, t0=state0.t)


def _rk4_step(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2.0, y + (dt / 2.0) * k1)
    k3 = f(t + dt / 2.0, y + (dt / 2.0) * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


def _dp_step(f, t, y, dt):
    k = [f(t, y)]
    for i in range(1, 7):
        yi = y + dt * sum(a * kk for a, kk in zip(_DP_A[i], k))
        k.append(f(t + _DP_C[i] * dt, yi))
    y5 = y + dt * sum(b * kk for b, kk in zip(_DP_B5, k))
    y4 = y + dt * sum(b * kk for b, kk in zip(_DP_B4, k))
    return y5, y5 - y4


def _implicit_midpoint_step(f, t, y, dt, tol=1e-12, max_iter=50):
    t_mid = t + dt / 2.0
    y_next = y + dt * f(t, y)
    prev_res = np.inf
    damping = 1.0
    for _ in range(max_iter):
        target = y + dt * f(t_mid, 0.5 * (y + y_next))
        res = float(np.max(np.abs(target - y_next)))
        if res <= tol * (1.0 + float(np.max(np.abs(y)))):
            return target
        if res > prev_res:
            damping = 0.5        # damped iteration once the map stops contracting
        y_next = damping * target + (1.0 - damping) * y_next
        prev_res = res
    raise NonFinite("implicit midpoint stage iteration did not converge")


def integrate(initial, tier: str, cfg: IntegratorConfig, params: ModelParams,
              chi=None, gamma_tilde=None) -> Trajectory:
    """Integrate one model tier and record a sampled trajectory.

    ``initial`` is a FullState (or a PhasePoint for the canonical tier);
    ``chi`` may be a Hermitian matrix or a callable t -> matrix.  Errors
    raised by the right-hand side mid-run surface as StepFailure with the
    last good time attached.
    """
    if chi is None:
        n = initial.n
        chi = np.zeros((n, n), dtype=complex)
    system = _build_system(initial, tier, cfg, params, chi, gamma_tilde)

    times, states, diags = [], [], []

    def sample(t, y):
        state, diag = system.record(t, y)
        times.append(t)
        states.append(state)
        diags.append(diag)

    t = system.t0
    y = system.y0.copy()
    sample(t, y)

    if cfg.method in ("rk4", "implicit_midpoint"):
        n_steps = int(round((cfg.t_end - system.t0) / cfg.dt))
        n_steps = max(n_steps, 1)
        dt = (cfg.t_end - system.t0) / n_steps
        stepper = _rk4_step if cfg.method == "rk4" else _implicit_midpoint_step
        for k in range(n_steps):
            try:
                y = stepper(system.deriv, t, y, dt)
            except (HermitonError, np.linalg.LinAlgError, FloatingPointError) as exc:
                raise StepFailure(f"[{tier}] step failed: {exc}", last_good_t=t) from exc
            if not np.all(np.isfinite(y)):
                raise StepFailure(f"[{tier}] state became non-finite", last_good_t=t)
            t = system.t0 + (k + 1) * dt
            if (k + 1) % cfg.sample_stride == 0 or k == n_steps - 1:
                sample(t, y)
        return Trajectory(times=np.array(times), states=states, diagnostics=diags)

    # adaptive Dormand-Prince with PI step limiting
    dt = cfg.dt
    err_prev = 1.0
    accepted = 0
    while t < cfg.t_end - 1e-14 * max(1.0, abs(cfg.t_end)):
        dt = min(dt, cfg.t_end - t)
        try:
            y_new, err_vec = _dp_step(system.deriv, t, y, dt)
        except (HermitonError, np.linalg.LinAlgError, FloatingPointError) as exc:
            raise StepFailure(f"[{tier}] step failed: {exc}", last_good_t=t) from exc
        if not np.all(np.isfinite(y_new)):
            raise StepFailure(f"[{tier}] state became non-finite", last_good_t=t)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t = t + dt
            y = y_new
            accepted += 1
            if accepted % cfg.sample_stride == 0 or t >= cfg.t_end - 1e-14:
                sample(t, y)
            # PI controller (orders 5/4)
            fac = 0.9 * (err + 1e-16) ** (-0.7 / 5.0) * (err_prev + 1e-16) ** (0.4 / 5.0)
            err_prev = err
        else:
            fac = max(0.2, 0.9 * (err + 1e-16) ** (-1.0 / 5.0))
        dt *= min(5.0, max(0.2, fac))
        if len(times) + accepted > cfg.max_steps:
            raise StepFailure("exceeded max_steps", last_good_t=t)
    return Trajectory(times=np.array(times), states=states, diagnostics=diags)


def convergence_order(initial, tier: str, cfg: IntegratorConfig,
                      params: ModelParams, chi=None, dt_list=None,
                      gamma_tilde=None) -> float:
    """Richardson order estimate from >= 3 step sizes in geometric progression.

    Returns NaN when the solution differences are too small to resolve an
    order (e.g. a constant trajectory).
    """
    if dt_list is None or len(dt_list) < 3:
        raise ValueError("need at least 3 dt values")
    dt_list = list(dt_list)
    ratios = [dt_list[i] / dt_list[i + 1] for i in range(len(dt_list) - 1)]
    if not np.allclose(ratios, ratios[0], rtol=1e-12):
        raise ValueError("dt values must form a geometric progression")

    finals = []
    for dt in dt_list:
        run_cfg = IntegratorConfig(
            dt=dt, t_end=cfg.t_end, t_start=cfg.t_start, method=cfg.method,
            rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
            resymmetrize_gamma=cfg.resymmetrize_gamma,
            sample_stride=10 ** 9, max_steps=cfg.max_steps)
        traj = integrate(initial, tier, run_cfg, params, chi, gamma_tilde)
        finals.append(_final_vector(traj))

    diffs = [float(np.linalg.norm(finals[i] - finals[i + 1]))
             for i in range(len(finals) - 1)]
    floor = 1e-13 * max(1.0, float(np.linalg.norm(finals[-1])))
    if any(d <= floor for d in diffs):
        return float("nan")
    orders = [np.log(diffs[i] / diffs[i + 1]) / np.log(ratios[0])
              for i in range(len(diffs) - 1)]
    return float(np.mean(orders))


def _final_vector(traj: Trajectory) -> np.ndarray:
    state = traj.final_state
    if isinstance(state, PhasePoint):
        return np.concatenate([_c2r(state.psi), _c2r(state.pi)])
    return np.concatenate([_c2r(state.psi), _c2r(state.psi_dot),
                           _c2r(state.gamma), _c2r(state.gamma_dot)])
