"""Time evolution under the ramped model plus drives.

The default integrator is a fixed-substep exponential-midpoint rule: each
schedule segment is cut into substeps small enough that
max(w_d, Omega, omega) * dtau <= rate_cap, and exp(-i H(t_mid) dtau) is
applied exactly (banded Taylor with exact splitting).  This keeps the
propagation unitary to roundoff regardless of step size.  A 4th-order
commutator-free variant ("magnus4") and an adaptive Runge-Kutta state-vector
mode ("rk") are provided for cross-validation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import _engine
from .errors import DimensionMismatch, DomainError, IntegrationError
from .hilbert import DensityMatrix, OperatorMatrix, RabiParams, SpaceSpec, StateVector, check_dims, rabi_hamiltonian
from .schedule import ControlKind, PulseSchedule, drive_value

NORM_DRIFT_TOL = 1e-8

# CF4 (two-exponential, 4th order) nodes and weights
_CF4_C1 = 0.5 - math.sqrt(3.0) / 6.0
_CF4_C2 = 0.5 + math.sqrt(3.0) / 6.0
_CF4_A1 = (3.0 - 2.0 * math.sqrt(3.0)) / 12.0
_CF4_A2 = (3.0 + 2.0 * math.sqrt(3.0)) / 12.0


@dataclass(frozen=True)
class NoiseRates:
    kappa1: float = 0.0  # photon loss
    kappa2: float = 0.0  # qubit relaxation
    kappa3: float = 0.0  # qubit dephasing

    def __post_init__(self):
        if min(self.kappa1, self.kappa2, self.kappa3) < 0:
            raise DomainError("decay rates must be non-negative")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "magnus2"       # magnus2 | magnus4 | rk
    rate_cap: float = 0.1         # max(w_d, Omega, omega) * dtau <= rate_cap
    substeps: int | None = None   # explicit substeps per segment (overrides rate_cap)
    rk_rtol: float = 1e-9
    rk_atol: float = 1e-12
    leak_tol: float = 1e-6        # population allowed in the top Fock decile
    check_leak: bool = True

    def __post_init__(self):
        if self.method not in ("magnus2", "magnus4", "rk"):
            raise DomainError(f"unknown integrator method {self.method!r}")
        if self.rate_cap <= 0:
            raise DomainError("rate_cap must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    target: StateVector | None = None
    final_fidelity: float = float("nan")
    open_system: bool = False

    def __post_init__(self):
        if len(self.states) != len(self.times):
            raise DomainError("states and times length mismatch")

    @property
    def final_state(self):
        return self.states[-1]

    def norms(self) -> np.ndarray:
        if self.open_system:
            return np.array([float(np.trace(s.entries).real) for s in self.states])
        return np.array([s.norm for s in self.states])

    def fidelities(self) -> np.ndarray:
        if self.target is None:
            return np.full(len(self.states), np.nan)
        t = self.target.amplitudes
        if self.open_system:
            return np.array(
                [math.sqrt(max(0.0, float(np.vdot(t, s.entries @ t).real))) for s in self.states]
            )
        return np.array([abs(np.vdot(t, s.amplitudes)) for s in self.states])


def total_hamiltonian(
    params: RabiParams, schedule: PulseSchedule, t: float, space: SpaceSpec
) -> OperatorMatrix:
    """H_model[g(t)] + sum_i Lambda_i(t) cos(w_d t + phi_i) H_i."""
    from . import hilbert

    h = rabi_hamiltonian(params, schedule.ramp(t), space).entries.copy()
    ops = {
        ControlKind.DISPLACEMENT: hilbert.quadrature_op,
        ControlKind.QUADRATURE_SQ: hilbert.quadrature_sq_op,
        ControlKind.PHOTON_NUMBER: hilbert.number_op,
        ControlKind.QUBIT_Z: lambda s: hilbert.qubit_op("z", s),
        ControlKind.QUBIT_X: lambda s: hilbert.qubit_op("x", s),
    }
    for fld in schedule.fields:
        c = drive_value(fld, schedule, t)
        if c != 0.0:
            h += c * ops[fld.kind](space).entries
    return OperatorMatrix(space.total_dim, h, hermitian=True)


# ---------------------------------------------------------------------------
# stage construction for the exponential integrators
# ---------------------------------------------------------------------------

_MODEL_CACHE: dict = {}


def _get_model(params: RabiParams, space: SpaceSpec, kinds: tuple):
    key = (params, space, kinds)
    model = _MODEL_CACHE.get(key)
    if model is None:
        model = _engine.banded_model(params, space, kinds)
        if len(_MODEL_CACHE) > 32:
            _MODEL_CACHE.clear()
        _MODEL_CACHE[key] = model
    return model


def substeps_per_segment(params: RabiParams, schedule: PulseSchedule, cfg: IntegratorConfig) -> int:
    if cfg.substeps is not None:
        return max(1, int(cfg.substeps))
    rate = max(schedule.drive_freq, params.Omega, params.omega)
    seg_dt = schedule.duration / schedule.steps
    return max(1, int(math.ceil(seg_dt * rate / cfg.rate_cap)))


def _drive_coeffs(schedule: PulseSchedule, seg: int, times: np.ndarray) -> np.ndarray:
    """Coefficients of every field at the given times inside segment seg."""
    out = np.empty((len(times), len(schedule.fields)))
    for i, fld in enumerate(schedule.fields):
        lam = fld.amplitudes[seg - 1]
        out[:, i] = lam * np.cos(schedule.drive_freq * times + fld.phase)
    return out


def _build_stages(
    params: RabiParams,
    schedule: PulseSchedule,
    cfg: IntegratorConfig,
    segments: range,
):
    """Flat (stage_dt, stage_g, stage_c, record_after) arrays for the kernels.

    One record slot per segment in ``segments``, written after its last stage.
    """
    n_sub = substeps_per_segment(params, schedule, cfg)
    n_exp = 2 if cfg.method == "magnus4" else 1
    n_fields = len(schedule.fields)
    n_seg = len(segments)
    n_stage = n_seg * n_sub * n_exp

    stage_dt = np.empty(n_stage)
    stage_g = np.empty(n_stage)
    stage_c = np.empty((n_stage, max(n_fields, 1)))
    record_after = np.full(n_stage, -1, dtype=np.int32)

    seg_len = schedule.duration / schedule.steps
    dtau = seg_len / n_sub
    ramp = schedule.ramp
    pos = 0
    for ridx, seg in enumerate(segments):
        t0 = (seg - 1) * seg_len
        sub_t0 = t0 + dtau * np.arange(n_sub)
        if cfg.method == "magnus2":
            tm = sub_t0 + 0.5 * dtau
            gm = ramp.a0 + ramp.a1 * tm + ramp.a2 * tm * tm
            cm = _drive_coeffs(schedule, seg, tm)
            sl = slice(pos, pos + n_sub)
            stage_dt[sl] = dtau
            stage_g[sl] = gm
            stage_c[sl, :n_fields] = cm
            pos += n_sub
        else:
            t1 = sub_t0 + _CF4_C1 * dtau
            t2 = sub_t0 + _CF4_C2 * dtau
            g1 = ramp.a0 + ramp.a1 * t1 + ramp.a2 * t1 * t1
            g2 = ramp.a0 + ramp.a1 * t2 + ramp.a2 * t2 * t2
            c1 = _drive_coeffs(schedule, seg, t1)
            c2 = _drive_coeffs(schedule, seg, t2)
            # right factor (applied first) weights the early node with A2
            for j in range(n_sub):
                for wa, wb in ((_CF4_A2, _CF4_A1), (_CF4_A1, _CF4_A2)):
                    w = wa + wb  # = 1/2
                    stage_dt[pos] = dtau * w
                    stage_g[pos] = (wa * g1[j] + wb * g2[j]) / w
                    stage_c[pos, :n_fields] = (wa * c1[j] + wb * c2[j]) / w
                    pos += 1
        record_after[pos - 1] = ridx
    return stage_dt, stage_g, stage_c, record_after


def _check_leak(space: SpaceSpec, amplitudes: np.ndarray, leak_tol: float):
    nf, q = space.fock_cutoff, space.qubit_levels
    top = amplitudes.reshape(nf, q)[int(0.9 * nf):]
    pop = float(np.sum(np.abs(top) ** 2))
    if pop > leak_tol:
        raise IntegrationError(
            f"population {pop:.2e} in the top Fock decile exceeds {leak_tol:.1e}; "
            f"increase fock_cutoff beyond {nf}"
        )


def evolve_pure(
    params: RabiParams,
    schedule: PulseSchedule,
    psi0: StateVector,
    space: SpaceSpec,
    cfg: IntegratorConfig = IntegratorConfig(),
    target: StateVector | None = None,
) -> Trajectory:
    """Propagate a pure state across the schedule, recording every grid point."""
    check_dims(space, psi0, *([target] if target is not None else []))
    psi0.assert_normalized()
    times = schedule.grid

    if cfg.method == "rk":
        states = _evolve_rk(params, schedule, psi0, space, cfg)
    else:
        model = _get_model(params, space, tuple(f.kind for f in schedule.fields))
        stage_dt, stage_g, stage_c, record_after = _build_stages(
            params, schedule, cfg, range(1, schedule.steps + 1)
        )
        _, records = _engine.propagate(
            model, stage_dt, stage_g, stage_c, record_after,
            psi0.amplitudes, schedule.steps,
        )
        states = [psi0] + [StateVector(space.total_dim, records[i]) for i in range(schedule.steps)]

    for s in states:
        if abs(s.norm - 1.0) >= NORM_DRIFT_TOL:
            raise IntegrationError(f"norm drift {abs(s.norm - 1.0):.2e} exceeds tolerance")
        if cfg.check_leak:
            _check_leak(space, s.amplitudes, cfg.leak_tol)

    traj = Trajectory(times=times, states=states, target=target)
    if target is not None:
        traj.final_fidelity = float(abs(np.vdot(target.amplitudes, states[-1].amplitudes)))
    return traj


def _evolve_rk(params, schedule, psi0, space, cfg):
    model = _get_model(params, space, tuple(f.kind for f in schedule.fields))
    ramp = schedule.ramp
    n_fields = len(schedule.fields)
    lam = np.array([f.amplitudes for f in schedule.fields]) if n_fields else np.zeros((0, schedule.steps))
    phases = np.array([f.phase for f in schedule.fields])

    def rhs(t, y):
        t = min(max(t, 0.0), schedule.duration)
        seg = min(int(t * schedule.steps / schedule.duration) + 1, schedule.steps)
        g = ramp.a0 + ramp.a1 * t + ramp.a2 * t * t
        coeffs = lam[:, seg - 1] * np.cos(schedule.drive_freq * t + phases) if n_fields else np.zeros(1)
        bands = model.assemble(g, coeffs)
        return -1j * _engine.apply_bands(bands, y)

    sol = solve_ivp(
        rhs, (0.0, schedule.duration), psi0.amplitudes.astype(complex),
        t_eval=schedule.grid, method="DOP853", rtol=cfg.rk_rtol, atol=cfg.rk_atol,
    )
    if not sol.success:
        raise IntegrationError(f"RK integration failed: {sol.message}")
    return [StateVector(space.total_dim, sol.y[:, i].copy()) for i in range(sol.y.shape[1])]


def segment_propagator(
    params: RabiParams,
    schedule: PulseSchedule,
    k: int,
    space: SpaceSpec,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> OperatorMatrix:
    """Unitary for segment k, built by propagating the identity columns."""
    if not 1 <= k <= schedule.steps:
        raise DomainError(f"segment index {k} outside 1..{schedule.steps}")
    if cfg.method == "rk":
        raise DomainError("segment_propagator needs an exponential method")
    model = _get_model(params, space, tuple(f.kind for f in schedule.fields))
    stage_dt, stage_g, stage_c, record_after = _build_stages(params, schedule, cfg, range(k, k + 1))
    dim = space.total_dim
    u = np.empty((dim, dim), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for j in range(dim):
        final, _ = _engine.propagate(
            model, stage_dt, stage_g, stage_c, record_after, eye[:, j], 1
        )
        u[:, j] = final
    dev = np.max(np.abs(u.conj().T @ u - eye))
    if dev >= 1e-8:
        raise IntegrationError(f"segment propagator not unitary: |U+U - I| = {dev:.2e}")
    return OperatorMatrix(dim, u, hermitian=False)


# ---------------------------------------------------------------------------
# open-system propagation
# ---------------------------------------------------------------------------

def jump_operators(
    rates: NoiseRates, space: SpaceSpec, convention: str = "sqrt"
) -> list[np.ndarray]:
    """[L1, L2, L3] on the full space.

    "sqrt" uses L = sqrt(kappa) op so kappa is a rate; "literal" uses
    L = kappa op, reproducing the form printed in the source protocol.
    """
    from . import hilbert

    if convention == "sqrt":
        f1, f2, f3 = math.sqrt(rates.kappa1), math.sqrt(rates.kappa2), math.sqrt(rates.kappa3)
    elif convention == "literal":
        f1, f2, f3 = rates.kappa1, rates.kappa2, rates.kappa3
    else:
        raise DomainError(f"unknown Lindblad convention {convention!r}")
    ops = []
    if f1:
        ops.append(f1 * hilbert.annihilation_op(space).entries)
    if f2:
        ops.append(f2 * hilbert.qubit_op("minus", space).entries)
    if f3:
        ops.append(f3 * hilbert.qubit_op("z", space).entries)
    return ops


def evolve_lindblad(
    params: RabiParams,
    schedule: PulseSchedule,
    rho0: DensityMatrix,
    rates: NoiseRates,
    space: SpaceSpec,
    cfg: IntegratorConfig = IntegratorConfig(rk_rtol=1e-8, rk_atol=1e-10),
    target: StateVector | None = None,
    convention: str = "sqrt",
) -> Trajectory:
    """Integrate the master equation with photon-loss, relaxation and dephasing."""
    check_dims(space, rho0, *([target] if target is not None else []))
    model = _get_model(params, space, tuple(f.kind for f in schedule.fields))
    ramp = schedule.ramp
    dim = space.total_dim
    n_fields = len(schedule.fields)
    lam = np.array([f.amplitudes for f in schedule.fields]) if n_fields else np.zeros((0, schedule.steps))
    phases = np.array([f.phase for f in schedule.fields])

    ls = jump_operators(rates, space, convention)
    l_dags = [l.conj().T for l in ls]
    acomm = sum((ld @ l for l, ld in zip(ls, l_dags)), np.zeros((dim, dim), dtype=complex))

    def rhs(t, y):
        t = min(max(t, 0.0), schedule.duration)
        seg = min(int(t * schedule.steps / schedule.duration) + 1, schedule.steps)
        g = ramp.a0 + ramp.a1 * t + ramp.a2 * t * t
        coeffs = lam[:, seg - 1] * np.cos(schedule.drive_freq * t + phases) if n_fields else np.zeros(1)
        bands = model.assemble(g, coeffs)
        rho = y.reshape(dim, dim)
        h_rho = _apply_bands_matrix(bands, rho)
        drho = -1j * (h_rho - h_rho.conj().T)  # rho Hermitian, H real symmetric
        for l, ld in zip(ls, l_dags):
            drho += l @ rho @ ld
        drho -= 0.5 * (acomm @ rho + rho @ acomm)
        return drho.reshape(-1)

    sol = solve_ivp(
        rhs, (0.0, schedule.duration), rho0.entries.astype(complex).reshape(-1),
        t_eval=schedule.grid, method="DOP853", rtol=cfg.rk_rtol, atol=cfg.rk_atol,
    )
    if not sol.success:
        raise IntegrationError(f"master-equation integration failed: {sol.message}")

    states = []
    for i in range(sol.y.shape[1]):
        rho = sol.y[:, i].reshape(dim, dim)
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) >= NORM_DRIFT_TOL:
            raise IntegrationError(f"trace drift {abs(tr - 1.0):.2e} exceeds tolerance")
        rho = 0.5 * (rho + rho.conj().T)  # strip Hermiticity roundoff
        states.append(DensityMatrix(dim, rho))

    traj = Trajectory(times=schedule.grid, states=states, target=target, open_system=True)
    if target is not None:
        t = target.amplitudes
        traj.final_fidelity = math.sqrt(max(0.0, float(np.vdot(t, states[-1].entries @ t).real)))
    return traj


def _apply_bands_matrix(bands: np.ndarray, m: np.ndarray) -> np.ndarray:
    """H @ M for banded real-symmetric H (column-wise band application)."""
    from ._engine.bands import OFFSETS

    dim = bands.shape[1]
    out = np.zeros_like(m)
    for j, off in enumerate(OFFSETS):
        if off >= 0:
            out[: dim - off] += bands[j, : dim - off, None] * m[off:]
        else:
            out[-off:] += bands[j, -off:, None] * m[:off]
    return out


def final_fidelity(traj: Trajectory, target: StateVector) -> float:
    """|<target|psi(T)>| for pure runs, sqrt(<target|rho(T)|target>) for open runs."""
    last = traj.final_state
    check_dims(last, target)
    if traj.open_system:
        return math.sqrt(max(0.0, float(np.vdot(target.amplitudes, last.entries @ target.amplitudes).real)))
    return float(abs(np.vdot(target.amplitudes, last.amplitudes)))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def trajectory_to_csv(traj: Trajectory, path) -> None:
    norms = traj.norms()
    fids = traj.fidelities()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "fidelity_to_target", "norm"])
        for t, f, n in zip(traj.times, fids, norms):
            w.writerow([repr(float(t)), repr(float(f)), repr(float(n))])


def trajectory_states_to_json(traj: Trajectory, path) -> None:
    doc = {
        "times": [float(t) for t in traj.times],
        "open_system": traj.open_system,
        "states": [
            {
                "re": np.real(s.entries if traj.open_system else s.amplitudes).tolist(),
                "im": np.imag(s.entries if traj.open_system else s.amplitudes).tolist(),
            }
            for s in traj.states
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
