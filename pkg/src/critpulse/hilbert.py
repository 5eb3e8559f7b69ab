"""Truncated-Fock-space operators, model Hamiltonians and ground states.

Conventions used throughout the package:

* The composite space is cavity (x) qubit with basis index
  ``i = n * qubit_levels + s`` where ``n`` is the Fock level and ``s`` the
  qubit level (``s = 0`` is spin-down, the bare ground level).
* ``sigma_z = diag(-1, +1)`` in that ordering, so the decoupled ground
  state is ``|0>|down>`` with energy ``-Omega/2``.
* All operators are dense complex matrices; dimensions are checked on
  every binary operation through :class:`SpaceSpec`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, expm

from .errors import DimensionMismatch, DomainError, TruncationError

HERMITICITY_TOL = 1e-12
NORM_TOL = 1e-8


@dataclass(frozen=True)
class SpaceSpec:
    """Truncated cavity (x) qubit Hilbert space."""

    fock_cutoff: int
    qubit_levels: int = 2

    def __post_init__(self):
        if self.fock_cutoff < 2:
            raise DomainError(f"fock_cutoff must be >= 2, got {self.fock_cutoff}")
        if self.qubit_levels < 2:
            raise DomainError(f"qubit_levels must be >= 2, got {self.qubit_levels}")

    @property
    def total_dim(self) -> int:
        return self.fock_cutoff * self.qubit_levels


@dataclass(frozen=True)
class RabiParams:
    """Cavity frequency and qubit splitting, hbar = 1."""

    omega: float
    Omega: float

    def __post_init__(self):
        if self.omega <= 0 or self.Omega <= 0:
            raise DomainError("omega and Omega must be positive")

    @property
    def ratio_check(self) -> float:
        return self.Omega / self.omega


@dataclass(frozen=True)
class DickeParams:
    omega_p: float
    Omega_p: float
    n_spins: int

    def __post_init__(self):
        if self.omega_p <= 0 or self.Omega_p <= 0:
            raise DomainError("omega_p and Omega_p must be positive")
        if self.n_spins < 1:
            raise DomainError("n_spins must be >= 1")


@dataclass(frozen=True)
class OperatorMatrix:
    dim: int
    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        if self.entries.shape != (self.dim, self.dim):
            raise DimensionMismatch(
                f"entries shape {self.entries.shape} != ({self.dim}, {self.dim})"
            )
        if self.hermitian:
            dev = np.max(np.abs(self.entries - self.entries.conj().T))
            if dev >= HERMITICITY_TOL:
                raise DomainError(f"hermitian flag set but max|M - M^+| = {dev:.3e}")

    def expect(self, psi: "StateVector") -> complex:
        check_dims(self, psi)
        return complex(np.vdot(psi.amplitudes, self.entries @ psi.amplitudes))


@dataclass(frozen=True)
class StateVector:
    dim: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (self.dim,):
            raise DimensionMismatch(
                f"amplitude shape {self.amplitudes.shape} != ({self.dim},)"
            )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def assert_normalized(self):
        if abs(self.norm - 1.0) >= NORM_TOL:
            raise DomainError(f"state not normalized: |psi| = {self.norm!r}")


@dataclass(frozen=True)
class DensityMatrix:
    dim: int
    entries: np.ndarray
    # positivity check costs an eigendecomposition; skipped on the hot path
    check_positivity: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.entries.shape != (self.dim, self.dim):
            raise DimensionMismatch(
                f"entries shape {self.entries.shape} != ({self.dim}, {self.dim})"
            )
        tr = np.trace(self.entries)
        if abs(tr - 1.0) >= NORM_TOL:
            raise DomainError(f"Tr rho = {tr!r}, expected 1")
        herm = np.max(np.abs(self.entries - self.entries.conj().T))
        if herm >= 1e-10:
            raise DomainError(f"rho not Hermitian: max|rho - rho^+| = {herm:.3e}")
        if self.check_positivity:
            lo = float(np.linalg.eigvalsh(self.entries)[0])
            if lo <= -NORM_TOL:
                raise DomainError(f"rho not positive: lowest eigenvalue {lo:.3e}")


def check_dims(*objs) -> int:
    """Assert all arguments share one Hilbert-space dimension; return it."""
    dims = [o.total_dim if isinstance(o, SpaceSpec) else o.dim for o in objs]
    if len(set(dims)) > 1:
        raise DimensionMismatch(f"incompatible dimensions {dims}")
    return dims[0]


# ---------------------------------------------------------------------------
# primitive operators
# ---------------------------------------------------------------------------

def _cavity_destroy(nf: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, nf, dtype=float)), 1).astype(complex)


def _embed_cavity(m: np.ndarray, space: SpaceSpec) -> np.ndarray:
    return np.kron(m, np.eye(space.qubit_levels, dtype=complex))


def _embed_qubit(m: np.ndarray, space: SpaceSpec) -> np.ndarray:
    return np.kron(np.eye(space.fock_cutoff, dtype=complex), m)


def pauli(which: str) -> np.ndarray:
    """Pauli matrix in the (down, up) ordering used by this package."""
    if which == "z":
        return np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
    if which == "x":
        return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    if which == "y":
        return np.array([[0.0, 1j], [-1j, 0.0]], dtype=complex)
    if which == "minus":  # lowers up -> down
        return np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    raise DomainError(f"unknown Pauli label {which!r}")


def annihilation_op(space: SpaceSpec) -> OperatorMatrix:
    """Cavity annihilation operator on the full space."""
    a = _embed_cavity(_cavity_destroy(space.fock_cutoff), space)
    return OperatorMatrix(space.total_dim, a, hermitian=False)


def number_op(space: SpaceSpec) -> OperatorMatrix:
    n = np.diag(np.arange(space.fock_cutoff, dtype=float)).astype(complex)
    return OperatorMatrix(space.total_dim, _embed_cavity(n, space), hermitian=True)


def quadrature_op(space: SpaceSpec) -> OperatorMatrix:
    """(a + a^+) on the full space."""
    a = _cavity_destroy(space.fock_cutoff)
    return OperatorMatrix(space.total_dim, _embed_cavity(a + a.conj().T, space), hermitian=True)


def quadrature_sq_op(space: SpaceSpec) -> OperatorMatrix:
    """(a + a^+)^2 on the full space."""
    a = _cavity_destroy(space.fock_cutoff)
    x = a + a.conj().T
    return OperatorMatrix(space.total_dim, _embed_cavity(x @ x, space), hermitian=True)


def qubit_op(which: str, space: SpaceSpec) -> OperatorMatrix:
    if space.qubit_levels != 2:
        raise DimensionMismatch("qubit operators need qubit_levels = 2")
    m = pauli(which)
    herm = which in ("z", "x", "y")
    return OperatorMatrix(space.total_dim, _embed_qubit(m, space), hermitian=herm)


# ---------------------------------------------------------------------------
# model Hamiltonians
# ---------------------------------------------------------------------------

def rabi_hamiltonian(params: RabiParams, g: float, space: SpaceSpec) -> OperatorMatrix:
    """H = omega a^+a + (Omega/2) sigma_z + (g sqrt(omega Omega)/2)(a + a^+) sigma_x."""
    if g < 0:
        raise DomainError(f"coupling g must be >= 0, got {g}")
    nf = space.fock_cutoff
    if space.qubit_levels != 2:
        raise DimensionMismatch("Rabi model needs qubit_levels = 2")
    a = _cavity_destroy(nf)
    x = a + a.conj().T
    h = (
        params.omega * _embed_cavity((a.conj().T @ a).real.astype(complex), space)
        + 0.5 * params.Omega * _embed_qubit(pauli("z"), space)
        + 0.5 * g * math.sqrt(params.omega * params.Omega)
        * np.kron(x, pauli("x"))
    )
    return OperatorMatrix(space.total_dim, h, hermitian=True)


def collective_spin(n_spins: int) -> tuple[np.ndarray, np.ndarray]:
    """(J_z, J_x) for a spin-N/2 collective algebra, dimension N+1."""
    j = n_spins / 2.0
    m = np.arange(-j, j + 1)
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1))
    jp = np.diag(np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1)), -1).astype(complex)
    jx = 0.5 * (jp + jp.conj().T)
    return jz, jx


def dicke_hamiltonian(params: DickeParams, g: float, space: SpaceSpec) -> OperatorMatrix:
    """Collective-spin generalization with 1/sqrt(N) coupling normalization.

    H = omega' a^+a + Omega' J_z + (g sqrt(omega' Omega')/sqrt(N)) (a + a^+) J_x.
    Reduces to the two-level Hamiltonian at N = 1 (J = sigma/2).
    """
    if g < 0:
        raise DomainError(f"coupling g must be >= 0, got {g}")
    if space.qubit_levels != params.n_spins + 1:
        raise DimensionMismatch(
            f"space has qubit_levels {space.qubit_levels}, spin-N/2 needs {params.n_spins + 1}"
        )
    jz, jx = collective_spin(params.n_spins)
    a = _cavity_destroy(space.fock_cutoff)
    x = a + a.conj().T
    h = (
        params.omega_p * _embed_cavity((a.conj().T @ a).real.astype(complex), space)
        + params.Omega_p * _embed_qubit(jz, space)
        + g * math.sqrt(params.omega_p * params.Omega_p) / math.sqrt(params.n_spins)
        * np.kron(x, jx)
    )
    return OperatorMatrix(space.total_dim, h, hermitian=True)


# ---------------------------------------------------------------------------
# ground states
# ---------------------------------------------------------------------------

def squeeze_parameter(g: float) -> float:
    """r(g) = -ln(1 - g^2)/4, the thermodynamic-limit squeezing of the ground state."""
    if not 0 <= g < 1:
        raise DomainError(f"g must be in [0, 1), got {g}")
    return -0.25 * math.log(1.0 - g * g)


def squeezed_vacuum_tail(r: float, nf: int) -> float:
    """Population of S(r)|0> beyond the first nf Fock levels (closed form)."""
    th2 = math.tanh(abs(r)) ** 2
    total = 0.0
    logc = -0.5 * math.log(math.cosh(r))
    for m in range(nf // 2 + 1):
        # log |c_2m|^2 = 2m log tanh r + log((2m)!) - 2m log 2 - 2 log(m!) - log cosh r
        lg = (
            m * math.log(th2 + 1e-300)
            + math.lgamma(2 * m + 1)
            - 2 * m * math.log(2.0)
            - 2 * math.lgamma(m + 1)
            + 2 * logc
        )
        total += math.exp(lg)
    return max(0.0, 1.0 - total)


def squeeze_operator(r: float, space: SpaceSpec, tail_tol: float = 1e-8) -> OperatorMatrix:
    """S(r) = exp[r/2 (a^+^2 - a^2)] on the full space (dense matrix exponential).

    Raises :class:`TruncationError` when the squeezed vacuum would leak more
    than ``tail_tol`` past the cutoff, suggesting an adequate one.
    """
    nf = space.fock_cutoff
    tail = squeezed_vacuum_tail(r, nf)
    if tail > tail_tol:
        need = nf
        while need < 1_000_000 and squeezed_vacuum_tail(r, need) > tail_tol:
            need *= 2
        raise TruncationError(
            f"squeeze r={r}: tail population {tail:.2e} beyond cutoff {nf}; "
            f"use fock_cutoff >= {need}"
        )
    a = _cavity_destroy(nf)
    gen = 0.5 * r * (a.conj().T @ a.conj().T - a @ a)
    s = expm(gen)
    return OperatorMatrix(space.total_dim, _embed_cavity(s, space), hermitian=False)


def squeezed_vacuum_amplitudes(r: float, nf: int) -> np.ndarray:
    """Fock amplitudes of S(r)|0>: c_2m = (tanh r)^m sqrt((2m)!)/(2^m m!) / sqrt(cosh r).

    Evaluated in log space so it stays finite for large cutoffs.
    """
    c = np.zeros(nf)
    t = math.tanh(r)
    sgn = 1.0
    for m in range(0, (nf + 1) // 2):
        lg = (
            m * math.log(abs(t) + 1e-300)
            + 0.5 * math.lgamma(2 * m + 1)
            - m * math.log(2.0)
            - math.lgamma(m + 1)
            - 0.5 * math.log(math.cosh(r))
        )
        c[2 * m] = sgn * math.exp(lg)
        if t < 0:
            sgn = -sgn
    return c


def analytic_ground_state(g: float, space: SpaceSpec) -> StateVector:
    """S[r(g)]|0>|down>, the omega/Omega -> 0 ground state for g < 1."""
    if not 0 <= g < 1:
        raise DomainError(f"analytic ground state needs 0 <= g < 1, got {g}")
    if space.qubit_levels != 2:
        raise DimensionMismatch("analytic ground state needs qubit_levels = 2")
    r = squeeze_parameter(g)
    cav = squeezed_vacuum_amplitudes(r, space.fock_cutoff)
    cav = cav / np.linalg.norm(cav)  # renormalize away the truncated tail
    amps = np.zeros(space.total_dim, dtype=complex)
    amps[0::2] = cav  # qubit index 0 = down
    return StateVector(space.total_dim, amps)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """First amplitude above threshold made real-positive (deterministic phase)."""
    idx = np.argmax(np.abs(v) > 1e-10 * np.abs(v).max())
    return v * np.exp(-1j * np.angle(v[idx]))


def ground_state_numeric(H: OperatorMatrix) -> tuple[float, StateVector]:
    """Lowest eigenpair of a Hermitian operator by dense diagonalization."""
    if not H.hermitian:
        raise DomainError("ground_state_numeric requires a hermitian-flagged operator")
    w, v = eigh(H.entries)
    psi = _fix_phase(v[:, 0].astype(complex))
    psi = psi / np.linalg.norm(psi)
    res = float(np.linalg.norm(H.entries @ psi - w[0] * psi))
    scale = max(1.0, float(np.abs(w).max()))
    if res >= 1e-8 * scale:
        raise DomainError(f"eigensolver residual {res:.3e} too large")
    return float(w[0]), StateVector(H.dim, psi)


def spectrum(
    params: RabiParams, g_grid: np.ndarray, m: int, space: SpaceSpec
) -> np.ndarray:
    """Lowest m excitation energies (E_n - E_0) for each coupling on the grid.

    Rows follow g_grid; column 0 is identically zero.
    """
    if m > space.total_dim:
        raise DomainError(f"m = {m} exceeds total_dim = {space.total_dim}")
    out = np.empty((len(g_grid), m))
    for i, g in enumerate(np.asarray(g_grid, dtype=float)):
        w = np.linalg.eigvalsh(rabi_hamiltonian(params, abs(g), space).entries)
        out[i] = w[:m] - w[0]
    return out


def fidelity_amplitude(psi: StateVector, phi: StateVector) -> float:
    """|<psi|phi>|, phase invariant."""
    check_dims(psi, phi)
    return float(abs(np.vdot(psi.amplitudes, phi.amplitudes)))


def adaptive_fock_cutoff(
    params: RabiParams,
    g_max: float,
    start: int | None = None,
    fid_tol: float = 1e-6,
    max_cutoff: int = 4096,
) -> int:
    """Smallest cutoff (by doubling) whose ground state is truncation-converged.

    Starts at max(30, 10 e^{2 r(g_eff)}) with g_eff capped just below 1 (the
    thermodynamic-limit r diverges at g = 1 while any finite-ratio ground
    state stays normalizable), then doubles until both the ground energy and
    the ground-state fidelity move by less than fid_tol.
    """
    g_eff = min(g_max, 0.99)
    if start is None:
        start = max(30, math.ceil(10.0 * math.exp(2.0 * squeeze_parameter(g_eff))))
    nf = start
    e_prev, psi_prev = ground_state_numeric(
        rabi_hamiltonian(params, g_max, SpaceSpec(nf))
    )
    while nf < max_cutoff:
        nf2 = 2 * nf
        e_next, psi_next = ground_state_numeric(
            rabi_hamiltonian(params, g_max, SpaceSpec(nf2))
        )
        pad = np.zeros(psi_next.dim, dtype=complex)
        pad[: psi_prev.dim] = psi_prev.amplitudes
        fid = abs(np.vdot(pad, psi_next.amplitudes))
        if abs(e_next - e_prev) < fid_tol * max(1.0, abs(e_prev)) and 1 - fid < fid_tol:
            return nf
        nf, e_prev, psi_prev = nf2, e_next, psi_next
    raise TruncationError(f"no converged cutoff below {max_cutoff}")
