"""Diagonal-band (DIA) storage for the Hamiltonian terms.

Every operator entering the total Hamiltonian -- the static part, the
coupling term and the five drive operators -- is real symmetric and banded
in the combined index i = 2n + s (qubit fastest): photon shifts of +-1/+-2
and qubit flips land on the offsets -4..4.  A time-dependent Hamiltonian is
then just a per-substep linear combination of a handful of (9, dim) float
arrays, which is what both propagation backends consume.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError

OFFSETS = tuple(range(-4, 5))
N_OFFSETS = len(OFFSETS)


def bands_from_dense(mat: np.ndarray) -> np.ndarray:
    """Extract the 9 central diagonals; rejects entries outside the band."""
    dim = mat.shape[0]
    if np.max(np.abs(mat.imag)) > 1e-14 * max(1.0, np.max(np.abs(mat.real))):
        raise DomainError("banded engine expects real-valued operator matrices")
    m = mat.real
    bands = np.zeros((N_OFFSETS, dim))
    for j, off in enumerate(OFFSETS):
        d = np.diagonal(m, offset=off)
        if off >= 0:
            bands[j, : dim - off] = d
        else:
            bands[j, -off:] = d
    # verify nothing lives beyond the stored band
    rebuilt = dense_from_bands(bands)
    if not np.allclose(rebuilt, m, rtol=0.0, atol=1e-13 * max(1.0, np.abs(m).max())):
        raise DomainError("operator has entries outside the +-4 band")
    return bands


def dense_from_bands(bands: np.ndarray) -> np.ndarray:
    dim = bands.shape[1]
    m = np.zeros((dim, dim))
    for j, off in enumerate(OFFSETS):
        if off >= 0:
            m += np.diag(bands[j, : dim - off], k=off)
        else:
            m += np.diag(bands[j, -off:], k=off)
    return m


def apply_bands(bands: np.ndarray, v: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
    """out[i] = sum_o bands[o][i] * v[i + o] (matrix-vector with DIA storage)."""
    dim = bands.shape[1]
    if out is None:
        out = np.zeros_like(v)
    else:
        out[:] = 0
    for j, off in enumerate(OFFSETS):
        if off >= 0:
            out[: dim - off] += bands[j, : dim - off] * v[off:]
        else:
            out[-off:] += bands[j, -off:] * v[:off]
    return out


def banded_model(params, space, kinds) -> "BandedModel":
    """Precompute band storage for the Rabi model plus the given drive kinds."""
    from .. import hilbert
    from ..schedule import ControlKind

    if space.qubit_levels != 2:
        raise DomainError("banded engine supports the two-level (Rabi) model only")
    dim = space.total_dim
    h_static = hilbert.rabi_hamiltonian(params, 0.0, space).entries
    h_g = hilbert.rabi_hamiltonian(params, 1.0, space).entries - h_static

    builders = {
        ControlKind.DISPLACEMENT: hilbert.quadrature_op,
        ControlKind.QUADRATURE_SQ: hilbert.quadrature_sq_op,
        ControlKind.PHOTON_NUMBER: hilbert.number_op,
        ControlKind.QUBIT_Z: lambda s: hilbert.qubit_op("z", s),
        ControlKind.QUBIT_X: lambda s: hilbert.qubit_op("x", s),
    }
    ctrl = np.zeros((len(kinds), N_OFFSETS, dim))
    for i, kind in enumerate(kinds):
        ctrl[i] = bands_from_dense(builders[kind](space).entries)
    return BandedModel(
        dim=dim,
        static=bands_from_dense(h_static),
        coupling=bands_from_dense(h_g),
        controls=ctrl,
        kinds=tuple(kinds),
    )


class BandedModel:
    """Band storage for H(t) = static + g(t) * coupling + sum_i c_i(t) * controls[i]."""

    def __init__(self, dim, static, coupling, controls, kinds):
        self.dim = dim
        self.static = static
        self.coupling = coupling
        self.controls = controls
        self.kinds = kinds

    def assemble(self, g: float, coeffs: np.ndarray) -> np.ndarray:
        bands = self.static + g * self.coupling
        for i in range(self.controls.shape[0]):
            if coeffs[i] != 0.0:
                bands += coeffs[i] * self.controls[i]
        return bands

    def dense(self, g: float, coeffs: np.ndarray) -> np.ndarray:
        return dense_from_bands(self.assemble(g, coeffs))
