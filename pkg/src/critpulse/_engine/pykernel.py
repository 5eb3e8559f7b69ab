"""Pure-numpy propagation kernel (fallback backend).

Semantically identical to the compiled kernel: per stage it assembles the
banded Hamiltonian, bounds its infinity norm, splits the exponential into
exact factors when ||H dt|| exceeds the Taylor threshold and applies a
truncated Taylor series of exp(-i H dt) to the state.  Kept deliberately
close to the Cython source so the two can be cross-checked term by term.
"""

from __future__ import annotations

import math

import numpy as np

from .bands import N_OFFSETS, apply_bands

TAYLOR_THETA = 8.0
TAYLOR_TOL = 1e-16
MAX_TERMS = 64


def _n_terms(x: float) -> int:
    """Smallest m with x^m / m! below the series tolerance."""
    if x <= 0.0:
        return 1
    t, m = 1.0, 0
    while t > TAYLOR_TOL and m < MAX_TERMS:
        m += 1
        t *= x / m
    return max(m, 2)


def expmv_taylor(bands: np.ndarray, psi: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) psi for banded real-symmetric H."""
    hnorm = float(np.abs(bands).sum(axis=0).max())
    nsplit = int(hnorm * abs(dt) / TAYLOR_THETA) + 1
    x = hnorm * abs(dt) / nsplit
    m = _n_terms(x)
    z = -1j * dt / nsplit
    tmp = np.empty_like(psi)
    for _ in range(nsplit):
        out = psi.copy()
        term = psi
        for k in range(1, m + 1):
            apply_bands(bands, term, out=tmp)
            term = (z / k) * tmp
            out = out + term
        psi = out
    return psi


def propagate(model, stage_dt, stage_g, stage_c, record_after, psi0, n_records):
    """Run the flat stage list; returns (final_state, recorded_states)."""
    psi = np.array(psi0, dtype=complex)
    records = np.empty((n_records, model.dim), dtype=complex)
    for m in range(len(stage_dt)):
        bands = model.assemble(stage_g[m], stage_c[m])
        psi = expmv_taylor(bands, psi, stage_dt[m])
        idx = record_after[m]
        if idx >= 0:
            records[idx] = psi
    return psi, records
