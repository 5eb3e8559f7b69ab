# Compiled propagation kernel: banded real-symmetric Hamiltonian, Taylor
# evaluation of exp(-i H dt) applied to a state vector.  Mirrors pykernel.py;
# the band layout is fixed to the 9 offsets -4..4 of the combined index.

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF NOFF = 9
DEF TAYLOR_THETA = 8.0
DEF TAYLOR_TOL = 1e-16
DEF MAX_TERMS = 64


cdef inline void _apply_bands(double[:, ::1] bands, double complex* v,
                              double complex* out, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t i, j, off, start, end
    for i in range(dim):
        out[i] = 0
    for j in range(NOFF):
        off = j - 4
        start = -off if off < 0 else 0
        end = dim - off if off > 0 else dim
        for i in range(start, end):
            out[i] = out[i] + bands[j, i] * v[i + off]


cdef inline int _n_terms(double x) noexcept nogil:
    cdef double t = 1.0
    cdef int m = 0
    if x <= 0.0:
        return 1
    while t > TAYLOR_TOL and m < MAX_TERMS:
        m += 1
        t *= x / m
    return m if m >= 2 else 2


def propagate(object model, double[::1] stage_dt, double[::1] stage_g,
              double[:, ::1] stage_c, int[::1] record_after,
              cnp.ndarray psi0, int n_records):
    """Run the flat stage list; returns (final_state, recorded_states)."""
    cdef double[:, ::1] static = model.static
    cdef double[:, ::1] coupling = model.coupling
    cdef double[:, :, ::1] controls = model.controls
    cdef Py_ssize_t dim = static.shape[1]
    cdef Py_ssize_t n_ctrl = controls.shape[0]
    cdef Py_ssize_t n_stage = stage_dt.shape[0]

    cdef cnp.ndarray psi_arr = np.array(psi0, dtype=np.complex128)
    cdef cnp.ndarray records_arr = np.empty((n_records, dim), dtype=np.complex128)
    cdef double complex[::1] psi = psi_arr
    cdef double complex[:, ::1] records = records_arr

    cdef cnp.ndarray bands_arr = np.empty((NOFF, dim), dtype=np.float64)
    cdef double[:, ::1] bands = bands_arr
    cdef cnp.ndarray buf = np.empty((3, dim), dtype=np.complex128)
    cdef double complex[:, ::1] work = buf
    cdef double complex* out = &work[0, 0]
    cdef double complex* term = &work[1, 0]
    cdef double complex* tmp = &work[2, 0]
    cdef double complex* state = &psi[0]

    cdef Py_ssize_t m, i, j, c
    cdef int k, nterms, s, nsplit, idx
    cdef double g, coeff, dt, hnorm, rowsum, x
    cdef double complex z, zk

    with nogil:
        for m in range(n_stage):
            g = stage_g[m]
            dt = stage_dt[m]
            # assemble bands = static + g * coupling + sum_c coeff * controls
            for j in range(NOFF):
                for i in range(dim):
                    bands[j, i] = static[j, i] + g * coupling[j, i]
            for c in range(n_ctrl):
                coeff = stage_c[m, c]
                if coeff != 0.0:
                    for j in range(NOFF):
                        for i in range(dim):
                            bands[j, i] = bands[j, i] + coeff * controls[c, j, i]
            # infinity norm: max row sum of |entries|
            hnorm = 0.0
            for i in range(dim):
                rowsum = 0.0
                for j in range(NOFF):
                    rowsum += bands[j, i] if bands[j, i] >= 0 else -bands[j, i]
                if rowsum > hnorm:
                    hnorm = rowsum
            nsplit = <int>((hnorm * (dt if dt >= 0 else -dt)) / TAYLOR_THETA) + 1
            x = hnorm * (dt if dt >= 0 else -dt) / nsplit
            nterms = _n_terms(x)
            z = -1j * dt / nsplit
            for s in range(nsplit):
                for i in range(dim):
                    out[i] = state[i]
                    term[i] = state[i]
                for k in range(1, nterms + 1):
                    _apply_bands(bands, term, tmp, dim)
                    zk = z / k
                    for i in range(dim):
                        term[i] = zk * tmp[i]
                        out[i] = out[i] + term[i]
                for i in range(dim):
                    state[i] = out[i]
            idx = record_after[m]
            if idx >= 0:
                for i in range(dim):
                    records[idx, i] = state[i]

    return psi_arr, records_arr
