# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""OpenMP driver for the compiled Monte Carlo path kernel.

All numerics live in _mc_core.h; this module fans paths out over
threads.  Results are deterministic in (seed, path index) regardless of
the thread count because every path owns its Philox streams.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef extern from "_mc_core.h" nogil:
    ctypedef struct rf_zig:
        const double *x
        const double *ratio
        const double *f
        double r
    double rf_run_path(
        uint64_t seed, uint64_t path_index,
        double x0, double a, double b,
        double dt, int64_t n_steps,
        double drift_below, double drift_mid, double drift_above,
        double rate_below, double rate_above,
        double sig_sqdt, double fstep, double rho, double kappa,
        int m, const double *alpha_cum, const double *rates, const double *trans_cum,
        const rf_zig *zig, int64_t *ruin_step)
    void rf_run_path_multi(
        uint64_t seed, uint64_t path_index, int n_cells,
        const double *x0, const double *a, const double *b,
        double dt, int64_t n_steps,
        double drift_below, double drift_mid, double drift_above,
        double rate_below, double rate_above,
        double sig_sqdt, double fstep, double rho, double kappa,
        int m, const double *alpha_cum, const double *rates, const double *trans_cum,
        const rf_zig *zig, double *pay_out, int64_t *ruin_out)

KERNEL_KIND = "compiled"


def run_paths(
    uint64_t seed,
    int64_t n_paths,
    double x0, double a, double b,
    double dt, int64_t n_steps,
    double drift_below, double drift_mid, double drift_above,
    double rate_below, double rate_above,
    double sig_sqdt, double fstep, double rho, double kappa,
    cnp.ndarray[cnp.float64_t, ndim=1] alpha_cum,
    cnp.ndarray[cnp.float64_t, ndim=1] rates,
    cnp.ndarray[cnp.float64_t, ndim=2] trans_cum,
    cnp.ndarray[cnp.float64_t, ndim=1] zig_x,
    cnp.ndarray[cnp.float64_t, ndim=1] zig_ratio,
    cnp.ndarray[cnp.float64_t, ndim=1] zig_f,
    double zig_r,
    int num_threads,
):
    """Simulate n_paths paths; returns (payoff, ruin_step) arrays."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] payoff = np.empty(n_paths, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ruin = np.empty(n_paths, dtype=np.int64)
    cdef double[::1] pay_v = payoff
    cdef int64_t[::1] ruin_v = ruin
    cdef const double[::1] ac = np.ascontiguousarray(alpha_cum)
    cdef const double[::1] rt = np.ascontiguousarray(rates)
    cdef const double[:, ::1] tc = np.ascontiguousarray(trans_cum)
    cdef const double[::1] zx = np.ascontiguousarray(zig_x)
    cdef const double[::1] zr = np.ascontiguousarray(zig_ratio)
    cdef const double[::1] zf = np.ascontiguousarray(zig_f)
    cdef int m = <int>ac.shape[0]
    cdef rf_zig zig
    cdef int64_t p
    zig.x = &zx[0]
    zig.ratio = &zr[0]
    zig.f = &zf[0]
    zig.r = zig_r

    if num_threads <= 1:
        for p in range(n_paths):
            pay_v[p] = rf_run_path(
                seed, <uint64_t>p, x0, a, b, dt, n_steps,
                drift_below, drift_mid, drift_above, rate_below, rate_above,
                sig_sqdt, fstep, rho, kappa,
                m, &ac[0], &rt[0], &tc[0, 0], &zig, &ruin_v[p])
    else:
        for p in prange(n_paths, nogil=True, schedule="dynamic", chunksize=512,
                        num_threads=num_threads):
            pay_v[p] = rf_run_path(
                seed, <uint64_t>p, x0, a, b, dt, n_steps,
                drift_below, drift_mid, drift_above, rate_below, rate_above,
                sig_sqdt, fstep, rho, kappa,
                m, &ac[0], &rt[0], &tc[0, 0], &zig, &ruin_v[p])
    return payoff, ruin


def run_paths_multi(
    uint64_t seed,
    int64_t n_paths,
    cnp.ndarray[cnp.float64_t, ndim=1] x0,
    cnp.ndarray[cnp.float64_t, ndim=1] a,
    cnp.ndarray[cnp.float64_t, ndim=1] b,
    double dt, int64_t n_steps,
    double drift_below, double drift_mid, double drift_above,
    double rate_below, double rate_above,
    double sig_sqdt, double fstep, double rho, double kappa,
    cnp.ndarray[cnp.float64_t, ndim=1] alpha_cum,
    cnp.ndarray[cnp.float64_t, ndim=1] rates,
    cnp.ndarray[cnp.float64_t, ndim=2] trans_cum,
    cnp.ndarray[cnp.float64_t, ndim=1] zig_x,
    cnp.ndarray[cnp.float64_t, ndim=1] zig_ratio,
    cnp.ndarray[cnp.float64_t, ndim=1] zig_f,
    double zig_r,
    int num_threads,
):
    """Coupled cells under common random numbers; (n_cells, n_paths) outputs."""
    cdef int n_cells = <int>x0.shape[0]
    if n_cells > 16:
        raise ValueError("at most 16 coupled cells")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] payoff = np.empty((n_paths, n_cells), dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] ruin = np.empty((n_paths, n_cells), dtype=np.int64)
    cdef double[:, ::1] pay_v = payoff
    cdef int64_t[:, ::1] ruin_v = ruin
    cdef const double[::1] x0v = np.ascontiguousarray(x0)
    cdef const double[::1] av = np.ascontiguousarray(a)
    cdef const double[::1] bv = np.ascontiguousarray(b)
    cdef const double[::1] ac = np.ascontiguousarray(alpha_cum)
    cdef const double[::1] rt = np.ascontiguousarray(rates)
    cdef const double[:, ::1] tc = np.ascontiguousarray(trans_cum)
    cdef const double[::1] zx = np.ascontiguousarray(zig_x)
    cdef const double[::1] zr = np.ascontiguousarray(zig_ratio)
    cdef const double[::1] zf = np.ascontiguousarray(zig_f)
    cdef int m = <int>ac.shape[0]
    cdef rf_zig zig
    cdef int64_t p
    zig.x = &zx[0]
    zig.ratio = &zr[0]
    zig.f = &zf[0]
    zig.r = zig_r

    if num_threads <= 1:
        for p in range(n_paths):
            rf_run_path_multi(
                seed, <uint64_t>p, n_cells, &x0v[0], &av[0], &bv[0], dt, n_steps,
                drift_below, drift_mid, drift_above, rate_below, rate_above,
                sig_sqdt, fstep, rho, kappa,
                m, &ac[0], &rt[0], &tc[0, 0], &zig, &pay_v[p, 0], &ruin_v[p, 0])
    else:
        for p in prange(n_paths, nogil=True, schedule="dynamic", chunksize=256,
                        num_threads=num_threads):
            rf_run_path_multi(
                seed, <uint64_t>p, n_cells, &x0v[0], &av[0], &bv[0], dt, n_steps,
                drift_below, drift_mid, drift_above, rate_below, rate_above,
                sig_sqdt, fstep, rho, kappa,
                m, &ac[0], &rt[0], &tc[0, 0], &zig, &pay_v[p, 0], &ruin_v[p, 0])
    return payoff.T.copy(), ruin.T.copy()
