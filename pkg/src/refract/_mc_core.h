/* Hot Monte Carlo kernels: Philox4x64-10 streams, ziggurat normals and
 * the Euler path loop for the two-threshold strategy.
 *
 * This file mirrors, statement for statement, the pure-Python engine in
 * _mc_fallback.py; fixed seeds must give bit-identical results across
 * the two (build with -ffp-contract=off so no FMA contraction sneaks
 * in).
 */
#ifndef REFRACT_MC_CORE_H
#define REFRACT_MC_CORE_H

#include <math.h>
#include <stdint.h>

#define RF_PHILOX_M0 0xD2E7470EE14C6C93ULL
#define RF_PHILOX_M1 0xCA5A826395121157ULL
#define RF_PHILOX_W0 0x9E3779B97F4A7C15ULL
#define RF_PHILOX_W1 0xBB67AE8584CAA73BULL

typedef struct {
    uint64_t key0, key1;
    uint64_t counter;
    uint64_t buf[4];
    uint64_t bufnext[4];
    int pos;
    int have_next;
} rf_stream;

static inline void rf_mulhilo(uint64_t a, uint64_t b, uint64_t *hi, uint64_t *lo)
{
    __uint128_t p = (__uint128_t)a * b;
    *hi = (uint64_t)(p >> 64);
    *lo = (uint64_t)p;
}

/* One Philox4x64-10 block at the stream's counter.  The 10-round
 * multiply chain is latency-bound, so callers in hot loops issue
 * rf_prefetch early and let out-of-order execution hide it.
 */
static inline void rf_block_into(rf_stream *st, uint64_t *out)
{
    uint64_t c0 = st->counter, c1 = 0, c2 = 0, c3 = 0;
    uint64_t k0 = st->key0, k1 = st->key1;
    int r;
    for (r = 0; r < 10; r++) {
        uint64_t hi0, lo0, hi1, lo1, n0, n1, n2, n3;
        rf_mulhilo(RF_PHILOX_M0, c0, &hi0, &lo0);
        rf_mulhilo(RF_PHILOX_M1, c2, &hi1, &lo1);
        n0 = hi1 ^ c1 ^ k0;
        n1 = lo1;
        n2 = hi0 ^ c3 ^ k1;
        n3 = lo0;
        c0 = n0; c1 = n1; c2 = n2; c3 = n3;
        k0 += RF_PHILOX_W0;
        k1 += RF_PHILOX_W1;
    }
    out[0] = c0; out[1] = c1; out[2] = c2; out[3] = c3;
    st->counter += 1;
}

static inline void rf_init(rf_stream *st, uint64_t key0, uint64_t key1)
{
    st->key0 = key0;
    st->key1 = key1;
    st->counter = 0;
    st->pos = 4;
    st->have_next = 0;
}

static inline void rf_prefetch(rf_stream *st)
{
    if (!st->have_next) {
        rf_block_into(st, st->bufnext);
        st->have_next = 1;
    }
}

static inline uint64_t rf_next(rf_stream *st)
{
    if (st->pos == 4) {
        if (st->have_next) {
            st->buf[0] = st->bufnext[0];
            st->buf[1] = st->bufnext[1];
            st->buf[2] = st->bufnext[2];
            st->buf[3] = st->bufnext[3];
            st->have_next = 0;
        } else {
            rf_block_into(st, st->buf);
        }
        st->pos = 0;
    }
    return st->buf[st->pos++];
}

static inline double rf_uniform(rf_stream *st)
{
    return (rf_next(st) >> 11) * 0x1.0p-53;
}

static inline double rf_exponential(rf_stream *st)
{
    return -log1p(-rf_uniform(st));
}

/* 256-layer ziggurat; tables built by _mc_protocol.py and passed in. */
typedef struct {
    const double *x;      /* 257 entries */
    const double *ratio;  /* 256 entries */
    const double *f;      /* 257 entries */
    double r;
} rf_zig;

static inline double rf_normal(rf_stream *st, const rf_zig *z)
{
    for (;;) {
        uint64_t u = rf_next(st);
        int i = (int)(u & 0xFF);
        /* branchless sign: the 50/50 branch would mispredict every
         * other draw; multiplying by exactly +-1.0 gives the same bits */
        double sgn = 1.0 - 2.0 * (double)((u >> 8) & 1);
        double big_u = (u >> 11) * 0x1.0p-53;
        double x = big_u * z->x[i];
        if (big_u < z->ratio[i])
            return sgn * x;
        if (i == 0) {
            for (;;) {
                double xx = -log1p(-rf_uniform(st)) / z->r;
                double yy = -log1p(-rf_uniform(st));
                if (yy + yy > xx * xx)
                    return sgn * (z->r + xx);
            }
        } else {
            if (z->f[i] + rf_uniform(st) * (z->f[i + 1] - z->f[i]) < exp(-0.5 * x * x))
                return sgn * x;
        }
    }
}

/* Phase-type absorption time; tables per _mc_protocol.phase_type_tables. */
static inline double rf_phase_type(rf_stream *st, int m, const double *alpha_cum,
                                   const double *rates, const double *trans_cum)
{
    double u = rf_uniform(st);
    int state = -1, i, j;
    double total = 0.0;
    for (i = 0; i < m; i++) {
        if (u < alpha_cum[i]) { state = i; break; }
    }
    if (state < 0) return 0.0;
    for (;;) {
        int nxt = -1;
        total += rf_exponential(st) / rates[state];
        u = rf_uniform(st);
        for (j = 0; j < m; j++) {
            if (u < trans_cum[state * m + j]) { nxt = j; break; }
        }
        if (nxt < 0) return total;
        state = nxt;
    }
}

/* One controlled-surplus path.  Returns the discounted payoff; stores the
 * ruin step (1-based, 0 if no ruin before n_steps) in *ruin_step.
 *
 * Per step, with the region taken at the start of the step:
 *   pay += disc * rate_dt[region]
 *   V   += drift_dt[region];  V += sig_sqdt * N
 *   apply jumps with arrival time in ((i)dt, (i+1)dt]
 *   disc *= fstep
 *   ruin when V < 0, paying rho discounted at the step's end.
 */
static inline double rf_run_path(
    uint64_t seed, uint64_t path_index,
    double x0, double a, double b,
    double dt, int64_t n_steps,
    double drift_below, double drift_mid, double drift_above,
    double rate_below, double rate_above,
    double sig_sqdt, double fstep, double rho, double kappa,
    int m, const double *alpha_cum, const double *rates, const double *trans_cum,
    const rf_zig *zig, int64_t *ruin_step)
{
    rf_stream sd, sj;
    double V = x0, disc = 1.0, pay = 0.0;
    double tnext;
    int64_t i;
    rf_init(&sd, seed, 2 * path_index);
    rf_init(&sj, seed, 2 * path_index + 1);
    tnext = (kappa > 0.0) ? rf_exponential(&sj) / kappa : INFINITY;
    *ruin_step = 0;
    for (i = 0; i < n_steps; i++) {
        double N = rf_normal(&sd, zig);
        double t1;
        /* Region selection is branchless: the controlled surplus hovers
         * around b, so the comparisons flip too often to predict.  The
         * selects multiply by exactly 1.0/0.0 and add exactly 0.0, which
         * keeps the results bit-identical to the branchy Python twin. */
        double above = (double)(V >= b);
        double below = (double)(V < a);
        double mid = (1.0 - above) - below;
        pay += disc * (above * rate_above + below * rate_below);
        V += above * drift_above + below * drift_below + mid * drift_mid;
        V += sig_sqdt * N;
        t1 = (double)(i + 1) * dt;
        while (tnext <= t1) {
            V += rf_phase_type(&sj, m, alpha_cum, rates, trans_cum);
            tnext += rf_exponential(&sj) / kappa;
        }
        disc *= fstep;
        if (V < 0.0) {
            pay += disc * rho;
            *ruin_step = i + 1;
            break;
        }
    }
    return pay;
}

/* Several strategy cells (x0, a, b) advanced off one shared increment
 * stream per path index (common random numbers).  Because every cell
 * consumes the i-th diffusion increment at its i-th step and jump draws
 * in arrival order, each cell's payoff is bit-identical to a standalone
 * rf_run_path with the same seed and path index; sharing the stream
 * just avoids regenerating it per cell.
 */
static inline void rf_run_path_multi(
    uint64_t seed, uint64_t path_index, int n_cells,
    const double *x0, const double *a, const double *b,
    double dt, int64_t n_steps,
    double drift_below, double drift_mid, double drift_above,
    double rate_below, double rate_above,
    double sig_sqdt, double fstep, double rho, double kappa,
    int m, const double *alpha_cum, const double *rates, const double *trans_cum,
    const rf_zig *zig, double *pay_out, int64_t *ruin_out)
{
    rf_stream sd, sj;
    double V[16], pay[16], aa[16], bb[16];
    int act[16];
    int n_alive = n_cells, c, ci;
    double tnext, disc = 1.0;
    int64_t i;
    rf_init(&sd, seed, 2 * path_index);
    rf_init(&sj, seed, 2 * path_index + 1);
    tnext = (kappa > 0.0) ? rf_exponential(&sj) / kappa : INFINITY;
    for (c = 0; c < n_cells; c++) {
        V[c] = x0[c];
        pay[c] = 0.0;
        aa[c] = a[c];
        bb[c] = b[c];
        act[c] = c;
        ruin_out[c] = 0;
    }
    /* act[0..n_alive) holds the live cells, compacted on death so dead
     * cells cost nothing; cells are independent, so the update order
     * does not change any cell's arithmetic. */
    for (i = 0; i < n_steps && n_alive > 0; i++) {
        double N = rf_normal(&sd, zig);
        double t1 = (double)(i + 1) * dt;
        for (ci = 0; ci < n_alive; ci++) {
            double above, below, mid;
            c = act[ci];
            above = (double)(V[c] >= bb[c]);
            below = (double)(V[c] < aa[c]);
            mid = (1.0 - above) - below;
            pay[c] += disc * (above * rate_above + below * rate_below);
            V[c] += above * drift_above + below * drift_below + mid * drift_mid;
            V[c] += sig_sqdt * N;
        }
        /* jumps applied one by one so each cell sees the same addition
         * sequence as a standalone path */
        while (tnext <= t1) {
            double jz = rf_phase_type(&sj, m, alpha_cum, rates, trans_cum);
            for (ci = 0; ci < n_alive; ci++) V[act[ci]] += jz;
            tnext += rf_exponential(&sj) / kappa;
        }
        disc *= fstep;
        for (ci = 0; ci < n_alive; ci++) {
            c = act[ci];
            if (V[c] < 0.0) {
                pay[c] += disc * rho;
                ruin_out[c] = i + 1;
                n_alive--;
                act[ci] = act[n_alive];
                ci--;
            }
        }
    }
    for (c = 0; c < n_cells; c++) pay_out[c] = pay[c];
}

#endif /* REFRACT_MC_CORE_H */
