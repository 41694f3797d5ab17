# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
# distutils: language = c++
"""Compiled simulation kernels.

Mirror of ``ballrec._kernel.pure``: identical RNG stream, identical draw
order, identical floating-point expression order, so results are
bit-identical to the pure backend. Keep the two files in sync.
"""

import numpy as np

from libc.math cimport INFINITY, log, pow, sqrt
from libcpp.algorithm cimport sort
from libcpp.vector cimport vector

from ..errors import AllBinsEmpty, EmptyBuffer

cdef unsigned long long GOLDEN = <unsigned long long>0x9E3779B97F4B7C15
cdef double TO_DOUBLE = 1.0 / 9007199254740992.0  # 2^-53

cdef int FULLEST_BIN = 0
cdef int GOLDEN_GATE = 1
cdef int RANDOM_BALL = 2
cdef int LEAST_FULL = 3
cdef int AGGRESSIVE_EMPTY = 4


cdef inline unsigned long long mix64(unsigned long long z) noexcept nogil:
    z = (z ^ (z >> 30)) * (<unsigned long long>0xBF58476D1CE4E5B9)
    z = (z ^ (z >> 27)) * (<unsigned long long>0x94D049BB133111EB)
    return z ^ (z >> 31)


cdef inline double next_double(unsigned long long* state) noexcept nogil:
    state[0] = state[0] + GOLDEN
    return <double>(mix64(state[0]) >> 11) * TO_DOUBLE


cdef inline Py_ssize_t bisect_right_d(const double* a, Py_ssize_t n, double u) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if u < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def throw_balls(long long k, double[::1] cdf, unsigned long long state,
                long long[::1] out):
    """Add k categorical draws to ``out``; returns the advanced RNG state."""
    cdef Py_ssize_t n = cdf.shape[0]
    cdef long long i
    cdef double u
    with nogil:
        for i in range(k):
            u = next_double(&state)
            out[bisect_right_d(&cdf[0], n, u)] += 1
    return state


cdef inline Py_ssize_t pick_bin(int code, long long* c, Py_ssize_t n,
                                long long m, const unsigned char* mask,
                                const double* w, int* cursor,
                                unsigned long long* state) noexcept nogil:
    cdef Py_ssize_t i, j, best = -1
    cdef long long best_c = 0, acc = 0
    cdef unsigned long long r
    if code == FULLEST_BIN:
        for i in range(n):
            if c[i] > best_c:
                best = i
                best_c = c[i]
        return best
    if code == LEAST_FULL:
        for i in range(n):
            if c[i] > 0 and (best < 0 or c[i] < best_c):
                best = i
                best_c = c[i]
        return best
    if code == RANDOM_BALL:
        state[0] = state[0] + GOLDEN
        r = mix64(state[0]) % (<unsigned long long>m)
        for i in range(n):
            acc += c[i]
            if <long long>r < acc:
                return i
        return n - 1  # unreachable: r < m = sum(c)
    # GOLDEN_GATE
    for i in range(n):
        j = (cursor[0] + i) % n
        if c[j] > 0:
            cursor[0] = <int>((j + 1) % n)
            return j
    return -1  # unreachable for m >= 1


def run_game(long long[::1] counts, double[::1] cdf, double[::1] weights,
             int strat, int inner, unsigned char[::1] in_l, int cursor,
             unsigned long long state, long long burn_in, long long rounds,
             int n_batches, long long[::1] pick_counts,
             long long[::1] recycled_by_bin, long long[::1] batch_sums):
    """Play burn_in + rounds recycling steps, recording the last ``rounds``."""
    cdef Py_ssize_t n = counts.shape[0]
    cdef long long m = 0
    cdef Py_ssize_t i, bin
    cdef long long r, rec_idx, k
    cdef double total_r2 = 0.0, u, best_w
    cdef long long total = 0

    for i in range(n):
        m += counts[i]
    if m == 0:
        raise AllBinsEmpty("no balls to recycle")

    with nogil:
        for r in range(burn_in + rounds):
            if strat == AGGRESSIVE_EMPTY:
                bin = -1
                best_w = 0.0
                for i in range(n):
                    if counts[i] > 0 and in_l[i] == 0:
                        if bin < 0 or weights[i] < best_w:
                            bin = i
                            best_w = weights[i]
                if bin < 0:
                    bin = pick_bin(inner, &counts[0], n, m, &in_l[0],
                                   &weights[0], &cursor, &state)
            else:
                bin = pick_bin(strat, &counts[0], n, m, &in_l[0],
                               &weights[0], &cursor, &state)

            k = counts[bin]
            counts[bin] = 0
            for i in range(k):
                u = next_double(&state)
                counts[bisect_right_d(&cdf[0], n, u)] += 1

            if r >= burn_in:
                rec_idx = r - burn_in
                total += k
                total_r2 += <double>k * <double>k
                pick_counts[bin] += 1
                recycled_by_bin[bin] += k
                batch_sums[(rec_idx * n_batches) // rounds] += k

    return state, cursor, total, total_r2


# ---------------------------------------------------------------------------
# Buffered-tree kernel


cdef inline double ndtri_acklam(double p) noexcept nogil:
    """Inverse standard normal CDF; must match ballrec.btree.ndtri_approx."""
    cdef double q, rr
    if p < 0.02425:
        q = sqrt(-2.0 * log(p))
        return (((((-7.784894002430293e-03 * q + -3.223964580411365e-01) * q +
                   -2.400758277161838e+00) * q + -2.549732539343734e+00) * q +
                 4.374664141464968e+00) * q + 2.938163982698783e+00) / \
               ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q +
                  2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)
    if p <= 1.0 - 0.02425:
        q = p - 0.5
        rr = q * q
        return (((((-3.969683028665376e+01 * rr + 2.209460984245205e+02) * rr +
                   -2.759285104469687e+02) * rr + 1.383577518672690e+02) * rr +
                 -3.066479806614716e+01) * rr + 2.506628277459239e+00) * q / \
               (((((-5.447609879822406e+01 * rr + 1.615858368580409e+02) * rr +
                   -1.556989798598866e+02) * rr + 6.680131188771972e+01) * rr +
                 -1.328068155288572e+01) * rr + 1.0)
    q = sqrt(-2.0 * log(1.0 - p))
    return -(((((-7.784894002430293e-03 * q + -3.223964580411365e-01) * q +
                -2.400758277161838e+00) * q + -2.549732539343734e+00) * q +
              4.374664141464968e+00) * q + 2.938163982698783e+00) / \
        ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q +
           2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0)


cdef inline double quantile_c(int kind, double a, double b, double u) noexcept nogil:
    if kind == 0:
        return a + u * (b - a)
    if kind == 1:
        return b * pow(1.0 - u, -1.0 / a)
    if u < TO_DOUBLE:
        u = TO_DOUBLE
    return a + b * ndtri_acklam(u)


cdef inline Py_ssize_t vec_bisect_right(vector[double]& v, double key) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = v.size(), mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if key < v[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef class _BTree:
    cdef vector[double] cuts
    cdef vector[vector[double]] residents
    cdef vector[vector[double]] groups
    cdef vector[long long] resident_counts
    cdef long long buffered, inserted, applied, flushes
    cdef long long buffer_capacity, leaf_capacity
    cdef int policy
    cdef bint frozen
    cdef double gg_cursor
    cdef unsigned long long policy_state

    def __init__(self, int policy, long long buffer_capacity,
                 long long leaf_capacity, frozen_cuts,
                 unsigned long long policy_state):
        cdef double[::1] fc
        cdef Py_ssize_t i
        self.policy = policy
        self.buffer_capacity = buffer_capacity
        self.leaf_capacity = leaf_capacity
        self.frozen = frozen_cuts is not None
        if self.frozen:
            fc = np.ascontiguousarray(frozen_cuts, dtype=np.float64)
            for i in range(fc.shape[0]):
                self.cuts.push_back(fc[i])
        cdef Py_ssize_t nl = self.cuts.size() + 1
        self.residents.resize(nl)
        self.groups.resize(nl)
        self.resident_counts.resize(nl)
        self.buffered = 0
        self.inserted = 0
        self.applied = 0
        self.flushes = 0
        self.gg_cursor = -INFINITY
        self.policy_state = policy_state

    cdef Py_ssize_t pick_leaf(self) noexcept nogil:
        cdef Py_ssize_t i, j, start, best = -1
        cdef Py_ssize_t n = self.groups.size()
        cdef long long best_c = 0, acc = 0
        cdef unsigned long long r
        if self.policy == FULLEST_BIN:
            for i in range(n):
                if <long long>self.groups[i].size() > best_c:
                    best = i
                    best_c = <long long>self.groups[i].size()
            return best
        if self.policy == RANDOM_BALL:
            self.policy_state = self.policy_state + GOLDEN
            r = mix64(self.policy_state) % (<unsigned long long>self.buffered)
            for i in range(n):
                acc += <long long>self.groups[i].size()
                if <long long>r < acc:
                    return i
            return n - 1  # unreachable
        # GOLDEN_GATE
        start = vec_bisect_right(self.cuts, self.gg_cursor)
        for i in range(n):
            j = (start + i) % n
            if self.groups[j].size() > 0:
                return j
        return -1  # unreachable while buffered > 0

    cdef void split(self, Py_ssize_t j) noexcept nogil:
        cdef Py_ssize_t size_, half, cut, lo, hi, d
        cdef double boundary, key
        cdef vector[double] lower, upper, g_lower, g_upper
        sort(self.residents[j].begin(), self.residents[j].end())
        size_ = self.residents[j].size()
        half = (size_ + 1) >> 1
        cut = -1
        for d in range(size_):
            lo = half - d
            if lo >= 1 and self.residents[j][lo - 1] < self.residents[j][lo]:
                cut = lo
                break
            hi = half + d
            if d > 0 and hi <= size_ - 1 and self.residents[j][hi - 1] < self.residents[j][hi]:
                cut = hi
                break
        if cut < 0:
            return
        boundary = self.residents[j][cut]
        self.cuts.insert(self.cuts.begin() + j, boundary)
        lower.assign(self.residents[j].begin(), self.residents[j].begin() + cut)
        upper.assign(self.residents[j].begin() + cut, self.residents[j].end())
        self.residents[j] = lower
        self.residents.insert(self.residents.begin() + j + 1, upper)
        for d in range(<Py_ssize_t>self.groups[j].size()):
            key = self.groups[j][d]
            if key < boundary:
                g_lower.push_back(key)
            else:
                g_upper.push_back(key)
        self.groups[j] = g_lower
        self.groups.insert(self.groups.begin() + j + 1, g_upper)
        self.resident_counts.insert(self.resident_counts.begin() + j + 1, 0)
        # Upper half first: its splits insert at indices > j and leave j alone.
        if <long long>self.residents[j + 1].size() > self.leaf_capacity:
            self.split(j + 1)
        if <long long>self.residents[j].size() > self.leaf_capacity:
            self.split(j)

    cdef void do_flush(self) noexcept nogil:
        cdef Py_ssize_t leaf = self.pick_leaf()
        cdef Py_ssize_t i
        cdef long long count = <long long>self.groups[leaf].size()
        cdef double hi
        self.buffered -= count
        self.applied += count
        self.flushes += 1
        if leaf < <Py_ssize_t>self.cuts.size():
            hi = self.cuts[leaf]
        else:
            hi = INFINITY
        if self.frozen:
            self.resident_counts[leaf] += count
            self.groups[leaf].clear()
        else:
            for i in range(count):
                self.residents[leaf].push_back(self.groups[leaf][i])
            self.groups[leaf].clear()
            if <long long>self.residents[leaf].size() > self.leaf_capacity:
                self.split(leaf)
        if self.policy == GOLDEN_GATE:
            self.gg_cursor = hi if hi != INFINITY else -INFINITY

    cdef void insert(self, double key) noexcept nogil:
        if self.buffered == self.buffer_capacity:
            self.do_flush()
        self.groups[vec_bisect_right(self.cuts, key)].push_back(key)
        self.buffered += 1
        self.inserted += 1

    cdef object snapshot_cuts(self):
        cdef Py_ssize_t n = self.cuts.size(), i
        out = np.empty(n, dtype=np.float64)
        cdef double[::1] mv = out
        for i in range(n):
            mv[i] = self.cuts[i]
        return out


def run_btree(int policy, long long buffer_capacity, long long leaf_capacity,
              long long n_inserts, long long window, int kd_kind, double kd_a,
              double kd_b, unsigned long long keys_state,
              unsigned long long policy_state, frozen_cuts):
    """Insert n_inserts keys through a buffered tree; snapshot every window."""
    cdef _BTree tree = _BTree(policy, buffer_capacity, leaf_capacity,
                              frozen_cuts, policy_state)
    cdef long long i, flushes_at_window_start = 0, done = 0
    cdef long long chunk, c
    cdef double u, key
    rows = []
    while done < n_inserts:
        chunk = window - (done % window)
        if chunk > n_inserts - done:
            chunk = n_inserts - done
        with nogil:
            for c in range(chunk):
                u = next_double(&keys_state)
                key = quantile_c(kd_kind, kd_a, kd_b, u)
                tree.insert(key)
        done += chunk
        if done % window == 0:
            rows.append((
                tree.inserted,
                tree.flushes - flushes_at_window_start,
                <long long>(tree.cuts.size() + 1),
                tree.snapshot_cuts(),
            ))
            flushes_at_window_start = tree.flushes
    return rows, keys_state, tree.policy_state
