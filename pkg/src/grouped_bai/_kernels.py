"""Compiled policy loops.

Each loop advances a run in place until it stops, runs out of buffered
rewards for some arm, hits the pull budget, or fills the trace buffers, and
returns a status code so the Python driver can refill and re-enter. Decisions
at a round depend only on the state at that round, so re-entering after a
refill recomputes the same decision.

Counter layout (``ctr``): round, total pulls, arm to refill, trace rows,
f_hat, output arm, phase.
"""

import math

import numba
import numpy as np

DONE = 0
NEED_REFILL = 1
BUDGET = 2
TRACE_FULL = 3

C_ROUND, C_PULLS, C_REFILL, C_TRACE, C_FHAT, C_OUT, C_PHASE = range(7)


@numba.njit(cache=True)
def log_term(t, n_arms, n_attrs, delta):
    tf = float(t)
    return math.log(4.0 * n_arms * n_attrs * (tf * tf * tf * tf) / delta)


@numba.njit(cache=True)
def radius(lg, pulls):
    return math.sqrt(lg / (2.0 * pulls))


@numba.njit(cache=True)
def _bounds(arm, counts, sums, lg, emp, lo, hi, arm_stats):
    m = sums.shape[1]
    a = radius(lg, counts[arm])
    total = 0.0
    for j in range(m):
        e = sums[arm, j] / counts[arm]
        emp[arm, j] = e
        lo[arm, j] = e - a
        hi[arm, j] = e + a
        total += e
    mean = total / m
    arm_stats[arm, 0] = mean
    arm_stats[arm, 1] = mean - a
    arm_stats[arm, 2] = mean + a


@numba.njit(cache=True)
def _available(arm, pos, filled):
    for j in range(pos.shape[1]):
        if pos[arm, j] >= filled[arm, j]:
            return False
    return True


@numba.njit(cache=True)
def _pull(arm, buf, pos, counts, sums, ctr):
    for j in range(sums.shape[1]):
        sums[arm, j] += buf[arm, j, pos[arm, j]]
        pos[arm, j] += 1
    counts[arm] += 1
    ctr[C_PULLS] += sums.shape[1]


@numba.njit(cache=True)
def _bootstrap(buf, pos, filled, counts, sums, ctr):
    n = counts.shape[0]
    for i in range(n):
        if not _available(i, pos, filled):
            ctr[C_REFILL] = i
            return False
    for i in range(n):
        _pull(i, buf, pos, counts, sums, ctr)
    ctr[C_ROUND] = 2
    return True


@numba.njit(cache=True)
def _record(ctr, counts, sums, mask, a, b, star, sizes, stop, tr_int, tr_counts, tr_sums, tr_mask):
    r = ctr[C_TRACE]
    tr_int[r, 0] = ctr[C_ROUND]
    tr_int[r, 1] = a
    tr_int[r, 2] = b
    tr_int[r, 3] = star
    tr_int[r, 4] = sizes[0]
    tr_int[r, 5] = sizes[1]
    tr_int[r, 6] = sizes[2]
    tr_int[r, 7] = stop
    tr_counts[r, :] = counts
    tr_sums[r, :, :] = sums
    tr_mask[r, :] = mask
    ctr[C_TRACE] = r + 1


@numba.njit(cache=True)
def css_lucb_loop(
    buf, pos, filled, counts, sums, ctr, threshold, delta, budget_cap,
    record, tr_int, tr_counts, tr_sums, tr_mask,
):
    n, m = sums.shape
    if ctr[C_ROUND] == 1:
        if not _bootstrap(buf, pos, filled, counts, sums, ctr):
            return NEED_REFILL
    emp = np.empty((n, m))
    lo = np.empty((n, m))
    hi = np.empty((n, m))
    arm_stats = np.empty((n, 3))
    feas = np.zeros(n, dtype=np.int8)
    sizes = np.zeros(3, dtype=np.int64)
    while True:
        t = ctr[C_ROUND]
        lg = log_term(t, n, m, delta)
        n_feas = 0
        n_perf = 0
        star = -1
        lead = -1
        for i in range(n):
            _bounds(i, counts, sums, lg, emp, lo, hi, arm_stats)
            perfect = True
            feasible = True
            for j in range(m):
                if lo[i, j] < threshold:
                    perfect = False
                if hi[i, j] < threshold:
                    feasible = False
            feas[i] = 1 if feasible else 0
            if feasible:
                n_feas += 1
                if lead < 0 or arm_stats[i, 0] > arm_stats[lead, 0]:
                    lead = i
            if perfect:
                n_perf += 1
                if star < 0 or arm_stats[i, 0] > arm_stats[star, 0]:
                    star = i
        n_pot = 0
        contested = False
        for i in range(n):
            if star < 0 or (i != star and arm_stats[i, 2] >= arm_stats[star, 1]):
                n_pot += 1
                if feas[i] == 1:
                    contested = True
        sizes[0] = n_feas
        sizes[1] = n_perf
        sizes[2] = n_pot
        stop = n_feas == 0 or (star >= 0 and not contested)
        if stop:
            if n_feas == 0:
                ctr[C_FHAT] = 0
                ctr[C_OUT] = -1
            else:
                ctr[C_FHAT] = 1
                ctr[C_OUT] = star
            if record:
                if ctr[C_TRACE] >= tr_int.shape[0]:
                    return TRACE_FULL
                _record(ctr, counts, sums, feas, lead, -1, star, sizes, 1,
                        tr_int, tr_counts, tr_sums, tr_mask)
            return DONE
        rival = -1
        if n_feas > 1:
            for i in range(n):
                if feas[i] == 1 and i != lead:
                    if rival < 0 or arm_stats[i, 2] > arm_stats[rival, 2]:
                        rival = i
        need = m if rival < 0 else 2 * m
        if ctr[C_PULLS] + need > budget_cap:
            ctr[C_FHAT] = 1
            ctr[C_OUT] = star if star >= 0 else lead
            return BUDGET
        if not _available(lead, pos, filled):
            ctr[C_REFILL] = lead
            return NEED_REFILL
        if rival >= 0 and not _available(rival, pos, filled):
            ctr[C_REFILL] = rival
            return NEED_REFILL
        if record:
            if ctr[C_TRACE] >= tr_int.shape[0]:
                return TRACE_FULL
            _record(ctr, counts, sums, feas, lead, rival, star, sizes, 0,
                    tr_int, tr_counts, tr_sums, tr_mask)
        _pull(lead, buf, pos, counts, sums, ctr)
        if rival >= 0:
            _pull(rival, buf, pos, counts, sums, ctr)
        ctr[C_ROUND] = t + 1


# Arm status codes for the elimination loops.
ACTIVE = 1
OUT_INFEASIBLE = 2
OUT_SUBOPTIMAL = 3
UNCLASSIFIED = 0


@numba.njit(cache=True)
def _best_guess(status, arm_stats, keep_codes_lo, keep_codes_hi):
    best = -1
    for i in range(status.shape[0]):
        if keep_codes_lo <= status[i] <= keep_codes_hi:
            if best < 0 or arm_stats[i, 0] > arm_stats[best, 0]:
                best = i
    return best


@numba.njit(cache=True)
def grouped_elimination_loop(
    buf, pos, filled, counts, sums, status, ctr, threshold, delta, budget_cap,
    record, tr_int, tr_counts, tr_sums, tr_mask,
):
    """Round-robin elimination over whole arms.

    ``status`` starts at ACTIVE for every arm. An arm is dropped once one of
    its attributes has an upper bound below the threshold, or once its upper
    bound falls below the lower bound of an arm whose attributes are all
    confirmed above the threshold.
    """
    n, m = sums.shape
    if ctr[C_ROUND] == 1:
        if not _bootstrap(buf, pos, filled, counts, sums, ctr):
            return NEED_REFILL
    emp = np.empty((n, m))
    lo = np.empty((n, m))
    hi = np.empty((n, m))
    arm_stats = np.zeros((n, 3))
    confirmed = np.zeros(n, dtype=np.int8)
    mask = np.zeros(n, dtype=np.int8)
    sizes = np.zeros(3, dtype=np.int64)
    while True:
        t = ctr[C_ROUND]
        lg = log_term(t, n, m, delta)
        for i in range(n):
            if status[i] != ACTIVE:
                continue
            _bounds(i, counts, sums, lg, emp, lo, hi, arm_stats)
            confirmed[i] = 1
            for j in range(m):
                if hi[i, j] < threshold:
                    status[i] = OUT_INFEASIBLE
                if lo[i, j] < threshold:
                    confirmed[i] = 0
        best_lo = -np.inf
        leader = -1
        for i in range(n):
            if status[i] == ACTIVE and confirmed[i] == 1 and arm_stats[i, 1] > best_lo:
                best_lo = arm_stats[i, 1]
                leader = i
        n_active = 0
        last = -1
        for i in range(n):
            if status[i] == ACTIVE and arm_stats[i, 2] < best_lo:
                status[i] = OUT_SUBOPTIMAL
            if status[i] == ACTIVE:
                n_active += 1
                last = i
            mask[i] = 1 if status[i] == ACTIVE else 0
        sizes[0] = n_active
        sizes[1] = 0
        for i in range(n):
            if status[i] == ACTIVE and confirmed[i] == 1:
                sizes[1] += 1
        sizes[2] = 0
        stop = n_active == 0 or (n_active == 1 and confirmed[last] == 1)
        if stop:
            if n_active == 0:
                ctr[C_FHAT] = 0
                ctr[C_OUT] = -1
            else:
                ctr[C_FHAT] = 1
                ctr[C_OUT] = last
            if record:
                if ctr[C_TRACE] >= tr_int.shape[0]:
                    return TRACE_FULL
                _record(ctr, counts, sums, mask, leader, -1, leader, sizes, 1,
                        tr_int, tr_counts, tr_sums, tr_mask)
            return DONE
        if ctr[C_PULLS] + n_active * m > budget_cap:
            guess = _best_guess(status, arm_stats, ACTIVE, ACTIVE)
            ctr[C_FHAT] = 1
            ctr[C_OUT] = guess
            return BUDGET
        for i in range(n):
            if status[i] == ACTIVE and not _available(i, pos, filled):
                ctr[C_REFILL] = i
                return NEED_REFILL
        if record:
            if ctr[C_TRACE] >= tr_int.shape[0]:
                return TRACE_FULL
            _record(ctr, counts, sums, mask, leader, -1, leader, sizes, 0,
                    tr_int, tr_counts, tr_sums, tr_mask)
        for i in range(n):
            if status[i] == ACTIVE:
                _pull(i, buf, pos, counts, sums, ctr)
        ctr[C_ROUND] = t + 1


@numba.njit(cache=True)
def feasibility_then_bai_loop(
    buf, pos, filled, counts, sums, status, ctr, threshold, delta, budget_cap,
    record, tr_int, tr_counts, tr_sums, tr_mask,
):
    """Two phases, each at confidence ``delta / 2``.

    Phase 1 samples every unclassified arm until it is confirmed feasible
    (ACTIVE) or infeasible. Phase 2 runs action elimination on arm means over
    the confirmed-feasible arms, reusing the samples gathered so far.
    ``status`` starts at UNCLASSIFIED for every arm.
    """
    n, m = sums.shape
    half = delta / 2.0
    if ctr[C_ROUND] == 1:
        if not _bootstrap(buf, pos, filled, counts, sums, ctr):
            return NEED_REFILL
        ctr[C_PHASE] = 1
    emp = np.empty((n, m))
    lo = np.empty((n, m))
    hi = np.empty((n, m))
    arm_stats = np.zeros((n, 3))
    mask = np.zeros(n, dtype=np.int8)
    sizes = np.zeros(3, dtype=np.int64)
    while True:
        t = ctr[C_ROUND]
        lg = log_term(t, n, m, half)
        n_pulled = 0
        if ctr[C_PHASE] == 1:
            for i in range(n):
                if status[i] != UNCLASSIFIED:
                    continue
                _bounds(i, counts, sums, lg, emp, lo, hi, arm_stats)
                low_ok = True
                high_ok = True
                for j in range(m):
                    if lo[i, j] < threshold:
                        low_ok = False
                    if hi[i, j] < threshold:
                        high_ok = False
                if not high_ok:
                    status[i] = OUT_INFEASIBLE
                elif low_ok:
                    status[i] = ACTIVE
            for i in range(n):
                if status[i] == UNCLASSIFIED:
                    n_pulled += 1
            if n_pulled == 0:
                ctr[C_PHASE] = 2
        leader = -1
        if ctr[C_PHASE] == 2:
            best_lo = -np.inf
            for i in range(n):
                if status[i] == ACTIVE:
                    _bounds(i, counts, sums, lg, emp, lo, hi, arm_stats)
                    if arm_stats[i, 1] > best_lo:
                        best_lo = arm_stats[i, 1]
                        leader = i
            for i in range(n):
                if status[i] == ACTIVE and arm_stats[i, 2] < best_lo:
                    status[i] = OUT_SUBOPTIMAL
            for i in range(n):
                if status[i] == ACTIVE:
                    n_pulled += 1
        pull_code = UNCLASSIFIED if ctr[C_PHASE] == 1 else ACTIVE
        for i in range(n):
            mask[i] = 1 if status[i] == pull_code else 0
        sizes[0] = n_pulled
        sizes[1] = ctr[C_PHASE]
        sizes[2] = 0
        if ctr[C_PHASE] == 2 and n_pulled <= 1:
            if n_pulled == 0:
                ctr[C_FHAT] = 0
                ctr[C_OUT] = -1
            else:
                ctr[C_FHAT] = 1
                ctr[C_OUT] = leader
            if record:
                if ctr[C_TRACE] >= tr_int.shape[0]:
                    return TRACE_FULL
                _record(ctr, counts, sums, mask, leader, -1, leader, sizes, 1,
                        tr_int, tr_counts, tr_sums, tr_mask)
            return DONE
        if ctr[C_PULLS] + n_pulled * m > budget_cap:
            if ctr[C_PHASE] == 2:
                guess = _best_guess(status, arm_stats, ACTIVE, ACTIVE)
            else:
                guess = _best_guess(status, arm_stats, UNCLASSIFIED, ACTIVE)
            ctr[C_FHAT] = 1 if guess >= 0 else 0
            ctr[C_OUT] = guess
            return BUDGET
        for i in range(n):
            if mask[i] == 1 and not _available(i, pos, filled):
                ctr[C_REFILL] = i
                return NEED_REFILL
        if record:
            if ctr[C_TRACE] >= tr_int.shape[0]:
                return TRACE_FULL
            _record(ctr, counts, sums, mask, leader, -1, leader, sizes, 0,
                    tr_int, tr_counts, tr_sums, tr_mask)
        for i in range(n):
            if mask[i] == 1:
                _pull(i, buf, pos, counts, sums, ctr)
        ctr[C_ROUND] = t + 1
