"""Compiled slot loop shared by dynamics-only and full-coding runs.

One njit loop drives inject -> encode -> channel -> receive -> decode ->
beacon for every mode; the full-coding flag only adds payload arithmetic on
top of identical counter updates, so the two modes cannot drift apart.
All randomness comes from counter-based hashes (see rng), all queue
comparisons are exact integer arithmetic on numerators over the injection
denominator.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .receiver import _op_counts
from .rng import DOMAIN_CHANNEL, DOMAIN_COEF, DOMAIN_INJECT, DOMAIN_PAYLOAD, mix64

# run() maps these to exceptions with a slot-stamped diagnostic
STATUS_OK = 0
STATUS_PENDING_OVERFLOW = 1
STATUS_FEEDBACK_EQUALITY = 2
STATUS_WINDOW_BOUNDS = 3
STATUS_QUEUE_RECURRENCE = 4
STATUS_SINGULAR = 5
STATUS_EMPTY_REMOVAL = 6
STATUS_RING_OVERFLOW = 7
STATUS_SAFETY = 8
STATUS_STEP1_CEILING = 9
STATUS_STEP2_CEILING = 10
STATUS_PENDING_MISMATCH = 11
STATUS_WIDTH_OVERFLOW = 12


@njit(cache=True)
def _gf_mul(a, b, exp_t, log_t, use_tables, poly, q):
    if a == 0 or b == 0:
        return 0
    if use_tables:
        return np.int64(exp_t[log_t[a] + log_t[b]])
    r = 0
    aa = np.int64(a)
    bb = np.int64(b)
    high = np.int64(1) << q
    while bb != 0:
        if bb & 1:
            r ^= aa
        aa <<= 1
        if aa & high:
            aa ^= poly
        bb >>= 1
    return r


@njit(cache=True)
def _gf_inv(a, exp_t, log_t, use_tables, poly, q, order):
    if use_tables:
        return np.int64(exp_t[order - 1 - log_t[a]])
    result = np.int64(1)
    base = np.int64(a)
    e = order - 2
    while e:
        if e & 1:
            result = _gf_mul(result, base, exp_t, log_t, use_tables, poly, q)
        base = _gf_mul(base, base, exp_t, log_t, use_tables, poly, q)
        e >>= 1
    return result


@njit(cache=True)
def _full_decode(
    k,
    d0,
    lo_row,
    hi_row,
    coef_rows,
    pay_rows,
    ring,
    ring_cap,
    scratch,
    spay,
    orig_pay,
    nsym,
    exp_t,
    log_t,
    use_tables,
    poly,
    q,
    order,
):
    """Two-step elimination on real payloads; returns (status, mismatches).

    The schedule is span-driven.  Zero multipliers are value no-ops and may
    be skipped; the operation metric is counted separately from the spans.
    """
    # Step 1: substitute already-decoded packets out of each stored row.
    for r in range(k):
        lo = lo_row[r]
        hi = hi_row[r]
        top = hi if hi < d0 else d0
        if lo <= top and lo <= d0 - ring_cap:
            return STATUS_RING_OVERFLOW, 0
        for m in range(lo, top + 1):
            cf = np.int64(coef_rows[r, m - lo])
            if cf != 0:
                slot_idx = m % ring_cap
                for j in range(nsym):
                    pay_rows[r, j] ^= np.uint16(
                        _gf_mul(cf, np.int64(ring[slot_idx, j]), exp_t, log_t, use_tables, poly, q)
                    )
    # Reduced K x K system over packets d0+1 .. d0+k (0-based column m-d0-1).
    for r in range(k):
        lo = lo_row[r]
        hi = hi_row[r]
        for c in range(k):
            scratch[r, c] = 0
        start = lo if lo > d0 + 1 else d0 + 1
        for m in range(start, hi + 1):
            scratch[r, m - d0 - 1] = coef_rows[r, m - lo]
        for j in range(nsym):
            spay[r, j] = pay_rows[r, j]
    # Forward pass in reception order: row r's pivot lands on column r.
    for r in range(k):
        a_r = lo_row[r] - d0
        if a_r < 1:
            a_r = 1
        for piv in range(a_r - 1, r):
            mult = np.int64(scratch[r, piv])
            if mult != 0:
                bq = hi_row[piv] - d0
                for c in range(piv + 1, bq):
                    scratch[r, c] ^= np.uint16(
                        _gf_mul(mult, np.int64(scratch[piv, c]), exp_t, log_t, use_tables, poly, q)
                    )
                for j in range(nsym):
                    spay[r, j] ^= np.uint16(
                        _gf_mul(mult, np.int64(spay[piv, j]), exp_t, log_t, use_tables, poly, q)
                    )
                scratch[r, piv] = 0
        lead = np.int64(scratch[r, r])
        if lead == 0:
            return STATUS_SINGULAR, 0
        ilv = _gf_inv(lead, exp_t, log_t, use_tables, poly, q, order)
        br = hi_row[r] - d0
        for c in range(r + 1, br):
            scratch[r, c] = np.uint16(
                _gf_mul(ilv, np.int64(scratch[r, c]), exp_t, log_t, use_tables, poly, q)
            )
        for j in range(nsym):
            spay[r, j] = np.uint16(
                _gf_mul(ilv, np.int64(spay[r, j]), exp_t, log_t, use_tables, poly, q)
            )
        scratch[r, r] = 1
    # Back-substitution, highest index first.
    for m in range(k - 2, -1, -1):
        bm = hi_row[m] - d0
        for c in range(m + 1, bm):
            cf = np.int64(scratch[m, c])
            if cf != 0:
                for j in range(nsym):
                    spay[m, j] ^= np.uint16(
                        _gf_mul(cf, np.int64(spay[c, j]), exp_t, log_t, use_tables, poly, q)
                    )
            scratch[m, c] = 0
    mismatches = 0
    for r in range(k):
        pid = d0 + r + 1
        ok = True
        slot_idx = pid % ring_cap
        for j in range(nsym):
            ring[slot_idx, j] = spay[r, j]
            if spay[r, j] != orig_pay[pid, j]:
                ok = False
        if not ok:
            mismatches += 1
    return STATUS_OK, mismatches


@njit(cache=True)
def simulate(
    slots,
    warmup,
    n,
    p_num,
    denom,
    is_bernoulli,
    inj_threshold,
    ch_seed,
    coef_seed,
    b_af,
    full_mode,
    check_inv,
    order,
    use_tables,
    poly,
    q,
    nsym,
    ring_cap,
    n_capture,
    n_trace,
    gam_thresholds,
    exp_t,
    log_t,
    seen,
    qnum_check,
    decoded_through,
    last_moment,
    window_at_moment,
    pend_count,
    pend_lo,
    pend_hi,
    window_hist,
    queue_hist,
    delay_hist,
    delay_sum,
    delay_count,
    step1_ops,
    step2_ops,
    renew_count,
    renew_t_sum,
    renew_t2_sum,
    renew_t3_sum,
    renew_t4_sum,
    renew_k_sum,
    cap_t,
    cap_k,
    cap_fill,
    assembly,
    trace_q,
    orig_pay,
    pend_coef,
    pend_pay,
    dec_ring,
    scratch,
    spay,
    slot_coef,
    x_pay,
    op_prefix,
):
    pend_cap = pend_lo.shape[1]
    width_cap = pend_coef.shape[2]
    dcap = delay_hist.shape[1]
    wcap = window_hist.shape[0]
    qcap = queue_hist.shape[1]
    maxrec = cap_t.shape[1]

    anum = np.int64(0)
    floor_a = np.int64(0)
    z = np.int64(0)
    enc_ops = np.int64(0)
    beacon_rounds = np.int64(0)
    beacons = np.int64(0)
    mismatches = np.int64(0)
    tight_ceiling_viol = np.int64(0)

    for t in range(1, slots + 1):
        tu = np.uint64(t)
        # --- injection (data assembled at the beginning of the slot) ---
        if is_bernoulli:
            u = mix64(ch_seed, np.uint64(DOMAIN_INJECT), tu)
            add = denom if u <= inj_threshold else np.int64(0)
        else:
            add = p_num
        anum += add
        new_floor = anum // denom
        for m in range(floor_a + 1, new_floor + 1):
            assembly[m] = t
            if full_mode:
                for j in range(nsym):
                    s = mix64(coef_seed, np.uint64(DOMAIN_PAYLOAD + m), np.uint64(j))
                    orig_pay[m, j] = np.uint16(s & np.uint64(order - 1))
        floor_a = new_floor

        # --- encode / data sub-slot ---
        w = floor_a - z
        if t > warmup:
            wb = w if w < wcap - 1 else wcap - 1
            window_hist[wb] += 1
            enc_ops += w
        if full_mode and w > 0:
            if w > width_cap:
                return STATUS_WIDTH_OVERFLOW, t, -1, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
            for j in range(nsym):
                x_pay[j] = 0
            for m in range(z + 1, floor_a + 1):
                cf64 = np.uint64(1) + mix64(
                    coef_seed, np.uint64(DOMAIN_COEF + m), tu
                ) % np.uint64(order - 1)
                cf = np.uint16(cf64)
                slot_coef[m - z - 1] = cf
                cfi = np.int64(cf)
                for j in range(nsym):
                    x_pay[j] ^= np.uint16(
                        _gf_mul(cfi, np.int64(orig_pay[m, j]), exp_t, log_t, use_tables, poly, q)
                    )

        # --- receivers ---
        min_s = np.int64(1) << 62
        for i in range(n):
            u = mix64(ch_seed, np.uint64(DOMAIN_CHANNEL + i), tu)
            c_bit = np.int64(1) if u <= gam_thresholds[i] else np.int64(0)
            fired = c_bit == 1 and anum - seen[i] * denom >= denom
            if fired:
                cnt = pend_count[i]
                if cnt >= pend_cap:
                    return STATUS_PENDING_OVERFLOW, t, i, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
                pend_lo[i, cnt] = z + 1
                pend_hi[i, cnt] = floor_a
                if full_mode:
                    for cidx in range(w):
                        pend_coef[i, cnt, cidx] = slot_coef[cidx]
                    for j in range(nsym):
                        pend_pay[i, cnt, j] = x_pay[j]
                pend_count[i] = cnt + 1
                seen[i] += 1
            if check_inv:
                qprev = qnum_check[i]
                dec = denom if (c_bit == 1 and qprev + add >= denom) else np.int64(0)
                qnum_check[i] = qprev + add - dec
                if qnum_check[i] != anum - seen[i] * denom:
                    return STATUS_QUEUE_RECURRENCE, t, i, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
            if t > warmup:
                fq = (anum - seen[i] * denom) // denom
                qb = fq if fq < qcap - 1 else qcap - 1
                queue_hist[i, qb] += 1
            if i < n_trace:
                trace_q[i, t] = np.int32((anum - seen[i] * denom) // denom)

            # --- decoding moment ---
            if floor_a == seen[i]:
                k = pend_count[i]
                d0 = decoded_through[i]
                if check_inv and k != floor_a - d0:
                    return STATUS_PENDING_MISMATCH, t, i, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
                interval = t - last_moment[i]
                s1, s2 = _op_counts(pend_lo[i], pend_hi[i], k, d0, op_prefix)
                wprev = window_at_moment[i]
                if s1 > k * (wprev + k):
                    return STATUS_STEP1_CEILING, t, i, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
                if s2 > k * k * k + 2 * k * k + 1:
                    return STATUS_STEP2_CEILING, t, i, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
                if s1 > k * wprev:
                    tight_ceiling_viol += 1
                if full_mode and k > 0:
                    st, mm = _full_decode(
                        k, d0, pend_lo[i], pend_hi[i], pend_coef[i], pend_pay[i],
                        dec_ring[i], ring_cap, scratch, spay, orig_pay, nsym,
                        exp_t, log_t, use_tables, poly, q, order,
                    )
                    if st != STATUS_OK:
                        return st, t, i, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
                    mismatches += mm
                if t > warmup:
                    step1_ops[i] += s1
                    step2_ops[i] += s2
                    for r in range(k):
                        dd = t - assembly[d0 + 1 + r]
                        delay_sum[i] += dd
                        delay_count[i] += 1
                        db = dd if dd < dcap - 1 else dcap - 1
                        delay_hist[i, db] += 1
                if last_moment[i] >= warmup:
                    renew_count[i] += 1
                    renew_t_sum[i] += interval
                    renew_t2_sum[i] += interval * interval
                    fint = np.float64(interval)
                    renew_t3_sum[i] += fint * fint * fint
                    renew_t4_sum[i] += fint * fint * fint * fint
                    renew_k_sum[i] += k
                    if i < n_capture and cap_fill[i] < maxrec:
                        cap_t[i, cap_fill[i]] = interval
                        cap_k[i, cap_fill[i]] = k
                        cap_fill[i] += 1
                decoded_through[i] = floor_a
                pend_count[i] = 0
                last_moment[i] = t
                window_at_moment[i] = w
            if seen[i] < min_s:
                min_s = seen[i]

        if check_inv and b_af == 1:
            # encoder window vs largest decoder queue, exact in numerators
            max_q_num = anum - min_s * denom
            if w * denom < max_q_num - denom or w * denom > max_q_num + denom:
                return STATUS_WINDOW_BOUNDS, t, -1, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol

        # --- beacon sub-slot ---
        if b_af == 1:
            beacon_rounds += 1
            if min_s == z:
                beacons += 1
            else:
                if z >= floor_a:
                    return STATUS_EMPTY_REMOVAL, t, -1, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
                z += 1
        elif t % b_af == 0:
            beacon_rounds += 1
            any_beacon = False
            for i in range(n):
                if seen[i] < z + b_af:
                    any_beacon = True
                    break
            if any_beacon:
                beacons += 1
            else:
                if z + b_af > floor_a:
                    return STATUS_EMPTY_REMOVAL, t, -1, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
                z += b_af

        if check_inv:
            if b_af == 1 and z != min_s:
                return STATUS_FEEDBACK_EQUALITY, t, -1, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
            if z > min_s:
                return STATUS_SAFETY, t, -1, anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol

    return STATUS_OK, np.int64(0), np.int64(-1), anum, z, enc_ops, beacon_rounds, beacons, mismatches, tight_ceiling_viol
