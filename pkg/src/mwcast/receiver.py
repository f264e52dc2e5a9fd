"""Per-receiver seen-packet tracking and two-step batch decoding.

A receiver advances its seen counter per the indicator dynamics, stores the
coded packets that fired the indicator, and at each decoding moment
(floor(A[t]) == S_i[t]) decodes the batch in two steps: substitute
already-decoded packets out of the stored rows, then Gauss-Jordan the
reduced square system, back-substituting from the highest index downward.

Operation counting is structural: one operation is one multiply-add on one
matrix position (payload columns count as one position), determined by the
row spans only, so dynamics-only runs count exactly what a full-coding run
would execute.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .coding import CodedPacket, Packet
from .galois import FieldContext


class DecodingError(RuntimeError):
    """Singular reduced system at a decoding moment."""


@dataclass(frozen=True)
class RenewalRecord:
    """Interval between consecutive decoding moments and its packet count."""

    receiver: int
    interval: int
    packets: int
    start_queue: Fraction


@njit(cache=True)
def _op_counts(lo_arr, hi_arr, k, d0, prefix):
    step1 = np.int64(0)
    fwd = np.int64(0)
    # prefix[r] = sum_{q<=r} (b_q - q + 1) with b_q = hi_q - d0
    prefix[0] = 0
    for r in range(1, k + 1):
        prefix[r] = prefix[r - 1] + (hi_arr[r - 1] - d0) - r + 1
    for r in range(1, k + 1):
        lo = lo_arr[r - 1]
        if lo <= d0:
            step1 += d0 - lo + 1
        a_r = lo - d0
        if a_r < 1:
            a_r = 1
        fwd += prefix[r - 1] - prefix[a_r - 1]
    norm = prefix[k]
    back = prefix[k] - k
    return step1, fwd + norm + back


@njit(cache=True)
def decode_op_counts(lo_arr, hi_arr, k, d0):
    """Exact (step1, step2) multiply-add counts for one batch decode.

    Rows r = 1..k were stored in reception order with window spans
    [lo_arr[r-1], hi_arr[r-1]]; d0 is the highest packet id decoded before
    this moment.  Step 1 eliminates decoded columns (one op per touched
    entry).  Step 2 follows the Gauss-Jordan schedule implied by the spans:
    row r needs elimination against pivots max(lo_r - d0, 1) .. r-1, each
    costing the pivot row's trailing width plus one payload op; then a
    normalisation pass and a high-to-low back-substitution pass.
    """
    prefix = np.zeros(k + 1, dtype=np.int64)
    return _op_counts(lo_arr, hi_arr, k, d0, prefix)


class ReceiverState:
    """State of one receiver; owned by the simulation loop."""

    def __init__(
        self,
        index: int,
        field: FieldContext | None = None,
        assembly_slots: dict[int, int] | None = None,
    ):
        self.index = index
        self.field = field
        self.seen = 0
        self.z_mirror = 0
        self.pending: list[CodedPacket] = []
        self.decoded_through = 0
        self.op_count = 0
        self.step1_ops = 0
        self.step2_ops = 0
        # shared read-only map packet id -> assembly slot, for delay attribution
        self.assembly_slots = assembly_slots if assembly_slots is not None else {}
        self.decoded_payloads: dict[int, np.ndarray] = {}
        self.delays: list[int] = []
        self.last_moment_slot = 0
        self.window_at_last_moment = 0
        self.queue_at_last_moment = Fraction(0)
        self.records: list[RenewalRecord] = []

    def on_receive(self, cp: CodedPacket, c: int, arrivals: Fraction) -> None:
        """Seen-counter update for one slot; stores the row when it fires."""
        if c and arrivals - self.seen >= 1:
            self.seen += 1
            self.pending.append(cp)

    def check_decoding_moment(self, arrivals: Fraction) -> bool:
        return int(arrivals) == self.seen

    def decode_batch(self, t: int) -> tuple[list[Packet], int, RenewalRecord]:
        """Decode all packets seen since the previous decoding moment.

        Requires check_decoding_moment to hold for slot t.  Returns the
        decoded packets (payloads None in dynamics mode), the exact
        operation count, and the renewal record for the closed interval.
        """
        k = len(self.pending)
        d0 = self.decoded_through
        lo_arr = np.array([cp.lo for cp in self.pending], dtype=np.int64)
        hi_arr = np.array([cp.hi for cp in self.pending], dtype=np.int64)
        step1, step2 = decode_op_counts(lo_arr, hi_arr, k, d0)

        decoded: list[Packet] = []
        if self.field is not None and k > 0 and self.pending[0].payload is not None:
            decoded = self._eliminate(k, d0, lo_arr, hi_arr, int(step1), int(step2))
        else:
            decoded = [Packet(d0 + r) for r in range(1, k + 1)]

        for pkt in decoded:
            self.delays.append(t - self.assembly_slots[pkt.id])

        interval = t - self.last_moment_slot
        record = RenewalRecord(
            receiver=self.index,
            interval=interval,
            packets=k,
            start_queue=self.queue_at_last_moment,
        )
        self.records.append(record)
        self.step1_ops += int(step1)
        self.step2_ops += int(step2)
        self.op_count += int(step1 + step2)
        self.decoded_through = d0 + k
        self.pending.clear()
        self.last_moment_slot = t
        return decoded, int(step1 + step2), record

    def _eliminate(self, k, d0, lo_arr, hi_arr, step1_expected, step2_expected):
        """Run the two-step elimination on actual payloads.

        The schedule is span-driven (accidental zero multipliers are still
        walked) so the executed multiply-adds equal the structural count.
        """
        field = self.field
        nsym = self.pending[0].payload.shape[0]
        ops1 = 0
        rows = []
        pays = []
        for r, cp in enumerate(self.pending):
            pay = cp.payload.copy()
            top = min(cp.hi, d0)
            for m in range(cp.lo, top + 1):
                field.addmul(pay, int(cp.coefficients[m - cp.lo]), self.decoded_payloads[m])
                ops1 += 1
            # remaining columns are packets d0+1 .. hi, mapped to 0-based cols
            row = np.zeros(k, dtype=np.uint16)
            start = max(cp.lo, d0 + 1)
            for m in range(start, cp.hi + 1):
                row[m - d0 - 1] = cp.coefficients[m - cp.lo]
            rows.append(row)
            pays.append(pay)
        if ops1 != step1_expected:
            raise AssertionError("step-1 operation schedule diverged from span count")

        ops2 = 0
        for r in range(k):
            a_r = max(int(lo_arr[r]) - d0, 1)
            for q in range(a_r - 1, r):
                mult = int(rows[r][q])
                bq = int(hi_arr[q]) - d0
                for c in range(q + 1, bq):
                    rows[r][c] ^= field.mul(mult, int(rows[q][c]))
                field.addmul(pays[r], mult, pays[q])
                rows[r][q] = 0
                ops2 += bq - q  # bq - q - 1 coefficient entries + 1 payload op
            lead = int(rows[r][r])
            if lead == 0:
                raise DecodingError(
                    f"receiver {self.index}: singular reduced system at slot "
                    f"{self.last_moment_slot}+, pivot {d0 + r + 1}"
                )
            ilv = field.inv(lead)
            br = int(hi_arr[r]) - d0
            for c in range(r + 1, br):
                rows[r][c] = field.mul(ilv, int(rows[r][c]))
            pays[r] = field.scale(ilv, pays[r])
            rows[r][r] = 1
            ops2 += br - r  # trailing entries + payload scale
        for m in range(k - 2, -1, -1):
            bm = int(hi_arr[m]) - d0
            for c in range(m + 1, bm):
                field.addmul(pays[m], int(rows[m][c]), pays[c])
                rows[m][c] = 0
                ops2 += 1
        if ops2 != step2_expected:
            raise AssertionError("step-2 operation schedule diverged from span count")

        decoded = []
        for r in range(k):
            pid = d0 + r + 1
            payload = pays[r].astype(np.uint16)
            self.decoded_payloads[pid] = payload
            decoded.append(Packet(pid, payload))
        return decoded

    def drop_decoded_below(self, z: int) -> None:
        """Free payloads neither a future window (lo > Z) nor a stored
        pending row can still reference."""
        bound = z
        if self.pending:
            bound = min(bound, min(cp.lo for cp in self.pending) - 1)
        for pid in [p for p in self.decoded_payloads if p <= bound]:
            del self.decoded_payloads[pid]
