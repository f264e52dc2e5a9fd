"""Slot-loop orchestration, metrics collection, and estimators.

A run is deterministic given its seeds: the same SimConfig always produces
bit-identical Metrics.  dynamics_only mode skips payload arithmetic (the
large-n sweeps need only counters); full_coding mode additionally encodes,
decodes and verifies real payload symbols.  Both modes execute the same
compiled counter loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels, rng
from .coding import InjectionProcess
from .feedback import FeedbackConfig
from .galois import FieldContext
from .receiver import DecodingError


class SimInvariantError(RuntimeError):
    """A per-slot invariant failed during a checked run."""


_STATUS_MESSAGES = {
    _kernels.STATUS_PENDING_OVERFLOW: "pending-row buffer overflow (raise pending_cap)",
    _kernels.STATUS_FEEDBACK_EQUALITY: "feedback equality Z = min_i S_i violated",
    _kernels.STATUS_WINDOW_BOUNDS: "encoder window left [max_i Q_i - 1, max_i Q_i + 1]",
    _kernels.STATUS_QUEUE_RECURRENCE: "queue recurrence disagrees with A - S",
    _kernels.STATUS_EMPTY_REMOVAL: "feedback requested removal from an empty buffer",
    _kernels.STATUS_RING_OVERFLOW: "decoded-payload ring too small (raise ring_cap)",
    _kernels.STATUS_SAFETY: "departure counter overtook min_i S_i",
    _kernels.STATUS_STEP1_CEILING: "step-1 operation count exceeded K*(W+K)",
    _kernels.STATUS_STEP2_CEILING: "step-2 operation count exceeded its cubic ceiling",
    _kernels.STATUS_PENDING_MISMATCH: "stored row count disagrees with floor(A) - decoded",
    _kernels.STATUS_WIDTH_OVERFLOW: "encoding window exceeded width_cap in full mode",
}

MODES = ("dynamics_only", "full_coding")


@dataclass(frozen=True)
class Seeds:
    coefficient: int = 0
    channel: int = 0


@dataclass
class SimConfig:
    n: int
    gammas: tuple[float, ...]
    injection: InjectionProcess
    slots: int
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    seeds: Seeds = field(default_factory=Seeds)
    mode: str = "dynamics_only"
    field_ctx: FieldContext | None = None
    warmup: int = 10_000
    check_invariants: bool = False
    payload_symbols: int = 16
    delay_cap: int = 4096
    window_cap: int = 4096
    queue_cap: int = 1024
    pending_cap: int = 4096
    width_cap: int = 1024
    ring_cap: int = 8192
    capture_renewals: int = 1
    capture_max_records: int = 1 << 21
    trace_queues: int = 0

    def __post_init__(self):
        self.gammas = tuple(float(g) for g in self.gammas)
        self.validate()

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one receiver, got n={self.n}")
        if len(self.gammas) != self.n:
            raise ValueError(f"{self.n} receivers but {len(self.gammas)} gammas")
        for g in self.gammas:
            if not 0.0 < g <= 1.0:
                raise ValueError(f"delivery probabilities must be in (0, 1], got {g}")
        if float(self.injection.rate) >= min(self.gammas):
            raise ValueError(
                f"stability requires injection rate < min gamma: "
                f"{self.injection.rate} >= {min(self.gammas)}"
            )
        if self.slots < 1:
            raise ValueError(f"slots must be >= 1, got {self.slots}")
        if not 0 <= self.warmup < self.slots:
            raise ValueError(f"warmup must lie in [0, slots), got {self.warmup}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "full_coding" and self.field_ctx is None:
            self.field_ctx = FieldContext()

    @property
    def full(self) -> bool:
        return self.mode == "full_coding"


@dataclass
class Metrics:
    """Histograms, exact counters, and renewal captures for one run.

    Histograms cover post-warmup slots only; sums/counters used for means
    (delay_sum, op totals) are exact int64 and independent of histogram caps
    (the top bin aggregates overflow).
    """

    config: SimConfig
    slots_observed: int
    arrivals_num: int
    arrivals_den: int
    z_final: int
    window_hist: np.ndarray
    encoder_ops: int
    queue_hist: np.ndarray
    delay_hist: np.ndarray
    delay_sum: np.ndarray
    delay_count: np.ndarray
    dec_step1: np.ndarray
    dec_step2: np.ndarray
    renew_count: np.ndarray
    renew_t_sum: np.ndarray
    renew_t2_sum: np.ndarray
    renew_t3_sum: np.ndarray
    renew_t4_sum: np.ndarray
    renew_k_sum: np.ndarray
    renewal_t: list[np.ndarray]
    renewal_k: list[np.ndarray]
    beacon_rounds: int
    beacons_detected: int
    payload_checked: bool
    payload_mismatches: int
    step1_tight_ceiling_violations: int
    queue_trace: np.ndarray | None = None

    @property
    def decoded_count(self) -> np.ndarray:
        return self.delay_count

    def merge(self, other: "Metrics") -> "Metrics":
        """Associative merge of histogram/counter state (replica pooling)."""
        if other.config.n != self.config.n or other.arrivals_den != self.arrivals_den:
            raise ValueError("cannot merge metrics from incompatible configs")
        return Metrics(
            config=self.config,
            slots_observed=self.slots_observed + other.slots_observed,
            arrivals_num=self.arrivals_num + other.arrivals_num,
            arrivals_den=self.arrivals_den,
            z_final=self.z_final + other.z_final,
            window_hist=self.window_hist + other.window_hist,
            encoder_ops=self.encoder_ops + other.encoder_ops,
            queue_hist=self.queue_hist + other.queue_hist,
            delay_hist=self.delay_hist + other.delay_hist,
            delay_sum=self.delay_sum + other.delay_sum,
            delay_count=self.delay_count + other.delay_count,
            dec_step1=self.dec_step1 + other.dec_step1,
            dec_step2=self.dec_step2 + other.dec_step2,
            renew_count=self.renew_count + other.renew_count,
            renew_t_sum=self.renew_t_sum + other.renew_t_sum,
            renew_t2_sum=self.renew_t2_sum + other.renew_t2_sum,
            renew_t3_sum=self.renew_t3_sum + other.renew_t3_sum,
            renew_t4_sum=self.renew_t4_sum + other.renew_t4_sum,
            renew_k_sum=self.renew_k_sum + other.renew_k_sum,
            renewal_t=[np.concatenate([a, b]) for a, b in zip(self.renewal_t, other.renewal_t)],
            renewal_k=[np.concatenate([a, b]) for a, b in zip(self.renewal_k, other.renewal_k)],
            beacon_rounds=self.beacon_rounds + other.beacon_rounds,
            beacons_detected=self.beacons_detected + other.beacons_detected,
            payload_checked=self.payload_checked and other.payload_checked,
            payload_mismatches=self.payload_mismatches + other.payload_mismatches,
            step1_tight_ceiling_violations=(
                self.step1_tight_ceiling_violations + other.step1_tight_ceiling_violations
            ),
            queue_trace=None,
        )


def run(cfg: SimConfig) -> Metrics:
    """Execute one deterministic run and collect Metrics.

    Raises SimInvariantError (slot-stamped) if a checked invariant fails,
    DecodingError if a full-coding decode hits a singular system.
    """
    cfg.validate()
    n = cfg.n
    proc = cfg.injection
    is_bern = proc.kind == "bernoulli"
    denom = proc.denominator
    p_num = proc.numerator
    inj_threshold = rng.probability_threshold(proc.rate) if is_bern else 0

    fld = cfg.field_ctx if cfg.full else None
    if cfg.full:
        order, use_tables, poly, q = fld.order, fld.use_tables, fld.poly, fld.q
        exp_t, log_t = fld.exp, fld.log
    else:
        order, use_tables, poly, q = 256, False, 0x11B, 8
        exp_t = np.zeros(1, dtype=np.uint32)
        log_t = np.zeros(1, dtype=np.int32)

    if is_bern:
        max_packets = cfg.slots + 2
    else:
        max_packets = (cfg.slots * p_num) // denom + 2

    gam_thresholds = np.array(
        [rng.probability_threshold(g) for g in cfg.gammas], dtype=np.uint64
    )
    n_capture = min(cfg.capture_renewals, n)
    n_trace = min(cfg.trace_queues, n)
    maxrec = min(cfg.capture_max_records, cfg.slots + 1)

    seen = np.zeros(n, dtype=np.int64)
    qnum_check = np.zeros(n, dtype=np.int64)
    decoded_through = np.zeros(n, dtype=np.int64)
    last_moment = np.zeros(n, dtype=np.int64)
    window_at_moment = np.zeros(n, dtype=np.int64)
    pend_count = np.zeros(n, dtype=np.int64)
    pend_lo = np.zeros((n, cfg.pending_cap), dtype=np.int64)
    pend_hi = np.zeros((n, cfg.pending_cap), dtype=np.int64)
    window_hist = np.zeros(cfg.window_cap, dtype=np.int64)
    queue_hist = np.zeros((n, cfg.queue_cap), dtype=np.int64)
    delay_hist = np.zeros((n, cfg.delay_cap), dtype=np.int64)
    delay_sum = np.zeros(n, dtype=np.int64)
    delay_count = np.zeros(n, dtype=np.int64)
    step1_ops = np.zeros(n, dtype=np.int64)
    step2_ops = np.zeros(n, dtype=np.int64)
    renew_count = np.zeros(n, dtype=np.int64)
    renew_t_sum = np.zeros(n, dtype=np.int64)
    renew_t2_sum = np.zeros(n, dtype=np.int64)
    renew_t3_sum = np.zeros(n, dtype=np.float64)
    renew_t4_sum = np.zeros(n, dtype=np.float64)
    renew_k_sum = np.zeros(n, dtype=np.int64)
    cap_t = np.zeros((max(n_capture, 1), maxrec), dtype=np.int64)
    cap_k = np.zeros((max(n_capture, 1), maxrec), dtype=np.int64)
    cap_fill = np.zeros(max(n_capture, 1), dtype=np.int64)
    assembly = np.zeros(max_packets + 2, dtype=np.int64)
    trace_q = np.zeros((max(n_trace, 1), cfg.slots + 1 if n_trace else 1), dtype=np.int32)
    op_prefix = np.zeros(cfg.pending_cap + 1, dtype=np.int64)

    nsym = cfg.payload_symbols
    if cfg.full:
        orig_pay = np.zeros((max_packets + 2, nsym), dtype=np.uint16)
        width_cap = cfg.width_cap
        pend_coef = np.zeros((n, cfg.pending_cap, width_cap), dtype=np.uint16)
        pend_pay = np.zeros((n, cfg.pending_cap, nsym), dtype=np.uint16)
        dec_ring = np.zeros((n, cfg.ring_cap, nsym), dtype=np.uint16)
        scratch = np.zeros((cfg.pending_cap, cfg.pending_cap), dtype=np.uint16)
        spay = np.zeros((cfg.pending_cap, nsym), dtype=np.uint16)
        slot_coef = np.zeros(width_cap, dtype=np.uint16)
        x_pay = np.zeros(nsym, dtype=np.uint16)
    else:
        orig_pay = np.zeros((1, 1), dtype=np.uint16)
        pend_coef = np.zeros((1, 1, 1), dtype=np.uint16)
        pend_pay = np.zeros((1, 1, 1), dtype=np.uint16)
        dec_ring = np.zeros((1, 1, 1), dtype=np.uint16)
        scratch = np.zeros((1, 1), dtype=np.uint16)
        spay = np.zeros((1, 1), dtype=np.uint16)
        slot_coef = np.zeros(1, dtype=np.uint16)
        x_pay = np.zeros(1, dtype=np.uint16)

    result = _kernels.simulate(
        np.int64(cfg.slots),
        np.int64(cfg.warmup),
        np.int64(n),
        np.int64(p_num),
        np.int64(denom),
        bool(is_bern),
        np.uint64(inj_threshold),
        rng.as_seed(cfg.seeds.channel),
        rng.as_seed(cfg.seeds.coefficient),
        np.int64(cfg.feedback.b_af),
        bool(cfg.full),
        bool(cfg.check_invariants),
        np.int64(order),
        bool(use_tables),
        np.int64(poly),
        np.int64(q),
        np.int64(nsym),
        np.int64(cfg.ring_cap),
        np.int64(n_capture),
        np.int64(n_trace),
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
    )
    (status, err_slot, err_recv, anum, z_final, enc_ops,
     beacon_rounds, beacons, mismatches, ceil_viol) = result

    if status == _kernels.STATUS_SINGULAR:
        raise DecodingError(
            f"slot {err_slot}, receiver {err_recv}: singular reduced system"
        )
    if status != _kernels.STATUS_OK:
        msg = _STATUS_MESSAGES.get(int(status), f"status {status}")
        where = f"slot {err_slot}" + (f", receiver {err_recv}" if err_recv >= 0 else "")
        raise SimInvariantError(f"{where}: {msg}")

    renewal_t = [cap_t[i, : cap_fill[i]].copy() for i in range(n_capture)]
    renewal_k = [cap_k[i, : cap_fill[i]].copy() for i in range(n_capture)]

    return Metrics(
        config=cfg,
        slots_observed=cfg.slots - cfg.warmup,
        arrivals_num=int(anum),
        arrivals_den=denom,
        z_final=int(z_final),
        window_hist=window_hist,
        encoder_ops=int(enc_ops),
        queue_hist=queue_hist,
        delay_hist=delay_hist,
        delay_sum=delay_sum,
        delay_count=delay_count,
        dec_step1=step1_ops,
        dec_step2=step2_ops,
        renew_count=renew_count,
        renew_t_sum=renew_t_sum,
        renew_t2_sum=renew_t2_sum,
        renew_t3_sum=renew_t3_sum,
        renew_t4_sum=renew_t4_sum,
        renew_k_sum=renew_k_sum,
        renewal_t=renewal_t,
        renewal_k=renewal_k,
        beacon_rounds=int(beacon_rounds),
        beacons_detected=int(beacons),
        payload_checked=cfg.full,
        payload_mismatches=int(mismatches),
        step1_tight_ceiling_violations=int(ceil_viol),
        queue_trace=trace_q[:, 1:] if n_trace else None,
    )


# -- estimators (pure functions of Metrics) ----------------------------------


def estimate_delay_ccdf(m: Metrics, i: int = 0) -> dict[int, float]:
    """P(D_i > k) for k = -1, 0, 1, ...; monotone nonincreasing in k."""
    total = int(m.delay_count[i])
    if total == 0:
        raise ValueError(f"receiver {i} decoded no packets")
    hist = m.delay_hist[i]
    tail = total
    out = {-1: 1.0}
    for k in range(hist.shape[0]):
        tail -= int(hist[k])
        out[k] = tail / total
        if tail == 0:
            break
    return out


def window_ccdf(m: Metrics) -> dict[int, float]:
    """P(W_n > k) from the window histogram."""
    total = int(m.window_hist.sum())
    tail = total
    out = {-1: 1.0}
    for k in range(m.window_hist.shape[0]):
        tail -= int(m.window_hist[k])
        out[k] = tail / total
        if tail == 0:
            break
    return out


@dataclass(frozen=True)
class SummaryScalars:
    mean_delay: np.ndarray
    mean_delay_worst: float
    mean_window: float
    window_ccdf: dict[int, float]
    decode_ops_per_packet: np.ndarray
    decode_ops_r0: float
    decode_ops_worst: float


def estimate_scalars(m: Metrics) -> SummaryScalars:
    """Per-receiver mean delay, time-average window, decode ops per packet."""
    if int(m.delay_count.sum()) == 0:
        raise ValueError("no packets decoded; cannot form delay/complexity averages")
    mean_delay = m.delay_sum / np.maximum(m.delay_count, 1)
    ops = (m.dec_step1 + m.dec_step2) / np.maximum(m.delay_count, 1)
    return SummaryScalars(
        mean_delay=mean_delay,
        mean_delay_worst=float(mean_delay.max()),
        mean_window=m.encoder_ops / m.slots_observed,
        window_ccdf=window_ccdf(m),
        decode_ops_per_packet=ops,
        decode_ops_r0=float(ops[0]),
        decode_ops_worst=float(ops.max()),
    )


@dataclass(frozen=True)
class WaldCheck:
    records: int
    mean_interval: float
    mean_interval_sq: float
    ratio: float
    ratio_se: float
    bound: float
    conclusive: bool
    ok: bool


def empirical_wald_check(m: Metrics, i: int = 0, min_records: int = 10_000) -> WaldCheck:
    """Sample moments of the decoding interval against the stopping-time bound.

    Requires constant injection; with fewer than min_records renewal records
    the check is flagged inconclusive.  The bound is
    gamma(1-gamma)/(gamma-lambda)^2 + 2/(gamma-lambda) for the receiver's
    own erasure rate; the standard error of the ratio estimator comes from
    the delta method.
    """
    if m.config.injection.kind != "constant":
        raise ValueError("interval-moment bound applies to constant injection only")
    cnt = int(m.renew_count[i])
    lam = float(m.config.injection.rate)
    gam = m.config.gammas[i]
    bound = gam * (1 - gam) / (gam - lam) ** 2 + 2 / (gam - lam)
    if cnt < 2:
        return WaldCheck(cnt, float("nan"), float("nan"), float("nan"),
                         float("nan"), bound, False, False)
    e_t = m.renew_t_sum[i] / cnt
    e_t2 = m.renew_t2_sum[i] / cnt
    e_t3 = m.renew_t3_sum[i] / cnt
    e_t4 = m.renew_t4_sum[i] / cnt
    ratio = e_t2 / e_t
    # delta method on R = E[T^2]/E[T]: Var(T^2 - R T) / (n * E[T]^2)
    var_num = (e_t4 - 2 * ratio * e_t3 + ratio * ratio * e_t2) - (e_t2 - ratio * e_t) ** 2
    se = float(np.sqrt(max(var_num, 0.0) / cnt) / e_t)
    conclusive = cnt >= min_records
    return WaldCheck(
        records=cnt,
        mean_interval=float(e_t),
        mean_interval_sq=float(e_t2),
        ratio=float(ratio),
        ratio_se=se,
        bound=bound,
        conclusive=conclusive,
        ok=bool(conclusive and ratio <= bound + 3 * se),
    )


def matched(cfg: SimConfig, **overrides) -> SimConfig:
    """A config differing only in the given fields, for matched-seed
    comparisons (same channel/coefficient draws, different policy knobs)."""
    return replace(cfg, **overrides)
