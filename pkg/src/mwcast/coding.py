"""Packet model, injection processes, and the moving-window encoder.

The arrival accumulator is an exact rational: decoding moments compare
floor(A[t]) against integer counters, and any floating-point drift would
corrupt delay statistics over 10^7-slot runs.  Internally A[t] is tracked as
an integer numerator over the fixed denominator of the injection rate.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng
from .galois import FieldContext


@dataclass(frozen=True)
class Packet:
    """m-th assembled packet; symbols has length L/q (None in dynamics mode)."""

    id: int
    symbols: np.ndarray | None = None


@dataclass(frozen=True)
class CodedPacket:
    """Random linear combination over the window lo..hi emitted in one slot.

    hi < lo denotes an idle slot (empty window).  Coefficients are indexed
    by global packet id, offset by lo; they are re-derivable from the shared
    coefficient seed and are therefore never transmitted.
    """

    slot: int
    lo: int
    hi: int
    coefficients: np.ndarray | None = None
    payload: np.ndarray | None = None

    @property
    def width(self) -> int:
        return max(self.hi - self.lo + 1, 0)

    @property
    def idle(self) -> bool:
        return self.hi < self.lo


class InjectionProcess:
    """i.i.d. per-slot packet injection with mean rate in (0, 1).

    constant: a[t] = rate every slot (exact rational).
    bernoulli: a[t] in {0, 1} with P(a[t] = 1) = rate.
    """

    KINDS = ("constant", "bernoulli")

    def __init__(self, kind: str, rate):
        if kind not in self.KINDS:
            raise ValueError(f"injection kind must be one of {self.KINDS}, got {kind!r}")
        if isinstance(rate, float):
            raise TypeError(
                "injection rate must be exact (Fraction, str or int pair), not float"
            )
        rate = Fraction(rate)
        if not 0 < rate < 1:
            raise ValueError(f"injection rate must be in (0, 1), got {rate}")
        self.kind = kind
        self.rate = rate

    @property
    def numerator(self) -> int:
        return self.rate.numerator

    @property
    def denominator(self) -> int:
        return self.rate.denominator

    def amount(self, t: int, seed: int = 0) -> Fraction:
        """a[t]; the seed keys the Bernoulli stream and is ignored otherwise."""
        if self.kind == "constant":
            return self.rate
        threshold = rng.probability_threshold(self.rate)
        return Fraction(rng.injection_indicator(seed, threshold, t))

    def __repr__(self) -> str:
        return f"InjectionProcess({self.kind!r}, {str(self.rate)!r})"


class CounterPayloadSource:
    """Deterministic counter-based payload bytes, for bit-exact verification."""

    def __init__(self, seed: int, symbols_per_packet: int, order: int):
        self.seed = seed
        self.symbols_per_packet = symbols_per_packet
        self.order = order

    def symbols(self, packet_id: int) -> np.ndarray:
        return rng.payload_symbols(
            self.seed, packet_id, self.symbols_per_packet, self.order
        )


class EncoderState:
    """Transmitter-side state: exact arrival accumulator, departure counter,
    and the buffer of packets with ids Z[t]+1 .. floor(A[t])."""

    def __init__(
        self,
        field: FieldContext | None = None,
        coefficient_seed: int = 0,
        payload_source: CounterPayloadSource | None = None,
    ):
        self.field = field
        self.coefficient_seed = coefficient_seed
        self.payload_source = payload_source
        self.arrivals = Fraction(0)
        self.departed = 0
        self.slot = 0
        self.buffer: deque[Packet] = deque()
        self.assembly_slots: dict[int, int] = {}

    @property
    def assembled(self) -> int:
        return int(self.arrivals)

    def inject(self, t: int, proc: InjectionProcess, injection_seed: int = 0) -> None:
        """Advance the arrival accumulator by a[t] and assemble new packets."""
        if t != self.slot + 1:
            raise ValueError(f"slots must advance by one: at {self.slot}, got {t}")
        self.slot = t
        before = self.assembled
        self.arrivals += proc.amount(t, injection_seed)
        for m in range(before + 1, self.assembled + 1):
            symbols = None
            if self.payload_source is not None:
                symbols = self.payload_source.symbols(m)
            self.buffer.append(Packet(m, symbols))
            self.assembly_slots[m] = t

    def encode(self, t: int) -> CodedPacket:
        """Coded packet for slot t over the window Z[t-1]+1 .. floor(A[t])."""
        if t != self.slot:
            raise ValueError("encode must follow inject within the same slot")
        lo = self.departed + 1
        hi = self.assembled
        if hi < lo:
            return CodedPacket(slot=t, lo=lo, hi=hi)
        coeffs = None
        payload = None
        if self.field is not None:
            coeffs = rng.coefficients(self.coefficient_seed, t, lo, hi, self.field.order)
            if self.payload_source is not None:
                nsym = self.payload_source.symbols_per_packet
                payload = np.zeros(nsym, dtype=np.uint16)
                for pkt, c in zip(self.buffer, coeffs):
                    self.field.addmul(payload, int(c), pkt.symbols)
        return CodedPacket(slot=t, lo=lo, hi=hi, coefficients=coeffs, payload=payload)

    def remove_oldest(self, count: int = 1) -> None:
        """Drop the ``count`` lowest-id packets; Z increases accordingly."""
        if count < 1:
            raise ValueError("count must be >= 1")
        if len(self.buffer) < count:
            raise RuntimeError(
                f"cannot remove {count} packets from a buffer of {len(self.buffer)}: "
                "feedback logic requested an unassembled or already-removed packet"
            )
        for _ in range(count):
            self.buffer.popleft()
        self.departed += count

    def window_size(self) -> int:
        return max(self.assembled - self.departed, 0)
