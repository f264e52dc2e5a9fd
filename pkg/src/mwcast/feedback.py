"""Beacon-based anonymous feedback synchronising Z across the system.

Each frame ends with one beacon sub-slot.  A receiver that would be cut off
by the pending removal beacons; the transmitter relays any beacon it hears,
so presence/absence is globally visible and the overhead is one sub-slot per
frame regardless of the number of receivers.  No beacon means every receiver
is safely ahead, and the oldest packet(s) leave the encoder buffer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .coding import EncoderState
from .receiver import ReceiverState


@dataclass(frozen=True)
class FeedbackConfig:
    """Frame length in slots; 1 means per-slot feedback."""

    b_af: int = 1

    def __post_init__(self):
        if self.b_af < 1:
            raise ValueError(f"feedback frame length must be >= 1, got {self.b_af}")

    def is_frame_end(self, t: int) -> bool:
        return t % self.b_af == 0


@dataclass
class BeaconBus:
    """OR of all receivers' beacon decisions for one beacon sub-slot."""

    any_beacon: bool = False


def beacon_round(
    receivers: list[ReceiverState],
    encoder: EncoderState,
    t: int,
    cfg: FeedbackConfig,
) -> BeaconBus:
    """One beacon sub-slot: decide removal and resynchronise all Z mirrors.

    b_af = 1: receiver i beacons iff S_i[t] = Z_i[t-1]; no beacon advances Z
    by one.  b_af > 1 (frame ends only): receiver i beacons iff
    S_i[t] < Z_i + b_af, the weakest predicate under which removing a whole
    frame cannot strand any receiver; no beacon advances Z by b_af.
    """
    if not cfg.is_frame_end(t):
        raise ValueError(f"beacon round outside frame end: slot {t}, frame {cfg.b_af}")
    z = encoder.departed
    if cfg.b_af == 1:
        bus = BeaconBus(any(r.seen == z for r in receivers))
        if not bus.any_beacon:
            encoder.remove_oldest(1)
    else:
        bus = BeaconBus(any(r.seen < z + cfg.b_af for r in receivers))
        if not bus.any_beacon:
            encoder.remove_oldest(cfg.b_af)
    for r in receivers:
        r.z_mirror = encoder.departed
    return bus
