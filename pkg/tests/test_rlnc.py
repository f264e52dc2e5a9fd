import numpy as np
import pytest

from mwcast import InjectionProcess
from mwcast.rlnc import RlncConfig, batch_completion_slots, run_rlnc, sweep_batch_sizes


def test_config_validation():
    inj = InjectionProcess("constant", "1/2")
    with pytest.raises(ValueError):
        RlncConfig(batch_size=0, n=1, gammas=(0.6,), injection=inj, slots=100)
    with pytest.raises(ValueError):
        RlncConfig(batch_size=4, n=2, gammas=(0.6,), injection=inj, slots=100)


def test_batch_size_one_perfect_channel_zero_delay():
    # B=1 degenerates to per-packet ARQ; gamma=1 decodes in the arrival slot
    cfg = RlncConfig(
        batch_size=1,
        n=1,
        gammas=(1.0,),
        injection=InjectionProcess("constant", "1/2"),
        slots=1_000,
    )
    m = run_rlnc(cfg)
    assert m.packets == 500
    assert m.delay_sum == 0
    assert not m.saturated


def test_instant_batch_fill_hand_simulation():
    # four packets available at once, gamma=1: the batch occupies exactly
    # four slots and intra-batch delays are {3,2,1,0}
    gen = np.random.default_rng(0)
    fill = np.array([10], dtype=np.int64)
    completion = batch_completion_slots(fill, 4, (1.0,), gen)
    assert completion[0] == 13
    delays = completion[0] - np.array([10, 10, 10, 10])
    assert sorted(delays) == [3, 3, 3, 3]
    # with staggered arrivals 7,8,9,10 the delays become {6,5,4,3}... the
    # completion slot is shared, only assembly times differ
    packets = np.array([7, 8, 9, 10])
    assert list(completion[0] - packets) == [6, 5, 4, 3]


def test_event_driven_matches_slot_level_reference():
    # brute-force slot-level oracle for one receiver, gamma=1, B=4, lam=4/5
    cfg = RlncConfig(
        batch_size=4,
        n=1,
        gammas=(1.0,),
        injection=InjectionProcess("constant", "4/5"),
        slots=200,
    )
    m = run_rlnc(cfg)
    # reference: packet m assembles at ceil(5m/4); batch of 4 fills at the
    # 4th; transmission takes exactly 4 slots at gamma=1
    arrivals = [(m * 5 + 3) // 4 for m in range(1, (200 * 4) // 5 + 1)]
    prev_complete = 0
    expect_delay_sum = 0
    batches = 0
    for j in range(len(arrivals) // 4):
        fill = arrivals[4 * j + 3]
        start = max(prev_complete + 1, fill)
        complete = start + 4 - 1
        if complete > 200:
            break
        prev_complete = complete
        batches += 1
        expect_delay_sum += sum(complete - arrivals[4 * j + i] for i in range(4))
    assert m.batches == batches
    assert m.delay_sum == expect_delay_sum


def test_negative_binomial_completion_mean():
    # single-receiver batch completion is NegBin(B, gamma): mean B/gamma
    gen = np.random.default_rng(42)
    b, gamma, trials = 20, 0.6, 4_000
    fills = np.arange(1, trials + 1, dtype=np.int64) * 10_000
    completion = batch_completion_slots(fills, b, (gamma,), gen)
    service = completion - fills + 1
    mean = service.mean()
    var = b * (1 - gamma) / gamma**2
    se = (var / trials) ** 0.5
    assert abs(mean - b / gamma) < 4 * se


def test_saturation_flagged_when_batch_cannot_sustain_load():
    # n=100 at rho=0.9 with a tiny batch: completion ~ max of geometrics
    # exceeds the fill interval, head-of-line lag grows without bound
    cfg = RlncConfig(
        batch_size=5,
        n=100,
        gammas=(0.6,) * 100,
        injection=InjectionProcess("constant", "27/50"),
        slots=100_000,
        seed=1,
    )
    m = run_rlnc(cfg)
    assert m.saturated


def test_complexity_accounting():
    cfg = RlncConfig(
        batch_size=8,
        n=2,
        gammas=(0.9, 0.9),
        injection=InjectionProcess("constant", "1/2"),
        slots=20_000,
        seed=3,
    )
    m = run_rlnc(cfg)
    assert m.mean_window == 8.0
    assert m.decode_ops_per_packet == 64.0
    assert not m.saturated


def test_sweep_picks_best_feasible():
    inj = InjectionProcess("constant", "27/50")
    cfg = RlncConfig(batch_size=50, n=20, gammas=(0.6,) * 20,
                     injection=inj, slots=200_000, seed=0)
    sweep = sweep_batch_sizes(cfg, [5, 50, 100, 200])
    assert sweep.best is not None
    assert not sweep.best.saturated
    feasible = [p for p in sweep.results if not p.saturated and p.batches > 0]
    assert sweep.best.mean_delay == min(p.mean_delay for p in feasible)
