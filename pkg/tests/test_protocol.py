import random

import pytest

from credshare import (
    BargainConfig,
    ConvergenceError,
    LN2,
    MessageKind,
    ProtocolAbort,
    ValidationError,
    replay,
    run_bargaining,
    run_direct,
    solve,
)

from conftest import make_game, random_oversubscribed


# --- direct scheme -----------------------------------------------------------

def test_direct_single_round_matches_solve(example4_game):
    eq, trace = run_direct(example4_game)
    assert eq == solve(example4_game)
    assert len(trace.rounds) == 1
    assert trace.rounds[0].price == eq.price
    assert replay(trace, example4_game)


def test_direct_is_delivery_order_insensitive(example4_game):
    equilibria = {run_direct(example4_game, seed=s)[0].price for s in range(5)}
    assert len(equilibria) == 1
    base = run_direct(example4_game, seed=0)[0]
    for s in range(1, 5):
        other = run_direct(example4_game, seed=s)[0]
        assert other == base


def test_direct_message_flow_and_sequencing(example4_game):
    _, trace = run_direct(example4_game)
    kinds = [m.kind for m in trace.messages]
    assert kinds.count(MessageKind.REQUEST) == 4
    assert kinds.count(MessageKind.PRICE) == 4
    assert kinds.count(MessageKind.DEMAND) == 4
    assert kinds.count(MessageKind.GRANT) == 4
    assert kinds.count(MessageKind.STREAM_START) == 4
    by_sender = {}
    for m in trace.messages:
        by_sender.setdefault(m.sender, []).append(m.seq)
    for sender, seqs in by_sender.items():
        # strictly increasing as assigned; delivery order shuffles batches
        assert sorted(seqs) == list(range(1, len(seqs) + 1))
        if sender != "uploader":
            assert seqs == sorted(seqs)  # one message per round per downloader
    # a downloader's first message is its request
    for m in trace.messages:
        if m.seq == 1 and m.sender != "uploader":
            assert m.kind is MessageKind.REQUEST


def test_direct_aborts_on_misreport(example4_game):
    with pytest.raises(ProtocolAbort) as exc:
        run_direct(example4_game, misreport={"peer2": lambda x: x + 0.5})
    assert "peer2" in str(exc.value)
    assert exc.value.trace is not None


def test_direct_aborts_without_demand():
    game = make_game(1.0, [(0, 2), (0, 1)])
    with pytest.raises(ProtocolAbort):
        run_direct(game)


def test_direct_single_peer():
    game = make_game(2.0, [(400, 2)])
    eq, trace = run_direct(game)
    assert eq == solve(game)
    assert len(trace.rounds) == 1


def test_tampered_trace_fails_replay(example4_game):
    from credshare.protocol import TraceRound

    _, trace = run_direct(example4_game)
    r = trace.rounds[0]
    demands = dict(r.demands)
    demands["peer1"] += 1e-9
    trace.rounds[0] = TraceRound(r.index, r.price, demands, r.total, r.accepted)
    assert not replay(trace, example4_game)


# --- bargaining scheme -------------------------------------------------------

def test_bargaining_walks_down_to_the_solved_price(example4_game):
    eq, trace = run_bargaining(example4_game)
    mu_star = solve(example4_game).price
    assert trace.rounds[0].price == max(
        p.cutoff_price for p in example4_game.peers
    )
    assert abs(eq.total_allocation - 2.0) < 0.001
    assert abs(eq.price - mu_star) < 0.01
    assert len(trace.rounds) <= 8300
    assert not trace.refinements
    assert replay(trace, example4_game)


def test_bargaining_single_peer():
    game = make_game(2.0, [(400, 2)])
    eq, _ = run_bargaining(game)
    assert abs(eq.price - 400.0 / (4.0 * LN2)) < 0.01


def test_bargaining_trace_monotone(example4_game):
    _, trace = run_bargaining(example4_game, BargainConfig(step=0.5))
    accepted = trace.accepted_rounds()
    for a, b in zip(accepted, accepted[1:]):
        assert b.price < a.price
        assert b.total >= a.total


def test_bargaining_coarse_step_refines(example4_game):
    eq, trace = run_bargaining(example4_game, BargainConfig(step=50.0))
    assert trace.refinements
    assert trace.diagnostics
    assert abs(eq.total_allocation - 2.0) < 0.001
    assert replay(trace, example4_game)
    # probe rounds are recorded but rolled back
    assert any(not r.accepted for r in trace.rounds)


def test_bargaining_refinement_disabled_raises(example4_game):
    with pytest.raises(ConvergenceError) as exc:
        run_bargaining(example4_game, BargainConfig(step=50.0, max_refinements=0))
    assert exc.value.trace is not None
    assert exc.value.trace.diagnostics


def test_bargaining_max_rounds_exceeded(example4_game):
    with pytest.raises(ConvergenceError) as exc:
        run_bargaining(example4_game, BargainConfig(max_rounds=10))
    assert len(exc.value.trace.rounds) == 10


def test_bargaining_tolerance_larger_than_capacity_stops_at_start(example4_game):
    eq, trace = run_bargaining(example4_game, BargainConfig(tolerance=5.0))
    assert len(trace.rounds) == 1
    assert eq.total_allocation == 0.0


def test_bargaining_initial_price_below_market_rejected(example4_game):
    with pytest.raises(ValidationError):
        run_bargaining(example4_game, BargainConfig(initial_price=100.0))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"step": 0.0},
        {"step": -1.0},
        {"tolerance": 0.0},
        {"max_rounds": 0},
        {"max_refinements": -1},
    ],
)
def test_bargain_config_field_validation(kwargs):
    with pytest.raises(ValidationError):
        BargainConfig(**kwargs)


def test_bargaining_requires_credited_peers():
    with pytest.raises(ValidationError):
        run_bargaining(make_game(1.0, [(0, 2)]))


def test_bargaining_round_budget(example4_game):
    cfg = BargainConfig()
    _, trace = run_bargaining(example4_game, cfg)
    mu0 = trace.rounds[0].price
    mu_star = solve(example4_game).price
    decrements = len(trace.accepted_rounds()) - 1
    assert decrements <= (mu0 - mu_star) / cfg.step + 1


def test_bargaining_message_log_optional(example4_game):
    _, lean = run_bargaining(example4_game, BargainConfig(step=1.0))
    assert not lean.messages
    _, logged = run_bargaining(
        example4_game, BargainConfig(step=1.0, log_messages=True)
    )
    assert logged.messages
    by_sender = {}
    for m in logged.messages:
        by_sender.setdefault(m.sender, []).append(m.seq)
    for sender, seqs in by_sender.items():
        assert sorted(seqs) == list(range(1, len(seqs) + 1))
        if sender != "uploader":
            assert seqs == sorted(seqs)


def test_both_schemes_agree_on_random_instances():
    rng = random.Random(103)
    checked = 0
    while checked < 100:
        game = random_oversubscribed(rng)
        direct_eq, _ = run_direct(game)
        top = max(p.cutoff_price for p in game.peers if p.credits > 0)
        bottom = min(p.saturation_price for p in game.peers if p.credits > 0)
        step = max((top - 0.5 * bottom) * 1e-3, 1e-9)
        cfg = BargainConfig(
            step=step,
            tolerance=max(1e-4 * game.uploader_capacity, 1e-9),
            max_rounds=100_000,
            max_refinements=14,
        )
        bargain_eq, trace = run_bargaining(game, cfg)
        final_step = trace.refinements[-1].new_step if trace.refinements else step
        assert abs(bargain_eq.price - direct_eq.price) <= step + 1e-9
        # per-peer agreement within the local demand slope over the final step
        for p in game.peers:
            low = min(bargain_eq.price, direct_eq.price)
            slope = p.credits / (low * low * LN2)
            bound = slope * (final_step + 1e-12) + 1e-9
            assert abs(
                bargain_eq.allocation[p.id] - direct_eq.allocation[p.id]
            ) <= bound
        checked += 1


def test_bargaining_saturated_capacity_within_band():
    # capacity equal to total demand: the walk ends exactly at saturation
    game = make_game(3.0, [(400, 2), (50, 1)])
    eq, _ = run_bargaining(game, BargainConfig(step=0.05, tolerance=1e-3))
    assert abs(eq.total_allocation - 3.0) < 1e-3


def test_bargaining_unreachable_capacity_errors():
    # demand can never reach the capacity: all peers saturate below it
    game = make_game(3.5, [(400, 2), (50, 1)])
    with pytest.raises(ConvergenceError):
        run_bargaining(game, BargainConfig(step=0.05, tolerance=1e-3))
