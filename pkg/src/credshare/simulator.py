"""Discrete-event churn simulation over the pricing game, with a ledger.

A scenario is a time-sorted list of join/leave/settle events against one
uploader. Every join or leave re-solves the game over the peers currently
present (with their live ledger balances as credits) and opens a new
timeline epoch; a settle event charges each downloader price * allocation
out of its balance and credits the uploader, leaving the epoch untouched.
Spending therefore lowers a peer's priority ratio at the next churn event,
which is the mechanism's intended feedback.

The event loop is single threaded and deterministic: identical scenarios
produce identical timelines and ledgers.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import ValidationError
from .model import Equilibrium, GameInstance, PeerProfile
from .solver import solve

INFINITY = float("inf")


class EventKind(Enum):
    JOIN = "join"
    LEAVE = "leave"
    SETTLE = "settle"


@dataclass(frozen=True)
class ScenarioEvent:
    time: float
    kind: EventKind
    peer: Optional[PeerProfile] = None   # join
    peer_id: Optional[str] = None        # leave
    duration: float = 1.0                # settle; recorded, not scaled

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))
        if self.time < 0:
            raise ValidationError(f"event time must be >= 0, got {self.time}")
        if self.kind is EventKind.JOIN:
            if self.peer is None:
                raise ValidationError("join event requires a peer profile")
        elif self.kind is EventKind.LEAVE:
            if not self.peer_id:
                raise ValidationError("leave event requires a peer id")
        elif self.kind is EventKind.SETTLE:
            if self.duration < 0:
                raise ValidationError("settle duration must be >= 0")


@dataclass(frozen=True)
class LedgerEntry:
    time: float
    payer: str
    payee: str
    amount: float


@dataclass
class Ledger:
    """Credit balances (uploader included) plus the transaction log."""

    uploader_id: str = "uploader"
    balances: Dict[str, float] = field(default_factory=dict)
    log: List[LedgerEntry] = field(default_factory=list)
    exhausted: set = field(default_factory=set)

    def __post_init__(self):
        self.balances.setdefault(self.uploader_id, 0.0)

    def register(self, peer_id: str, credits: float):
        # first appearance endows the account; a rejoining peer keeps its
        # earned-and-spent balance rather than resetting it
        if peer_id not in self.balances:
            self.balances[peer_id] = float(credits)

    def balance(self, account: str) -> float:
        return self.balances[account]

    def total(self) -> float:
        return sum(self.balances.values())

    def transfer(self, time: float, payer: str, payee: str, amount: float):
        self.balances[payer] -= amount
        self.balances[payee] += amount
        self.log.append(LedgerEntry(time, payer, payee, amount))


def apply_transaction(ledger: Ledger, eq: Equilibrium, uploader_id: str,
                      time: float) -> Ledger:
    """Charge each allocated downloader price * bandwidth to the uploader.

    A payer short of the full charge pays out its remaining balance and is
    flagged credit-exhausted; the total of all balances is conserved.
    """
    for peer_id, bandwidth in eq.allocation.items():
        amount = eq.price * bandwidth
        if amount == 0.0:
            continue
        available = ledger.balance(peer_id)
        if amount > available:
            amount = available
            ledger.exhausted.add(peer_id)
            if amount == 0.0:
                continue
        ledger.transfer(time, peer_id, uploader_id, amount)
    return ledger


def churn_check(old: Optional[Equilibrium], new: Optional[Equilibrium],
                departed_contribution: Optional[float] = None,
                tolerance: float = 1e-9) -> bool:
    """Compare uploader revenue across a churn event.

    With departed_contribution given (a leave), checks the revenue of the
    new equilibrium is at least the old one minus the departed peer's
    contribution; this holds for every instance of this game. Without it
    (a join), reports whether revenue strictly increased, which need not
    hold (a joining peer with a low enough priority ratio is simply
    rejected and the equilibrium is sustained).
    """
    old_rev = old.revenue if old is not None else 0.0
    new_rev = new.revenue if new is not None else 0.0
    if departed_contribution is not None:
        return new_rev >= old_rev - departed_contribution - tolerance
    return new_rev > old_rev + tolerance


@dataclass(frozen=True)
class Epoch:
    start: float
    end: float
    equilibrium: Optional[Equilibrium]  # None when no peers are present
    peer_ids: tuple
    game: Optional[GameInstance] = None  # the instance the epoch was solved from


@dataclass(frozen=True)
class TimelineRecord:
    epochs: tuple

    def to_csv(self, oracle_check: bool = False) -> str:
        """Rows per (epoch, peer), sorted by (epoch_start, peer_id).

        With oracle_check, each row gains an agreement flag comparing the
        epoch's price against an independent grid search on its instance.
        """
        from .formatting import csv_text

        rows = []
        for ep in self.epochs:
            agree = ""
            if oracle_check and ep.equilibrium is not None and ep.game is not None:
                from .oracle import GridSpec, grid_search_price, revenue_agreement

                spec = GridSpec.for_game(ep.game)
                _, oracle_revenue = grid_search_price(ep.game, spec)
                close = revenue_agreement(ep.game, ep.equilibrium.revenue,
                                          oracle_revenue, spec)
                agree = "yes" if close else "no"
            if ep.equilibrium is None:
                row = [ep.start, ep.end, "", "", "", ""]
                if oracle_check:
                    row.append("")
                rows.append(tuple(row))
                continue
            eq = ep.equilibrium
            for peer_id in sorted(ep.peer_ids):
                row = [ep.start, ep.end, eq.price, peer_id,
                       eq.allocation[peer_id], eq.utilities[peer_id]]
                if oracle_check:
                    row.append(agree)
                rows.append(tuple(row))
        header = ["epoch_start", "epoch_end", "price", "peer_id",
                  "allocation", "utility"]
        if oracle_check:
            header.append("oracle_agrees")
        return csv_text(tuple(header), rows)


def ledger_csv(ledger: Ledger) -> str:
    from .formatting import csv_text

    rows = [("transaction", e.time, e.payer, e.payee, e.amount)
            for e in ledger.log]
    for account in sorted(ledger.balances):
        rows.append(("balance", "", "", account, ledger.balances[account]))
    return csv_text(("record", "time", "payer", "payee", "amount"), rows)


def validate_scenario(events: Sequence[ScenarioEvent], uploader_id: str):
    """Reject unordered events and membership errors before execution."""
    last_time = 0.0
    present = set()
    for ev in events:
        if ev.time < last_time:
            raise ValidationError(
                f"events out of order at t={ev.time} (after t={last_time})"
            )
        last_time = ev.time
        if ev.kind is EventKind.JOIN:
            pid = ev.peer.id
            if pid == uploader_id:
                raise ValidationError(f"peer id {pid!r} collides with the uploader")
            if pid in present:
                raise ValidationError(f"join of already-present peer {pid!r}")
            present.add(pid)
        elif ev.kind is EventKind.LEAVE:
            if ev.peer_id not in present:
                raise ValidationError(f"leave of absent peer {ev.peer_id!r}")
            present.remove(ev.peer_id)


def run_scenario(uploader_capacity: float, events: Sequence[ScenarioEvent],
                 uploader_id: str = "uploader") -> Tuple[TimelineRecord, Ledger]:
    """Drive the event loop; return the epoch timeline and the ledger.

    The timeline starts at the first event; each join/leave closes the open
    epoch and opens a new one under the re-solved equilibrium (None while
    no peers are present). The final epoch is closed at +inf. Zero-length
    epochs created by same-time events are dropped.
    """
    uploader_capacity = float(uploader_capacity)
    if uploader_capacity <= 0:
        raise ValidationError("uploader_capacity must be > 0")
    events = list(events)
    validate_scenario(events, uploader_id)

    ledger = Ledger(uploader_id=uploader_id)
    epochs: List[Epoch] = []
    present: Dict[str, PeerProfile] = {}
    open_start: Optional[float] = None
    open_eq: Optional[Equilibrium] = None
    open_game: Optional[GameInstance] = None
    open_ids: tuple = ()

    def close_epoch(end_time: float):
        nonlocal open_start
        if open_start is None:
            return
        if end_time > open_start:
            epochs.append(Epoch(open_start, end_time, open_eq, open_ids, open_game))
        open_start = None

    def resolve():
        if not present:
            return None, None
        roster = [
            PeerProfile(p.id, ledger.balance(p.id), p.capacity)
            for p in present.values()
        ]
        game = GameInstance(uploader_capacity, roster)
        return solve(game), game

    for ev in events:
        if ev.kind is EventKind.SETTLE:
            if open_eq is not None:
                apply_transaction(ledger, open_eq, uploader_id, ev.time)
            continue
        close_epoch(ev.time)
        if ev.kind is EventKind.JOIN:
            ledger.register(ev.peer.id, ev.peer.credits)
            present[ev.peer.id] = ev.peer
        else:
            del present[ev.peer_id]
        open_start = ev.time
        open_eq, open_game = resolve()
        open_ids = tuple(present)

    close_epoch(INFINITY)
    return TimelineRecord(tuple(epochs)), ledger
