"""Brute-force references used to certify the exact solver.

Two independent routes: a grid search over prices for the uploader's
problem (admissible iff demand fits the capacity), and a grid search over
purchases for a single downloader's problem (raw utility, no closed form).
Both are deliberately dumb and vectorized with numpy; they exist to catch
mistakes in the closed forms, not to be fast paths.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import OracleError, ValidationError
from .model import LN2, GameInstance, PeerProfile

DEFAULT_RESOLUTION_FRACTION = 1e-4


@dataclass(frozen=True)
class GridSpec:
    """A closed price window and the step to sweep it with."""

    price_min: float
    price_max: float
    resolution: float

    def __post_init__(self):
        if not (0 < self.price_min < self.price_max):
            raise ValidationError(
                f"need 0 < price_min < price_max, got [{self.price_min}, {self.price_max}]"
            )
        if self.resolution <= 0:
            raise ValidationError(f"resolution must be > 0, got {self.resolution}")

    @classmethod
    def for_game(cls, game: GameInstance,
                 fraction: float = DEFAULT_RESOLUTION_FRACTION) -> "GridSpec":
        """Window from half the lowest saturation price up to the top cutoff."""
        credited = [p for p in game.peers if p.credits > 0]
        if not credited:
            raise ValidationError("grid window undefined without credited peers")
        price_min = 0.5 * min(p.saturation_price for p in credited)
        price_max = max(p.cutoff_price for p in credited)
        if price_min <= 0:
            price_min = price_max * 1e-6
        return cls(price_min, price_max, fraction * (price_max - price_min))

    def prices(self) -> np.ndarray:
        count = int(math.floor((self.price_max - self.price_min) / self.resolution)) + 1
        return self.price_min + self.resolution * np.arange(count)


def demand_on_grid(game: GameInstance, prices: np.ndarray) -> np.ndarray:
    """Vectorized total demand at each price (same piecewise rule, re-derived)."""
    total = np.zeros_like(prices, dtype=float)
    for p in game.peers:
        if p.credits <= 0:
            continue
        interior = p.credits / (prices * LN2) - p.capacity
        x = np.clip(interior, 0.0, p.capacity)
        x = np.where(prices <= p.saturation_price, p.capacity, x)
        x = np.where(prices > p.cutoff_price, 0.0, x)
        total += x
    return total


def grid_search_price(game: GameInstance,
                      spec: Optional[GridSpec] = None) -> Tuple[float, float]:
    """Exhaustive price search; returns (best price, best revenue).

    A grid price is admissible only when the demand it draws fits the
    capacity (the uploader cannot ration a uniform price). If the window
    contains no admissible price it is widened upward once by its own
    width; a second failure raises OracleError.
    """
    if spec is None:
        spec = GridSpec.for_game(game)
    u_k = game.uploader_capacity

    def search(s: GridSpec):
        prices = s.prices()
        demand = demand_on_grid(game, prices)
        admissible = demand <= u_k
        if not np.any(admissible):
            return None
        revenue = np.where(admissible, prices * demand, -np.inf)
        best = revenue.max()
        # highest admissible price on revenue ties
        idx = np.flatnonzero(revenue == best)[-1]
        return float(prices[idx]), float(revenue[idx])

    found = search(spec)
    if found is None:
        widened = GridSpec(spec.price_max,
                           spec.price_max + (spec.price_max - spec.price_min),
                           spec.resolution)
        found = search(widened)
    if found is None:
        raise OracleError(
            f"no admissible price in [{spec.price_min}, {spec.price_max}] "
            "or the widened window"
        )
    return found


def revenue_agreement(game: GameInstance, solver_revenue: float,
                      oracle_revenue: float, spec: GridSpec) -> bool:
    """Whether two revenues are within one grid cell of each other.

    The slack bounds |d(price*demand)/d price| times the resolution:
    demand is at most the capacity near an admissible optimum and
    price * |demand slope| is at most capacity plus total peer capacity.
    """
    slack = spec.resolution * (2.0 * game.uploader_capacity + game.total_capacity)
    slack += 1e-9 * (1.0 + abs(solver_revenue))
    return abs(oracle_revenue - solver_revenue) <= slack


class ProbeResult(NamedTuple):
    utility: float
    bandwidth: float


def deviation_probe(peer: PeerProfile, price: float, steps: int) -> ProbeResult:
    """Best utility over a uniform purchase grid on [0, capacity].

    Certifies best_response from the raw objective: credit-weighted
    satisfaction minus cost, evaluated at steps+1 grid points.
    """
    if price <= 0:
        raise ValidationError(f"price must be > 0, got {price}")
    if steps < 2:
        raise ValidationError(f"steps must be >= 2, got {steps}")
    x = np.linspace(0.0, peer.capacity, steps + 1)
    utility = peer.credits * np.log2(1.0 + x / peer.capacity) - price * x
    idx = int(np.argmax(utility))
    return ProbeResult(float(utility[idx]), float(x[idx]))
