"""Evaluation math: grid F1 with best-intersection shift search, weighted
task averaging, macro-F1 for the ask/act classifier, MRR for question
ranking, and win/loss tallies for blinded human comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from typing import Iterable, Sequence

from .world import BlockGrid, GridDelta, diff

CLEAR = "clear"
AMBIGUOUS = "ambiguous"

DEFAULT_MAX_SHIFT = 10


class EmptyInput(Exception):
    pass


class RelevantMissing(Exception):
    def __init__(self, pool_index: int):
        super().__init__(f"pool {pool_index} does not contain its relevant item")
        self.pool_index = pool_index


@dataclass(frozen=True)
class ScoreReport:
    """Per-episode grid score; the offline leaderboard row ingredient."""

    f1: float
    precision: float
    recall: float
    intersection: int
    best_shift: tuple[int, int]
    episode_length: int = 0

    def to_json(self) -> dict:
        return {
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "intersection": self.intersection,
            "bestShift": list(self.best_shift),
            "episodeLength": self.episode_length,
        }


@dataclass(frozen=True)
class BinaryOutcome:
    predicted: str
    actual: str

    def __post_init__(self):
        for v in (self.predicted, self.actual):
            if v not in (CLEAR, AMBIGUOUS):
                raise ValueError(f"label must be {CLEAR!r} or {AMBIGUOUS!r}, got {v!r}")


@dataclass(frozen=True)
class RankedPool:
    candidates: tuple[str, ...]
    relevant: str

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))


@dataclass(frozen=True)
class GameOutcome:
    hit_id: str
    agent_a: str
    agent_b: str
    task_id: str
    winner: str

    def __post_init__(self):
        if self.agent_a == self.agent_b:
            raise ValueError("comparison needs two distinct agents")
        if self.winner not in (self.agent_a, self.agent_b):
            raise ValueError("winner must be one of the two agents")


def argmax_intersection(
    m: GridDelta, t: GridDelta, max_shift: int = DEFAULT_MAX_SHIFT
) -> tuple[tuple[int, int], int]:
    """Best horizontal shift of m onto t and the match count there.

    A shifted entry matches only on full equality: op, position, block id.
    Ties prefer the smallest |dx|+|dz|, then lexicographic (dx, dz).
    """
    if not m.entries or not t.entries:
        return (0, 0), 0
    target = t.entries
    best_count = -1
    best_key = None
    best_shift = (0, 0)
    for dx in range(-max_shift, max_shift + 1):
        for dz in range(-max_shift, max_shift + 1):
            count = len(m.shifted(dx, dz).entries & target)
            key = (-count, abs(dx) + abs(dz), (dx, dz))
            if best_key is None or key < best_key:
                best_key, best_count, best_shift = key, count, (dx, dz)
    return best_shift, best_count


def grid_f1(
    g: BlockGrid,
    g0: BlockGrid,
    t: GridDelta,
    search_shifts: bool = True,
    max_shift: int = DEFAULT_MAX_SHIFT,
    episode_length: int = 0,
) -> ScoreReport:
    """Score the builder's modifications M = diff(g0, g) against target t.

    Precision is matches/|t|, recall matches/|M|, f1 their harmonic mean;
    every zero denominator scores 0 rather than erroring, so an idle agent
    gets f1 = 0. With search_shifts=False only the identity shift is tried.
    """
    m = diff(g0, g)
    if search_shifts:
        shift, intersection = argmax_intersection(m, t, max_shift=max_shift)
    else:
        shift, intersection = (0, 0), len(m.entries & t.entries)
    precision = intersection / len(t) if len(t) else 0.0
    recall = intersection / len(m) if len(m) else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if precision + recall else 0.0
    return ScoreReport(
        f1=f1,
        precision=precision,
        recall=recall,
        intersection=intersection,
        best_shift=shift,
        episode_length=episode_length,
    )


def weighted_average(reports: Sequence[tuple[ScoreReport, int]]) -> float:
    """F1 averaged with weights |T| (blocks needing modification)."""
    if not reports:
        raise EmptyInput("no reports to average")
    total = sum(w for _, w in reports)
    if total <= 0:
        raise EmptyInput("weights sum to zero")
    return sum(r.f1 * w for r, w in reports) / total


def macro_f1(outcomes: Sequence[BinaryOutcome]) -> float:
    """Unweighted mean of per-class F1 over {clear, ambiguous}; a class with
    no true positives scores 0. Exact rational arithmetic internally."""
    if not outcomes:
        raise EmptyInput("no outcomes")
    per_class = []
    for label in (CLEAR, AMBIGUOUS):
        tp = sum(1 for o in outcomes if o.predicted == label and o.actual == label)
        fp = sum(1 for o in outcomes if o.predicted == label and o.actual != label)
        fn = sum(1 for o in outcomes if o.predicted != label and o.actual == label)
        denom = 2 * tp + fp + fn
        per_class.append(Fraction(2 * tp, denom) if denom else Fraction(0))
    return float(sum(per_class) / len(per_class))


def mrr(pools: Sequence[RankedPool]) -> float:
    """Mean reciprocal rank of the relevant item; ranks start at 1.
    Exact rational arithmetic internally (ranks 2 and 3 average to 5/12)."""
    if not pools:
        raise EmptyInput("no pools")
    total = Fraction(0)
    for i, pool in enumerate(pools):
        try:
            rank = pool.candidates.index(pool.relevant) + 1
        except ValueError:
            raise RelevantMissing(i) from None
        total += Fraction(1, rank)
    return float(total / len(pools))


def format_pct(numerator: int, denominator: int) -> str:
    """Percentage with 2 decimals, ties to even: 13/32 -> '40.62'."""
    if denominator == 0:
        return "0.00"
    value = Decimal(numerator) * 100 / Decimal(denominator)
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))


@dataclass
class AgentTally:
    agent: str
    total_games: int = 0
    wins: int = 0
    losses: int = 0
    wins_against: dict[str, int] = field(default_factory=dict)
    losses_against: dict[str, int] = field(default_factory=dict)

    def games_against(self, opponent: str) -> int:
        return self.wins_against.get(opponent, 0) + self.losses_against.get(opponent, 0)

    def to_json(self) -> dict:
        return {
            "agent": self.agent,
            "totalGames": self.total_games,
            "totalWins": self.wins,
            "totalLosses": self.losses,
            "winPct": format_pct(self.wins, self.total_games),
            "lossPct": format_pct(self.losses, self.total_games),
            "winsAgainst": {
                opp: {"count": n, "pct": format_pct(n, self.games_against(opp))}
                for opp, n in sorted(self.wins_against.items())
            },
            "lossesAgainst": {
                opp: {"count": n, "pct": format_pct(n, self.games_against(opp))}
                for opp, n in sorted(self.losses_against.items())
            },
        }


def tally_human_eval(outcomes: Iterable[GameOutcome]) -> dict[str, AgentTally]:
    """Per-agent win/loss table with per-opponent splits."""
    tallies: dict[str, AgentTally] = {}

    def entry(agent: str) -> AgentTally:
        return tallies.setdefault(agent, AgentTally(agent))

    for o in outcomes:
        loser = o.agent_b if o.winner == o.agent_a else o.agent_a
        w, l = entry(o.winner), entry(loser)
        w.total_games += 1
        l.total_games += 1
        w.wins += 1
        l.losses += 1
        w.wins_against[loser] = w.wins_against.get(loser, 0) + 1
        l.losses_against[o.winner] = l.losses_against.get(o.winner, 0) + 1
    return dict(sorted(tallies.items()))
