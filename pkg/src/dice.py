"""
Three-dice game: roll classification, duel comparison and observation sampling.
"""
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np
import structlog

from .cards import is_prime
from .errors import PreconditionError, SamplingExhaustedError
from .models import Game, HandCategory, ObservationAudit, Outcome, RuleId, RuleKind, RuleSet

logger = structlog.get_logger(__name__)

DIE_FACES = 6
PRIME_FACES = frozenset({2, 3, 5})
SMALL_TOTAL_RANGE = (4, 10)
LARGE_TOTAL_RANGE = (11, 17)


class DiceLabel(Enum):
    SMALL_TOTAL = "Small Total"
    LARGE_TOTAL = "Large Total"
    PAIR = "Pair"
    TRIPLE = "Triple"
    PRIME_SUM = "Prime Sum"
    ALL_PRIME = "All Prime"
    ALTERNATING_PARITY = "Alternating Parity"
    PAIR_PLUS_ONE = "Pair Plus One"


# Precedence, strongest first
TIERS = {
    DiceLabel.PRIME_SUM: 7,
    DiceLabel.ALL_PRIME: 6,
    DiceLabel.TRIPLE: 5,
    DiceLabel.ALTERNATING_PARITY: 4,
    DiceLabel.PAIR_PLUS_ONE: 3,
    DiceLabel.PAIR: 2,
    DiceLabel.LARGE_TOTAL: 1,
    DiceLabel.SMALL_TOTAL: 0,
}

SPECIAL_LABELS = {
    1: DiceLabel.PRIME_SUM,
    2: DiceLabel.ALL_PRIME,
    3: DiceLabel.ALTERNATING_PARITY,
    4: DiceLabel.PAIR_PLUS_ONE,
}

NORMAL_LABELS = {
    1: DiceLabel.SMALL_TOTAL,
    2: DiceLabel.LARGE_TOTAL,
    3: DiceLabel.PAIR,
    4: DiceLabel.TRIPLE,
}


@dataclass(frozen=True)
class DiceRoll:
    dice: Tuple[int, int, int]

    def __post_init__(self):
        if len(self.dice) != 3 or any(not 1 <= d <= DIE_FACES for d in self.dice):
            raise PreconditionError(f"A roll is three dice in [1,{DIE_FACES}], got {list(self.dice)}")

    @classmethod
    def of(cls, dice: Sequence[int]) -> 'DiceRoll':
        return cls(tuple(int(d) for d in dice))

    @property
    def total(self) -> int:
        return sum(self.dice)

    def counts(self) -> Counter:
        return Counter(self.dice)

    def to_list(self):
        return list(self.dice)


@dataclass(frozen=True)
class RollValue:
    category: HandCategory
    tier: int
    total: int

    @property
    def label(self) -> DiceLabel:
        return self.category.label

    def strength(self) -> Tuple[int, int]:
        return (self.tier, self.total)


def has_pair(roll: DiceRoll) -> bool:
    return sorted(roll.counts().values()) == [1, 2]


def is_pair_plus_one(roll: DiceRoll) -> bool:
    if not has_pair(roll):
        return False
    pair, single = (face for face, _ in roll.counts().most_common())
    return abs(pair - single) == 1


def is_alternating_parity(roll: DiceRoll) -> bool:
    a, b, c = (d % 2 for d in roll.dice)
    return a != b and b != c


def _standard_label(roll: DiceRoll) -> DiceLabel:
    if len(roll.counts()) == 1:
        return DiceLabel.TRIPLE
    if has_pair(roll):
        return DiceLabel.PAIR
    if roll.total >= LARGE_TOTAL_RANGE[0]:
        return DiceLabel.LARGE_TOTAL
    return DiceLabel.SMALL_TOTAL


_SPECIAL_TESTS = {
    1: lambda roll: is_prime(roll.total),
    2: lambda roll: set(roll.dice) <= PRIME_FACES,
    3: is_alternating_parity,
    4: is_pair_plus_one,
}


def _evaluate(roll: DiceRoll, specials: FrozenSet[int]) -> RollValue:
    label = _standard_label(roll)
    best = RollValue(HandCategory(label), TIERS[label], roll.total)
    for index in sorted(specials):
        special = SPECIAL_LABELS[index]
        if TIERS[special] > best.tier and _SPECIAL_TESTS[index](roll):
            best = RollValue(HandCategory(special, RuleId(Game.DICE, RuleKind.SR, index)), TIERS[special], roll.total)
    return best


def _require_dice(active: RuleSet) -> None:
    if active.game != Game.DICE:
        raise PreconditionError(f"Dice classification called with a {active.game.value} rule set")


def evaluate_dice(roll: DiceRoll, active: Optional[RuleSet]) -> RollValue:
    """Composite value of a roll; active=None applies the normal rules only."""
    if active is None:
        return _evaluate(roll, frozenset())
    _require_dice(active)
    return _evaluate(roll, active.special_indices)


def classify_dice(roll: DiceRoll, active: RuleSet) -> HandCategory:
    return evaluate_dice(roll, active).category


def compare_dice(a: RollValue, b: RollValue) -> Outcome:
    if a.strength() > b.strength():
        return Outcome.A_WINS
    if a.strength() < b.strength():
        return Outcome.B_WINS
    return Outcome.TIE


@dataclass
class Duel:
    composite: Tuple[RollValue, RollValue]
    standard: Tuple[RollValue, RollValue]

    @property
    def outcome(self) -> Outcome:
        return compare_dice(*self.composite)

    @property
    def standard_outcome(self) -> Outcome:
        return compare_dice(*self.standard)


def duel(roll_a: DiceRoll, roll_b: DiceRoll, active: RuleSet) -> Duel:
    return Duel(
        composite=(evaluate_dice(roll_a, active), evaluate_dice(roll_b, active)),
        standard=(evaluate_dice(roll_a, None), evaluate_dice(roll_b, None)),
    )


def features(rule: RuleId, result: Duel) -> bool:
    outcome = result.outcome
    if outcome is Outcome.TIE:
        return False
    w, l = (0, 1) if outcome is Outcome.A_WINS else (1, 0)
    winner, loser = result.composite[w], result.composite[l]
    if rule.kind is RuleKind.SR:
        return winner.category.source_rule == rule and result.standard_outcome is not outcome
    wins_on_category = winner.tier > loser.tier
    if rule.index == 1:
        return loser.label is DiceLabel.SMALL_TOTAL and winner.category.source_rule is None and wins_on_category
    return winner.label is NORMAL_LABELS[rule.index] and wins_on_category


def _roll(rng: np.random.Generator) -> DiceRoll:
    return DiceRoll.of(rng.integers(1, DIE_FACES + 1, size=3))


def _shaped_roll(label: DiceLabel, rng: np.random.Generator) -> DiceRoll:
    """A roll built to carry label; falls back to a free roll for total-based labels."""
    if label is DiceLabel.TRIPLE:
        return DiceRoll.of([int(rng.integers(1, DIE_FACES + 1))] * 3)
    if label is DiceLabel.ALL_PRIME:
        return DiceRoll.of(rng.choice(sorted(PRIME_FACES), size=3))
    if label in (DiceLabel.PAIR, DiceLabel.PAIR_PLUS_ONE):
        pair = int(rng.integers(1, DIE_FACES + 1))
        if label is DiceLabel.PAIR_PLUS_ONE:
            options = [f for f in (pair - 1, pair + 1) if 1 <= f <= DIE_FACES]
        else:
            options = [f for f in range(1, DIE_FACES + 1) if f != pair]
        dice = [pair, pair, int(rng.choice(options))]
        return DiceRoll.of([dice[int(i)] for i in rng.permutation(3)])
    if label is DiceLabel.ALTERNATING_PARITY:
        start = int(rng.integers(2))
        faces = [[f for f in range(1, DIE_FACES + 1) if f % 2 == (start + k) % 2] for k in range(3)]
        return DiceRoll.of([int(rng.choice(pool)) for pool in faces])
    return _roll(rng)


def sample_dice_observation(
    rule: RuleId,
    rule_set: RuleSet,
    rng: np.random.Generator,
    max_attempts: int,
) -> Dict[str, Any]:
    """Sample a player/dealer duel whose outcome exemplifies rule."""
    if rule.kind is RuleKind.SR:
        shape = SPECIAL_LABELS[rule.index]
    else:
        shape = NORMAL_LABELS[rule.index] if rule.index != 1 else DiceLabel.LARGE_TOTAL
    for attempt in range(max_attempts):
        winner_roll = _shaped_roll(shape, rng) if rng.random() < 0.75 else _roll(rng)
        loser_roll = _roll(rng)
        winner = ("A", "B")[int(rng.integers(2))]
        roll_a, roll_b = (winner_roll, loser_roll) if winner == "A" else (loser_roll, winner_roll)
        result = duel(roll_a, roll_b, rule_set)
        expected = Outcome.A_WINS if winner == "A" else Outcome.B_WINS
        if result.outcome is expected and features(rule, result):
            logger.debug("dice_observation_sampled", rule=rule.label, attempts=attempt + 1)
            return {
                "roll_a": roll_a.to_list(),
                "roll_b": roll_b.to_list(),
                "winner": winner,
                "featured_rule": rule.label,
            }
    raise SamplingExhaustedError(f"No dice duel featuring {rule.label} after {max_attempts} attempts")


def audit_dice_observation(obs: Dict[str, Any], rule_set: RuleSet, header: Dict[str, Any]) -> ObservationAudit:
    audit = ObservationAudit()
    try:
        roll_a, roll_b = DiceRoll.of(obs["roll_a"]), DiceRoll.of(obs["roll_b"])
        featured = RuleId.parse(Game.DICE, obs["featured_rule"])
    except (KeyError, ValueError, TypeError) as e:
        audit.fail("structure", f"unreadable duel: {e}")
        return audit
    result = duel(roll_a, roll_b, rule_set)
    outcome = result.outcome
    if outcome is Outcome.TIE or obs.get("winner") != ("A" if outcome is Outcome.A_WINS else "B"):
        audit.fail("label-rederivation", f"stored winner {obs.get('winner')!r} disagrees with the comparator ({outcome.value})")
    if not rule_set.is_active(featured) or not features(featured, result):
        audit.fail("featured-rule", f"duel does not exemplify {featured.label}")
    audit.discriminating = result.standard_outcome is not outcome
    return audit


def single_roll_view(obs: Dict[str, Any]) -> Dict[str, Any]:
    """Player-side view of a duel: the player's roll and whether it won."""
    outcome = {"A": "Win", "B": "Lose"}.get(obs["winner"], "Tie")
    return {"roll": list(obs["roll_a"]), "label": outcome}
