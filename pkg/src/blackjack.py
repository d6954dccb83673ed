"""
Five-card blackjack showdowns resolved under normal and special rules.

Resolution walks a fixed precedence; at each level the player's hand is
checked before the dealer's and the first rule that fires decides:

    SR1 prime total (win) > SR4 arithmetic triple (win) > SR2 three-card
    straight flush (win, as blackjack) > SR3 single pair (loss)
    > NR1 exactly 21 (win) > NR2 bust > NR3 higher total
"""
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from itertools import combinations, product
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from .cards import Card, CardDraw, DealExhausted, Suit, card_labels, is_prime, parse_cards
from .errors import PreconditionError, SamplingExhaustedError
from .models import Game, ObservationAudit, Outcome, RuleId, RuleKind, RuleSet

logger = structlog.get_logger(__name__)

HAND_SIZE = 5
BLACKJACK = 21
ACE_BONUS = 10


class Result(Enum):
    WIN = "win"
    LOSS = "loss"
    TIE = "tie"


_RESULTS = {Outcome.A_WINS: Result.WIN, Outcome.B_WINS: Result.LOSS, Outcome.TIE: Result.TIE}


@dataclass(frozen=True)
class BlackjackHand:
    cards: Tuple[Card, ...]

    def __post_init__(self):
        if len(self.cards) != HAND_SIZE:
            raise PreconditionError(f"A blackjack hand has {HAND_SIZE} cards, got {len(self.cards)}")

    @classmethod
    def of(cls, cards: Sequence[Card]) -> 'BlackjackHand':
        return cls(tuple(cards))

    @property
    def min_total(self) -> int:
        return sum(min(c.rank, 10) for c in self.cards)

    @property
    def resolved_total(self) -> int:
        """Best total not above 21; at most one ace can usefully count as 11."""
        low = self.min_total
        if any(c.rank == 1 for c in self.cards) and low + ACE_BONUS <= BLACKJACK:
            return low + ACE_BONUS
        return low

    @property
    def soft(self) -> bool:
        return self.resolved_total != self.min_total

    @property
    def bust(self) -> bool:
        return self.min_total > BLACKJACK

    def summary(self) -> Dict[str, Any]:
        return {"cards": card_labels(self.cards), "total": self.resolved_total, "bust": self.bust}


def is_prime_total(hand: BlackjackHand) -> bool:
    return is_prime(hand.resolved_total)


def card_values(card: Card) -> Tuple[int, ...]:
    """Blackjack values a card can stand for: faces count 10, an ace 1 or 11."""
    return (1, 11) if card.rank == 1 else (min(card.rank, 10),)


def has_arithmetic_triple(hand: BlackjackHand) -> bool:
    """Three cards whose blackjack values a < b < c satisfy b - a == c - b >= 2."""
    for trio in combinations(hand.cards, 3):
        for values in product(*(card_values(c) for c in trio)):
            a, b, c = sorted(values)
            if a < b < c and b - a == c - b >= 2:
                return True
    return False


def has_straight_flush_three(hand: BlackjackHand) -> bool:
    for suit in Suit:
        ranks = {c.rank for c in hand.cards if c.suit is suit}
        if any(r + 1 in ranks and r + 2 in ranks for r in ranks):
            return True
    return False


def has_single_pair(hand: BlackjackHand) -> bool:
    return sorted(Counter(c.rank for c in hand.cards).values()) == [1, 1, 1, 2]


def is_blackjack(hand: BlackjackHand) -> bool:
    return hand.resolved_total == BLACKJACK


# (rule kind, index, firing hand wins?)
PRECEDENCE = (
    (RuleKind.SR, 1, is_prime_total, True),
    (RuleKind.SR, 4, has_arithmetic_triple, True),
    (RuleKind.SR, 2, has_straight_flush_three, True),
    (RuleKind.SR, 3, has_single_pair, False),
    (RuleKind.NR, 1, is_blackjack, True),
)


@dataclass(frozen=True)
class Resolution:
    outcome: Outcome
    reason: RuleId

    @property
    def result(self) -> Result:
        return _RESULTS[self.outcome]


def _higher(a: int, b: int) -> Outcome:
    if a > b:
        return Outcome.A_WINS
    if a < b:
        return Outcome.B_WINS
    return Outcome.TIE


def _resolve(player: BlackjackHand, dealer: BlackjackHand, specials: FrozenSet[int]) -> Resolution:
    for kind, index, fires, wins in PRECEDENCE:
        if kind is RuleKind.SR and index not in specials:
            continue
        rule = RuleId(Game.BLACKJACK, kind, index)
        if fires(player):
            return Resolution(Outcome.A_WINS if wins else Outcome.B_WINS, rule)
        if fires(dealer):
            return Resolution(Outcome.B_WINS if wins else Outcome.A_WINS, rule)
    if player.bust or dealer.bust:
        bust_rule = RuleId(Game.BLACKJACK, RuleKind.NR, 2)
        if player.bust and dealer.bust:
            # closer to 21 means the lower total
            return Resolution(_higher(dealer.resolved_total, player.resolved_total), bust_rule)
        return Resolution(Outcome.B_WINS if player.bust else Outcome.A_WINS, bust_rule)
    return Resolution(_higher(player.resolved_total, dealer.resolved_total), RuleId(Game.BLACKJACK, RuleKind.NR, 3))


def resolve_blackjack(player: BlackjackHand, dealer: BlackjackHand, active: Optional[RuleSet]) -> Resolution:
    """Outcome from the player's side; active=None resolves under normal rules only."""
    if active is None:
        return _resolve(player, dealer, frozenset())
    if active.game != Game.BLACKJACK:
        raise PreconditionError(f"Blackjack resolution called with a {active.game.value} rule set")
    return _resolve(player, dealer, active.special_indices)


def features(rule: RuleId, player: BlackjackHand, composite: Resolution, standard: Resolution) -> bool:
    if composite.outcome is Outcome.TIE:
        return False
    if rule.kind is RuleKind.SR:
        return composite.reason == rule and standard.outcome is not composite.outcome
    if rule.index == 4:
        return composite.reason.kind is RuleKind.NR and player.soft
    return composite.reason == rule


# -- sampling --------------------------------------------------------------

def _pattern_cards(draw: CardDraw, rule: RuleId) -> List[Card]:
    rng = draw.rng
    if rule == RuleId(Game.BLACKJACK, RuleKind.SR, 2):
        start = int(rng.integers(1, 12))
        suit = list(Suit)[int(rng.integers(len(Suit)))]
        return [draw.take(r, [suit]) for r in (start, start + 1, start + 2)]
    if rule == RuleId(Game.BLACKJACK, RuleKind.SR, 3):
        (rank,) = draw.pick_ranks(1)
        return [draw.take(rank), draw.take(rank)]
    if rule == RuleId(Game.BLACKJACK, RuleKind.SR, 4):
        step = int(rng.integers(2, 5))
        low = int(rng.integers(1, 11 - 2 * step))
        return [draw.take(r) for r in (low, low + step, low + 2 * step)]
    if rule == RuleId(Game.BLACKJACK, RuleKind.NR, 4):
        return [draw.take(1)]
    return []


def _hand(draw: CardDraw, seed_cards: Sequence[Card], low: bool) -> BlackjackHand:
    cards = list(seed_cards)
    while len(cards) < HAND_SIZE:
        if low:
            cards.append(draw.take(int(draw.rng.integers(1, 7))))
        else:
            cards.append(draw.free_card())
    return BlackjackHand.of(draw.shuffled(cards))


def sample_blackjack_observation(
    rule: RuleId,
    rule_set: RuleSet,
    rng: np.random.Generator,
    max_attempts: int,
) -> Dict[str, Any]:
    """Sample a player-vs-dealer showdown whose resolution exemplifies rule.

    Hands come from a mixture of a uniform deal, a low-card deal (totals near
    21) and, for shaped rules, a deal seeded with the rule's pattern.
    """
    for attempt in range(max_attempts):
        draw = CardDraw(rng)
        try:
            pattern = _pattern_cards(draw, rule)
            on_player = (rule.kind is RuleKind.NR and rule.index == 4) or rng.random() < 0.5
            player = _hand(draw, pattern if on_player else [], low=rng.random() < 0.6)
            dealer = _hand(draw, [] if on_player else pattern, low=rng.random() < 0.6)
        except DealExhausted:
            continue
        composite = resolve_blackjack(player, dealer, rule_set)
        standard = resolve_blackjack(player, dealer, None)
        if features(rule, player, composite, standard):
            logger.debug("blackjack_observation_sampled", rule=rule.label, attempts=attempt + 1)
            return {
                "player_cards": card_labels(player.cards),
                "total": player.resolved_total,
                "bust": player.bust,
                "dealer_summary": dealer.summary(),
                "outcome": composite.result.value,
                "featured_rule": rule.label,
            }
    raise SamplingExhaustedError(f"No blackjack showdown featuring {rule.label} after {max_attempts} attempts")


def audit_blackjack_observation(obs: Dict[str, Any], rule_set: RuleSet, header: Dict[str, Any]) -> ObservationAudit:
    audit = ObservationAudit()
    try:
        player = BlackjackHand.of(parse_cards(obs["player_cards"]))
        dealer = BlackjackHand.of(parse_cards(obs["dealer_summary"]["cards"]))
        featured = RuleId.parse(Game.BLACKJACK, obs["featured_rule"])
    except (KeyError, ValueError, TypeError) as e:
        audit.fail("structure", f"unreadable showdown: {e}")
        return audit
    dealt = player.cards + dealer.cards
    if len(set(dealt)) != len(dealt):
        audit.fail("card-duplicates", "a card was dealt twice")
        return audit
    if obs.get("total") != player.resolved_total or obs.get("bust") != player.bust:
        audit.fail("label-rederivation", f"player total should be {player.resolved_total}, bust {player.bust}")
    if obs["dealer_summary"] != dealer.summary():
        audit.fail("label-rederivation", "dealer summary does not match the dealer's cards")
    composite = resolve_blackjack(player, dealer, rule_set)
    standard = resolve_blackjack(player, dealer, None)
    if obs.get("outcome") != composite.result.value:
        audit.fail("label-rederivation", f"outcome should be {composite.result.value} ({composite.reason.label})")
    if not rule_set.is_active(featured) or not features(featured, player, composite, standard):
        audit.fail("featured-rule", f"showdown does not exemplify {featured.label}")
    audit.discriminating = standard.outcome is not composite.outcome
    return audit
