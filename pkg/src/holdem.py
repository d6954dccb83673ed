"""
Texas Hold'em hand classification, composite comparison and observation sampling.

Special rules splice into the standard ladder by tier:

    HighCard 0 < Pair 1 < TwoPair 2 < ThreeOfAKind 3 < PrimeRun(SR1) 4
    < Straight = AlternatingColors(SR2) 5 < MirrorHand(SR3) 6 < Flush 7
    < HybridHand(SR5) 8 < FourOfAKind 9 < StraightFlush = EvenSuitedRun(SR4) 10

A full house has no rung of its own and ranks as three of a kind.
"""
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from .cards import Card, CardDraw, DealExhausted, Suit, card_labels, parse_cards
from .errors import PreconditionError, SamplingExhaustedError
from .models import Game, HandCategory, ObservationAudit, Outcome, RuleId, RuleKind, RuleSet

logger = structlog.get_logger(__name__)

HAND_SIZE = 5
HOLE_CARDS = 2
BOARD_CARDS = 5
PLAYERS = ("A", "B")


class HandLabel(Enum):
    HIGH_CARD = "High Card"
    PAIR = "Pair"
    TWO_PAIR = "Two Pair"
    THREE_OF_A_KIND = "Three of a Kind"
    STRAIGHT = "Straight"
    FLUSH = "Flush"
    FOUR_OF_A_KIND = "Four of a Kind"
    STRAIGHT_FLUSH = "Straight Flush"
    PRIME_RUN = "Prime Run"
    ALTERNATING_COLORS = "Alternating Colors"
    MIRROR_HAND = "Mirror Hand"
    EVEN_SUITED_RUN = "Even Suited Run"
    HYBRID_HAND = "Hybrid Hand"


class ShowdownScope(Enum):
    ANY_FIVE = "any_five"
    TWO_HOLE = "two_hole"


TIERS = {
    HandLabel.HIGH_CARD: 0,
    HandLabel.PAIR: 1,
    HandLabel.TWO_PAIR: 2,
    HandLabel.THREE_OF_A_KIND: 3,
    HandLabel.PRIME_RUN: 4,
    HandLabel.STRAIGHT: 5,
    HandLabel.ALTERNATING_COLORS: 5,
    HandLabel.MIRROR_HAND: 6,
    HandLabel.FLUSH: 7,
    HandLabel.HYBRID_HAND: 8,
    HandLabel.FOUR_OF_A_KIND: 9,
    HandLabel.STRAIGHT_FLUSH: 10,
    HandLabel.EVEN_SUITED_RUN: 10,
}

SPECIAL_LABELS = {
    1: HandLabel.PRIME_RUN,
    2: HandLabel.ALTERNATING_COLORS,
    3: HandLabel.MIRROR_HAND,
    4: HandLabel.EVEN_SUITED_RUN,
    5: HandLabel.HYBRID_HAND,
}

# (winner, loser) under each normal rule
NORMAL_RELATIONS = {
    1: (HandLabel.PAIR, HandLabel.HIGH_CARD),
    2: (HandLabel.THREE_OF_A_KIND, HandLabel.TWO_PAIR),
    3: (HandLabel.STRAIGHT, HandLabel.THREE_OF_A_KIND),
    4: (HandLabel.FLUSH, HandLabel.STRAIGHT),
    5: (HandLabel.FOUR_OF_A_KIND, HandLabel.FLUSH),
}

# Standard categories an SR hand is sampled against
SPECIAL_LOSER_PATTERNS = {
    1: (HandLabel.THREE_OF_A_KIND, HandLabel.TWO_PAIR),
    2: (HandLabel.THREE_OF_A_KIND, HandLabel.TWO_PAIR),
    3: (HandLabel.THREE_OF_A_KIND, HandLabel.STRAIGHT),
    4: (HandLabel.FOUR_OF_A_KIND,),
    5: (HandLabel.FLUSH, HandLabel.STRAIGHT, HandLabel.THREE_OF_A_KIND),
}

DISPLAY_NAMES = {
    HandLabel.ALTERNATING_COLORS: "Straight",
    HandLabel.EVEN_SUITED_RUN: "Straight Flush",
}

RANK_PLURALS = {
    2: "Twos", 3: "Threes", 4: "Fours", 5: "Fives", 6: "Sixes", 7: "Sevens", 8: "Eights",
    9: "Nines", 10: "Tens", 11: "Jacks", 12: "Queens", 13: "Kings", 14: "Aces",
}

PRIME_RUNS = (frozenset({2, 3, 5, 7, 11}), frozenset({3, 5, 7, 11, 13}))
EVEN_RUNS = (frozenset({2, 4, 6, 8, 10}), frozenset({4, 6, 8, 10, 12}))
# Rank windows of the standard straights, ace low (1) through ace high (1 after 13)
STRAIGHT_WINDOWS = tuple(
    tuple(((start + k - 1) % 13) + 1 for k in range(HAND_SIZE)) for start in range(1, 11)
)


@dataclass(frozen=True)
class HandValue:
    """A classified 5-card hand with everything needed to order it."""
    category: HandCategory
    tier: int
    kickers: Tuple[int, ...]
    cards: Tuple[Card, ...]
    rule_set: Optional[RuleSet] = None

    @property
    def label(self) -> HandLabel:
        return self.category.label

    def strength(self) -> Tuple[int, Tuple[int, ...]]:
        return (self.tier, self.kickers)


def _straight_high(values: Sequence[int]) -> int:
    distinct = set(values)
    if len(distinct) != HAND_SIZE:
        return 0
    if max(distinct) - min(distinct) == 4:
        return max(distinct)
    if distinct == {14, 2, 3, 4, 5}:
        return 5
    return 0


def _standard(cards: Sequence[Card]) -> Tuple[HandLabel, Tuple[int, ...]]:
    values = sorted((c.high_value for c in cards), reverse=True)
    groups = sorted(Counter(values).items(), key=lambda kv: (kv[1], kv[0]), reverse=True)
    grouped = tuple(value for value, _ in groups)
    flush = len({c.suit for c in cards}) == 1
    straight = _straight_high(values)

    if straight and flush:
        return HandLabel.STRAIGHT_FLUSH, (straight,)
    if groups[0][1] == 4:
        return HandLabel.FOUR_OF_A_KIND, grouped
    if flush:
        return HandLabel.FLUSH, tuple(values)
    if groups[0][1] == 3:
        return HandLabel.THREE_OF_A_KIND, grouped
    if straight:
        return HandLabel.STRAIGHT, (straight,)
    if groups[0][1] == 2 and groups[1][1] == 2:
        return HandLabel.TWO_PAIR, grouped
    if groups[0][1] == 2:
        return HandLabel.PAIR, grouped
    return HandLabel.HIGH_CARD, tuple(values)


def _ordered(cards: Sequence[Card]) -> List[Card]:
    return sorted(cards, key=Card.sort_key)


def _alternates(items: Sequence[Any], key: Callable[[Any], Any]) -> bool:
    return all(key(a) != key(b) for a, b in zip(items, items[1:]))


def is_prime_run(cards: Sequence[Card]) -> bool:
    return frozenset(c.rank for c in cards) in PRIME_RUNS and len({c.rank for c in cards}) == HAND_SIZE


def is_alternating_colors(cards: Sequence[Card]) -> bool:
    return _alternates(_ordered(cards), lambda c: c.is_red)


def is_mirror_hand(cards: Sequence[Card]) -> bool:
    return _alternates(_ordered(cards), lambda c: c.rank % 2)


def is_even_suited_run(cards: Sequence[Card]) -> bool:
    return len({c.suit for c in cards}) == 1 and frozenset(c.rank for c in cards) in EVEN_RUNS


def is_hybrid_hand(cards: Sequence[Card]) -> bool:
    return sum(c.rank % 2 for c in cards) in (1, HAND_SIZE - 1)


SPECIAL_PREDICATES: Dict[int, Callable[[Sequence[Card]], bool]] = {
    1: is_prime_run,
    2: is_alternating_colors,
    3: is_mirror_hand,
    4: is_even_suited_run,
    5: is_hybrid_hand,
}


def _check_hand(cards: Sequence[Card]) -> None:
    if len(cards) != HAND_SIZE:
        raise PreconditionError(f"A Hold'em hand has {HAND_SIZE} cards, got {len(cards)}")
    if len(set(cards)) != HAND_SIZE:
        raise PreconditionError(f"Duplicate card in hand {card_labels(cards)}")


def _evaluate(cards: Sequence[Card], specials: FrozenSet[int], rule_set: Optional[RuleSet]) -> HandValue:
    label, kickers = _standard(cards)
    best = HandValue(HandCategory(label), TIERS[label], kickers, tuple(cards), rule_set)
    special_kickers = tuple(sorted((c.high_value for c in cards), reverse=True))
    for index in sorted(specials):
        special = SPECIAL_LABELS[index]
        # A special hand only replaces a strictly weaker standard reading
        if TIERS[special] > best.tier and SPECIAL_PREDICATES[index](cards):
            best = HandValue(
                HandCategory(special, RuleId(Game.HOLDEM, RuleKind.SR, index)),
                TIERS[special],
                special_kickers,
                tuple(cards),
                rule_set,
            )
    return best


def _require_holdem(active: RuleSet) -> None:
    if active.game != Game.HOLDEM:
        raise PreconditionError(f"Hold'em evaluation called with a {active.game.value} rule set")


def evaluate_holdem(cards: Sequence[Card], active: RuleSet) -> HandValue:
    _require_holdem(active)
    _check_hand(cards)
    return _evaluate(cards, active.special_indices, active)


def evaluate_standard(cards: Sequence[Card]) -> HandValue:
    """Evaluation under the normal rules alone."""
    _check_hand(cards)
    return _evaluate(cards, frozenset(), None)


def classify_holdem(cards: Sequence[Card], active: RuleSet) -> HandCategory:
    return evaluate_holdem(cards, active).category


def _order(a: HandValue, b: HandValue) -> Outcome:
    if a.strength() > b.strength():
        return Outcome.A_WINS
    if a.strength() < b.strength():
        return Outcome.B_WINS
    return Outcome.TIE


def compare_holdem(a: HandValue, b: HandValue, active: RuleSet) -> Outcome:
    if a.rule_set != active or b.rule_set != active:
        raise PreconditionError("Both hands must be evaluated under the same active rule set")
    return _order(a, b)


def candidate_hands(hole: Sequence[Card], board: Sequence[Card], scope: ShowdownScope) -> Iterable[Tuple[Card, ...]]:
    if scope is ShowdownScope.ANY_FIVE:
        return combinations(tuple(hole) + tuple(board), HAND_SIZE)
    return (tuple(hole) + trio for trio in combinations(board, HAND_SIZE - HOLE_CARDS))


def best_hand(
    hole: Sequence[Card],
    board: Sequence[Card],
    active: Optional[RuleSet],
    scope: ShowdownScope = ShowdownScope.TWO_HOLE,
) -> HandValue:
    """Strongest 5-card hand a player can show; active=None evaluates normal rules only."""
    if len(hole) != HOLE_CARDS or len(board) != BOARD_CARDS:
        raise PreconditionError(f"Showdown needs {HOLE_CARDS} hole and {BOARD_CARDS} board cards")
    if active is not None:
        _require_holdem(active)
    specials = active.special_indices if active is not None else frozenset()
    return max(
        (_evaluate(hand, specials, active) for hand in candidate_hands(hole, board, scope)),
        key=HandValue.strength,
    )


def describe_hand(value: HandValue) -> str:
    """Transcript name of a winning hand, e.g. "Pair of Threes"."""
    label = value.label
    if label is HandLabel.PAIR:
        return f"Pair of {RANK_PLURALS[value.kickers[0]]}"
    if label is HandLabel.TWO_PAIR:
        return f"Two Pair, {RANK_PLURALS[value.kickers[0]]} and {RANK_PLURALS[value.kickers[1]]}"
    if label is HandLabel.THREE_OF_A_KIND:
        return f"Three {RANK_PLURALS[value.kickers[0]]}"
    if label is HandLabel.FOUR_OF_A_KIND:
        return f"Four {RANK_PLURALS[value.kickers[0]]}"
    return DISPLAY_NAMES.get(label, label.value)


@dataclass
class Showdown:
    composite: Tuple[HandValue, HandValue]
    standard: Tuple[HandValue, HandValue]

    @property
    def outcome(self) -> Outcome:
        return _order(*self.composite)

    @property
    def standard_outcome(self) -> Outcome:
        return _order(*self.standard)


def showdown(hole_a, hole_b, board, active: RuleSet, scope: ShowdownScope) -> Showdown:
    return Showdown(
        composite=(best_hand(hole_a, board, active, scope), best_hand(hole_b, board, active, scope)),
        standard=(best_hand(hole_a, board, None, scope), best_hand(hole_b, board, None, scope)),
    )


def features(rule: RuleId, result: Showdown) -> bool:
    """Whether a decided showdown exemplifies rule, seen from its composite winner."""
    outcome = result.outcome
    if outcome is Outcome.TIE:
        return False
    w, l = (0, 1) if outcome is Outcome.A_WINS else (1, 0)
    if rule.kind is RuleKind.NR:
        win_label, lose_label = NORMAL_RELATIONS[rule.index]
        return (
            result.standard[w].label is win_label
            and result.standard[l].label is lose_label
            and result.standard_outcome is outcome
        )
    return (
        result.composite[w].category.source_rule == rule
        and result.standard_outcome is outcome.flipped()
    )


# -- sampling --------------------------------------------------------------

def _ranked_cards(draw: CardDraw, ranks: Sequence[int], suits: Optional[Sequence[Suit]] = None) -> List[Card]:
    return [draw.take(rank, suits) for rank in ranks]


def _pattern(draw: CardDraw, label: HandLabel) -> List[Card]:
    """Five cards forming label (standard reading) or a special shape."""
    if label is HandLabel.HIGH_CARD:
        return _ranked_cards(draw, draw.pick_ranks(5))
    if label is HandLabel.PAIR:
        pair, *rest = draw.pick_ranks(4)
        return _ranked_cards(draw, [pair, pair] + rest)
    if label is HandLabel.TWO_PAIR:
        high, low, kicker = draw.pick_ranks(3)
        return _ranked_cards(draw, [high, high, low, low, kicker])
    if label is HandLabel.THREE_OF_A_KIND:
        trip, *rest = draw.pick_ranks(3)
        return _ranked_cards(draw, [trip] * 3 + rest)
    if label is HandLabel.FOUR_OF_A_KIND:
        quad, kicker = draw.pick_ranks(2)
        return _ranked_cards(draw, [quad] * 4 + [kicker])
    if label is HandLabel.STRAIGHT:
        window = STRAIGHT_WINDOWS[int(draw.rng.integers(len(STRAIGHT_WINDOWS)))]
        return _ranked_cards(draw, window)
    if label is HandLabel.FLUSH:
        suit = draw.pick_suit()
        return _ranked_cards(draw, draw.pick_ranks(5), [suit])
    if label is HandLabel.PRIME_RUN:
        run = sorted(PRIME_RUNS[int(draw.rng.integers(len(PRIME_RUNS)))])
        return _ranked_cards(draw, run)
    if label is HandLabel.ALTERNATING_COLORS:
        ranks = sorted(int(r) for r in draw.rng.choice(np.arange(1, 14), size=5, replace=False))
        red = bool(draw.rng.integers(2))
        cards = []
        for i, rank in enumerate(ranks):
            wanted = red if i % 2 == 0 else not red
            cards.append(draw.take(rank, [s for s in Suit if s.is_red == wanted]))
        return cards
    if label is HandLabel.MIRROR_HAND:
        for _ in range(50):
            ranks = sorted(int(r) for r in draw.rng.choice(np.arange(1, 14), size=5, replace=False))
            if _alternates(ranks, lambda r: r % 2):
                return _ranked_cards(draw, ranks)
        raise DealExhausted("no alternating-parity ranks drawn")
    if label is HandLabel.EVEN_SUITED_RUN:
        run = sorted(EVEN_RUNS[int(draw.rng.integers(len(EVEN_RUNS)))])
        return _ranked_cards(draw, run, [draw.pick_suit()])
    if label is HandLabel.HYBRID_HAND:
        major = draw.parity if draw.parity is not None else int(draw.rng.integers(2))
        pool_major = [r for r in range(1, 14) if r % 2 == major]
        pool_minor = [r for r in range(1, 14) if r % 2 != major]
        ranks = [int(r) for r in draw.rng.choice(pool_major, size=4, replace=False)]
        ranks.append(int(draw.rng.choice(pool_minor)))
        return _ranked_cards(draw, ranks)
    raise PreconditionError(f"No sampling pattern for {label.value}")


def _loser_cards(draw: CardDraw, label: HandLabel, winner_board: Sequence[Card]) -> List[Card]:
    """The loser's four own cards: two hole cards, then two board extras.

    Straight and flush shapes borrow one of the winner's board cards.
    """
    if label is HandLabel.HIGH_CARD:
        return [draw.free_card() for _ in range(4)]
    if label is HandLabel.PAIR:
        (rank,) = draw.pick_ranks(1)
        return _ranked_cards(draw, [rank, rank]) + [draw.free_card(), draw.free_card()]
    if label is HandLabel.TWO_PAIR:
        high, low = draw.pick_ranks(2)
        return _ranked_cards(draw, [high, low, high, low])
    if label is HandLabel.THREE_OF_A_KIND:
        (rank,) = draw.pick_ranks(1)
        return _ranked_cards(draw, [rank, rank, rank]) + [draw.free_card()]
    if label is HandLabel.FOUR_OF_A_KIND:
        (rank,) = draw.pick_ranks(1)
        return _ranked_cards(draw, [rank] * 4)
    anchor = winner_board[int(draw.rng.integers(len(winner_board)))]
    if label is HandLabel.STRAIGHT:
        windows = [w for w in STRAIGHT_WINDOWS if anchor.rank in w]
        window = windows[int(draw.rng.integers(len(windows)))]
        ranks = [r for r in window if r != anchor.rank]
        return draw.shuffled(_ranked_cards(draw, ranks))
    if label is HandLabel.FLUSH:
        ranks = draw.pick_ranks(4, exclude=[anchor.rank])
        return _ranked_cards(draw, ranks, [anchor.suit])
    raise PreconditionError(f"No loser pattern for {label.value}")


def _proposal_labels(rule: RuleId, rng: np.random.Generator) -> Tuple[HandLabel, HandLabel]:
    if rule.kind is RuleKind.NR:
        return NORMAL_RELATIONS[rule.index]
    losers = SPECIAL_LOSER_PATTERNS[rule.index]
    return SPECIAL_LABELS[rule.index], losers[int(rng.integers(len(losers)))]


def sample_holdem_observation(
    rule: RuleId,
    rule_set: RuleSet,
    rng: np.random.Generator,
    max_attempts: int,
    scope: ShowdownScope = ShowdownScope.TWO_HOLE,
) -> Dict[str, Any]:
    """Constructively sample one showdown whose outcome exemplifies rule."""
    for attempt in range(max_attempts):
        parity = int(rng.integers(2)) if rng.random() < 0.5 else None
        red = bool(rng.integers(2)) if rng.random() < 0.5 else None
        draw = CardDraw(rng, parity=parity, red=red)
        win_label, lose_label = _proposal_labels(rule, rng)
        try:
            winner_cards = draw.shuffled(_pattern(draw, win_label))
            winner_hole, winner_board = winner_cards[:HOLE_CARDS], winner_cards[HOLE_CARDS:]
            loser_own = _loser_cards(draw, lose_label, winner_board)
        except DealExhausted:
            continue
        loser_hole, extras = loser_own[:HOLE_CARDS], loser_own[HOLE_CARDS:]
        board = draw.shuffled(list(winner_board) + list(extras))
        winner = PLAYERS[int(rng.integers(2))]
        hole_a, hole_b = (winner_hole, loser_hole) if winner == "A" else (loser_hole, winner_hole)

        result = showdown(hole_a, hole_b, board, rule_set, scope)
        expected = Outcome.A_WINS if winner == "A" else Outcome.B_WINS
        if result.outcome is not expected or not features(rule, result):
            continue
        logger.debug("holdem_observation_sampled", rule=rule.label, attempts=attempt + 1)
        win_value = result.composite[0 if winner == "A" else 1]
        return {
            "hole_a": card_labels(hole_a),
            "hole_b": card_labels(hole_b),
            "board": card_labels(board),
            "winner": winner,
            "winning_category": describe_hand(win_value),
            "featured_rule": rule.label,
        }
    raise SamplingExhaustedError(f"No Hold'em showdown featuring {rule.label} after {max_attempts} attempts")


def audit_holdem_observation(obs: Dict[str, Any], rule_set: RuleSet, header: Dict[str, Any]) -> ObservationAudit:
    audit = ObservationAudit()
    try:
        hole_a, hole_b, board = (parse_cards(obs[key]) for key in ("hole_a", "hole_b", "board"))
        scope = ShowdownScope(header.get("showdown", ShowdownScope.TWO_HOLE.value))
        featured = RuleId.parse(Game.HOLDEM, obs["featured_rule"])
    except (KeyError, ValueError, TypeError) as e:
        audit.fail("structure", f"unreadable showdown: {e}")
        return audit
    dealt = hole_a + hole_b + board
    if len(hole_a) != HOLE_CARDS or len(hole_b) != HOLE_CARDS or len(board) != BOARD_CARDS:
        audit.fail("structure", "showdown needs 2+2 hole cards and 5 board cards")
        return audit
    if len(set(dealt)) != len(dealt):
        audit.fail("card-duplicates", "a card was dealt twice")
        return audit

    result = showdown(hole_a, hole_b, board, rule_set, scope)
    outcome = result.outcome
    stored = obs.get("winner")
    if outcome is Outcome.TIE or stored != ("A" if outcome is Outcome.A_WINS else "B"):
        audit.fail("label-rederivation", f"stored winner {stored!r} disagrees with the comparator ({outcome.value})")
    else:
        value = result.composite[0 if stored == "A" else 1]
        if obs.get("winning_category") != describe_hand(value):
            audit.fail("label-rederivation", f"winning category should be {describe_hand(value)!r}")
    if not rule_set.is_active(featured) or not features(featured, result):
        audit.fail("featured-rule", f"showdown does not exemplify {featured.label}")
    audit.discriminating = result.standard_outcome is not outcome
    return audit
