"""
Natural-language rule texts and the entities each rule is bound to.

The texts are the ground truth handed to the judge.
"""
from typing import Dict, Iterable, List, Optional

from .models import RULE_POOL_SIZES, Episode, Game, RuleId, RuleKind

RULE_TEXTS: Dict[Game, Dict[str, str]] = {
    Game.CHESS: {
        "NR1": "Move one square in any direction.",
        "NR2": "Move in an L-shaped pattern: two squares in one direction and one square perpendicular.",
        "NR3": "Move any number of squares diagonally.",
        "NR4": "Move exactly two squares forward (in the direction of increasing row).",
        "NR5": "Move any number of squares straight (horizontally or vertically).",
        "NR6": "Move exactly two squares diagonally.",
        "SR1": "Move in a straight line any number of squares, then shift vertically by exactly two squares.",
        "SR2": "Move diagonally any number of squares, then two squares in a perpendicular diagonal direction.",
        "SR3": "Move exactly three squares in one direction, then move one square downward.",
        "SR4": "Jump to the symmetric position across the nearest blocking piece.",
        "SR5": "Swap with a target piece on an occupied square within distance ≤ 3.",
        "SR6": "Move in a straight line any number of squares, followed by a one-square diagonal shift.",
    },
    Game.HOLDEM: {
        "NR1": "A hand with one pair is treated as stronger than any high card.",
        "NR2": "A hand with three of a kind is treated as stronger than two pairs.",
        "NR3": "A straight (five cards in sequential rank, any suit) is treated as stronger than three of a kind.",
        "NR4": "A flush (five cards of the same suit, not in sequence) is treated as stronger than any straight.",
        "NR5": "Four of a kind (four cards of the same rank) is treated as stronger than any flush.",
        "SR1": "A hand containing five consecutive prime numbers (e.g., 2–3–5–7–J) is treated as stronger "
               "than any three-of-a-kind.",
        "SR2": "A hand with alternating card colors (e.g., red–black–red–black–red) is treated as a straight "
               "regardless of numeric order.",
        "SR3": "A hand with alternating odd and even values is treated as a \"mirror hand\" and beats any straight.",
        "SR4": "A hand containing five consecutive even numbers in the same suit is treated as a straight flush.",
        "SR5": "A hand with four cards of one parity (odd/even) and one of the opposite parity is treated as "
               "a \"hybrid hand,\" ranking just below four of a kind.",
    },
    Game.DICE: {
        "NR1": "A total sum between 4 and 10 (inclusive) is a \"small total.\"",
        "NR2": "A total sum between 11 and 17 (inclusive) is a \"large total.\"",
        "NR3": "A roll containing any pair is treated as stronger than small or large totals.",
        "NR4": "A triple (three identical dice) is treated as stronger than any pair or total.",
        "SR1": "If the total sum is a prime number, the roll beats any hand including triples.",
        "SR2": "If all three dice are prime numbers (2, 3, 5), the roll beats all hands except SR1.",
        "SR3": "If the dice alternate in parity (odd–even–odd or even–odd–even), the roll beats all hands "
               "except SR1/SR2/triples.",
        "SR4": "If the roll contains a pair and the third die differs from the pair by exactly one "
               "(e.g., 4–4–5), the roll beats any regular pair or total.",
    },
    Game.BLACKJACK: {
        "NR1": "A hand totaling exactly 21 is a \"blackjack\" and wins.",
        "NR2": "Any hand exceeding 21 is a bust. If both bust, the closer total to 21 wins.",
        "NR3": "If neither busts nor hits 21, the hand with the higher total wins.",
        "NR4": "An ace can be counted as either 1 or 11 to optimize the hand.",
        "SR1": "If the total sum is a prime number, the hand wins regardless of bust.",
        "SR2": "A three-card straight flush is treated as a \"blackjack\" regardless of total.",
        "SR3": "A hand with exactly one pair of different suits is a special loss.",
        "SR4": "A hand with three non-consecutive values where the middle equals the average of the other "
               "two (e.g., 3–6–9) is an automatic win.",
    },
}

# Tabletop rules are bound to the hand or roll feature they govern.
RULE_ENTITIES: Dict[Game, Dict[str, str]] = {
    Game.HOLDEM: {
        "NR1": "Pair", "NR2": "Three of a Kind", "NR3": "Straight", "NR4": "Flush", "NR5": "Four of a Kind",
        "SR1": "Prime Run", "SR2": "Alternating Colors", "SR3": "Mirror Hand", "SR4": "Even Suited Run",
        "SR5": "Hybrid Hand",
    },
    Game.DICE: {
        "NR1": "Small Total", "NR2": "Large Total", "NR3": "Pair", "NR4": "Triple",
        "SR1": "Prime Sum", "SR2": "All Prime", "SR3": "Alternating Parity", "SR4": "Pair Plus One",
    },
    Game.BLACKJACK: {
        "NR1": "Blackjack", "NR2": "Bust", "NR3": "Higher Total", "NR4": "Ace Value",
        "SR1": "Prime Total", "SR2": "Three-Card Straight Flush", "SR3": "Single Pair", "SR4": "Arithmetic Triple",
    },
}


def rule_text(rule: RuleId) -> str:
    return RULE_TEXTS[rule.game][rule.label]


def rule_entity(rule: RuleId) -> str:
    if rule.game is Game.CHESS:
        raise KeyError("chess rules are bound to piece types per episode")
    return RULE_ENTITIES[rule.game][rule.label]


def tabletop_ground_truth(rules: Iterable[RuleId]) -> Dict[str, RuleId]:
    return {rule_entity(rule): rule for rule in rules}


def truth_text(rule: RuleId, entity: Optional[str] = None) -> str:
    """Judge ground truth; chess rules name the piece that follows them."""
    text = rule_text(rule)
    if rule.game is Game.CHESS and entity:
        return f"{entity}: {text}"
    return text


def episode_truths(ep: Episode) -> Dict[str, str]:
    """Ground-truth text for every active rule of an episode, keyed by rule label."""
    entities = {rule.label: entity for entity, rule in ep.ground_truth.items()}
    return {rule.label: truth_text(rule, entities.get(rule.label)) for rule in ep.rule_set.rules}


def all_rules(game: Game) -> List[RuleId]:
    normals, specials = RULE_POOL_SIZES[game]
    return [RuleId(game, RuleKind.NR, i) for i in range(1, normals + 1)] + \
        [RuleId(game, RuleKind.SR, i) for i in range(1, specials + 1)]
