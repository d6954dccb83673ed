from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Set

RANK_LABELS = {1: "A", 11: "J", 12: "Q", 13: "K"}
LABEL_RANKS = {label: rank for rank, label in RANK_LABELS.items()}
CARD_PRIMES = (2, 3, 5, 7, 11, 13)


class Suit(Enum):
    SPADES = "♠"
    HEARTS = "♥"
    DIAMONDS = "♦"
    CLUBS = "♣"

    @property
    def is_red(self) -> bool:
        return self in (Suit.HEARTS, Suit.DIAMONDS)

    @property
    def order(self) -> int:
        return _SUIT_ORDER[self]


_SUIT_ORDER = {suit: i for i, suit in enumerate(Suit)}


@dataclass(frozen=True)
class Card:
    rank: int
    suit: Suit

    def __post_init__(self):
        if not 1 <= self.rank <= 13:
            raise ValueError(f"Card rank must be in [1,13], got {self.rank}")

    @property
    def is_red(self) -> bool:
        return self.suit.is_red

    @property
    def color(self) -> str:
        return "red" if self.is_red else "black"

    @property
    def high_value(self) -> int:
        """Poker value with the ace high."""
        return 14 if self.rank == 1 else self.rank

    @property
    def label(self) -> str:
        return f"{RANK_LABELS.get(self.rank, str(self.rank))}{self.suit.value}"

    def sort_key(self):
        return (self.rank, self.suit.order)

    @classmethod
    def parse(cls, text: str) -> 'Card':
        text = text.strip()
        if len(text) < 2:
            raise ValueError(f"Malformed card '{text}'")
        rank_text, suit_text = text[:-1], text[-1]
        rank = LABEL_RANKS.get(rank_text.upper())
        if rank is None:
            if not rank_text.isdigit():
                raise ValueError(f"Malformed card rank '{rank_text}'")
            rank = int(rank_text)
        return cls(rank, Suit(suit_text))

    def __str__(self) -> str:
        return self.label


def full_deck() -> List[Card]:
    return [Card(rank, suit) for suit in Suit for rank in range(1, 14)]


def card_labels(cards: Iterable[Card]) -> List[str]:
    return [card.label for card in cards]


def parse_cards(labels: Sequence[str]) -> List[Card]:
    return [Card.parse(label) for label in labels]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, int(n ** 0.5) + 1))


class DealExhausted(Exception):
    """A sampling attempt asked for a card that is no longer in the deck."""


class CardDraw:
    """Deals distinct cards for one observation.

    Optional locks bias free choices toward one rank parity (0 even, 1 odd)
    and one colour; cards requested with explicit suits ignore the colour lock.
    """

    def __init__(self, rng, parity: Optional[int] = None, red: Optional[bool] = None):
        self.rng = rng
        self.parity = parity
        self.red = red
        self.dealt: Set[Card] = set()

    def rank_pool(self, exclude: Iterable[int] = ()) -> List[int]:
        excluded = set(exclude)
        pool = [r for r in range(1, 14) if r not in excluded]
        if self.parity is not None:
            locked = [r for r in pool if r % 2 == self.parity]
            if locked:
                return locked
        return pool

    def pick_ranks(self, count: int, exclude: Iterable[int] = ()) -> List[int]:
        pool = self.rank_pool(exclude)
        if len(pool) < count:
            raise DealExhausted(f"need {count} ranks, only {len(pool)} available")
        return [int(r) for r in self.rng.choice(pool, size=count, replace=False)]

    def pick_suit(self) -> Suit:
        suits = self._locked_suits()
        return suits[int(self.rng.integers(len(suits)))]

    def take(self, rank: int, suits: Optional[Sequence[Suit]] = None) -> Card:
        options = list(suits) if suits is not None else self._locked_suits()
        free = [s for s in options if Card(rank, s) not in self.dealt]
        if not free:
            free = [s for s in Suit if Card(rank, s) not in self.dealt] if suits is None else []
        if not free:
            raise DealExhausted(f"no {RANK_LABELS.get(rank, rank)} left in the requested suits")
        card = Card(rank, free[int(self.rng.integers(len(free)))])
        self.dealt.add(card)
        return card

    def free_card(self) -> Card:
        remaining = [c for c in full_deck() if c not in self.dealt]
        locked = [
            c for c in remaining
            if (self.parity is None or c.rank % 2 == self.parity) and (self.red is None or c.is_red == self.red)
        ]
        pool = locked or remaining
        card = pool[int(self.rng.integers(len(pool)))]
        self.dealt.add(card)
        return card

    def shuffled(self, cards: Sequence[Card]) -> List[Card]:
        order = self.rng.permutation(len(cards))
        return [cards[int(i)] for i in order]

    def _locked_suits(self) -> List[Suit]:
        if self.red is None:
            return list(Suit)
        return [s for s in Suit if s.is_red == self.red]
