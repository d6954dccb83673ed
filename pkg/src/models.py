from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple
import json

from .errors import RuleSetError

GENERATOR_VERSION = "1.0.0"
DEFAULT_RNG_ALGORITHM = "philox4x64-10"
MAX_MASTER_SEED = 2 ** 64 - 1


class Game(Enum):
    CHESS = "chess"
    HOLDEM = "holdem"
    DICE = "dice"
    BLACKJACK = "blackjack"

    @property
    def display_name(self) -> str:
        return GAME_DISPLAY_NAMES[self]

    @classmethod
    def parse(cls, value: str) -> 'Game':
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise RuleSetError(f"Unknown game '{value}' (expected one of {[g.value for g in cls]})")


class RuleKind(Enum):
    NR = "NR"
    SR = "SR"


GAME_DISPLAY_NAMES = {
    Game.CHESS: "Chess",
    Game.HOLDEM: "Texas Hold'em",
    Game.DICE: "Dice Game",
    Game.BLACKJACK: "Blackjack",
}

# (normal pool size, special pool size)
RULE_POOL_SIZES = {
    Game.CHESS: (6, 6),
    Game.HOLDEM: (5, 5),
    Game.DICE: (4, 4),
    Game.BLACKJACK: (4, 4),
}

# (active normals, active specials) per episode
RULES_PER_EPISODE = {
    Game.CHESS: (4, 4),
    Game.HOLDEM: (2, 2),
    Game.DICE: (2, 2),
    Game.BLACKJACK: (2, 2),
}


@dataclass(frozen=True)
class RuleId:
    game: Game
    kind: RuleKind
    index: int

    def __post_init__(self):
        normals, specials = RULE_POOL_SIZES[self.game]
        bound = normals if self.kind == RuleKind.NR else specials
        if not 1 <= self.index <= bound:
            raise RuleSetError(
                f"{self.kind.value}{self.index} is outside the {self.game.value} pool (1-{bound})"
            )

    @property
    def label(self) -> str:
        return f"{self.kind.value}{self.index}"

    @property
    def is_special(self) -> bool:
        return self.kind == RuleKind.SR

    def sort_key(self) -> Tuple[int, int]:
        return (0 if self.kind == RuleKind.NR else 1, self.index)

    @classmethod
    def parse(cls, game: Game, label: str) -> 'RuleId':
        text = label.strip().upper()
        if len(text) < 3 or text[:2] not in ("NR", "SR") or not text[2:].isdigit():
            raise RuleSetError(f"Malformed rule label '{label}'")
        return cls(game=game, kind=RuleKind(text[:2]), index=int(text[2:]))

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class RuleSet:
    """The active NR/SR combination that governs one episode."""
    game: Game
    normals: Tuple[RuleId, ...]
    specials: Tuple[RuleId, ...]

    def __post_init__(self):
        want_nr, want_sr = RULES_PER_EPISODE[self.game]
        if len(self.normals) != want_nr or len(self.specials) != want_sr:
            raise RuleSetError(
                f"{self.game.value} needs {want_nr} NR + {want_sr} SR, "
                f"got {len(self.normals)} NR + {len(self.specials)} SR"
            )
        for rule, kind in [(r, RuleKind.NR) for r in self.normals] + [(r, RuleKind.SR) for r in self.specials]:
            if rule.game != self.game:
                raise RuleSetError(f"{rule.label} belongs to {rule.game.value}, not {self.game.value}")
            if rule.kind != kind:
                raise RuleSetError(f"{rule.label} listed under the wrong kind")
        rules = self.normals + self.specials
        if len(set(rules)) != len(rules):
            raise RuleSetError("Duplicate rule in rule set")
        if list(self.normals) != sorted(self.normals, key=RuleId.sort_key) or \
                list(self.specials) != sorted(self.specials, key=RuleId.sort_key):
            raise RuleSetError("Rules must be listed in ascending index order")

    @classmethod
    def create(cls, game: Game, normal_indices: Iterable[int], special_indices: Iterable[int]) -> 'RuleSet':
        return cls(
            game=game,
            normals=tuple(RuleId(game, RuleKind.NR, i) for i in sorted(normal_indices)),
            specials=tuple(RuleId(game, RuleKind.SR, i) for i in sorted(special_indices)),
        )

    @property
    def rules(self) -> Tuple[RuleId, ...]:
        return self.normals + self.specials

    @property
    def special_indices(self) -> FrozenSet[int]:
        return frozenset(r.index for r in self.specials)

    @property
    def normal_indices(self) -> FrozenSet[int]:
        return frozenset(r.index for r in self.normals)

    def is_active(self, rule: RuleId) -> bool:
        return rule in self.rules

    def labels(self) -> List[str]:
        return [r.label for r in self.rules]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "game": self.game.value,
            "normals": [r.label for r in self.normals],
            "specials": [r.label for r in self.specials],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RuleSet':
        game = Game.parse(data["game"])
        return cls(
            game=game,
            normals=tuple(RuleId.parse(game, label) for label in data["normals"]),
            specials=tuple(RuleId.parse(game, label) for label in data["specials"]),
        )

    def __str__(self) -> str:
        return f"{self.game.value}[{','.join(self.labels())}]"


@dataclass(frozen=True)
class EpisodeSeed:
    master_seed: int
    config_index: int
    generator_version: str = GENERATOR_VERSION
    rng_algorithm: str = DEFAULT_RNG_ALGORITHM

    def __post_init__(self):
        if not 0 <= self.master_seed <= MAX_MASTER_SEED:
            raise RuleSetError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.config_index < 0:
            raise RuleSetError(f"config_index must be >= 0, got {self.config_index}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "master_seed": self.master_seed,
            "config_index": self.config_index,
            "generator_version": self.generator_version,
            "rng_algorithm": self.rng_algorithm,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EpisodeSeed':
        return cls(
            master_seed=int(data["master_seed"]),
            config_index=int(data["config_index"]),
            generator_version=data.get("generator_version", GENERATOR_VERSION),
            rng_algorithm=data.get("rng_algorithm", DEFAULT_RNG_ALGORITHM),
        )

    def __str__(self) -> str:
        return f"{self.master_seed}/{self.config_index}"


@dataclass
class Episode:
    seed: EpisodeSeed
    rule_set: RuleSet
    observations: List[Dict[str, Any]]
    ground_truth: Dict[str, RuleId]
    header: Dict[str, Any] = field(default_factory=dict)

    @property
    def game(self) -> Game:
        return self.rule_set.game

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed.to_dict(),
            "game": self.game.value,
            "rule_set": self.rule_set.to_dict(),
            "header": self.header,
            "observations": self.observations,
            "ground_truth": {entity: rule.label for entity, rule in self.ground_truth.items()},
            "generator_version": self.seed.generator_version,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Episode':
        rule_set = RuleSet.from_dict(data["rule_set"])
        if rule_set.game.value != data["game"]:
            raise RuleSetError(f"Episode game '{data['game']}' does not match its rule set")
        return cls(
            seed=EpisodeSeed.from_dict(data["seed"]),
            rule_set=rule_set,
            observations=list(data["observations"]),
            ground_truth={
                entity: RuleId.parse(rule_set.game, label)
                for entity, label in data["ground_truth"].items()
            },
            header=dict(data.get("header", {})),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> 'Episode':
        return cls.from_dict(json.loads(line))


class Outcome(Enum):
    """Result of a two-sided comparison, seen from the first argument."""
    A_WINS = "a"
    B_WINS = "b"
    TIE = "tie"

    def flipped(self) -> 'Outcome':
        if self is Outcome.A_WINS:
            return Outcome.B_WINS
        if self is Outcome.B_WINS:
            return Outcome.A_WINS
        return Outcome.TIE


@dataclass(frozen=True)
class HandCategory:
    """Category of a hand or roll; source_rule is set when a special rule produced it."""
    label: Enum
    source_rule: Optional[RuleId] = None

    @property
    def name(self) -> str:
        return self.label.value


@dataclass
class ObservationAudit:
    """Findings from re-deriving one tabletop observation.

    problems holds (invariant, message) pairs; discriminating is True when the
    stored outcome differs from what the normal rules alone would give.
    """
    problems: List[Tuple[str, str]] = field(default_factory=list)
    discriminating: bool = False

    def fail(self, invariant: str, message: str) -> None:
        self.problems.append((invariant, message))

    @property
    def ok(self) -> bool:
        return not self.problems


@dataclass(frozen=True)
class Violation:
    """One broken invariant found by episode validation."""
    invariant: str
    message: str
    observation_index: Optional[int] = None

    def __str__(self) -> str:
        where = f" @obs {self.observation_index}" if self.observation_index is not None else ""
        return f"[{self.invariant}]{where} {self.message}"
