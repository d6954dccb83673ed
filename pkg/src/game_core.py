"""
Rule-combination enumeration and seeded random streams shared by every game engine.
"""
from functools import lru_cache
from itertools import combinations, product
from typing import List, Tuple
import hashlib

import numpy as np

from .errors import PreconditionError
from .models import Game, RuleSet, EpisodeSeed, RULE_POOL_SIZES, RULES_PER_EPISODE

_BIT_GENERATORS = {
    "philox4x64-10": np.random.Philox,
    "pcg64": np.random.PCG64,
}


@lru_cache(maxsize=None)
def _combinations(game: Game) -> Tuple[RuleSet, ...]:
    normal_pool, special_pool = RULE_POOL_SIZES[game]
    normal_count, special_count = RULES_PER_EPISODE[game]
    normal_choices = combinations(range(1, normal_pool + 1), normal_count)
    special_choices = list(combinations(range(1, special_pool + 1), special_count))
    return tuple(
        RuleSet.create(game, normals, specials)
        for normals, specials in product(normal_choices, special_choices)
    )


def enumerate_rule_combinations(game: Game) -> List[RuleSet]:
    """All rule sets of a game in lexicographic (NR indices, SR indices) order.

    The position in this list is the episode's config_index.
    """
    return list(_combinations(game))


def rule_set_for_index(game: Game, config_index: int) -> RuleSet:
    combos = _combinations(game)
    if not 0 <= config_index < len(combos):
        raise PreconditionError(
            f"config_index {config_index} out of range for {game.value} (0-{len(combos) - 1})"
        )
    return combos[config_index]


def supported_rng_algorithms() -> List[str]:
    return sorted(_BIT_GENERATORS)


def derive_stream(seed: EpisodeSeed, label: str) -> np.random.Generator:
    """Independent, reproducible substream for one labelled purpose of one episode.

    The label is hashed into the spawn key so unrelated purposes ("board",
    "moves", "hand/3") never share counter space.
    """
    if not label:
        raise PreconditionError("Stream label must be a non-empty string")
    try:
        bit_generator = _BIT_GENERATORS[seed.rng_algorithm]
    except KeyError:
        raise PreconditionError(
            f"Unsupported RNG algorithm '{seed.rng_algorithm}' (supported: {supported_rng_algorithms()})"
        )
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    label_words = tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
    sequence = np.random.SeedSequence(
        entropy=seed.master_seed,
        spawn_key=(seed.config_index,) + label_words,
    )
    return np.random.Generator(bit_generator(sequence))
