"""
Game-independent entry points: generate, validate, store and count episodes.
"""
from collections import Counter
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

import pandas as pd
import structlog

from .chess_engine import PIECE_NAMES, generate_chess_episode, validate_chess_episode
from .errors import PreconditionError
from .game_core import enumerate_rule_combinations, rule_set_for_index
from .models import DEFAULT_RNG_ALGORITHM, GENERATOR_VERSION, Episode, EpisodeSeed, Game, Violation
from .storage import PathLike, read_jsonl, write_jsonl
from .tabletop import TabletopConfig, generate_tabletop_episode, validate_tabletop_episode

logger = structlog.get_logger(__name__)


def generate_episode(
    game: Game,
    config_index: int,
    master_seed: int,
    rng_algorithm: str = DEFAULT_RNG_ALGORITHM,
    tabletop_config: Optional[TabletopConfig] = None,
) -> Episode:
    rule_set = rule_set_for_index(game, config_index)
    seed = EpisodeSeed(master_seed, config_index, GENERATOR_VERSION, rng_algorithm)
    if game is Game.CHESS:
        return generate_chess_episode(rule_set, seed)
    return generate_tabletop_episode(game, rule_set, seed, tabletop_config)


def validate_episode(ep: Episode) -> List[Violation]:
    """Every broken invariant of ep; an empty list means the episode is valid."""
    if ep.game is Game.CHESS:
        return validate_chess_episode(ep)
    return validate_tabletop_episode(ep)


def config_indices(game: Game, start: Optional[int] = None, stop: Optional[int] = None) -> range:
    total = len(enumerate_rule_combinations(game))
    start = 0 if start is None else start
    stop = total if stop is None else stop
    if not 0 <= start < stop <= total:
        raise PreconditionError(f"config range [{start},{stop}) outside [0,{total}) for {game.value}")
    return range(start, stop)


def generate_corpus(
    game: Game,
    master_seed: int,
    indices: Iterable[int],
    rng_algorithm: str = DEFAULT_RNG_ALGORITHM,
    tabletop_config: Optional[TabletopConfig] = None,
) -> Iterator[Episode]:
    for config_index in indices:
        ep = generate_episode(game, config_index, master_seed, rng_algorithm, tabletop_config)
        logger.info("episode_generated", game=game.value, config_index=config_index, rules=str(ep.rule_set))
        yield ep


def write_episodes(path: PathLike, episodes: Iterable[Episode]) -> int:
    return write_jsonl(path, (ep.to_dict() for ep in episodes))


def read_episodes(path: PathLike) -> List[Episode]:
    return [Episode.from_dict(row) for row in read_jsonl(path)]


def featured_counts(ep: Episode) -> Dict[str, int]:
    """Observations featuring each active rule (chess: moves of the piece bound to it)."""
    if ep.game is Game.CHESS:
        by_type = Counter(obs["piece_type"] for obs in ep.observations)
        rules = {PIECE_NAMES.index(entity) + 1: rule for entity, rule in ep.ground_truth.items()}
        return {rules[t].label: by_type.get(t, 0) for t in sorted(rules)}
    counts = Counter(obs["featured_rule"] for obs in ep.observations)
    return {rule.label: counts.get(rule.label, 0) for rule in ep.rule_set.rules}


def rule_appearance_counts(episodes: Sequence[Episode]) -> pd.DataFrame:
    """Per (game, rule): episodes where the rule is active and observations featuring it."""
    rows: Dict[tuple, Dict[str, int]] = {}
    for ep in episodes:
        for label, count in featured_counts(ep).items():
            row = rows.setdefault((ep.game.value, label), {"episodes": 0, "observations": 0})
            row["episodes"] += 1
            row["observations"] += count
    frame = pd.DataFrame(
        [{"game": game, "rule": rule, **counts} for (game, rule), counts in rows.items()],
        columns=["game", "rule", "episodes", "observations"],
    )
    if frame.empty:
        return frame
    frame["_order"] = frame["rule"].map(lambda label: (label[:2] != "NR", int(label[2:])))
    return frame.sort_values(["game", "_order"]).drop(columns="_order").reset_index(drop=True)
