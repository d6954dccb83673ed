"""
Episode generation and validation shared by the Hold'em, dice and blackjack games.
"""
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import structlog

from .blackjack import audit_blackjack_observation, sample_blackjack_observation
from .dice import audit_dice_observation, sample_dice_observation
from .errors import PreconditionError, SamplingExhaustedError
from .game_core import derive_stream
from .holdem import ShowdownScope, audit_holdem_observation, sample_holdem_observation
from .models import Episode, EpisodeSeed, Game, ObservationAudit, RuleId, RuleSet, Violation
from .rule_catalog import tabletop_ground_truth

logger = structlog.get_logger(__name__)

TABLETOP_GAMES = (Game.HOLDEM, Game.DICE, Game.BLACKJACK)

Sampler = Callable[[RuleId, RuleSet, np.random.Generator, int], Dict[str, Any]]
Auditor = Callable[[Dict[str, Any], RuleSet, Dict[str, Any]], ObservationAudit]

_SAMPLERS: Dict[Game, Sampler] = {
    Game.HOLDEM: lambda rule, rs, rng, n: sample_holdem_observation(rule, rs, rng, n, ShowdownScope.TWO_HOLE),
    Game.DICE: sample_dice_observation,
    Game.BLACKJACK: sample_blackjack_observation,
}

_AUDITORS: Dict[Game, Auditor] = {
    Game.HOLDEM: audit_holdem_observation,
    Game.DICE: audit_dice_observation,
    Game.BLACKJACK: audit_blackjack_observation,
}


@dataclass
class TabletopConfig:
    observations_per_rule: int = 3
    max_attempts: int = 5000

    def observation_count(self, rule_set: RuleSet) -> int:
        return self.observations_per_rule * len(rule_set.rules)


def featured_schedule(rule_set: RuleSet, seed: EpisodeSeed, per_rule: int) -> List[RuleId]:
    """Each active rule repeated per_rule times, in a seeded order."""
    slots = [rule for rule in rule_set.rules for _ in range(per_rule)]
    order = derive_stream(seed, "schedule").permutation(len(slots))
    return [slots[int(i)] for i in order]


def _header(game: Game) -> Dict[str, Any]:
    if game is Game.HOLDEM:
        return {"showdown": ShowdownScope.TWO_HOLE.value}
    return {}


def generate_tabletop_episode(
    game: Game,
    rule_set: RuleSet,
    seed: EpisodeSeed,
    config: Optional[TabletopConfig] = None,
) -> Episode:
    if game not in TABLETOP_GAMES:
        raise PreconditionError(f"{game.value} is not a tabletop game")
    if rule_set.game != game:
        raise PreconditionError(f"{game.value} generator called with a {rule_set.game.value} rule set")
    config = config or TabletopConfig()
    sampler = _SAMPLERS[game]

    observations = []
    for index, rule in enumerate(featured_schedule(rule_set, seed, config.observations_per_rule)):
        rng = derive_stream(seed, f"observation/{index}")
        try:
            observations.append(sampler(rule, rule_set, rng, config.max_attempts))
        except SamplingExhaustedError as e:
            raise SamplingExhaustedError(f"observation {index}: {e}", seed=seed) from e

    logger.debug("tabletop_episode_generated", game=game.value, seed=str(seed), observations=len(observations))
    return Episode(
        seed=seed,
        rule_set=rule_set,
        observations=observations,
        ground_truth=tabletop_ground_truth(rule_set.rules),
        header=_header(game),
    )


def validate_tabletop_episode(ep: Episode, config: Optional[TabletopConfig] = None) -> List[Violation]:
    config = config or TabletopConfig()
    violations: List[Violation] = []
    if ep.game not in TABLETOP_GAMES:
        return [Violation("structure", f"{ep.game.value} is not a tabletop game")]

    expected = config.observation_count(ep.rule_set)
    if len(ep.observations) != expected:
        violations.append(Violation("observation-count", f"{len(ep.observations)} observations, expected {expected}"))
    if ep.ground_truth != tabletop_ground_truth(ep.rule_set.rules):
        violations.append(Violation("rule-assignment", "ground truth must bind exactly the active rules"))

    auditor = _AUDITORS[ep.game]
    featured: Counter = Counter()
    discriminating = 0
    for index, obs in enumerate(ep.observations):
        audit = auditor(obs, ep.rule_set, ep.header)
        violations.extend(Violation(invariant, message, index) for invariant, message in audit.problems)
        if audit.ok:
            featured[obs["featured_rule"]] += 1
        discriminating += audit.discriminating

    for rule in ep.rule_set.rules:
        if featured[rule.label] < config.observations_per_rule:
            violations.append(Violation(
                "featured-quota",
                f"{rule.label} featured in {featured[rule.label]} observations (minimum {config.observations_per_rule})",
            ))
    if ep.observations and not discriminating:
        violations.append(Violation("discriminability", "no observation separates the special rules from the normal ones"))
    return violations
