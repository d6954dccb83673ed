"""
Induction runs, majority-vote judging and human taxonomy annotations.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
import asyncio

import structlog

from .errors import AuthenticationError, EndpointError, PreconditionError
from .model_client import ChatCompletionClient, prompt_hash, query_model
from .models import Episode, EpisodeSeed, Game, RuleId
from .prompts import Intervention, InducedRule, PromptBundle, build_induction_prompt, build_judge_prompt, parse_induced_rule
from .rule_catalog import episode_truths
from .transcripts import DiceStyle, render_transcript

logger = structlog.get_logger(__name__)

JUDGE_VOTES = 3


class TaxonomyLabel(Enum):
    BREAKDOWN = "Breakdown"
    HALLUCINATED_RULE = "Solving:HallucinatedRule"
    OVERGENERALIZATION = "Solving:Overgeneralization"
    MATH_OVERUSE = "Solving:MathOveruse"
    SUMMARY = "Summary"

    @classmethod
    def parse(cls, value: str) -> 'TaxonomyLabel':
        try:
            return cls(value.strip())
        except ValueError:
            raise PreconditionError(f"Unknown taxonomy label '{value}' (expected one of {[t.value for t in cls]})")


@dataclass(frozen=True)
class Annotation:
    annotator: str
    label: TaxonomyLabel


def parse_vote(text: str) -> Tuple[bool, bool]:
    """(vote, parsed) from the leading "Yes,"/"No," of a judge response."""
    head = text.strip().lstrip("\"'*").lower()
    if head.startswith("yes,"):
        return True, True
    if head.startswith("no,"):
        return False, True
    return False, False


@dataclass(frozen=True)
class JudgeVerdict:
    votes: Tuple[bool, ...]
    raw_judge_outputs: Tuple[str, ...]
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.votes) != JUDGE_VOTES or len(self.raw_judge_outputs) != JUDGE_VOTES:
            raise PreconditionError(f"a verdict needs exactly {JUDGE_VOTES} votes and outputs")

    @property
    def decision(self) -> bool:
        return sum(self.votes) >= 2

    @classmethod
    def from_outputs(cls, outputs: Sequence[str]) -> 'JudgeVerdict':
        votes, flags = [], []
        for index, text in enumerate(outputs):
            vote, parsed = parse_vote(text)
            votes.append(vote)
            if not parsed:
                flags.append(f"unparseable_vote_{index}")
        return cls(tuple(votes), tuple(outputs), tuple(flags))

    @classmethod
    def unparsed(cls) -> 'JudgeVerdict':
        """Inconsistent verdict for an induced rule that could not be extracted; no judge calls."""
        return cls((False,) * JUDGE_VOTES, ("",) * JUDGE_VOTES, ("unparsed",))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "votes": list(self.votes),
            "decision": self.decision,
            "raw_judge_outputs": list(self.raw_judge_outputs),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'JudgeVerdict':
        return cls(tuple(bool(v) for v in data["votes"]), tuple(data["raw_judge_outputs"]), tuple(data.get("flags", ())))


@dataclass
class EvalRecord:
    episode_seed: EpisodeSeed
    game: Game
    active_rules: Tuple[str, ...]
    model: str
    intervention: Intervention
    prompt_hash: str
    raw_response: str = ""
    induced: Optional[InducedRule] = None
    per_rule_verdicts: Dict[str, JudgeVerdict] = field(default_factory=dict)
    taxonomy_labels: List[Annotation] = field(default_factory=list)
    resolution: Optional[TaxonomyLabel] = None
    failure: Optional[str] = None
    usage: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        stray = set(self.per_rule_verdicts) - set(self.active_rules)
        if stray:
            raise PreconditionError(f"verdicts for inactive rules {sorted(stray)} on {self.record_id}")

    @property
    def record_id(self) -> str:
        return f"{self.game.value}/{self.episode_seed}/{self.model}/{self.intervention.value}"

    @property
    def failed(self) -> bool:
        return self.failure is not None

    def rule_ids(self) -> List[RuleId]:
        return [RuleId.parse(self.game, label) for label in self.active_rules]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "record_id": self.record_id,
            "episode_seed": self.episode_seed.to_dict(),
            "game": self.game.value,
            "active_rules": list(self.active_rules),
            "model": self.model,
            "intervention": self.intervention.value,
            "prompt_hash": self.prompt_hash,
            "raw_response": self.raw_response,
            "induced": None if self.induced is None else {
                "text": self.induced.text, "parse_ok": self.induced.parse_ok,
            },
            "per_rule_verdicts": {label: v.to_dict() for label, v in self.per_rule_verdicts.items()},
            "taxonomy_labels": [{"annotator": a.annotator, "label": a.label.value} for a in self.taxonomy_labels],
            "resolution": None if self.resolution is None else self.resolution.value,
            "failure": self.failure,
            "usage": self.usage,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvalRecord':
        induced = data.get("induced")
        return cls(
            episode_seed=EpisodeSeed.from_dict(data["episode_seed"]),
            game=Game.parse(data["game"]),
            active_rules=tuple(data["active_rules"]),
            model=data["model"],
            intervention=Intervention.parse(data["intervention"]),
            prompt_hash=data["prompt_hash"],
            raw_response=data.get("raw_response", ""),
            induced=None if induced is None else InducedRule(induced["text"], data.get("raw_response", ""), induced["parse_ok"]),
            per_rule_verdicts={k: JudgeVerdict.from_dict(v) for k, v in data.get("per_rule_verdicts", {}).items()},
            taxonomy_labels=[Annotation(a["annotator"], TaxonomyLabel.parse(a["label"])) for a in data.get("taxonomy_labels", [])],
            resolution=TaxonomyLabel.parse(data["resolution"]) if data.get("resolution") else None,
            failure=data.get("failure"),
            usage=dict(data.get("usage") or {}),
        )


def episode_key(game: Game, seed: EpisodeSeed) -> Tuple[str, int, int]:
    return (game.value, seed.master_seed, seed.config_index)


def build_bundles(
    episodes: Sequence[Episode],
    intervention: Intervention = Intervention.NONE,
    dice_style: DiceStyle = DiceStyle.DUEL,
) -> List[PromptBundle]:
    return [build_induction_prompt(render_transcript(ep, dice_style), intervention) for ep in episodes]


async def _induce(client: ChatCompletionClient, ep: Episode, bundle: PromptBundle) -> EvalRecord:
    record = EvalRecord(
        episode_seed=ep.seed,
        game=ep.game,
        active_rules=tuple(ep.rule_set.labels()),
        model=client.cfg.model_name,
        intervention=bundle.intervention,
        prompt_hash=prompt_hash(bundle.prompt_text),
    )
    try:
        response = await query_model(client, bundle)
    except AuthenticationError:
        raise
    except EndpointError as e:
        logger.error("induction_failed", game=ep.game.value, seed=str(ep.seed), error=str(e))
        record.failure = str(e)
        return record
    record.raw_response = response.text
    record.usage = response.usage
    record.induced = parse_induced_rule(response.text)
    if not record.induced.parse_ok:
        logger.warning("induced_rule_unparsed", game=ep.game.value, seed=str(ep.seed))
    return record


async def run_evaluation(
    episodes: Sequence[Episode],
    client: ChatCompletionClient,
    intervention: Intervention = Intervention.NONE,
    dice_style: DiceStyle = DiceStyle.DUEL,
) -> List[EvalRecord]:
    """One induction query per episode; records come back in episode order.

    Endpoint failures become failure records; authentication failures abort.
    """
    bundles = build_bundles(episodes, intervention, dice_style)
    records = await asyncio.gather(*(_induce(client, ep, bundle) for ep, bundle in zip(episodes, bundles)))
    failed = sum(r.failed for r in records)
    logger.info("evaluation_finished", episodes=len(records), failures=failed, upstream_calls=client.upstream_calls)
    return list(records)


async def judge_rule(judge: ChatCompletionClient, game: Game, truth: str, induced: InducedRule) -> JudgeVerdict:
    """Three independent judge calls; the majority decides."""
    prompt = build_judge_prompt(game, truth, induced)
    responses = await asyncio.gather(*(judge.complete(prompt, vote_index=i) for i in range(JUDGE_VOTES)))
    verdict = JudgeVerdict.from_outputs([r.text for r in responses])
    if verdict.flags:
        logger.warning("judge_vote_unparseable", game=game.value, flags=list(verdict.flags))
    return verdict


async def judge_record(judge: ChatCompletionClient, record: EvalRecord, ep: Episode) -> EvalRecord:
    if record.failed or record.induced is None:
        return record
    truths = episode_truths(ep)
    verdicts: Dict[str, JudgeVerdict] = {}
    for label in record.active_rules:
        if not record.induced.parse_ok:
            verdicts[label] = JudgeVerdict.unparsed()
            continue
        try:
            verdicts[label] = await judge_rule(judge, record.game, truths[label], record.induced)
        except AuthenticationError:
            raise
        except EndpointError as e:
            logger.error("judging_failed", record=record.record_id, rule=label, error=str(e))
            return replace(record, per_rule_verdicts={}, failure=f"judge: {e}")
    return replace(record, per_rule_verdicts=verdicts)


async def run_judging(
    records: Sequence[EvalRecord],
    episodes: Sequence[Episode],
    judge: ChatCompletionClient,
) -> List[EvalRecord]:
    by_key = {episode_key(ep.game, ep.seed): ep for ep in episodes}
    missing = [r.record_id for r in records if episode_key(r.game, r.episode_seed) not in by_key]
    if missing:
        raise PreconditionError(f"no episode for records {missing[:3]}")
    judged = await asyncio.gather(
        *(judge_record(judge, r, by_key[episode_key(r.game, r.episode_seed)]) for r in records)
    )
    logger.info("judging_finished", records=len(judged), upstream_calls=judge.upstream_calls)
    return list(judged)


def merge_annotations(records: Sequence[EvalRecord], annotations: Iterable[Dict[str, Any]]) -> List[EvalRecord]:
    """Attach annotator labels and resolutions, matched on record_id.

    An annotation row carries record_id plus either annotator and label, or resolution.
    """
    by_id = {r.record_id: replace(r, taxonomy_labels=list(r.taxonomy_labels)) for r in records}
    for row in annotations:
        record = by_id.get(row.get("record_id", ""))
        if record is None:
            raise PreconditionError(f"annotation for unknown record '{row.get('record_id')}'")
        if "resolution" in row:
            record.resolution = TaxonomyLabel.parse(row["resolution"])
        else:
            record.taxonomy_labels.append(Annotation(str(row["annotator"]), TaxonomyLabel.parse(row["label"])))
    return [by_id[r.record_id] for r in records]
