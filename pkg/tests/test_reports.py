import sys
import os

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.errors import PreconditionError
from src.evaluation import Annotation, EvalRecord, JudgeVerdict, TaxonomyLabel
from src.mock_endpoint import JUDGE_NO, JUDGE_YES
from src.models import EpisodeSeed, Game
from src.prompts import InducedRule, Intervention
from src.reports import (
    UNRESOLVED, format_rate, render_accuracy_text, render_taxonomy_markdown, resolved_label, rule_accuracy,
    taxonomy_report,
)

YES = JudgeVerdict.from_outputs([JUDGE_YES] * 3)
NO = JudgeVerdict.from_outputs([JUDGE_NO] * 3)
RULES = ("NR1", "NR2", "SR1", "SR2")


def _record(index, verdicts, game=Game.DICE, model="m", failure=None, labels=(), resolution=None):
    return EvalRecord(
        episode_seed=EpisodeSeed(1, index),
        game=game,
        active_rules=RULES,
        model=model,
        intervention=Intervention.NONE,
        prompt_hash="h",
        induced=InducedRule("rule", "Induced Rule: rule", True),
        per_rule_verdicts=verdicts,
        failure=failure,
        taxonomy_labels=[Annotation(f"ann{i}", label) for i, label in enumerate(labels)],
        resolution=resolution,
    )


def test_format_rate():
    assert format_rate(2, 3) == "66.7% (2/3)"
    assert format_rate(526, 1109) == "47.4% (526/1109)"


def test_rule_accuracy_two_of_three():
    records = [
        _record(0, {"SR1": YES, "NR1": YES}),
        _record(1, {"SR1": YES, "NR1": NO}),
        _record(2, {"SR1": NO, "NR1": NO}),
    ]
    frame = rule_accuracy(records)
    assert list(frame["rule"]) == ["NR1", "SR1"]
    sr1 = frame[frame["rule"] == "SR1"].iloc[0]
    assert (sr1["consistent"], sr1["total"]) == (2, 3)
    assert sr1["accuracy"] == pytest.approx(0.667, abs=1e-3)
    assert frame[frame["rule"] == "NR1"].iloc[0]["consistent"] == 1


def test_failed_records_are_excluded():
    records = [_record(0, {"SR1": YES}), _record(1, {}, failure="HTTP 500 from endpoint")]
    frame = rule_accuracy(records)
    assert frame.iloc[0]["total"] == 1
    with pytest.raises(PreconditionError):
        rule_accuracy([_record(1, {}, failure="HTTP 500 from endpoint")])


def test_rule_accuracy_needs_records():
    with pytest.raises(PreconditionError):
        rule_accuracy([])


def test_rule_order_and_sections():
    records = [
        _record(0, {"SR2": YES, "NR2": NO, "SR1": YES}),
        _record(1, {"SR2": NO, "NR1": YES}, game=Game.BLACKJACK),
    ]
    frame = rule_accuracy(records)
    dice = frame[frame["game"] == "dice"]
    assert list(dice["rule"]) == ["NR2", "SR1", "SR2"]
    text = render_accuracy_text(frame)
    sections = text.strip().split("\n\n")
    assert len(sections) == 2
    assert sections[0].splitlines()[0] == "Blackjack (m)"
    assert sections[1].splitlines()[0] == "Dice Game (m)"
    assert "(1/1)" in sections[1]


def test_taxonomy_rates():
    records = [
        _record(0, {}, labels=[TaxonomyLabel.MATH_OVERUSE]),
        _record(1, {}, labels=[TaxonomyLabel.MATH_OVERUSE, TaxonomyLabel.MATH_OVERUSE]),
        _record(2, {}, labels=[TaxonomyLabel.BREAKDOWN]),
        _record(3, {}),
    ]
    frame = taxonomy_report(records)
    row = frame.iloc[0]
    assert row["labeled"] == 3
    assert row["Solving:MathOveruse"] == "66.7% (2/3)"
    assert row["Breakdown"] == "33.3% (1/3)"
    assert row["Summary"] == "0.0% (0/3)"
    markdown = render_taxonomy_markdown(frame)
    assert markdown.splitlines()[2].startswith("| Dice Game | m | 33.3% (1/3)")


def test_annotator_disagreement_is_unresolved():
    split = _record(0, {}, labels=[TaxonomyLabel.BREAKDOWN, TaxonomyLabel.SUMMARY])
    settled = _record(1, {}, labels=[TaxonomyLabel.BREAKDOWN, TaxonomyLabel.SUMMARY], resolution=TaxonomyLabel.SUMMARY)
    assert resolved_label(split) is None
    assert resolved_label(settled) is TaxonomyLabel.SUMMARY
    frame = taxonomy_report([split, settled])
    row = frame.iloc[0]
    assert row[UNRESOLVED] == 1
    assert row["labeled"] == 1
    assert row["Summary"] == "100.0% (1/1)"


def test_all_unresolved_reports_na():
    frame = taxonomy_report([_record(0, {}, labels=[TaxonomyLabel.BREAKDOWN, TaxonomyLabel.SUMMARY])])
    assert frame.iloc[0]["Breakdown"] == "n/a"


def test_taxonomy_needs_labels():
    with pytest.raises(PreconditionError):
        taxonomy_report([_record(0, {"SR1": YES})])
