"""
Per-rule accuracy and error-taxonomy tables.
"""
from collections import Counter
from typing import Dict, List, Optional, Sequence

import pandas as pd
import structlog

from .errors import PreconditionError
from .evaluation import EvalRecord, TaxonomyLabel
from .models import Game, RuleId

logger = structlog.get_logger(__name__)

UNRESOLVED = "unresolved"


def format_rate(count: int, total: int) -> str:
    """Table cell such as "47.4% (526/1109)"."""
    return f"{100.0 * count / total:.1f}% ({count}/{total})"


def rule_accuracy(records: Sequence[EvalRecord]) -> pd.DataFrame:
    """Share of consistent majority decisions per (game, model, rule).

    Failed queries are left out; rows run NR1.. then SR1.. within each game.
    """
    if not records:
        raise PreconditionError("rule_accuracy needs at least one record")
    rows = []
    for record in records:
        if record.failed:
            continue
        for label, verdict in record.per_rule_verdicts.items():
            rows.append({"game": record.game.value, "model": record.model, "rule": label, "consistent": int(verdict.decision)})
    if not rows:
        raise PreconditionError("no judged records to score")

    frame = (
        pd.DataFrame(rows)
        .groupby(["game", "model", "rule"], as_index=False)
        .agg(consistent=("consistent", "sum"), total=("consistent", "size"))
    )
    frame["accuracy"] = frame["consistent"] / frame["total"]
    frame["_order"] = [RuleId.parse(Game(g), r).sort_key() for g, r in zip(frame["game"], frame["rule"])]
    frame = frame.sort_values(["game", "model", "_order"]).drop(columns="_order").reset_index(drop=True)
    skipped = sum(r.failed for r in records)
    if skipped:
        logger.info("accuracy_skipped_failures", failures=skipped)
    return frame[["game", "model", "rule", "consistent", "total", "accuracy"]]


def render_accuracy_text(frame: pd.DataFrame) -> str:
    lines: List[str] = []
    for (game, model), section in frame.groupby(["game", "model"], sort=True):
        if lines:
            lines.append("")
        lines.append(f"{Game(game).display_name} ({model})")
        for row in section.itertuples(index=False):
            lines.append(f"  {row.rule:<4} {row.accuracy:6.3f}  ({row.consistent}/{row.total})")
    return "\n".join(lines) + "\n"


def resolved_label(record: EvalRecord) -> Optional[TaxonomyLabel]:
    """Explicit resolution, else the label all annotators agree on, else None."""
    if record.resolution is not None:
        return record.resolution
    labels = {a.label for a in record.taxonomy_labels}
    if len(labels) == 1:
        return labels.pop()
    return None


def taxonomy_report(records: Sequence[EvalRecord]) -> pd.DataFrame:
    """Error-category rates per (game, model) over traces with a resolved label."""
    labeled = [r for r in records if r.taxonomy_labels or r.resolution is not None]
    if not labeled:
        raise PreconditionError("no labeled records for the taxonomy report")

    counts: Dict[tuple, Counter] = {}
    unresolved: Counter = Counter()
    for record in labeled:
        key = (record.game.value, record.model)
        label = resolved_label(record)
        counts.setdefault(key, Counter())
        if label is None:
            unresolved[key] += 1
            logger.info("taxonomy_unresolved", record=record.record_id)
            continue
        counts[key][label] += 1

    rows = []
    for (game, model), counter in sorted(counts.items()):
        total = sum(counter.values())
        row = {"game": game, "model": model, "labeled": total, UNRESOLVED: unresolved[(game, model)]}
        for label in TaxonomyLabel:
            row[label.value] = format_rate(counter[label], total) if total else "n/a"
        rows.append(row)
    return pd.DataFrame(rows, columns=["game", "model", "labeled", UNRESOLVED] + [t.value for t in TaxonomyLabel])


def render_taxonomy_markdown(frame: pd.DataFrame) -> str:
    header = ["Game", "Model"] + [t.value for t in TaxonomyLabel]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in frame.to_dict("records"):
        cells = [Game(row["game"]).display_name, row["model"]] + [row[t.value] for t in TaxonomyLabel]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
