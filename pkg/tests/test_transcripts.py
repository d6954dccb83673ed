import sys
import os
import json
import re
from pathlib import Path

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.chess_engine import PIECE_NAMES
from src.dice import single_roll_view
from src.episodes import generate_episode
from src.errors import EpisodeValidationError, PreconditionError
from src.game_core import rule_set_for_index
from src.models import Episode, EpisodeSeed, Game, RuleId
from src.prompts import (
    DECOMPOSITION_TEMPLATE, INDUCTION_TEMPLATE, JUDGE_TEMPLATE, SOLVING_TEMPLATE, SUMMARIZATION_TEMPLATE,
    InducedRule, Intervention, PromptBundle, build_induction_prompt, build_judge_prompt, parse_induced_rule,
)
from src.rule_catalog import episode_truths
from src.transcripts import DiceStyle, TranscriptDoc, render_transcript, transcript_record

SNAPSHOTS = Path(__file__).parent / "snapshots"


def _snapshot(name):
    return (SNAPSHOTS / f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


@pytest.fixture
def dice_episode():
    rule_set = rule_set_for_index(Game.DICE, 0)
    return Episode(
        seed=EpisodeSeed(1, 0),
        rule_set=rule_set,
        observations=[
            {"roll_a": [1, 2, 4], "roll_b": [4, 4, 5], "winner": "A", "featured_rule": "SR1"},
            {"roll_a": [6, 6, 2], "roll_b": [1, 2, 6], "winner": "B", "featured_rule": "SR1"},
        ],
        ground_truth={},
    )


@pytest.fixture
def blackjack_episode():
    return Episode(
        seed=EpisodeSeed(1, 3),
        rule_set=rule_set_for_index(Game.BLACKJACK, 3),
        observations=[{
            "player_cards": ["A♠", "2♥", "2♦", "2♣", "3♠"],
            "total": 20,
            "bust": False,
            "dealer_summary": {"cards": ["10♥", "9♦", "8♣", "4♦", "5♥"], "total": 36, "bust": True},
            "outcome": "win",
            "featured_rule": "NR2",
        }],
        ground_truth={},
    )


def test_dice_duel_rendering(dice_episode):
    doc = render_transcript(dice_episode, validate=False)
    assert doc.text == (
        "Game: Dice Game\n"
        "Roll 1: Player [1, 2, 4] vs Dealer [4, 4, 5] → Player wins\n"
        "Roll 2: Player [6, 6, 2] vs Dealer [1, 2, 6] → Dealer wins"
    )
    assert doc.episode_ref == dice_episode.seed


def test_dice_single_roll_rendering(dice_episode):
    doc = render_transcript(dice_episode, DiceStyle.SINGLE, validate=False)
    assert doc.body_lines == ["Roll 1: [1, 2, 4] → Win", "Roll 2: [6, 6, 2] → Lose"]


def test_blackjack_line_shows_total_and_bust(blackjack_episode):
    doc = render_transcript(blackjack_episode, validate=False)
    assert "Total: 20 (A=11), No bust" in doc.body_lines
    assert "Result: Win vs Dealer (Bust)" in doc.body_lines
    assert doc.header == "Game: Blackjack"


def test_chess_transcript_header_and_rounds():
    ep = generate_episode(Game.CHESS, 11, master_seed=5)
    doc = render_transcript(ep)
    size = ep.header["size"]
    assert doc.header == f"Board: {size}×{size}"
    round_lines = [line for line in doc.body_lines if line.startswith("Round ")]
    assert len(round_lines) == ep.header["rounds"]
    assert round_lines[0].startswith("Round 1: Red: ")
    assert "; Black: " in round_lines[0]
    assert "→" in round_lines[0]
    assert sum(1 for line in doc.body_lines if " @ " in line) == 16


@pytest.mark.parametrize("game", [Game.CHESS, Game.HOLDEM, Game.DICE, Game.BLACKJACK])
def test_rendering_is_byte_stable(game):
    ep = generate_episode(game, 2, master_seed=77)
    again = generate_episode(game, 2, master_seed=77)
    assert render_transcript(ep).text == render_transcript(again).text
    record = transcript_record(render_transcript(ep))
    assert record["game"] == game.value
    assert record["episode_seed"]["config_index"] == 2


def test_invalid_episode_is_not_rendered(dice_episode):
    with pytest.raises(EpisodeValidationError) as excinfo:
        render_transcript(dice_episode)
    assert excinfo.value.violations


def test_templates_match_snapshots():
    assert INDUCTION_TEMPLATE == _snapshot("induction")
    assert DECOMPOSITION_TEMPLATE == _snapshot("decomposition")
    assert SOLVING_TEMPLATE == _snapshot("solving")
    assert SUMMARIZATION_TEMPLATE == _snapshot("summarization")
    assert JUDGE_TEMPLATE == _snapshot("judge")


@pytest.fixture
def doc():
    return TranscriptDoc(game=Game.DICE, header="Game: Dice Game", body_lines=["Roll 1: Player [1, 1, 1] vs Dealer [2, 2, 3] → Player wins"],
                         episode_ref=EpisodeSeed(1, 0))


def test_plain_induction_prompt(doc):
    bundle = build_induction_prompt(doc, Intervention.NONE)
    assert bundle.system_or_preamble == ""
    assert bundle.max_output_tokens is None
    assert "Induced Rule:" in bundle.prompt_text
    assert doc.text in bundle.prompt_text
    assert "(...insert game transcripts here...)" not in bundle.prompt_text


def test_decomposition_prompt(doc):
    bundle = build_induction_prompt(doc, Intervention.DECOMPOSITION)
    assert "Step 2: Induce candidate rule(s)" in bundle.prompt_text
    assert bundle.max_output_tokens is None


@pytest.mark.parametrize("intervention", [Intervention.SUMMARIZATION, Intervention.COMBINED])
def test_capped_interventions(doc, intervention):
    bundle = build_induction_prompt(doc, intervention)
    assert bundle.max_output_tokens == 1000
    assert "within 1000 tokens" in bundle.prompt_text


def test_combined_preamble_order(doc):
    text = build_induction_prompt(doc, Intervention.COMBINED).system_or_preamble
    assert text.index("Step 1: Identify") < text.index("Getting a sense of the setup") < text.index("within 1000 tokens")


def test_capped_bundle_requires_the_cap(doc):
    with pytest.raises(PreconditionError):
        PromptBundle("", doc, "instruction", Intervention.SUMMARIZATION, max_output_tokens=None)
    with pytest.raises(PreconditionError):
        PromptBundle("", doc, "instruction", Intervention.NONE, max_output_tokens=0)


def test_intervention_parse():
    assert Intervention.parse(" Combined ") is Intervention.COMBINED
    with pytest.raises(PreconditionError):
        Intervention.parse("cot")


def test_parse_takes_the_last_marker():
    parsed = parse_induced_rule("Induced Rule: draft\nmore thinking\nInduced Rule:  Pairs beat totals. ")
    assert parsed.parse_ok
    assert parsed.text == "Pairs beat totals."


def test_parse_strips_bold_markup():
    parsed = parse_induced_rule("**Induced Rule:** A prime sum beats everything.")
    assert parsed.text == "A prime sum beats everything."


def test_parse_without_marker():
    parsed = parse_induced_rule("I think the pieces move diagonally.")
    assert not parsed.parse_ok
    assert parsed.text == ""
    assert parsed.raw_response == "I think the pieces move diagonally."


def test_judge_prompt_fills_every_placeholder():
    prompt = build_judge_prompt(Game.HOLDEM, "A flush beats a straight.", InducedRule("Flush > straight.", "", True))
    assert "Texas Hold'em" in prompt
    assert "Ground-truth rule: A flush beats a straight." in prompt
    assert "Model-induced rule: Flush > straight." in prompt
    for placeholder in ("[GAME TYPE]", "[INSERT TRUE RULE]", "[INSERT MODEL RULE]"):
        assert placeholder not in prompt


def test_judge_prompt_rejects_unparsed_rules():
    with pytest.raises(PreconditionError):
        build_judge_prompt(Game.DICE, "truth", InducedRule("", "raw", False))
    with pytest.raises(PreconditionError):
        build_judge_prompt(Game.DICE, "  ", InducedRule("rule", "raw", True))


def test_chess_truths_name_the_piece():
    ep = generate_episode(Game.CHESS, 0, master_seed=3)
    truths = episode_truths(ep)
    assert set(truths) == set(ep.rule_set.labels())
    entity = next(name for name, rule in ep.ground_truth.items() if rule == RuleId.parse(Game.CHESS, "NR1"))
    assert truths["NR1"] == f"{entity}: Move one square in any direction."


# -- reading transcripts back -------------------------------------------------

PLACEMENT_LINE = re.compile(r"^(Red|Black) (\w+) @ ([a-z]\d+)$")
ROUND_LINE = re.compile(r"^Round (\d+): (.*)$")
MOVE_PART = re.compile(r"^(Red|Black): ([a-z]\d+)→([a-z]\d+)(?: \((.*)\))?$")
DUEL_LINE = re.compile(r"^Roll \d+: Player (\[.*\]) vs Dealer (\[.*\]) → (Player wins|Dealer wins|Tie)$")
SINGLE_LINE = re.compile(r"^Roll \d+: (\[.*\]) → (\w+)$")
WINNER_LINE = re.compile(r"^Winner: Player (A|B) \((.*)\)$")
TOTAL_LINE = re.compile(r"^Total: (\d+)(?: \(A=(?:1|11)\))?, (Bust|No bust)$")
DEALER_LINE = re.compile(r"^Dealer: (.*) \(Total: (\d+), (Bust|No bust)\)$")
RESULT_LINE = re.compile(r"^Result: (Win|Loss|Tie) vs Dealer \((?:Bust|\d+)\)$")

UNRENDERED = ("featured_rule",)


def _match(pattern, line):
    found = pattern.match(line)
    assert found, f"unreadable transcript line: {line!r}"
    return found


def _cards(text):
    return text.split(", ")


def _piece(side, name):
    return {"side": side, "piece_type": PIECE_NAMES.index(name) + 1}


def _read_chess(lines):
    board = {}
    moves = []
    for line in lines:
        placed = PLACEMENT_LINE.match(line)
        if placed:
            side, name, square = placed.groups()
            board[square] = _piece(side, name)
            continue
        number, body = _match(ROUND_LINE, line).groups()
        for part in body.split("; "):
            side, frm, to, note = _match(MOVE_PART, part).groups()
            mover = board.pop(frm)
            assert mover["side"] == side
            move = {"round": int(number), "side": side, "piece_type": mover["piece_type"], "from": frm, "to": to}
            target = board.get(to)
            if note and " swaps with " in note:
                assert note.split(" swaps with ")[1].split(" ", 1) == [target["side"], PIECE_NAMES[target["piece_type"] - 1]]
                move["special_effect"] = "swap"
                move["partner"] = target
                board[frm] = target
            elif note:
                captor, victim_side, victim_name = note.replace(" captures ", " ").split(" ")
                assert captor == side
                assert target == _piece(victim_side, victim_name)
                move["capture"] = target
            else:
                assert target is None, f"{part} lands on an occupied square without a note"
            board[to] = mover
            moves.append(move)
    return moves


def _read_holdem(lines):
    hands = []
    for start in range(0, len(lines), 5):
        number, a, b, board, winner = lines[start:start + 5]
        assert number == f"Hand {start // 5 + 1}:"
        side, category = _match(WINNER_LINE, winner).groups()
        hands.append({
            "hole_a": _cards(a.removeprefix("Player A: ")),
            "hole_b": _cards(b.removeprefix("Player B: ")),
            "board": _cards(board.removeprefix("Board: ")),
            "winner": side,
            "winning_category": category,
        })
    return hands


def _read_dice(lines, style):
    rolls = []
    for line in lines:
        if style is DiceStyle.SINGLE:
            roll, label = _match(SINGLE_LINE, line).groups()
            rolls.append({"roll": json.loads(roll), "label": label})
        else:
            roll_a, roll_b, verdict = _match(DUEL_LINE, line).groups()
            winner = {"Player wins": "A", "Dealer wins": "B"}.get(verdict, "tie")
            rolls.append({"roll_a": json.loads(roll_a), "roll_b": json.loads(roll_b), "winner": winner})
    return rolls


def _read_blackjack(lines):
    hands = []
    for start in range(0, len(lines), 5):
        number, player, total_line, dealer_line, result = lines[start:start + 5]
        assert number == f"Hand {start // 5 + 1}:"
        total, bust = _match(TOTAL_LINE, total_line).groups()
        dealer_cards, dealer_total, dealer_bust = _match(DEALER_LINE, dealer_line).groups()
        hands.append({
            "player_cards": _cards(player.removeprefix("Player: ")),
            "total": int(total),
            "bust": bust == "Bust",
            "dealer_summary": {"cards": _cards(dealer_cards), "total": int(dealer_total), "bust": dealer_bust == "Bust"},
            "outcome": _match(RESULT_LINE, result).group(1).lower(),
        })
    return hands


def read_transcript(doc, dice_style=DiceStyle.DUEL):
    if doc.game is Game.CHESS:
        return _read_chess(doc.body_lines)
    if doc.game is Game.HOLDEM:
        return _read_holdem(doc.body_lines)
    if doc.game is Game.DICE:
        return _read_dice(doc.body_lines, dice_style)
    return _read_blackjack(doc.body_lines)


def _shown(obs):
    shown = {key: value for key, value in obs.items() if key not in UNRENDERED}
    # a mirror jump moves only the jumper, so the text carries no marker for it
    if shown.get("special_effect") == "mirror_jump":
        del shown["special_effect"]
    return shown


@pytest.mark.parametrize("game", [Game.CHESS, Game.HOLDEM, Game.DICE, Game.BLACKJACK])
@pytest.mark.parametrize("config_index", [0, 7, 23])
def test_transcript_reads_back_to_the_observations(game, config_index):
    ep = generate_episode(game, config_index, master_seed=2024)
    recovered = read_transcript(render_transcript(ep))
    assert recovered == [_shown(obs) for obs in ep.observations]


@pytest.mark.parametrize("config_index", [0, 11, 35])
def test_single_roll_transcript_reads_back_to_the_player_view(config_index):
    ep = generate_episode(Game.DICE, config_index, master_seed=2024)
    recovered = read_transcript(render_transcript(ep, DiceStyle.SINGLE), DiceStyle.SINGLE)
    assert recovered == [single_roll_view(obs) for obs in ep.observations]


@pytest.mark.slow
def test_chess_board_replay_reaches_every_capture_and_swap():
    episodes = [generate_episode(Game.CHESS, index, master_seed=2024) for index in range(225)]
    for ep in episodes:
        assert read_transcript(render_transcript(ep)) == [_shown(obs) for obs in ep.observations]
    moves = [obs for ep in episodes for obs in ep.observations]
    assert any("capture" in obs for obs in moves)
    assert any(obs.get("special_effect") == "swap" for obs in moves)
