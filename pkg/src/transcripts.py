"""
Plain-text transcripts of episodes, the only view of a game the model gets.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

import structlog

from .chess_engine import Board, ChessMove, SpecialEffect
from .blackjack import BlackjackHand
from .cards import parse_cards
from .dice import single_roll_view
from .episodes import validate_episode
from .errors import EpisodeValidationError
from .models import Episode, EpisodeSeed, Game

logger = structlog.get_logger(__name__)

ARROW = "→"


class DiceStyle(Enum):
    DUEL = "duel"
    SINGLE = "single"


@dataclass(frozen=True)
class TranscriptDoc:
    game: Game
    header: str
    body_lines: List[str] = field(default_factory=list)
    episode_ref: Optional[EpisodeSeed] = None

    @property
    def text(self) -> str:
        return "\n".join([self.header] + list(self.body_lines))


def _chess_lines(ep: Episode) -> List[str]:
    board = Board.from_placement(ep.header["size"], ep.header["initial_placement"])
    lines = [f"{entry['side']} {entry['piece']} @ {entry['square']}" for entry in board.placement()]
    moves = [ChessMove.from_dict(obs) for obs in ep.observations]
    for start in range(0, len(moves), 2):
        parts = []
        for move in moves[start:start + 2]:
            text = f"{move.side.value}: {move.frm}{ARROW}{move.to}"
            if move.special_effect is SpecialEffect.SWAP:
                text += f" ({move.piece.describe()} swaps with {move.partner.describe()})"
            elif move.capture is not None:
                text += f" ({move.side.value} captures {move.capture.describe()})"
            parts.append(text)
        lines.append(f"Round {moves[start].round}: " + "; ".join(parts))
    return lines


def _holdem_lines(ep: Episode) -> List[str]:
    lines = []
    for number, obs in enumerate(ep.observations, start=1):
        lines += [
            f"Hand {number}:",
            f"Player A: {', '.join(obs['hole_a'])}",
            f"Player B: {', '.join(obs['hole_b'])}",
            f"Board: {', '.join(obs['board'])}",
            f"Winner: Player {obs['winner']} ({obs['winning_category']})",
        ]
    return lines


def _dice_side(winner: str) -> str:
    return {"A": "Player wins", "B": "Dealer wins"}.get(winner, "Tie")


def _dice_lines(ep: Episode, style: DiceStyle) -> List[str]:
    lines = []
    for number, obs in enumerate(ep.observations, start=1):
        if style is DiceStyle.SINGLE:
            view = single_roll_view(obs)
            lines.append(f"Roll {number}: {view['roll']} {ARROW} {view['label']}")
        else:
            lines.append(f"Roll {number}: Player {obs['roll_a']} vs Dealer {obs['roll_b']} {ARROW} {_dice_side(obs['winner'])}")
    return lines


def _bust_text(bust: bool) -> str:
    return "Bust" if bust else "No bust"


def _ace_note(cards: List[str]) -> str:
    hand = BlackjackHand.of(parse_cards(cards))
    if not any(card.rank == 1 for card in hand.cards):
        return ""
    return " (A=11)" if hand.soft else " (A=1)"


def _blackjack_lines(ep: Episode) -> List[str]:
    lines = []
    for number, obs in enumerate(ep.observations, start=1):
        dealer = obs["dealer_summary"]
        dealer_state = "Bust" if dealer["bust"] else str(dealer["total"])
        lines += [
            f"Hand {number}:",
            f"Player: {', '.join(obs['player_cards'])}",
            f"Total: {obs['total']}{_ace_note(obs['player_cards'])}, {_bust_text(obs['bust'])}",
            f"Dealer: {', '.join(dealer['cards'])} (Total: {dealer['total']}, {_bust_text(dealer['bust'])})",
            f"Result: {obs['outcome'].capitalize()} vs Dealer ({dealer_state})",
        ]
    return lines


_HEADERS: Dict[Game, Callable[[Episode], str]] = {
    Game.CHESS: lambda ep: f"Board: {ep.header['size']}×{ep.header['size']}",
    Game.HOLDEM: lambda ep: f"Game: {Game.HOLDEM.display_name}",
    Game.DICE: lambda ep: f"Game: {Game.DICE.display_name}",
    Game.BLACKJACK: lambda ep: f"Game: {Game.BLACKJACK.display_name}",
}


def render_transcript(ep: Episode, dice_style: DiceStyle = DiceStyle.DUEL, validate: bool = True) -> TranscriptDoc:
    """Render ep as transcript text; rendering is a pure function of the episode."""
    if validate:
        violations = validate_episode(ep)
        if violations:
            raise EpisodeValidationError(
                f"Refusing to render invalid episode {ep.seed}: {violations[0]}", violations
            )
    if ep.game is Game.CHESS:
        body = _chess_lines(ep)
    elif ep.game is Game.HOLDEM:
        body = _holdem_lines(ep)
    elif ep.game is Game.DICE:
        body = _dice_lines(ep, dice_style)
    else:
        body = _blackjack_lines(ep)
    return TranscriptDoc(game=ep.game, header=_HEADERS[ep.game](ep), body_lines=body, episode_ref=ep.seed)


def transcript_record(doc: TranscriptDoc) -> Dict[str, Any]:
    return {"episode_seed": doc.episode_ref.to_dict(), "game": doc.game.value, "text": doc.text}
