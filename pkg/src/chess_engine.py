"""
Chess-variant engine: board model, the twelve movement rules, legality checks
and episode generation.

Coordinates are (file, rank) pairs starting at 0; they render as a..o / 1..15.
"""
from dataclasses import dataclass
from enum import Enum
from math import ceil
from typing import Any, Callable, Dict, Iterator, List, Optional, Set, Tuple

import numpy as np
import structlog

from .errors import PreconditionError, UnsatisfiableScheduleError
from .game_core import derive_stream
from .models import Episode, EpisodeSeed, Game, RuleId, RuleKind, RuleSet, Violation

logger = structlog.get_logger(__name__)

MIN_BOARD_SIZE = 8
MAX_BOARD_SIZE = 15
PIECE_TYPES = 8
PIECE_NAMES = ("King", "Queen", "Rook", "Bishop", "Knight", "Pawn", "Archer", "Guard")

ORTHOGONAL = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIAGONAL = ((1, 1), (1, -1), (-1, 1), (-1, -1))
ALL_DIRECTIONS = ORTHOGONAL + DIAGONAL
KNIGHT_OFFSETS = ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2))


class Side(Enum):
    RED = "Red"
    BLACK = "Black"

    @property
    def forward(self) -> int:
        return 1 if self is Side.RED else -1

    @property
    def opponent(self) -> 'Side':
        return Side.BLACK if self is Side.RED else Side.RED


class SpecialEffect(Enum):
    SWAP = "swap"
    MIRROR_JUMP = "mirror_jump"


@dataclass(frozen=True)
class Square:
    file: int
    rank: int

    def offset(self, df: int, dr: int) -> 'Square':
        return Square(self.file + df, self.rank + dr)

    def chebyshev(self, other: 'Square') -> int:
        return max(abs(self.file - other.file), abs(self.rank - other.rank))

    @property
    def algebraic(self) -> str:
        return f"{chr(ord('a') + self.file)}{self.rank + 1}"

    @classmethod
    def parse(cls, text: str) -> 'Square':
        text = text.strip()
        if len(text) < 2 or not text[0].isalpha() or not text[1:].isdigit():
            raise ValueError(f"Malformed square '{text}'")
        return cls(ord(text[0].lower()) - ord('a'), int(text[1:]) - 1)

    def __str__(self) -> str:
        return self.algebraic


@dataclass(frozen=True)
class Piece:
    side: Side
    piece_type: int

    def __post_init__(self):
        if not 1 <= self.piece_type <= PIECE_TYPES:
            raise ValueError(f"piece_type must be in [1,{PIECE_TYPES}], got {self.piece_type}")

    @property
    def name(self) -> str:
        return PIECE_NAMES[self.piece_type - 1]

    def describe(self) -> str:
        return f"{self.side.value} {self.name}"

    def to_dict(self) -> Dict[str, Any]:
        return {"side": self.side.value, "piece_type": self.piece_type}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Piece':
        return cls(Side(data["side"]), int(data["piece_type"]))


class Board:
    """Square board with at most one piece per square. Treated as immutable."""

    def __init__(self, size: int, occupancy: Optional[Dict[Square, Piece]] = None):
        if not MIN_BOARD_SIZE <= size <= MAX_BOARD_SIZE:
            raise PreconditionError(f"Board size must be in [{MIN_BOARD_SIZE},{MAX_BOARD_SIZE}], got {size}")
        self.size = size
        self._cells: Dict[Square, Piece] = dict(occupancy or {})
        for square in self._cells:
            if not self.on_board(square):
                raise PreconditionError(f"Square {square} is off a {size}x{size} board")

    def on_board(self, square: Square) -> bool:
        return 0 <= square.file < self.size and 0 <= square.rank < self.size

    def piece_at(self, square: Square) -> Optional[Piece]:
        return self._cells.get(square)

    def is_empty(self, square: Square) -> bool:
        return square not in self._cells

    def find(self, piece: Piece) -> Optional[Square]:
        for square, occupant in self._cells.items():
            if occupant == piece:
                return square
        return None

    def pieces(self) -> List[Tuple[Square, Piece]]:
        return sorted(self._cells.items(), key=lambda item: (item[0].rank, item[0].file))

    def piece_count(self) -> int:
        return len(self._cells)

    def apply(self, move: 'ChessMove') -> 'Board':
        cells = dict(self._cells)
        mover = cells.pop(move.frm)
        if move.special_effect == SpecialEffect.SWAP:
            cells[move.frm] = cells[move.to]
        cells[move.to] = mover
        return Board(self.size, cells)

    def placement(self) -> List[Dict[str, Any]]:
        return [
            {"side": piece.side.value, "piece_type": piece.piece_type, "piece": piece.name, "square": square.algebraic}
            for square, piece in sorted(self._cells.items(), key=lambda item: (item[1].side.value != "Red", item[1].piece_type))
        ]

    @classmethod
    def from_placement(cls, size: int, placement: List[Dict[str, Any]]) -> 'Board':
        cells: Dict[Square, Piece] = {}
        for entry in placement:
            square = Square.parse(entry["square"])
            if square in cells:
                raise PreconditionError(f"Two pieces placed on {square}")
            cells[square] = Piece(Side(entry["side"]), int(entry["piece_type"]))
        return cls(size, cells)


@dataclass(frozen=True)
class MoveRule:
    id: RuleId

    def __post_init__(self):
        if self.id.game != Game.CHESS:
            raise PreconditionError(f"{self.id.label} is not a chess rule")

    @classmethod
    def of(cls, label: str) -> 'MoveRule':
        return cls(RuleId.parse(Game.CHESS, label))


@dataclass(frozen=True)
class ChessMove:
    round: int
    side: Side
    piece_type: int
    frm: Square
    to: Square
    capture: Optional[Piece] = None
    special_effect: Optional[SpecialEffect] = None
    partner: Optional[Piece] = None

    def __post_init__(self):
        if self.frm == self.to:
            raise PreconditionError("A move must change square")
        if self.special_effect == SpecialEffect.SWAP and self.capture is not None:
            raise PreconditionError("A swap never captures")

    @property
    def piece(self) -> Piece:
        return Piece(self.side, self.piece_type)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "round": self.round,
            "side": self.side.value,
            "piece_type": self.piece_type,
            "from": self.frm.algebraic,
            "to": self.to.algebraic,
        }
        if self.capture is not None:
            data["capture"] = self.capture.to_dict()
        if self.special_effect is not None:
            data["special_effect"] = self.special_effect.value
        if self.partner is not None:
            data["partner"] = self.partner.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ChessMove':
        return cls(
            round=int(data["round"]),
            side=Side(data["side"]),
            piece_type=int(data["piece_type"]),
            frm=Square.parse(data["from"]),
            to=Square.parse(data["to"]),
            capture=Piece.from_dict(data["capture"]) if "capture" in data else None,
            special_effect=SpecialEffect(data["special_effect"]) if "special_effect" in data else None,
            partner=Piece.from_dict(data["partner"]) if "partner" in data else None,
        )


Target = Tuple[Square, Optional[SpecialEffect]]


def _can_land(board: Board, square: Square, side: Side) -> bool:
    if not board.on_board(square):
        return False
    occupant = board.piece_at(square)
    return occupant is None or occupant.side != side


def _ray(board: Board, frm: Square, direction: Tuple[int, int]) -> Iterator[Square]:
    square = frm.offset(*direction)
    while board.on_board(square):
        yield square
        square = square.offset(*direction)


def _slide_targets(board: Board, frm: Square, side: Side, directions) -> Set[Target]:
    targets: Set[Target] = set()
    for direction in directions:
        for square in _ray(board, frm, direction):
            occupant = board.piece_at(square)
            if occupant is None:
                targets.add((square, None))
                continue
            if occupant.side != side:
                targets.add((square, None))
            break
    return targets


def _step_targets(board: Board, frm: Square, side: Side, offsets) -> Set[Target]:
    return {
        (frm.offset(df, dr), None)
        for df, dr in offsets
        if _can_land(board, frm.offset(df, dr), side)
    }


def _empty_segment(board: Board, frm: Square, direction: Tuple[int, int]) -> Iterator[Square]:
    for square in _ray(board, frm, direction):
        if not board.is_empty(square):
            return
        yield square


def _composite_paths(index: int, board: Board, frm: Square, side: Side) -> Iterator[Tuple[Square, Square]]:
    """(segment landing, destination) pairs for the two-leg rules SR1, SR2, SR3 and SR6."""
    if index == 1:
        for direction in ORTHOGONAL:
            for landing in _empty_segment(board, frm, direction):
                for shift in ((0, 2), (0, -2)):
                    yield landing, landing.offset(*shift)
    elif index == 2:
        for dx, dy in DIAGONAL:
            for landing in _empty_segment(board, frm, (dx, dy)):
                for px, py in ((-dx, dy), (dx, -dy)):
                    yield landing, landing.offset(2 * px, 2 * py)
    elif index == 3:
        for dx, dy in ORTHOGONAL:
            landing = frm.offset(3 * dx, 3 * dy)
            if board.on_board(landing):
                yield landing, landing.offset(0, -side.forward)
    elif index == 6:
        for direction in ORTHOGONAL:
            for landing in _empty_segment(board, frm, direction):
                for diagonal in DIAGONAL:
                    yield landing, landing.offset(*diagonal)


def _composite_targets(index: int) -> Callable[[Board, Square, Side], Set[Target]]:
    def targets(board: Board, frm: Square, side: Side) -> Set[Target]:
        return {
            (destination, None)
            for _, destination in _composite_paths(index, board, frm, side)
            if _can_land(board, destination, side)
        }
    return targets


def mirror_square(origin: Square, blocker: Square) -> Square:
    return Square(2 * blocker.file - origin.file, 2 * blocker.rank - origin.rank)


def _mirror_targets(board: Board, frm: Square, side: Side) -> Set[Target]:
    targets: Set[Target] = set()
    for direction in ALL_DIRECTIONS:
        for square in _ray(board, frm, direction):
            if board.is_empty(square):
                continue
            landing = mirror_square(frm, square)
            if _can_land(board, landing, side):
                targets.add((landing, SpecialEffect.MIRROR_JUMP))
            break
    return targets


def _swap_targets(board: Board, frm: Square, side: Side) -> Set[Target]:
    return {
        (square, SpecialEffect.SWAP)
        for square, _ in board.pieces()
        if square != frm and square.chebyshev(frm) <= 3
    }


_RULE_TARGETS: Dict[Tuple[RuleKind, int], Callable[[Board, Square, Side], Set[Target]]] = {
    (RuleKind.NR, 1): lambda board, frm, side: _step_targets(board, frm, side, ALL_DIRECTIONS),
    (RuleKind.NR, 2): lambda board, frm, side: _step_targets(board, frm, side, KNIGHT_OFFSETS),
    (RuleKind.NR, 3): lambda board, frm, side: _slide_targets(board, frm, side, DIAGONAL),
    (RuleKind.NR, 4): lambda board, frm, side: _step_targets(board, frm, side, ((0, 2 * side.forward),)),
    (RuleKind.NR, 5): lambda board, frm, side: _slide_targets(board, frm, side, ORTHOGONAL),
    (RuleKind.NR, 6): lambda board, frm, side: _step_targets(board, frm, side, tuple((2 * dx, 2 * dy) for dx, dy in DIAGONAL)),
    (RuleKind.SR, 1): _composite_targets(1),
    (RuleKind.SR, 2): _composite_targets(2),
    (RuleKind.SR, 3): _composite_targets(3),
    (RuleKind.SR, 4): _mirror_targets,
    (RuleKind.SR, 5): _swap_targets,
    (RuleKind.SR, 6): _composite_targets(6),
}

COMPOSITE_RULES = frozenset({1, 2, 3, 6})


def legal_targets(rule: MoveRule, board: Board, frm: Square) -> Set[Target]:
    piece = board.piece_at(frm)
    if piece is None:
        raise PreconditionError(f"No piece on {frm}")
    return _RULE_TARGETS[(rule.id.kind, rule.id.index)](board, frm, piece.side)


def is_legal(rule: MoveRule, board: Board, mv: ChessMove) -> bool:
    if board.piece_at(mv.frm) != mv.piece:
        raise PreconditionError(f"{mv.piece.describe()} is not on {mv.frm}")
    return (mv.to, mv.special_effect) in legal_targets(rule, board, mv.frm)


def composite_witness(rule: MoveRule, board: Board, frm: Square, to: Square) -> Optional[Square]:
    """Landing square of the first leg that leads to `to`, or None when `to` is unreachable."""
    if rule.id.kind != RuleKind.SR or rule.id.index not in COMPOSITE_RULES:
        raise PreconditionError(f"{rule.id.label} is not a two-leg rule")
    piece = board.piece_at(frm)
    if piece is None:
        raise PreconditionError(f"No piece on {frm}")
    for landing, destination in _composite_paths(rule.id.index, board, frm, piece.side):
        if destination == to and _can_land(board, destination, piece.side):
            return landing
    return None


@dataclass
class ChessScheduleConfig:
    min_rounds: int = 10
    max_rounds: int = 12
    min_moves_per_type: int = 3
    max_attempts: int = 50

    def rounds_needed(self) -> int:
        return ceil(PIECE_TYPES * self.min_moves_per_type / 2)


def _target_key(target: Target) -> Tuple[int, int, str]:
    square, effect = target
    return (square.rank, square.file, effect.value if effect else "")


def _initial_board(size: int, rng: np.random.Generator) -> Board:
    half = size // 2
    cells: Dict[Square, Piece] = {}
    for side, ranks in ((Side.RED, range(0, half)), (Side.BLACK, range(size - half, size))):
        region = [Square(f, r) for r in ranks for f in range(size)]
        picks = rng.choice(len(region), size=PIECE_TYPES, replace=False)
        for piece_type, pick in enumerate(picks, start=1):
            cells[region[int(pick)]] = Piece(side, piece_type)
    return Board(size, cells)


def _schedule_moves(
    board: Board,
    type_rules: Dict[int, MoveRule],
    rounds: int,
    quota: int,
    rng: np.random.Generator,
) -> Optional[List[ChessMove]]:
    counts = {t: 0 for t in type_rules}
    moves: List[ChessMove] = []
    total_half_moves = 2 * rounds

    for round_number in range(1, rounds + 1):
        for side in (Side.RED, Side.BLACK):
            need = {t: max(0, quota - counts[t]) for t in counts}
            remaining = total_half_moves - len(moves)
            forced = sum(need.values()) >= remaining

            candidates = []
            for piece_type in sorted(type_rules):
                frm = board.find(Piece(side, piece_type))
                if frm is None or (forced and need[piece_type] == 0):
                    continue
                options = []
                for target in sorted(legal_targets(type_rules[piece_type], board, frm), key=_target_key):
                    square, effect = target
                    victim = board.piece_at(square)
                    # captured pieces must belong to a type that has finished its quota
                    if victim is not None and effect != SpecialEffect.SWAP and need[victim.piece_type] > 0:
                        continue
                    options.append(target)
                if options:
                    candidates.append((piece_type, frm, options))

            if not candidates:
                return None

            weights = np.array([need[piece_type] + 0.25 for piece_type, _, _ in candidates])
            piece_type, frm, options = candidates[int(rng.choice(len(candidates), p=weights / weights.sum()))]
            to, effect = options[int(rng.integers(len(options)))]
            occupant = board.piece_at(to)
            move = ChessMove(
                round=round_number,
                side=side,
                piece_type=piece_type,
                frm=frm,
                to=to,
                capture=occupant if occupant is not None and effect != SpecialEffect.SWAP else None,
                special_effect=effect,
                partner=occupant if effect == SpecialEffect.SWAP else None,
            )
            board = board.apply(move)
            counts[piece_type] += 1
            moves.append(move)

    if any(count < quota for count in counts.values()):
        return None
    return moves


def generate_chess_episode(
    rule_set: RuleSet,
    seed: EpisodeSeed,
    config: Optional[ChessScheduleConfig] = None,
) -> Episode:
    if rule_set.game != Game.CHESS:
        raise PreconditionError(f"Chess generator called with a {rule_set.game.value} rule set")
    config = config or ChessScheduleConfig()

    setup = derive_stream(seed, "board")
    size = int(setup.integers(MIN_BOARD_SIZE, MAX_BOARD_SIZE + 1))
    board = _initial_board(size, setup)

    order = derive_stream(seed, "assign").permutation(len(rule_set.rules))
    type_rules = {piece_type: MoveRule(rule_set.rules[int(order[piece_type - 1])]) for piece_type in range(1, PIECE_TYPES + 1)}

    drawn = int(derive_stream(seed, "rounds").integers(config.min_rounds, config.max_rounds + 1))
    rounds = max(drawn, config.rounds_needed())

    for attempt in range(config.max_attempts):
        moves = _schedule_moves(board, type_rules, rounds, config.min_moves_per_type, derive_stream(seed, f"moves/attempt-{attempt}"))
        if moves is not None:
            break
        logger.debug("chess_schedule_retry", seed=str(seed), attempt=attempt)
    else:
        raise UnsatisfiableScheduleError(
            f"No move schedule with {config.min_moves_per_type} moves per piece type after {config.max_attempts} attempts",
            seed=seed,
        )

    logger.debug("chess_episode_generated", seed=str(seed), size=size, rounds=rounds, attempts=attempt + 1)
    return Episode(
        seed=seed,
        rule_set=rule_set,
        observations=[move.to_dict() for move in moves],
        ground_truth={PIECE_NAMES[t - 1]: rule.id for t, rule in type_rules.items()},
        header={"size": size, "initial_placement": board.placement(), "rounds": rounds},
    )


def validate_chess_episode(ep: Episode, config: Optional[ChessScheduleConfig] = None) -> List[Violation]:
    config = config or ChessScheduleConfig()
    violations: List[Violation] = []

    size = ep.header.get("size")
    if not isinstance(size, int) or not MIN_BOARD_SIZE <= size <= MAX_BOARD_SIZE:
        return [Violation("board-size", f"board size {size!r} outside [{MIN_BOARD_SIZE},{MAX_BOARD_SIZE}]")]
    try:
        board = Board.from_placement(size, ep.header.get("initial_placement", []))
    except (PreconditionError, ValueError, KeyError) as e:
        return [Violation("initial-placement", str(e))]
    expected_pieces = {Piece(side, t) for side in Side for t in range(1, PIECE_TYPES + 1)}
    if {piece for _, piece in board.pieces()} != expected_pieces or board.piece_count() != len(expected_pieces):
        violations.append(Violation("initial-placement", "each side must field one piece of each of the 8 types"))

    type_rules: Dict[int, MoveRule] = {}
    for piece_type, name in enumerate(PIECE_NAMES, start=1):
        rule = ep.ground_truth.get(name)
        if rule is None:
            violations.append(Violation("rule-assignment", f"no rule bound to {name}"))
        else:
            type_rules[piece_type] = MoveRule(rule)
    if sorted(r.id.sort_key() for r in type_rules.values()) != sorted(r.sort_key() for r in ep.rule_set.rules):
        violations.append(Violation("rule-assignment", "piece rules must be exactly the episode's active rules"))

    counts = {t: 0 for t in range(1, PIECE_TYPES + 1)}
    rounds_seen = 0
    for index, data in enumerate(ep.observations):
        try:
            move = ChessMove.from_dict(data)
        except (KeyError, ValueError, PreconditionError) as e:
            violations.append(Violation("structure", f"unreadable move: {e}", index))
            return violations
        expected_round, expected_side = index // 2 + 1, (Side.RED, Side.BLACK)[index % 2]
        if move.round != expected_round or move.side != expected_side:
            violations.append(Violation("turn-order", f"expected round {expected_round} {expected_side.value}", index))
        rounds_seen = max(rounds_seen, move.round)
        if board.piece_at(move.frm) != move.piece:
            violations.append(Violation("move-origin", f"{move.piece.describe()} is not on {move.frm}", index))
            return violations
        rule = type_rules.get(move.piece_type)
        if rule is not None and not is_legal(rule, board, move):
            violations.append(Violation("move-legality", f"{move.frm}->{move.to} breaks {rule.id.label}", index))
        occupant = board.piece_at(move.to)
        if move.special_effect == SpecialEffect.SWAP:
            if occupant is None or move.partner != occupant:
                violations.append(Violation("capture-record", "swap partner does not match the board", index))
        elif move.capture != occupant:
            violations.append(Violation("capture-record", "recorded capture does not match the board", index))
        board = board.apply(move)
        counts[move.piece_type] += 1

    if len(ep.observations) % 2:
        violations.append(Violation("turn-order", "last round is missing Black's move"))
    if not config.min_rounds <= rounds_seen <= config.max_rounds:
        violations.append(Violation("round-count", f"{rounds_seen} rounds outside [{config.min_rounds},{config.max_rounds}]"))
    for piece_type, count in counts.items():
        if count < config.min_moves_per_type:
            violations.append(Violation(
                "min-appearance",
                f"{PIECE_NAMES[piece_type - 1]} moved {count} times (minimum {config.min_moves_per_type})",
            ))
    return violations
