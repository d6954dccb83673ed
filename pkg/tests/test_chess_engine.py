import sys
import os
import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.chess_engine import (
    Board, ChessMove, ChessScheduleConfig, MoveRule, Piece, PIECE_NAMES, Side, SpecialEffect, Square,
    composite_witness, generate_chess_episode, is_legal, legal_targets, mirror_square, validate_chess_episode,
)
from src.errors import PreconditionError, RuleSetError, UnsatisfiableScheduleError
from src.game_core import rule_set_for_index
from src.models import EpisodeSeed, Game, RuleSet

ALL_LABELS = [f"NR{i}" for i in range(1, 7)] + [f"SR{i}" for i in range(1, 7)]


def _board(size, *placed):
    return Board(size, {Square.parse(square): Piece(side, piece_type) for square, side, piece_type in placed})


def _squares(targets):
    return {square for square, _ in targets}


# Independent brute-force reference: every destination is checked against the
# plain-language rule text by scanning the whole board.

def _sign(value):
    return (value > 0) - (value < 0)


def _between_empty(board, a, b):
    df, dr = _sign(b.file - a.file), _sign(b.rank - a.rank)
    square = Square(a.file + df, a.rank + dr)
    while square != b:
        if not board.is_empty(square):
            return False
        square = Square(square.file + df, square.rank + dr)
    return True


def _landable(board, square, side):
    if not board.on_board(square):
        return False
    occupant = board.piece_at(square)
    return occupant is None or occupant.side != side


def _all_squares(board):
    return [Square(f, r) for f in range(board.size) for r in range(board.size)]


def _clear_leg(board, frm, landing, diagonal):
    df, dr = landing.file - frm.file, landing.rank - frm.rank
    if landing == frm:
        return False
    if diagonal and abs(df) != abs(dr):
        return False
    if not diagonal and df != 0 and dr != 0:
        return False
    return board.is_empty(landing) and _between_empty(board, frm, landing)


def _reference_targets(label, board, frm):
    side = board.piece_at(frm).side
    kind, index = label[:2], int(label[2:])
    found = set()
    if kind == "NR":
        for to in _all_squares(board):
            if to == frm or not _landable(board, to, side):
                continue
            df, dr = to.file - frm.file, to.rank - frm.rank
            ok = {
                1: max(abs(df), abs(dr)) == 1,
                2: sorted((abs(df), abs(dr))) == [1, 2],
                3: abs(df) == abs(dr) and _between_empty(board, frm, to),
                4: df == 0 and dr == 2 * side.forward,
                5: (df == 0 or dr == 0) and _between_empty(board, frm, to),
                6: abs(df) == 2 and abs(dr) == 2,
            }[index]
            if ok:
                found.add((to, None))
        return found
    if index == 5:
        for square, _ in board.pieces():
            if square != frm and max(abs(square.file - frm.file), abs(square.rank - frm.rank)) <= 3:
                found.add((square, SpecialEffect.SWAP))
        return found
    if index == 4:
        for blocker in _all_squares(board):
            if blocker == frm or board.is_empty(blocker):
                continue
            df, dr = blocker.file - frm.file, blocker.rank - frm.rank
            if df != 0 and dr != 0 and abs(df) != abs(dr):
                continue
            if not _between_empty(board, frm, blocker):
                continue
            to = Square(2 * blocker.file - frm.file, 2 * blocker.rank - frm.rank)
            if _landable(board, to, side):
                found.add((to, SpecialEffect.MIRROR_JUMP))
        return found
    for landing in _all_squares(board):
        df, dr = landing.file - frm.file, landing.rank - frm.rank
        if index == 3:
            if not ((df == 0 and abs(dr) == 3) or (dr == 0 and abs(df) == 3)):
                continue
            destinations = [Square(landing.file, landing.rank - side.forward)]
        elif index == 1:
            if not _clear_leg(board, frm, landing, diagonal=False):
                continue
            destinations = [Square(landing.file, landing.rank + 2), Square(landing.file, landing.rank - 2)]
        elif index == 2:
            if not _clear_leg(board, frm, landing, diagonal=True):
                continue
            sx, sy = _sign(df), _sign(dr)
            destinations = [
                Square(landing.file - 2 * sx, landing.rank + 2 * sy),
                Square(landing.file + 2 * sx, landing.rank - 2 * sy),
            ]
        else:
            if not _clear_leg(board, frm, landing, diagonal=False):
                continue
            destinations = [Square(landing.file + a, landing.rank + b) for a in (-1, 1) for b in (-1, 1)]
        for to in destinations:
            if _landable(board, to, side):
                found.add((to, None))
    return found


def _random_board(rnd):
    size = rnd.randint(8, 15)
    squares = [Square(f, r) for f in range(size) for r in range(size)]
    chosen = rnd.sample(squares, rnd.randint(2, 16))
    cells = {square: Piece(rnd.choice(list(Side)), rnd.randint(1, 8)) for square in chosen}
    return Board(size, cells), chosen[0]


@pytest.mark.slow
def test_legal_targets_match_reference_on_random_boards():
    rnd = random.Random(20250101)
    for _ in range(1000):
        board, frm = _random_board(rnd)
        for label in ALL_LABELS:
            assert legal_targets(MoveRule.of(label), board, frm) == _reference_targets(label, board, frm), (
                label, frm, board.placement()
            )


def test_legal_targets_match_reference_on_a_few_boards():
    rnd = random.Random(7)
    for _ in range(25):
        board, frm = _random_board(rnd)
        for label in ALL_LABELS:
            assert legal_targets(MoveRule.of(label), board, frm) == _reference_targets(label, board, frm)


def test_knight_from_center_of_empty_board():
    board = _board(8, ("d4", Side.RED, 5))
    targets = legal_targets(MoveRule.of("NR2"), board, Square(3, 3))
    assert len(targets) == 8
    assert _squares(targets) == {
        Square(4, 5), Square(5, 4), Square(5, 2), Square(4, 1),
        Square(2, 1), Square(1, 2), Square(1, 4), Square(2, 5),
    }


def test_double_forward_step_only():
    board = _board(8, ("e2", Side.RED, 6))
    assert legal_targets(MoveRule.of("NR4"), board, Square(4, 1)) == {(Square(4, 3), None)}
    black = _board(8, ("e7", Side.BLACK, 6))
    assert legal_targets(MoveRule.of("NR4"), black, Square(4, 6)) == {(Square(4, 4), None)}


def test_one_square_forward_is_not_a_double_step():
    board = _board(8, ("e2", Side.RED, 6))
    move = ChessMove(1, Side.RED, 6, Square(4, 1), Square(4, 2))
    assert not is_legal(MoveRule.of("NR4"), board, move)


def test_straight_then_diagonal_reaches_g4_from_c3():
    board = _board(8, ("c3", Side.RED, 2))
    targets = legal_targets(MoveRule.of("SR6"), board, Square.parse("c3"))
    assert (Square.parse("g4"), None) in targets
    assert composite_witness(MoveRule.of("SR6"), board, Square.parse("c3"), Square.parse("g4")) in {
        Square.parse("f3"), Square.parse("h3"),
    }


def test_mirror_jump_over_nearest_blocker():
    board = _board(10, ("c3", Side.RED, 1), ("f3", Side.BLACK, 4))
    targets = legal_targets(MoveRule.of("SR4"), board, Square(2, 2))
    assert (Square(8, 2), SpecialEffect.MIRROR_JUMP) in targets
    # the reflection of c3 across f3 is the only target on that rank
    assert {square for square, _ in targets if square.rank == 2} == {Square(8, 2)}


def test_mirror_jump_blocked_by_own_piece_at_landing():
    board = _board(10, ("c3", Side.RED, 1), ("f3", Side.BLACK, 4), ("i3", Side.RED, 2))
    targets = legal_targets(MoveRule.of("SR4"), board, Square(2, 2))
    assert Square(8, 2) not in _squares(targets)


def test_leap_three_then_backward_step():
    board = _board(8, ("d4", Side.RED, 3))
    rule = MoveRule.of("SR3")
    assert Square.parse("g3") in _squares(legal_targets(rule, board, Square.parse("d4")))
    up = ChessMove(1, Side.RED, 3, Square.parse("d4"), Square.parse("g5"))
    assert not is_legal(rule, board, up)
    black = _board(8, ("d4", Side.BLACK, 3))
    assert Square.parse("g5") in _squares(legal_targets(rule, black, Square.parse("d4")))


def test_swap_reaches_any_piece_within_three():
    board = _board(8, ("d4", Side.RED, 1), ("g7", Side.BLACK, 2), ("h8", Side.RED, 3), ("d5", Side.RED, 4))
    targets = legal_targets(MoveRule.of("SR5"), board, Square.parse("d4"))
    assert targets == {(Square.parse("g7"), SpecialEffect.SWAP), (Square.parse("d5"), SpecialEffect.SWAP)}


def test_swap_conserves_pieces():
    board = _board(8, ("d4", Side.RED, 1), ("f6", Side.BLACK, 2), ("a1", Side.RED, 3))
    before = Counter(piece for _, piece in board.pieces())
    move = ChessMove(1, Side.RED, 1, Square.parse("d4"), Square.parse("f6"),
                     special_effect=SpecialEffect.SWAP, partner=Piece(Side.BLACK, 2))
    assert is_legal(MoveRule.of("SR5"), board, move)
    after = board.apply(move)
    assert Counter(piece for _, piece in after.pieces()) == before
    assert after.piece_at(Square.parse("d4")) == Piece(Side.BLACK, 2)
    assert after.piece_at(Square.parse("f6")) == Piece(Side.RED, 1)


def test_capture_removes_the_victim():
    board = _board(8, ("a1", Side.RED, 5), ("a5", Side.BLACK, 2))
    move = ChessMove(1, Side.RED, 5, Square.parse("a1"), Square.parse("a5"), capture=Piece(Side.BLACK, 2))
    assert is_legal(MoveRule.of("NR5"), board, move)
    after = board.apply(move)
    assert after.piece_count() == 1
    assert after.piece_at(Square.parse("a5")) == Piece(Side.RED, 5)


def test_sliders_stop_at_first_piece():
    board = _board(8, ("a1", Side.RED, 5), ("a4", Side.RED, 2), ("d1", Side.BLACK, 1))
    targets = _squares(legal_targets(MoveRule.of("NR5"), board, Square.parse("a1")))
    assert targets == {Square.parse("a2"), Square.parse("a3"), Square.parse("b1"), Square.parse("c1"), Square.parse("d1")}


@given(
    st.integers(min_value=0, max_value=14), st.integers(min_value=0, max_value=14),
    st.integers(min_value=0, max_value=14), st.integers(min_value=0, max_value=14),
)
def test_mirror_construction_is_an_involution(of, orank, bf, brank):
    origin, blocker = Square(of, orank), Square(bf, brank)
    assert mirror_square(mirror_square(origin, blocker), blocker) == origin


def test_legal_targets_requires_a_piece():
    with pytest.raises(PreconditionError):
        legal_targets(MoveRule.of("NR1"), _board(8), Square(0, 0))


def test_composite_witness_rejects_single_leg_rules():
    board = _board(8, ("a1", Side.RED, 1))
    with pytest.raises(PreconditionError):
        composite_witness(MoveRule.of("NR1"), board, Square(0, 0), Square(1, 1))
    with pytest.raises(PreconditionError):
        composite_witness(MoveRule.of("SR4"), board, Square(0, 0), Square(1, 1))


def test_board_size_bounds():
    with pytest.raises(PreconditionError):
        Board(7)
    with pytest.raises(PreconditionError):
        Board(16)
    with pytest.raises(PreconditionError):
        Board(8, {Square(8, 0): Piece(Side.RED, 1)})


def test_square_algebraic_round_trip():
    assert Square.parse("o15") == Square(14, 14)
    assert Square(2, 2).algebraic == "c3"


def test_rule_set_with_three_normals_is_rejected():
    with pytest.raises(RuleSetError):
        RuleSet.create(Game.CHESS, [1, 2, 3], [1, 2, 3, 4, 5])


@pytest.fixture
def chess_episode():
    return generate_chess_episode(rule_set_for_index(Game.CHESS, 17), EpisodeSeed(20250101, 17))


def test_generated_episode_is_valid(chess_episode):
    assert validate_chess_episode(chess_episode) == []
    assert 10 <= chess_episode.header["rounds"] <= 12
    assert 8 <= chess_episode.header["size"] <= 15
    counts = Counter(move["piece_type"] for move in chess_episode.observations)
    assert all(counts[t] >= 3 for t in range(1, 9))
    assert set(chess_episode.ground_truth) == set(PIECE_NAMES)
    assert sorted(r.label for r in chess_episode.ground_truth.values()) == sorted(chess_episode.rule_set.labels())


def test_generation_is_deterministic(chess_episode):
    again = generate_chess_episode(rule_set_for_index(Game.CHESS, 17), EpisodeSeed(20250101, 17))
    assert again.to_json_line() == chess_episode.to_json_line()
    other = generate_chess_episode(rule_set_for_index(Game.CHESS, 17), EpisodeSeed(20250102, 17))
    assert other.to_json_line() != chess_episode.to_json_line()


@pytest.mark.slow
def test_generated_episodes_validate_across_configurations():
    for index in range(0, 225, 14):
        ep = generate_chess_episode(rule_set_for_index(Game.CHESS, index), EpisodeSeed(99, index))
        assert validate_chess_episode(ep) == [], index


def test_truncated_episode_reports_min_appearance(chess_episode):
    chess_episode.observations = chess_episode.observations[:-2]
    invariants = {v.invariant for v in validate_chess_episode(chess_episode)}
    assert "min-appearance" in invariants


def test_tampered_destination_reports_illegal_move(chess_episode):
    first = chess_episode.observations[0]
    board = Board.from_placement(chess_episode.header["size"], chess_episode.header["initial_placement"])
    frm = Square.parse(first["from"])
    rule = MoveRule(chess_episode.ground_truth[PIECE_NAMES[first["piece_type"] - 1]])
    reachable = {square for square, _ in legal_targets(rule, board, frm)}
    bad = next(
        square for square in (Square(f, r) for r in range(board.size) for f in range(board.size))
        if square != frm and board.is_empty(square) and square not in reachable
    )
    chess_episode.observations[0] = {key: value for key, value in first.items() if key not in ("capture", "special_effect", "partner")}
    chess_episode.observations[0]["to"] = bad.algebraic
    invariants = {v.invariant for v in validate_chess_episode(chess_episode)}
    assert "move-legality" in invariants


def test_exhausted_schedule_attempts_raise():
    config = ChessScheduleConfig(max_attempts=0)
    with pytest.raises(UnsatisfiableScheduleError) as excinfo:
        generate_chess_episode(rule_set_for_index(Game.CHESS, 0), EpisodeSeed(1, 0), config)
    assert excinfo.value.seed == EpisodeSeed(1, 0)
