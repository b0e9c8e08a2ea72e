import numpy as np
import pytest

from hadrec.matrices import (
    ConstructionError,
    MatrixFormatError,
    SignMatrix,
    is_hadamard,
    parse_matrix,
    parse_matrix_file,
    paley_i,
    render_matrix,
    sylvester,
)

# The 4x4 example pair used throughout: an input with two deletions and the
# target holding the erased values.
EXAMPLE_INPUT = [[1, 1, 1, 0], [1, -1, 1, -1], [1, 1, -1, -1], [1, 0, -1, 1]]
EXAMPLE_TARGET = [[0, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [0, -1, 0, 0]]


def test_sign_matrix_rejects_bad_entries():
    with pytest.raises(MatrixFormatError):
        SignMatrix([[1, 2], [1, 1]])
    with pytest.raises(MatrixFormatError):
        SignMatrix([[1, 1, 1], [1, 1, 1]])
    with pytest.raises(MatrixFormatError):
        SignMatrix(np.zeros((0, 0)))


def test_sign_matrix_is_immutable():
    m = SignMatrix([[1, -1], [0, 1]])
    with pytest.raises(ValueError):
        m.entries[0, 0] = -1


def test_mask_is_derived():
    m = SignMatrix(EXAMPLE_INPUT)
    assert m.mask() == [(0, 3), (3, 1)]
    assert m.zero_count() == 2


def test_is_hadamard_smallest():
    assert is_hadamard(SignMatrix([[1, 1], [1, -1]]))


def test_is_hadamard_filled_example():
    filled = SignMatrix(EXAMPLE_INPUT).filled_with(SignMatrix(EXAMPLE_TARGET))
    assert filled == SignMatrix(
        [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]
    )
    assert is_hadamard(filled)


def test_is_hadamard_rejects_zeros():
    assert not is_hadamard(SignMatrix(EXAMPLE_INPUT))


def test_is_hadamard_rejects_non_orthogonal():
    assert not is_hadamard(SignMatrix([[1, 1], [1, 1]]))


def test_sylvester_base_cases():
    assert sylvester(0) == SignMatrix([[1]])
    assert sylvester(1) == SignMatrix([[1, 1], [1, -1]])


def test_sylvester_order_32():
    m = sylvester(5)
    assert m.order == 32
    assert is_hadamard(m)


def test_sylvester_order_cap():
    with pytest.raises(ConstructionError):
        sylvester(7)
    assert sylvester(7, order_cap=128).order == 128


@pytest.mark.parametrize("q", [3, 7, 11, 19, 23, 31])
def test_paley_orders_are_hadamard(q):
    m = paley_i(q)
    assert m.order == q + 1
    assert is_hadamard(m)


def test_paley_rejects_bad_q():
    with pytest.raises(ConstructionError):
        paley_i(5)  # 5 mod 4 == 1
    with pytest.raises(ConstructionError):
        paley_i(9)  # not prime
    with pytest.raises(ConstructionError):
        paley_i(67, order_cap=64)


def test_parse_basic():
    assert parse_matrix("++\n+-") == SignMatrix([[1, 1], [1, -1]])


def test_render_with_zero():
    assert render_matrix(SignMatrix([[1, 0], [-1, 1]])) == "+0\n-+\n"


def test_parse_ragged_rejected():
    with pytest.raises(MatrixFormatError):
        parse_matrix("++\n+")


def test_parse_illegal_character():
    with pytest.raises(MatrixFormatError, match="line 2, column 1"):
        parse_matrix("++\nx+")


def test_parse_non_square():
    with pytest.raises(MatrixFormatError):
        parse_matrix("++\n+-\n--")


def test_round_trip_random(seeded_rng):
    for _ in range(50):
        n = int(seeded_rng.integers(1, 12))
        m = SignMatrix(seeded_rng.integers(-1, 2, size=(n, n)))
        assert parse_matrix(render_matrix(m)) == m


def test_multi_matrix_file_round_trip():
    a = SignMatrix([[1, 1], [1, -1]])
    b = SignMatrix([[1, 0], [0, -1]])
    text = render_matrix(a) + "\n" + render_matrix(b)
    assert parse_matrix_file(text) == [a, b]


def test_empty_file_rejected():
    with pytest.raises(MatrixFormatError):
        parse_matrix_file("\n\n")
