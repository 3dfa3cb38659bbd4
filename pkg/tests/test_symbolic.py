import numpy as np
import pytest

from cocyclelab.symbolic import (PointRep, SpecError, SubshiftSpec, admissible_words, bracket,
                                 cycle_words, d_theta, format_word, parse_word, periodic_points,
                                 point_from_word, project, recode, shift, validate_spec)

GOLDEN = SubshiftSpec(np.array([[1, 1], [1, 0]]), 0.5)


def test_validate_good_spec():
    d = validate_spec([[1, 1], [1, 0]], 0.5)
    assert d.valid and d.transitive and d.period == 1 and not d.problems


def test_validate_reports_every_problem():
    d = validate_spec([[1, 0, 0], [0, 0, 0], [2, 1, 0]], 1.5)
    assert not d.valid
    assert d.empty_rows == (2,)
    assert d.empty_cols == (3,)
    text = " ".join(d.problems)
    assert "0/1" in text and "theta" in text and "strongly connected" in text


def test_validate_period_of_cycle():
    d = validate_spec([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    assert d.valid and d.period == 3


def test_validate_non_square():
    assert not validate_spec([[1, 1]]).valid


def test_spec_constructor_raises():
    with pytest.raises(SpecError):
        SubshiftSpec(np.array([[0, 1], [0, 0]]))


def test_word_roundtrip():
    assert parse_word("121", 2) == (0, 1, 0)
    assert parse_word("1, 2", 2) == (0, 1)
    assert format_word((0, 1, 1)) == "122"
    with pytest.raises(SpecError):
        parse_word("3", 2)


def test_admissible_words_golden_mean():
    words = admissible_words(GOLDEN, 3)
    assert [tuple(w) for w in words.tolist()] == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 0, 1)]


def test_d_theta_examples():
    spec = SubshiftSpec.full_shift(2, 0.5)
    x = PointRep.periodic(spec, (0,))
    assert d_theta(x, x) == 0.0
    y = PointRep.periodic(spec, (1,))
    assert d_theta(x, y) == 1.0
    # agree on |n| < 3, differ at n = 3
    z = PointRep(spec, (0,), (0, 0, 0, 1), (0,), 0)
    assert d_theta(x, z) == 0.125


def test_d_theta_ultrametric_and_symmetric():
    rng = np.random.default_rng(0)
    spec = SubshiftSpec.full_shift(2, 0.3)
    from cocyclelab.symbolic import random_point
    pts = [random_point(spec, rng, 3) for _ in range(12)]
    for a in pts:
        for b in pts:
            assert d_theta(a, b) == d_theta(b, a)
            for c in pts[:4]:
                assert d_theta(a, c) <= max(d_theta(a, b), d_theta(b, c)) + 1e-15


def test_shift_moves_coordinates():
    x = point_from_word(GOLDEN, (0, 1, 0, 0), start=0)
    y = shift(x, 2)
    assert y.word(0, 2) == (0, 0)
    assert shift(y, -2) == x


def test_project_compares_one_side():
    spec = SubshiftSpec.full_shift(2)
    x = PointRep(spec, (1,), (0, 0), (0,), 0)
    y = PointRep(spec, (0,), (0, 0), (0,), 0)
    assert project(x, "u") == project(y, "u")
    assert project(x, "s") != project(y, "s")
    with pytest.raises(ValueError):
        project(x, "z")


def test_bracket_takes_past_and_future():
    spec = SubshiftSpec.full_shift(2)
    x = PointRep.periodic(spec, (0,))
    y = PointRep.periodic(spec, (1,))
    z = bracket(x, y)
    assert z.word(-3, 3) == (0, 0, 0, 1, 1, 1)


@pytest.mark.parametrize("spec", [GOLDEN, SubshiftSpec.full_shift(3),
                                  SubshiftSpec(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]]))])
def test_periodic_point_count_is_trace(spec):
    for n in range(1, 13):
        expected = int(np.trace(np.linalg.matrix_power(spec.Q, n)))
        assert len(cycle_words(spec, n)) == expected
        if n <= 6:
            assert len(periodic_points(spec, n)) == expected


def test_recode_examples():
    rec = recode(GOLDEN, 2)
    assert rec.words == ((0, 0), (0, 1), (1, 0))
    assert rec.coded.Q.tolist() == [[1, 1, 0], [0, 0, 1], [1, 1, 0]]
    assert rec.encode((0, 0, 1, 0)) == (0, 1, 2)


def test_recode_decode_inverts_encode():
    rng = np.random.default_rng(1)
    from cocyclelab.symbolic import random_word
    for k in (1, 2, 3):
        rec = recode(GOLDEN, k)
        for _ in range(20):
            w = random_word(GOLDEN, rng, 9)
            assert rec.decode(rec.encode(w)) == w
