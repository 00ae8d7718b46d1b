import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tardos import ALL_STRATEGIES, Strategy, forge, generate_codebook, verify_marking
from tardos.codec import Codebook
from tardos.errors import DomainError


def _codebook(matrix):
    matrix = np.asarray(matrix, dtype=bool)
    return Codebook(n=matrix.shape[0], ell=matrix.shape[1], delta=0.1, seed=0,
                    biases=np.full(matrix.shape[1], 0.5),
                    packed=np.packbits(matrix, axis=1, bitorder="little"))


@pytest.fixture
def columns():
    # Columns: unanimous 1, unanimous 0, two ones, one one.
    return _codebook([[1, 0, 1, 0],
                      [1, 0, 1, 1],
                      [1, 0, 0, 0]])


@pytest.mark.parametrize("strategy", ALL_STRATEGIES)
def test_unanimous_columns_forced(columns, strategy):
    y = forge(strategy, columns, [0, 1, 2], seed=4)
    assert y.bits[0] == 1 and y.bits[1] == 0


def test_majority_minority(columns):
    assert forge("majority", columns, [0, 1, 2], 0).bits[2:].tolist() == [1, 0]
    assert forge("minority", columns, [0, 1, 2], 0).bits[2:].tolist() == [0, 1]


def test_constant_strategies(columns):
    assert forge("all_one", columns, [0, 1, 2], 0).bits.tolist() == [1, 0, 1, 1]
    assert forge("all_zero", columns, [0, 1, 2], 0).bits.tolist() == [1, 0, 0, 0]


def test_tie_uses_seeded_coin():
    cb = generate_codebook(2, 400, 0.2, seed=1)
    mixed = cb.row(0) != cb.row(1)
    ys = [forge("majority", cb, [0, 1], seed=s).bits[mixed] for s in range(6)]
    assert len({y.tobytes() for y in ys}) > 1
    np.testing.assert_array_equal(forge("majority", cb, [0, 1], seed=3).bits,
                                  forge("majority", cb, [0, 1], seed=3).bits)
    assert 0.3 < ys[0].mean() < 0.7


def test_interleave_copies_a_member(small_codebook):
    members = [3, 8, 21]
    y = forge("interleave", small_codebook, members, seed=2)
    rows = small_codebook.rows(members)
    assert np.all((rows == y.bits.astype(bool)).any(axis=0))


def test_singleton_interleave_is_own_codeword(small_codebook):
    y = forge("interleave", small_codebook, [6], seed=9)
    np.testing.assert_array_equal(y.bits.astype(bool), small_codebook.row(6))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**64 - 1), st.sampled_from(ALL_STRATEGIES), st.integers(1, 8))
def test_forgeries_obey_marking(seed, strategy, size):
    cb = generate_codebook(10, 64, 0.05, seed)
    members = np.random.default_rng(seed % 2**32).choice(10, size=size, replace=False)
    y = forge(strategy, cb, members, seed)
    assert verify_marking(cb, members, y)
    assert y == forge(strategy, cb, members, seed)


def test_violation_detected(columns):
    y = forge("majority", columns, [0, 1, 2], 0).bits.copy()
    y[0] = 0
    assert not verify_marking(columns, [0, 1, 2], y)


def test_singleton_must_copy(small_codebook):
    y = 1 - small_codebook.row(4).astype(np.uint8)
    assert not verify_marking(small_codebook, [4], y)


def test_forgery_metadata(columns):
    y = forge(Strategy.COINFLIP, columns, [2, 0], seed=5)
    assert y.coalition == (0, 2)
    assert y.meta() == {"strategy": "coinflip", "coalition": [0, 2], "seed": 5, "ell": 4}
    assert len(y.to_ascii()) == 4 and set(y.to_ascii()) <= {"0", "1"}


def test_bad_coalitions(columns):
    with pytest.raises(IndexError):
        forge("majority", columns, [0, 3], 0)
    with pytest.raises(DomainError):
        forge("majority", columns, [], 0)
    with pytest.raises(ValueError):
        forge("median", columns, [0], 0)
