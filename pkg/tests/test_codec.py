import io
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import kstest

from tardos import generate_codebook, read_codebook, rng, sample_bias, write_codebook
from tardos.codec import (
    MAGIC, bias_cdf, codebook_from_bytes, codebook_to_bytes, gen_codebook, packed_row_bytes,
)
from tardos.errors import CapacityError, CodebookFormatError, DomainError


class TestSampleBias:
    @pytest.mark.parametrize("delta", [1e-3, 0.017662, 0.1, 0.25])
    def test_endpoints_and_midpoint(self, delta):
        assert sample_bias(0.0, delta) == delta
        assert sample_bias(1.0, delta) == 1.0 - delta
        assert sample_bias(0.5, delta) == 0.5

    @given(st.floats(0.0, 1.0), st.floats(1e-4, 0.45))
    def test_mirror(self, u, delta):
        assert sample_bias(u, delta) + sample_bias(1.0 - u, delta) == pytest.approx(1.0, abs=1e-15)

    @given(st.floats(0.0, 1.0), st.floats(1e-4, 0.45))
    def test_inverts_cdf(self, u, delta):
        p = sample_bias(u, delta)
        assert delta <= p <= 1 - delta
        assert bias_cdf(p, delta) == pytest.approx(u, abs=1e-9)

    def test_reference_form(self):
        # sin^2(delta' + u (pi - 4 delta') / 2), the textbook inverse transform.
        delta = 0.02
        dp = math.asin(math.sqrt(delta))
        u = np.linspace(0, 1, 101)
        np.testing.assert_allclose(sample_bias(u, delta), np.sin(dp + u * (math.pi - 4 * dp) / 2) ** 2,
                                   rtol=0, atol=1e-15)

    def test_ks(self):
        delta = 0.01
        u = rng.uniforms(rng.derive(2024, rng.TAG_BIAS), 100_000)
        res = kstest(sample_bias(u, delta), lambda p: bias_cdf(p, delta))
        assert res.pvalue > 0.01

    def test_domain(self):
        with pytest.raises(DomainError):
            sample_bias(1.5, 0.1)
        with pytest.raises(DomainError):
            sample_bias(0.5, 0.5)


class TestGenerate:
    def test_stub_stream(self):
        cb = generate_codebook(1, 64, 0.05, seed=9, bias_uniforms=lambda k: np.full(k, 0.5))
        assert np.all(cb.biases == 0.5)

    def test_deterministic(self):
        a = generate_codebook(10, 100, 0.05, seed=77)
        b = generate_codebook(10, 100, 0.05, seed=77)
        assert codebook_to_bytes(a) == codebook_to_bytes(b)
        assert a != generate_codebook(10, 100, 0.05, seed=78)

    def test_rows_independent_of_n(self):
        # User j's codeword depends only on (seed, j), never on how many users exist.
        a = generate_codebook(5, 90, 0.05, seed=3)
        b = generate_codebook(12, 90, 0.05, seed=3)
        np.testing.assert_array_equal(a.matrix(), b.matrix()[:5])

    def test_column_concentration(self):
        cb = generate_codebook(1000, 1000, 0.01, seed=5)
        frac = cb.matrix().mean(axis=0)
        p = cb.biases
        ok = np.abs(frac - p) <= 4 * np.sqrt(p * (1 - p) / 1000)
        assert ok.mean() >= 0.99

    def test_entry_rule(self):
        cb = generate_codebook(4, 50, 0.05, seed=11)
        for j in range(4):
            u = rng.uniforms(rng.derive(11, rng.TAG_ENTRY, j), 50)
            np.testing.assert_array_equal(cb.row(j), u < cb.biases)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            generate_codebook(10**6, 10**5, 0.05, seed=0, max_bytes=1 << 20)

    def test_bad_shape(self):
        with pytest.raises(DomainError):
            generate_codebook(0, 10, 0.05, seed=0)

    def test_row_index(self, small_codebook):
        with pytest.raises(IndexError):
            small_codebook.row(small_codebook.n)

    def test_from_scheme(self):
        from tardos import SchemeContext, integral_adjust, optimize
        _, scheme = integral_adjust(optimize(2, 1.0), SchemeContext(n=10, c=2, eps1=0.5, eta=1.0))
        cb = gen_codebook(10, scheme, seed=1)
        assert cb.ell == scheme.ell and cb.delta == scheme.delta


class TestFormat:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 20), st.integers(1, 70), st.integers(0, 2**64 - 1))
    def test_round_trip(self, n, ell, seed):
        cb = generate_codebook(n, ell, 0.03, seed)
        assert codebook_from_bytes(codebook_to_bytes(cb)) == cb

    def test_file_and_stream(self, tmp_path, small_codebook):
        path = tmp_path / "cb.bin"
        write_codebook(small_codebook, path)
        assert read_codebook(path) == small_codebook
        buf = io.BytesIO()
        write_codebook(small_codebook, buf)
        assert read_codebook(io.BytesIO(buf.getvalue())) == small_codebook
        assert len(buf.getvalue()) == 4 + 2 + 8 * 3 + 8 + 8 * 300 + 40 * packed_row_bytes(300) + 4

    def test_empty(self):
        with pytest.raises(CodebookFormatError):
            codebook_from_bytes(b"")

    def test_corrupted_length_field(self, small_codebook):
        data = bytearray(codebook_to_bytes(small_codebook))
        struct.pack_into("<Q", data, 6, small_codebook.n + 1)
        with pytest.raises(CodebookFormatError):
            codebook_from_bytes(bytes(data))

    def test_flipped_bit(self, small_codebook):
        data = bytearray(codebook_to_bytes(small_codebook))
        data[len(data) // 2] ^= 0x10
        with pytest.raises(CodebookFormatError, match="CRC"):
            codebook_from_bytes(bytes(data))

    def test_truncated(self, small_codebook):
        with pytest.raises(CodebookFormatError):
            codebook_from_bytes(codebook_to_bytes(small_codebook)[:-1])

    def test_bad_magic(self, small_codebook):
        data = codebook_to_bytes(small_codebook)
        assert data[:4] == MAGIC
        with pytest.raises(CodebookFormatError):
            codebook_from_bytes(b"XXXX" + data[4:])
