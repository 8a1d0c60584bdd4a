import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riscore.embedding import (
    EmbeddingMatrix,
    SimilarityParams,
    l2_normalize,
    load_embeddings,
    save_embeddings,
    similarity_scores,
)
from riscore.errors import (
    BadMagic,
    DimMismatch,
    IndexLengthMismatch,
    NonNormalizedInput,
    TruncatedPayload,
    ZeroNormRow,
)


def mat(rows, keys=None, normalized=False):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    keys = keys or tuple(f"k{i}" for i in range(rows.shape[0]))
    return EmbeddingMatrix(data=rows, index=tuple(keys), normalized=normalized)


class TestL2Normalize:
    def test_3_4_5_triangle(self):
        out = l2_normalize(mat([[3.0, 4.0]]))
        assert out.data[0] == pytest.approx([0.6, 0.8], abs=1e-15)

    def test_unit_row_unchanged(self):
        out = l2_normalize(mat([[0.6, 0.8]]))
        assert np.max(np.abs(out.data - [[0.6, 0.8]])) < 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        once = l2_normalize(mat(rng.normal(size=(6, 5))))
        twice = l2_normalize(once)
        assert np.max(np.abs(twice.data - once.data)) < 1e-12

    def test_random_matrix_norms(self):
        rng = np.random.default_rng(7)
        out = l2_normalize(mat(rng.normal(size=(5, 8))))
        # independent norm recomputation with plain summation
        for row in out.data:
            norm = math.sqrt(sum(float(v) * float(v) for v in row))
            assert abs(norm - 1.0) < 1e-9

    def test_zero_row_rejected(self):
        with pytest.raises(ZeroNormRow):
            l2_normalize(mat([[1.0, 0.0], [0.0, 0.0]]))

    def test_index_preserved(self):
        out = l2_normalize(mat([[2.0, 0.0]], keys=("a",)))
        assert out.index == ("a",)


class TestFileFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        m = l2_normalize(mat(rng.normal(size=(3, 4)).astype(np.float32)))
        path = tmp_path / "m.remb"
        save_embeddings(m, path)
        loaded = load_embeddings(path)
        save_embeddings(loaded, tmp_path / "m2.remb")
        assert path.read_bytes() == (tmp_path / "m2.remb").read_bytes()
        assert (tmp_path / "m.remb.idx").read_bytes() == (tmp_path / "m2.remb.idx").read_bytes()
        assert loaded.index == m.index

    def test_two_by_three_round_trip(self, tmp_path):
        m = l2_normalize(mat([[1.0, 2.0, 2.0], [2.0, 1.0, 2.0]]))
        # force exact float32 values so the in-memory round trip is also exact
        m = mat(np.asarray(m.data, dtype=np.float32), keys=m.index, normalized=True)
        save_embeddings(m, tmp_path / "m.remb")
        loaded = load_embeddings(tmp_path / "m.remb")
        assert np.array_equal(loaded.data, m.data)

    def test_empty_matrix(self, tmp_path):
        m = EmbeddingMatrix(data=np.zeros((0, 3)), index=(), normalized=True)
        save_embeddings(m, tmp_path / "e.remb")
        assert (tmp_path / "e.remb").stat().st_size == 16  # header only
        loaded = load_embeddings(tmp_path / "e.remb")
        assert loaded.rows == 0 and loaded.dim == 3

    def test_single_value_encoding(self, tmp_path):
        m = mat([[1.0]], normalized=True)
        save_embeddings(m, tmp_path / "one.remb")
        raw = (tmp_path / "one.remb").read_bytes()
        assert raw[16:] == np.float32(1.0).tobytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.remb"
        p.write_bytes(b"NOPE" + bytes(12))
        (tmp_path / "bad.remb.idx").write_text("")
        with pytest.raises(BadMagic):
            load_embeddings(p)

    def test_truncated_payload(self, tmp_path):
        m = l2_normalize(mat(np.ones((4, 3))))
        save_embeddings(m, tmp_path / "t.remb")
        raw = (tmp_path / "t.remb").read_bytes()
        # keep header claiming 4 rows but drop one row of payload
        (tmp_path / "t.remb").write_bytes(raw[:-12])
        with pytest.raises(TruncatedPayload):
            load_embeddings(tmp_path / "t.remb")

    def test_index_length_mismatch(self, tmp_path):
        m = l2_normalize(mat(np.ones((2, 3))))
        save_embeddings(m, tmp_path / "i.remb")
        (tmp_path / "i.remb.idx").write_text("only-one\n")
        with pytest.raises(IndexLengthMismatch):
            load_embeddings(tmp_path / "i.remb")

    def test_unnormalized_file_normalized_on_load(self, tmp_path):
        m = mat([[3.0, 4.0]], normalized=False)
        save_embeddings(m, tmp_path / "u.remb")
        loaded = load_embeddings(tmp_path / "u.remb")
        assert loaded.normalized
        assert np.linalg.norm(loaded.data[0]) == pytest.approx(1.0, abs=1e-6)


class TestSimilarityScores:
    def test_identical_text_rows_uniform(self):
        img = l2_normalize(mat(np.random.default_rng(0).normal(size=(3, 4))))
        base = np.tile([0.5, 0.5, 0.5, 0.5], (5, 1))
        text = l2_normalize(mat(base))
        out = similarity_scores(img, text, SimilarityParams(tau=0.01))
        assert np.max(np.abs(out.values - 0.2)) < 1e-12

    def test_orthogonal_dominance(self):
        img = mat([[1.0, 0.0]], normalized=True)
        text = mat([[1.0, 0.0], [0.0, 1.0]], keys=("a", "b"), normalized=True)
        out = similarity_scores(img, text, SimilarityParams(tau=0.01))
        assert out.values[0, 0] == pytest.approx(1.0, abs=1e-12)
        assert out.values[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_scalar_softmax_value(self):
        # dots are (0.5, -0.5) at tau=1; independent scalar evaluation
        s = math.sqrt(3.0) / 2.0
        img = mat([[1.0, 0.0]], normalized=True)
        text = mat([[0.5, s], [-0.5, s]], keys=("a", "b"), normalized=True)
        out = similarity_scores(img, text, SimilarityParams(tau=1.0))
        z = math.exp(0.5) + math.exp(-0.5)
        assert out.values[0, 0] == pytest.approx(math.exp(0.5) / z, abs=1e-12)
        assert out.values[0, 1] == pytest.approx(math.exp(-0.5) / z, abs=1e-12)

    def test_dim_mismatch(self):
        img = mat([[1.0, 0.0]], normalized=True)
        text = mat([[1.0, 0.0, 0.0]], normalized=True)
        with pytest.raises(DimMismatch):
            similarity_scores(img, text, SimilarityParams())

    def test_non_normalized_rejected(self):
        img = mat([[2.0, 0.0]], normalized=False)
        text = mat([[1.0, 0.0]], normalized=True)
        with pytest.raises(NonNormalizedInput):
            similarity_scores(img, text, SimilarityParams())

    def test_empty_image_matrix(self):
        img = EmbeddingMatrix(data=np.zeros((0, 2)), index=(), normalized=True)
        text = mat([[1.0, 0.0], [0.0, 1.0]], keys=("a", "b"), normalized=True)
        out = similarity_scores(img, text, SimilarityParams())
        assert out.values.shape == (0, 2)


@st.composite
def unit_rows(draw, max_rows=6, dim=4):
    n = draw(st.integers(1, max_rows))
    values = draw(
        st.lists(
            st.lists(st.floats(-1.0, 1.0), min_size=dim, max_size=dim),
            min_size=n, max_size=n,
        )
    )
    arr = np.asarray(values)
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms < 1e-6):
        arr = arr + 0.5  # nudge away from zero rows
    return l2_normalize(
        EmbeddingMatrix(data=arr, index=tuple(f"r{i}" for i in range(n)))
    )


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(unit_rows(), unit_rows(), st.floats(0.005, 2.0))
    def test_rows_sum_to_one_and_positive(self, img, text, tau):
        out = similarity_scores(img, text, SimilarityParams(tau=tau))
        assert np.all(out.values > 0.0)
        assert np.max(np.abs(out.values.sum(axis=1) - 1.0)) < 1e-6

    @settings(max_examples=50, deadline=None)
    @given(unit_rows(), unit_rows(), st.floats(0.005, 2.0))
    def test_argmax_matches_raw_dots(self, img, text, tau):
        # the raw-dot argmax column must attain the top softmax score;
        # exact argmax equality can flip when a dot gap underflows in exp
        out = similarity_scores(img, text, SimilarityParams(tau=tau))
        dots = img.data @ text.data.T
        top = out.values.max(axis=1)
        picked = out.values[np.arange(out.values.shape[0]), dots.argmax(axis=1)]
        assert np.all(picked >= top - 1e-12)

    @settings(max_examples=50, deadline=None)
    @given(unit_rows(), unit_rows(), st.floats(0.005, 0.5), st.floats(0.6, 3.0))
    def test_temperature_sharpening(self, img, text, tau1, tau2):
        hot = similarity_scores(img, text, SimilarityParams(tau=tau1))
        cold = similarity_scores(img, text, SimilarityParams(tau=tau2))
        assert np.all(hot.values.max(axis=1) >= cold.values.max(axis=1) - 1e-12)
