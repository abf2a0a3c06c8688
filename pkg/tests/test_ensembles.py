"""Ensemble sampling: exactness, distributions, determinism, round trips."""

import math

import numpy as np
import pytest

from subemb import (ColumnMatrix, EnsembleSpec, SeedPath, build_set,
                    chi_square, column_norms, distortion_sup, dump_matrix,
                    enumerate_exact_sparse, matvec,
                    normalize_columns_conditional, parse_matrix, sample_matrix)
from subemb.ensembles import _approx_sparse_column
from subemb.errors import ParameterError, ResampleExhaustedError
from subemb.rng import ColumnStreams, column_stream, stream


def _spec(variant, m, n, s=None, **kw):
    return EnsembleSpec(variant, m, n, s=s, **kw)


class TestSpecValidation:
    def test_unknown_variant(self):
        with pytest.raises(ParameterError):
            _spec("poisson", 4, 2)

    def test_sparse_needs_s(self):
        with pytest.raises(ParameterError):
            _spec("exact_sparse", 4, 2)
        with pytest.raises(ParameterError):
            _spec("approx_sparse", 4, 2, s=5)
        with pytest.raises(ParameterError):
            _spec("approx_sparse", 4, 2, s=0)

    def test_normalized_constraints(self):
        base = _spec("approx_sparse", 8, 2, s=2)
        nested = _spec("column_normalized", 8, 2, s=2, target_norm=1.0, base=base)
        with pytest.raises(ParameterError):
            _spec("column_normalized", 8, 2, s=2, target_norm=1.0, base=nested)
        with pytest.raises(ParameterError):
            _spec("column_normalized", 8, 2, s=2, base=base)  # missing target
        with pytest.raises(ParameterError):
            _spec("column_normalized", 16, 2, s=2, target_norm=1.0, base=base)
        with pytest.raises(ParameterError):
            _spec("column_normalized", 8, 2, s=2, target_norm=1.0, base=base,
                  min_norm_fraction=1.5)

    def test_default_lambda(self):
        assert _spec("dense_gaussian", 4, 2).default_lambda() == 1.0
        assert _spec("exact_sparse", 9, 2, s=4).default_lambda() == 2.0
        base = _spec("approx_sparse", 8, 2, s=2)
        nspec = _spec("column_normalized", 8, 2, s=2, target_norm=3.0, base=base)
        assert nspec.default_lambda() == 3.0

    def test_spec_dict_round_trip(self):
        base = _spec("approx_sparse", 8, 2, s=2)
        nspec = _spec("column_normalized", 8, 2, s=2, target_norm=3.0, base=base)
        assert EnsembleSpec.from_dict(nspec.to_dict()) == nspec


class TestExactSparse:
    def test_full_support_when_s_equals_m(self):
        A = sample_matrix(_spec("exact_sparse", 3, 5, s=3), SeedPath(1))
        for j in range(5):
            assert list(A.indices[j]) == [0, 1, 2]
        assert np.allclose(column_norms(A), math.sqrt(3))

    def test_norm_is_exactly_sqrt_s(self):
        for seed in range(5):
            A = sample_matrix(_spec("exact_sparse", 64, 8, s=5), SeedPath(seed))
            for j in range(8):
                assert len(A.indices[j]) == 5
                assert list(A.indices[j]) == sorted(set(int(i) for i in A.indices[j]))

    def test_uniformity_chi_square(self):
        atoms = enumerate_exact_sparse(5, 2)
        lookup = {a: i for i, a in enumerate(atoms)}
        counts = np.zeros(len(atoms))
        spec = _spec("exact_sparse", 5, 100, s=2)
        for trial in range(200):
            A = sample_matrix(spec, SeedPath(0, trial))
            for j in range(100):
                key = (tuple(int(i) for i in A.indices[j]),
                       tuple(int(v) for v in A.signs[j]))
                counts[lookup[key]] += 1
        _, p = chi_square(counts)
        assert p > 0.001


class TestApproxSparse:
    def test_pooled_histogram_both_paths(self):
        # >= 1e6 pooled entries, each count within 4 standard errors.
        m, s, n = 40, 4, 250
        p = s / m
        pos = neg = total = 0
        for path in ("entrywise", "skip"):
            gen = stream(2024, 0, 0, 0)
            for _ in range(50):
                for _col in range(n):
                    _, sg = _approx_sparse_column(gen, m, s, force_path=path)
                    pos += int((sg > 0).sum())
                    neg += int((sg < 0).sum())
                total += m * n
        assert total >= 10 ** 6
        for count in (pos, neg):
            expect = total * p / 2
            sd = math.sqrt(total * (p / 2) * (1 - p / 2))
            assert abs(count - expect) <= 4 * sd
        zeros = total - pos - neg
        sd0 = math.sqrt(total * (1 - p) * p)
        assert abs(zeros - total * (1 - p)) <= 4 * sd0

    def test_skip_path_used_for_low_density(self):
        # Both paths must produce valid columns regardless of density.
        gen = stream(3, 0, 0, 0)
        idx, sg = _approx_sparse_column(gen, 1000, 5, force_path="skip")
        assert list(idx) == sorted(set(int(i) for i in idx))
        assert idx.size == sg.size
        assert all(int(i) < 1000 for i in idx)

    def test_column_support_is_binomial_mean(self):
        spec = _spec("approx_sparse", 50, 200, s=5)
        sizes = []
        for trial in range(50):
            A = sample_matrix(spec, SeedPath(9, trial))
            sizes.extend(len(ix) for ix in A.indices)
        assert np.mean(sizes) == pytest.approx(5.0, abs=0.1)


class TestDenseVariants:
    def test_gaussian_column_scale(self):
        A = sample_matrix(_spec("dense_gaussian", 400, 50), SeedPath(4))
        norms = column_norms(A)
        assert np.mean(norms) == pytest.approx(1.0, abs=0.05)

    def test_rademacher_exact_unit_norm(self):
        A = sample_matrix(_spec("dense_rademacher", 36, 10), SeedPath(4))
        assert np.allclose(column_norms(A), 1.0, atol=1e-12)
        assert np.allclose(np.abs(A.dense) * math.sqrt(36), 1.0)


class TestSeedDeterminism:
    def test_identical_path_identical_matrix(self):
        spec = _spec("approx_sparse", 64, 6, s=4)
        A = sample_matrix(spec, SeedPath(77, 3))
        B = sample_matrix(spec, SeedPath(77, 3))
        for j in range(6):
            assert np.array_equal(A.indices[j], B.indices[j])
            assert np.array_equal(A.signs[j], B.signs[j])

    def test_trials_differ(self):
        spec = _spec("dense_gaussian", 32, 4)
        A = sample_matrix(spec, SeedPath(77, 0))
        B = sample_matrix(spec, SeedPath(77, 1))
        assert not np.array_equal(A.dense, B.dense)

    def test_stream_factory_matches_one_off_streams(self):
        path = SeedPath(123, 5, 2)
        factory = ColumnStreams(path)
        for j in (0, 3, 11):
            a = factory.column(j).random(7)
            b = column_stream(path, j).random(7)
            assert np.array_equal(a, b)

    def test_sampling_order_independent_of_shared_factory(self):
        spec = _spec("exact_sparse", 32, 5, s=3)
        solo = sample_matrix(spec, SeedPath(5, 9))
        factory = ColumnStreams(SeedPath(5, 0))
        with_factory = sample_matrix(spec, SeedPath(5, 9), _streams=factory)
        for j in range(5):
            assert np.array_equal(solo.indices[j], with_factory.indices[j])
            assert np.array_equal(solo.signs[j], with_factory.signs[j])


class TestSignSymmetry:
    def test_flipping_signs_preserves_distortion_on_symmetric_set(self):
        spec = _spec("exact_sparse", 16, 4, s=3)
        A = sample_matrix(spec, SeedPath(21))
        flipped = ColumnMatrix(A.m, A.n, "sparse",
                               indices=[ix.copy() for ix in A.indices],
                               signs=[(-sg).astype(np.int8) for sg in A.signs])
        pts = np.vstack([np.eye(4), -np.eye(4)])
        T = build_set("finite", 4, points=pts)
        lam = math.sqrt(3)
        assert distortion_sup(T, A, lam).delta == distortion_sup(T, flipped, lam).delta


class TestColumnNormsAndMatvec:
    def test_norm_examples(self):
        zero_col = ColumnMatrix(3, 1, "dense", dense=np.zeros((3, 1)))
        assert column_norms(zero_col)[0] == 0.0
        sparse4 = ColumnMatrix(9, 1, "sparse",
                               indices=[np.array([1, 3, 5, 7])],
                               signs=[np.array([1, -1, 1, -1], dtype=np.int8)])
        assert column_norms(sparse4)[0] == 2.0
        triangle = ColumnMatrix(2, 1, "dense", dense=np.array([[3.0], [4.0]]))
        assert column_norms(triangle)[0] == 5.0

    def test_matvec_basis_and_zero(self):
        A = sample_matrix(_spec("exact_sparse", 12, 4, s=2), SeedPath(2))
        e1 = np.zeros(4)
        e1[0] = 1.0
        col = np.zeros(12)
        col[A.indices[0]] = A.signs[0]
        assert np.array_equal(matvec(A, e1), col)
        assert np.array_equal(matvec(A, np.zeros(4)), np.zeros(12))

    def test_matvec_cancellation_gives_delta_one(self):
        A = ColumnMatrix(2, 2, "dense", dense=np.array([[1.0, 1.0], [0.0, 0.0]]))
        x = np.array([1.0, -1.0]) / math.sqrt(2)
        assert np.allclose(matvec(A, x), 0.0)
        T = build_set("finite", 2, points=x[None, :])
        assert distortion_sup(T, A, 1.0).delta == pytest.approx(1.0, abs=1e-12)

    def test_matvec_dimension_error(self):
        A = sample_matrix(_spec("dense_gaussian", 4, 3), SeedPath(0))
        with pytest.raises(ParameterError):
            matvec(A, np.ones(5))


class TestColumnNormalized:
    def _nspec(self, m, n, s, theta=0.5, max_resamples=1000, target=None):
        base = _spec("approx_sparse", m, n, s=s)
        return _spec("column_normalized", m, n, s=s,
                     target_norm=target if target is not None else math.sqrt(s),
                     min_norm_fraction=theta, base=base,
                     max_resamples=max_resamples)

    def test_norms_hit_target_exactly(self):
        spec = self._nspec(50, 20, 20)
        A, attempts = normalize_columns_conditional(spec, SeedPath(6))
        assert np.allclose(column_norms(A), math.sqrt(20), rtol=1e-12)
        assert len(attempts) == 20
        assert all(a >= 1 for a in attempts)

    def test_first_accepted_draw_matches_plain_arm(self):
        base = _spec("approx_sparse", 50, 8, s=20)
        nspec = self._nspec(50, 8, 20)
        plain = sample_matrix(base, SeedPath(13))
        A, attempts = normalize_columns_conditional(nspec, SeedPath(13))
        for j, att in enumerate(attempts):
            if att != 1:
                continue
            col = np.zeros(50)
            col[plain.indices[j]] = plain.signs[j]
            norm = np.linalg.norm(col)
            assert np.allclose(A.dense[:, j], col * math.sqrt(20) / norm)

    def test_resamples_rare_at_half_threshold(self):
        spec = self._nspec(50, 10, 20)
        total = first = 0
        for trial in range(100):
            _, attempts = normalize_columns_conditional(spec, SeedPath(30, trial))
            total += len(attempts)
            first += sum(1 for a in attempts if a == 1)
        assert first / total >= 0.99

    def test_exhaustion_error_carries_column(self):
        # Norm threshold above sqrt(m) can never be met.
        base = _spec("approx_sparse", 4, 3, s=1)
        spec = _spec("column_normalized", 4, 3, s=1, target_norm=100.0,
                     min_norm_fraction=0.9, base=base, max_resamples=5)
        with pytest.raises(ResampleExhaustedError) as err:
            normalize_columns_conditional(spec, SeedPath(0))
        assert err.value.column == 0
        assert err.value.attempts == 5

    def test_sample_matrix_delegates(self):
        spec = self._nspec(30, 4, 6)
        A = sample_matrix(spec, SeedPath(8))
        assert A.storage == "dense"
        assert np.allclose(column_norms(A), math.sqrt(6), rtol=1e-12)


class TestDumpParse:
    def test_sparse_round_trip(self):
        A = sample_matrix(_spec("exact_sparse", 7, 4, s=3), SeedPath(3))
        B = parse_matrix(dump_matrix(A))
        assert (B.m, B.n, B.storage) == (7, 4, "sparse")
        for j in range(4):
            assert np.array_equal(A.indices[j], B.indices[j])
            assert np.array_equal(A.signs[j], B.signs[j])

    def test_dense_round_trip(self):
        A = sample_matrix(_spec("dense_gaussian", 5, 3), SeedPath(3))
        B = parse_matrix(dump_matrix(A))
        assert B.storage == "dense"
        assert np.array_equal(A.dense, B.dense)

    def test_empty_sparse_column(self):
        A = ColumnMatrix(4, 2, "sparse",
                         indices=[np.array([], dtype=np.int64), np.array([2])],
                         signs=[np.array([], dtype=np.int8),
                                np.array([-1], dtype=np.int8)])
        B = parse_matrix(dump_matrix(A))
        assert len(B.indices[0]) == 0
        assert list(B.indices[1]) == [2]

    def test_parse_errors(self):
        with pytest.raises(ParameterError):
            parse_matrix("")
        with pytest.raises(ParameterError):
            parse_matrix("2 2\ncol 0 : 0:+1\n")
        with pytest.raises(ParameterError):
            parse_matrix("not a header\ncol 0 :\n")
