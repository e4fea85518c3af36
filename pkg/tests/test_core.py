"""Core types, distances and losses."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import code, constant_score_model, random_model, two_point_model
from hashlearn import (
    Assignment,
    Codebook,
    ConfigurationError,
    Dataset,
    DimensionMismatchError,
    HashCode,
    TrainConfig,
    distortion,
    hamming_distance,
    load_model,
    save_model,
    soft_distance,
    surrogate_loss,
)
from hashlearn.core import (
    pack_sign_matrix,
    scores_to_assignment,
    sign,
    unpack_sign_matrix,
)


class TestHammingDistance:
    def test_identity(self):
        a = code(1, 1, -1)
        assert hamming_distance(a, code(1, 1, -1)) == 0

    def test_single_flip(self):
        assert hamming_distance(code(1, 1), code(1, -1)) == 1

    def test_antipodal(self):
        rng = np.random.default_rng(3)
        signs = rng.integers(0, 2, size=16) * 2 - 1
        a = HashCode.from_signs(signs)
        b = HashCode.from_signs(-signs)
        assert hamming_distance(a, b) == 16

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = HashCode.from_signs(rng.integers(0, 2, size=37) * 2 - 1)
            b = HashCode.from_signs(rng.integers(0, 2, size=37) * 2 - 1)
            assert hamming_distance(a, b) == hamming_distance(b, a)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            hamming_distance(code(1, 1), code(1, 1, 1))

    def test_packed_matches_naive_count(self):
        # popcount on packed words against a plain componentwise count
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n_bits = int(rng.integers(1, 200))
            sa = rng.integers(0, 2, size=n_bits) * 2 - 1
            sb = rng.integers(0, 2, size=n_bits) * 2 - 1
            expected = int(np.sum(sa != sb))
            got = hamming_distance(HashCode.from_signs(sa), HashCode.from_signs(sb))
            assert got == expected


class TestPackedRepresentation:
    @given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=300))
    @settings(deadline=None)
    def test_roundtrip_lossless(self, bits):
        c = HashCode.from_signs(np.asarray(bits))
        assert c.signs.tolist() == bits

    def test_word_layout(self):
        # bit i of word i // 64 is set iff component i is +1
        signs = -np.ones(70, dtype=np.int64)
        signs[0] = 1
        signs[65] = 1
        words = pack_sign_matrix(signs[None, :])[0]
        assert words[0] == 1
        assert words[1] == 2
        assert unpack_sign_matrix(words[None, :], 70)[0].tolist() == signs.tolist()

    def test_rejects_non_sign_entries(self):
        with pytest.raises(ConfigurationError):
            HashCode.from_signs(np.array([1, 0, -1]))


class TestSoftDistance:
    def test_all_margins_met(self):
        assert soft_distance([2.0, 2.0], code(1, 1)) == 0.0

    def test_zero_scores(self):
        assert soft_distance([0.0, 0.0], code(1, -1)) == 2.0
        assert soft_distance([0.0, 0.0], code(-1, 1)) == 2.0

    def test_hand_evaluation(self):
        # hinge(1 - 0.5) + hinge(1 + 2) = 0.5 + 3
        assert soft_distance([0.5, -2.0], code(1, 1)) == pytest.approx(3.5)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            soft_distance([1.0], code(1, 1))

    @given(
        st.lists(st.floats(-5, 5), min_size=1, max_size=48),
        st.integers(0, 2**48 - 1),
    )
    @settings(max_examples=200, deadline=None)
    def test_upper_bounds_hamming(self, f, mu_bits):
        f = np.asarray(f)
        mu_signs = np.array([1 if (mu_bits >> i) & 1 else -1 for i in range(len(f))])
        mu = HashCode.from_signs(mu_signs)
        h = hamming_distance(HashCode.from_signs(sign(f)), mu)
        assert h <= soft_distance(f, mu) + 1e-12

    def test_convex_in_scores(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n_bits = int(rng.integers(1, 12))
            mu = HashCode.from_signs(rng.integers(0, 2, size=n_bits) * 2 - 1)
            f1 = rng.normal(scale=3, size=n_bits)
            f2 = rng.normal(scale=3, size=n_bits)
            mid = soft_distance(0.5 * (f1 + f2), mu)
            avg = 0.5 * (soft_distance(f1, mu) + soft_distance(f2, mu))
            assert mid <= avg + 1e-12


class TestDistortion:
    def test_perfect_fit_is_zero(self):
        mu = Codebook.from_sign_matrix(np.array([[1, -1], [-1, 1]]))
        # f(x_i) = 2 * (codeword of sample i's class)
        model = two_point_model(np.array([[2.0, -2.0], [-2.0, 2.0]]), np.zeros(2), mu)
        data = Dataset(model.training_features, np.array([1, 2]), 2)
        assert distortion(model, data) == 0

    def test_labeled_three_bit_mismatch(self):
        mu = Codebook.from_sign_matrix(
            np.array([[-1, -1, -1, 1], [1, 1, 1, 1]])
        )
        model = constant_score_model(np.ones(4), mu)  # code (+1,+1,+1,+1)
        data = Dataset(np.zeros((1, 2)), np.array([1]), 2)
        assert distortion(model, data) == 3

    def test_unlabeled_takes_nearest(self):
        # code is all +1 (B=6); codewords at Hamming distances 2 and 5
        signs = np.ones((2, 6), dtype=int)
        signs[0, :2] = -1
        signs[1, :5] = -1
        mu = Codebook.from_sign_matrix(signs)
        model = constant_score_model(np.ones(6), mu)
        data = Dataset(np.zeros((1, 2)), np.array([0]), 2)
        assert distortion(model, data) == 2

    def test_group_count_mismatch(self):
        mu = Codebook.from_sign_matrix(np.array([[1, 1], [-1, -1]]))
        model = constant_score_model(np.ones(2), mu)
        data = Dataset(np.zeros((1, 2)), np.array([1]), 3)
        with pytest.raises(ConfigurationError):
            distortion(model, data)


class TestSurrogateLoss:
    def test_zero_when_margins_met(self):
        mu = Codebook.from_sign_matrix(np.array([[1, -1], [-1, 1]]))
        model = two_point_model(np.array([[2.0, -2.0], [-2.0, 2.0]]), np.zeros(2), mu)
        data = Dataset(model.training_features, np.array([1, 2]), 2)
        assignment = Assignment.from_groups(np.array([1, 2]), 2)
        assert surrogate_loss(model, data, assignment) == 0.0

    def test_single_zero_score(self):
        mu = Codebook(codewords=(code(1), code(-1)))
        model = constant_score_model(np.zeros(1), mu)
        data = Dataset(np.zeros((1, 2)), np.array([1]), 2)
        assignment = Assignment.from_groups(np.array([1]), 2)
        assert surrogate_loss(model, data, assignment) == pytest.approx(1.0)

    def test_two_by_two_hand_sum(self):
        # f(x1) = (0.5, 0.5), f(x2) = (-2.0, 0.5)
        # mu_1 = (+1, -1), mu_2 = (-1, +1)
        # sample 1 -> group 1: hinge(0.5) + hinge(1.5) = 2.0
        # sample 2 -> group 2: hinge(-1) + hinge(0.5)  = 0.5
        mu = Codebook.from_sign_matrix(np.array([[1, -1], [-1, 1]]))
        model = two_point_model(
            np.array([[0.5, -2.0], [0.0, 0.0]]), np.array([0.0, 0.5]), mu
        )
        data = Dataset(model.training_features, np.array([1, 2]), 2)
        assignment = Assignment.from_groups(np.array([1, 2]), 2)
        assert surrogate_loss(model, data, assignment) == pytest.approx(2.5, abs=1e-12)

    def test_bounds_distortion_under_minimizing_assignment(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            model = random_model(rng)
            feats = rng.normal(size=(10, 3))
            labels = rng.integers(0, model.n_groups + 1, size=10)
            data = Dataset(feats, labels, model.n_groups)
            from hashlearn.core import decision_matrix

            scores = decision_matrix(model, feats)
            assignment = scores_to_assignment(scores, model.codebook, data)
            assert distortion(model, data) <= surrogate_loss(model, data, assignment) + 1e-9


class TestTypeInvariants:
    def test_dataset_label_range(self):
        with pytest.raises(ConfigurationError):
            Dataset(np.zeros((2, 2)), np.array([1, 4]), 3)

    def test_dataset_index_sets_partition(self):
        data = Dataset(np.zeros((4, 1)), np.array([1, 0, 2, 0]), 2)
        assert data.labeled_indices.tolist() == [0, 2]
        assert data.unlabeled_indices.tolist() == [1, 3]

    def test_assignment_must_be_one_hot(self):
        with pytest.raises(ConfigurationError):
            Assignment(np.array([[1, 1], [0, 0]]))

    def test_codebook_mixed_lengths(self):
        with pytest.raises(DimensionMismatchError):
            Codebook(codewords=(code(1, 1), code(1, 1, 1)))

    def test_train_config_validation(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(bits=0)
        with pytest.raises(ConfigurationError):
            TrainConfig(bits=4, regularization=0.0)
        with pytest.raises(ConfigurationError):
            TrainConfig(bits=4, norm_exponent=1.0)
        with pytest.raises(ConfigurationError):
            TrainConfig(bits=4, jitter=-1e-9)

    def test_model_rejects_oversized_theta(self):
        rng = np.random.default_rng(0)
        model = random_model(rng)
        import dataclasses

        with pytest.raises(ConfigurationError):
            dataclasses.replace(model, mkl_weights=np.full((4, 2), 0.9))

    def test_core_arrays_immutable(self):
        rng = np.random.default_rng(1)
        model = random_model(rng)
        with pytest.raises(ValueError):
            model.offsets[0] = 1.0
        c = code(1, -1)
        with pytest.raises(ValueError):
            c.words[0] = 0


class TestModelSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(23)
        model = random_model(rng, n_bits=5, n_train=7, dim=3, n_groups=4)
        path = tmp_path / "model.bin"
        save_model(model, path)
        loaded = load_model(path)
        path2 = tmp_path / "model2.bin"
        save_model(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()
        np.testing.assert_array_equal(model.mkl_weights, loaded.mkl_weights)
        np.testing.assert_array_equal(model.dual_coefficients, loaded.dual_coefficients)
        np.testing.assert_array_equal(model.offsets, loaded.offsets)
        np.testing.assert_array_equal(
            model.codebook.sign_matrix(), loaded.codebook.sign_matrix()
        )
        np.testing.assert_array_equal(model.training_features, loaded.training_features)
        assert model.kernels == loaded.kernels
        assert model.label_names == loaded.label_names
        assert model.regularization == loaded.regularization
        assert model.norm_exponent == loaded.norm_exponent
        assert model.jitter == loaded.jitter

    def test_magic_and_version_checked(self, tmp_path):
        path = tmp_path / "bogus.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(ConfigurationError):
            load_model(path)

    def test_truncated_file(self, tmp_path):
        rng = np.random.default_rng(2)
        model = random_model(rng)
        path = tmp_path / "model.bin"
        save_model(model, path)
        (tmp_path / "cut.bin").write_bytes(path.read_bytes()[:-9])
        with pytest.raises(ConfigurationError):
            load_model(tmp_path / "cut.bin")
