import numpy as np
import pytest

from ristrack.errors import ConfigError
from ristrack.tensor_ops import (
    SlotTensor,
    dft_matrix,
    khatri_rao,
    pseudo_inverse,
    unfold_mode1,
    unfold_mode2,
    unfold_mode3,
)


def random_complex(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def synth_tensor(g, z, phi):
    """Frontal slices g @ diag(phi[l]) @ z, the reference construction."""
    data = np.stack([g @ np.diag(phi[l]) @ z for l in range(phi.shape[0])], axis=2)
    return SlotTensor(data)


class TestKhatriRao:
    def test_identity_factor(self):
        a = np.eye(2)
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        expected = np.array([[1, 0], [3, 0], [0, 2], [0, 4]], dtype=float)
        assert np.array_equal(khatri_rao(a, b), expected)

    def test_all_ones(self):
        a = np.ones((2, 1))
        b = np.ones((2, 1))
        assert np.array_equal(khatri_rao(a, b), np.ones((4, 1)))

    def test_matches_columnwise_kron(self):
        rng = np.random.default_rng(0)
        a = random_complex(rng, (3, 2))
        b = random_complex(rng, (4, 2))
        out = khatri_rao(a, b)
        for k in range(2):
            assert np.array_equal(out[:, k], np.kron(a[:, k], b[:, k]))

    @pytest.mark.parametrize("seed", range(5))
    def test_column_property_random_shapes(self, seed):
        rng = np.random.default_rng(seed)
        j, i, k = rng.integers(1, 7, size=3)
        a = random_complex(rng, (j, k))
        b = random_complex(rng, (i, k))
        out = khatri_rao(a, b)
        assert out.shape == (j * i, k)
        for col in range(k):
            assert np.array_equal(out[:, col], np.kron(a[:, col], b[:, col]))

    def test_column_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            khatri_rao(np.ones((2, 2)), np.ones((2, 3)))


class TestUnfoldings:
    def test_mode1_single_slice(self):
        rng = np.random.default_rng(1)
        a = random_complex(rng, (3, 4))
        t = SlotTensor(a[:, :, None])
        assert np.array_equal(unfold_mode1(t), a)

    def test_mode1_concatenates_slices(self):
        rng = np.random.default_rng(2)
        a = random_complex(rng, (2, 2))
        b = random_complex(rng, (2, 2))
        t = SlotTensor(np.stack([a, b], axis=2))
        assert np.array_equal(unfold_mode1(t), np.hstack([a, b]))

    def test_mode2_single_slice_transpose(self):
        rng = np.random.default_rng(3)
        a = random_complex(rng, (3, 4))
        t = SlotTensor(a[:, :, None])
        assert np.array_equal(unfold_mode2(t), a.T)

    def test_mode3_single_slice_vec(self):
        rng = np.random.default_rng(4)
        a = random_complex(rng, (3, 4))
        t = SlotTensor(a[:, :, None])
        expected = a.flatten(order="F")[None, :]
        assert np.array_equal(unfold_mode3(t), expected)

    def test_mode3_all_ones(self):
        t = SlotTensor(np.ones((2, 2, 2), dtype=complex))
        assert np.array_equal(unfold_mode3(t), np.ones((2, 4)))

    @pytest.mark.parametrize("seed", range(3))
    def test_factorization_identities_noiseless(self, seed):
        # the three unfolding layouts against the slice-by-slice oracle
        rng = np.random.default_rng(seed)
        n_r, k, s, l = 4, 3, 5, 6
        g = random_complex(rng, (n_r, k))
        z = random_complex(rng, (k, s))
        phi = random_complex(rng, (l, k))
        t = synth_tensor(g, z, phi)
        y1 = g @ khatri_rao(phi, z.T).T
        y2 = z.T @ khatri_rao(phi, g).T
        y3 = phi @ khatri_rao(z.T, g).T
        for actual, expected in ((unfold_mode1(t), y1), (unfold_mode2(t), y2), (unfold_mode3(t), y3)):
            rel = np.linalg.norm(actual - expected) / np.linalg.norm(expected)
            assert rel <= 1e-12

    def test_mode2_refold_consistency(self):
        rng = np.random.default_rng(9)
        data = random_complex(rng, (3, 4, 5))
        t = SlotTensor(data)
        m1, m2 = unfold_mode1(t), unfold_mode2(t)
        n_r, s, l = data.shape
        for li in range(l):
            from_m1 = m1[:, li * s : (li + 1) * s]
            from_m2 = m2[:, li * n_r : (li + 1) * n_r].T
            assert np.array_equal(from_m1, from_m2)
            assert np.array_equal(from_m1, data[:, :, li])

    def test_malformed_tensor_rejected(self):
        with pytest.raises(ConfigError):
            SlotTensor(np.ones((2, 2)))


class TestPseudoInverse:
    def test_identity(self):
        assert np.allclose(pseudo_inverse(np.eye(3)), np.eye(3))

    def test_rank_deficient_diagonal(self):
        out = pseudo_inverse(np.diag([2.0, 0.0]))
        assert np.allclose(out, np.diag([0.5, 0.0]))

    def test_full_column_rank_left_inverse(self):
        rng = np.random.default_rng(5)
        a = random_complex(rng, (8, 3))
        # normal-equations oracle
        oracle = np.linalg.solve(a.conj().T @ a, a.conj().T)
        pinv = pseudo_inverse(a)
        assert np.linalg.norm(pinv @ a - np.eye(3)) < 1e-10
        assert np.linalg.norm(pinv - oracle) / np.linalg.norm(oracle) < 1e-10

    @pytest.mark.parametrize("shape", [(6, 6), (9, 4), (4, 9)])
    def test_penrose_identities(self, shape):
        rng = np.random.default_rng(sum(shape))
        a = random_complex(rng, shape)
        p = pseudo_inverse(a)
        scale = np.linalg.norm(a)
        assert np.linalg.norm(a @ p @ a - a) / scale <= 1e-10
        assert np.linalg.norm(p @ a @ p - p) / np.linalg.norm(p) <= 1e-10
        assert np.linalg.norm((a @ p).conj().T - a @ p) / np.linalg.norm(a @ p) <= 1e-10
        assert np.linalg.norm((p @ a).conj().T - p @ a) / np.linalg.norm(p @ a) <= 1e-10

    def test_nonfinite_rejected(self):
        with pytest.raises(ConfigError):
            pseudo_inverse(np.array([[np.inf, 0.0], [0.0, 1.0]]))


class TestDftMatrix:
    def test_n1(self):
        assert np.array_equal(dft_matrix(1), np.ones((1, 1)))

    def test_n2_normalized(self):
        expected = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        assert np.allclose(dft_matrix(2, normalized=True), expected, atol=1e-15)

    def test_n8_unitary_and_symmetric(self):
        u = dft_matrix(8, normalized=True)
        assert np.linalg.norm(u.conj().T @ u - np.eye(8)) <= 1e-12
        assert np.linalg.norm(u - u.T) <= 1e-12

    def test_zero_rejected(self):
        with pytest.raises(ConfigError):
            dft_matrix(0)
