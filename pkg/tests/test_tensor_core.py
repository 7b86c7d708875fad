"""Tests for skeletonizer.tensor_core: labelled tensors and factorizations."""

import numpy as np
import pytest


class TestDenseTensor:
    def test_rejects_label_count_mismatch(self):
        from skeletonizer.tensor_core import DenseTensor, TensorArgumentError

        with pytest.raises(TensorArgumentError):
            DenseTensor(np.ones((2, 2)), ("a",))

    def test_rejects_duplicate_labels(self):
        from skeletonizer.tensor_core import DenseTensor, TensorArgumentError

        with pytest.raises(TensorArgumentError):
            DenseTensor(np.ones((2, 2)), ("a", "a"))

    def test_rejects_non_finite(self):
        from skeletonizer.tensor_core import DenseTensor, NonFiniteError

        with pytest.raises(NonFiniteError):
            DenseTensor(np.array([1.0, np.nan]), ("a",))
        assert issubclass(NonFiniteError, FloatingPointError)

    def test_array_is_read_only_copy(self):
        from skeletonizer.tensor_core import DenseTensor

        src = np.ones((2, 3))
        t = DenseTensor(src, ("a", "b"))
        src[0, 0] = 5.0
        assert t.array[0, 0] == 1.0
        with pytest.raises(ValueError):
            t.array[0, 0] = 2.0

    def test_from_flat_is_row_major(self):
        from skeletonizer.tensor_core import DenseTensor

        t = DenseTensor.from_flat((2, 3), range(6), ("a", "b"))
        assert t.array[1, 0] == 3.0
        assert list(t.data) == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]

    def test_transpose_and_relabel(self, rng):
        from skeletonizer.tensor_core import DenseTensor

        t = DenseTensor(rng.standard_normal((2, 3, 4)), ("a", "b", "c"))
        u = t.transpose(("c", "a", "b"))
        assert u.shape == (4, 2, 3)
        assert u.array[3, 1, 2] == t.array[1, 2, 3]
        assert t.relabel({"a": "x"}).legs == ("x", "b", "c")


class TestContraction:
    def test_matrix_product(self, rng):
        from skeletonizer.tensor_core import DenseTensor, contract

        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 5))
        out = contract(DenseTensor(a, ("i", "j")), DenseTensor(b, ("k", "l")), [("j", "k")])
        assert out.legs == ("i", "l")
        np.testing.assert_allclose(out.array, a @ b, rtol=1e-13)

    def test_empty_pairs_is_outer_product(self):
        from skeletonizer.tensor_core import DenseTensor, contract

        out = contract(DenseTensor([1.0, 2.0], ("a",)), DenseTensor([3.0, 4.0, 5.0], ("b",)), [])
        assert out.shape == (2, 3)
        assert out.array[1, 2] == 10.0

    def test_dimension_mismatch(self):
        from skeletonizer.tensor_core import ContractShapeError, DenseTensor, contract

        with pytest.raises(ContractShapeError):
            contract(DenseTensor(np.ones((2, 3)), ("i", "j")), DenseTensor(np.ones((2, 3)), ("k", "l")), [("j", "k")])

    def test_colliding_result_labels(self):
        from skeletonizer.tensor_core import DenseTensor, TensorArgumentError, contract

        with pytest.raises(TensorArgumentError):
            contract(DenseTensor(np.ones((2, 2)), ("i", "j")), DenseTensor(np.ones((2, 2)), ("j", "i")), [("j", "j")])

    def test_self_trace(self, rng):
        from skeletonizer.tensor_core import DenseTensor, self_trace

        a = rng.standard_normal((3, 4, 3))
        out = self_trace(DenseTensor(a, ("i", "x", "j")), [("i", "j")])
        assert out.legs == ("x",)
        np.testing.assert_allclose(out.array, np.einsum("iai->a", a), rtol=1e-13)


class TestRegroup:
    def test_groups_fuse_in_listed_order(self, rng):
        from skeletonizer.tensor_core import DenseTensor, regroup

        t = DenseTensor(rng.standard_normal((2, 3, 4)), ("a", "b", "c"))
        g = regroup(t, [["c", "a"], ["b"]])
        assert g.legs == (("c", "a"), "b")
        assert g.shape == (8, 3)
        assert g.array[3 * 2 + 1, 2] == t.array[1, 2, 3]

    def test_custom_labels(self, rng):
        from skeletonizer.tensor_core import DenseTensor, regroup

        t = DenseTensor(rng.standard_normal((2, 3)), ("a", "b"))
        assert regroup(t, [["a", "b"]], labels=["ab"]).legs == ("ab",)

    def test_ungroup_inverts_regroup(self, rng):
        from skeletonizer.tensor_core import DenseTensor, regroup, ungroup

        t = DenseTensor(rng.standard_normal((2, 3, 4)), ("a", "b", "c"))
        g = regroup(t, [["a", "b"], ["c"]], labels=["ab", "c"])
        back = ungroup(g, "ab", [("a", 2), ("b", 3)])
        assert back.legs == t.legs
        assert np.array_equal(back.array, t.array)

    def test_groups_must_partition(self, rng):
        from skeletonizer.tensor_core import DenseTensor, TensorArgumentError, regroup

        t = DenseTensor(rng.standard_normal((2, 3)), ("a", "b"))
        with pytest.raises(TensorArgumentError):
            regroup(t, [["a"]])


class TestSvdTruncate:
    def test_discarded_weight_matches_residual(self, rng):
        from skeletonizer.tensor_core import DenseTensor, svd_truncate

        t = DenseTensor(rng.standard_normal((6, 7)), ("l", "r"))
        res = svd_truncate(t, ["l"], 3, 0.0)
        approx = (res.left.array * res.singular_values) @ res.right.array.T
        assert res.singular_values.size == 3
        assert abs(np.linalg.norm(t.array - approx) - res.discarded_weight) < 1e-12

    def test_left_vectors_orthonormal_and_signed(self, rng):
        from skeletonizer.tensor_core import DenseTensor, svd_truncate

        t = DenseTensor(rng.standard_normal((3, 4, 5)), ("a", "b", "c"))
        res = svd_truncate(t, ["a", "b"], 5)
        u = res.left.array.reshape(12, -1)
        np.testing.assert_allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-12)
        pivots = np.argmax(np.abs(u), axis=0)
        assert (u[pivots, np.arange(u.shape[1])] > 0).all()
        assert res.left.legs == ("a", "b", "bond")
        assert res.right.legs == ("c", "bond")

    def test_rel_cutoff_drops_small_values(self):
        from skeletonizer.tensor_core import DenseTensor, svd_truncate

        rank_one = np.outer([1.0, 2.0, 3.0], [1.0, -1.0, 0.5])
        res = svd_truncate(DenseTensor(rank_one, ("l", "r")), ["l"], 3, 1e-12)
        assert res.singular_values.size == 1

    def test_zero_tensor(self):
        from skeletonizer.tensor_core import DenseTensor, svd_truncate

        res = svd_truncate(DenseTensor(np.zeros((3, 2)), ("l", "r")), ["l"], 2)
        assert res.singular_values.tolist() == [0.0]
        assert res.discarded_weight == 0.0

    def test_bond_label_collision(self, rng):
        from skeletonizer.tensor_core import DenseTensor, TensorArgumentError, svd_truncate

        t = DenseTensor(rng.standard_normal((2, 2)), ("bond", "r"))
        with pytest.raises(TensorArgumentError):
            svd_truncate(t, ["bond"], 2)


class TestProjections:
    @pytest.mark.parametrize("name", ["uut_project", "ur_project"])
    def test_full_rank_reproduces_tensor(self, rng, name):
        import skeletonizer.tensor_core as tc

        t = tc.DenseTensor(rng.standard_normal((2, 3, 4)), ("a", "b", "c"))
        u, core = getattr(tc, name)(t, ["a", "b"], 6, 0.0, bond="k")
        assert core.legs == ("k", "c")
        back = tc.contract(u, core, [("k", "k")])
        np.testing.assert_allclose(back.array, t.array, atol=1e-12)
