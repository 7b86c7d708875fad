"""Tests for skeletonizer.models: Ising instances as tensor networks."""

import numpy as np
import pytest


class TestLattice:
    def test_leg_names(self):
        from skeletonizer.models import leg_names

        assert leg_names(2) == ("x-", "x+", "y-", "y+")
        assert leg_names(3)[-2:] == ("z-", "z+")

    def test_shift_is_periodic(self):
        from skeletonizer.models import shift

        assert shift((3, 0), 0, 1, 4) == (0, 0)
        assert shift((0, 0), 1, -1, (4, 2)) == (0, 1)

    def test_spec_sizes(self):
        from skeletonizer.models import IsingSpec

        spec = IsingSpec(dim=3, L=2, beta=0.1)
        assert spec.n == 4
        assert spec.n_sites == 64
        assert len(list(spec.edge_ids())) == 3 * 64
        assert spec.homogeneous

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"dim": 4, "L": 1, "beta": 0.1},
            {"dim": 2, "L": -1, "beta": 0.1},
            {"dim": 2, "L": 1, "beta": -0.1},
            {"dim": 2, "L": 1, "beta": float("inf")},
        ],
    )
    def test_spec_validation(self, kwargs):
        from skeletonizer.models import IsingSpec, ModelArgumentError

        with pytest.raises(ModelArgumentError):
            IsingSpec(**kwargs)

    def test_per_edge_couplings_must_cover_edges(self):
        from skeletonizer.models import IsingSpec, ModelArgumentError, PerEdge

        with pytest.raises(ModelArgumentError, match="missing"):
            IsingSpec(2, 1, 0.1, couplings=PerEdge({((0, 0), 0): 1.0}))


class TestImpurityKind:
    def test_site_count_checked(self):
        from skeletonizer.models import ImpurityKind, ModelArgumentError

        with pytest.raises(ModelArgumentError):
            ImpurityKind("single_spin", ((0, 0), (1, 0)))
        with pytest.raises(ModelArgumentError):
            ImpurityKind("magnetic", ())

    def test_central_block_and_bond(self):
        from skeletonizer.models import central_block, central_bond

        assert central_block(2, 4) == [(1, 1), (1, 2), (2, 1), (2, 2)]
        assert central_bond(2, 4) == ((1, 1), (2, 1))
        assert central_bond(3, 8) == ((3, 3, 3), (4, 3, 3))

    def test_validate_rejects_far_sites(self):
        from skeletonizer.models import ImpurityKind, IsingSpec, ModelArgumentError

        spec = IsingSpec(2, 2, 0.3)
        with pytest.raises(ModelArgumentError, match="central block"):
            ImpurityKind.single_spin((0, 0)).validate(spec)
        with pytest.raises(ModelArgumentError, match="nearest"):
            ImpurityKind.bond_product((1, 1), (2, 2)).validate(spec)

    def test_powers(self):
        from skeletonizer.models import ImpurityKind

        assert ImpurityKind.bond_product((1, 1), (2, 1)).powers() == {(1, 1): 1, (2, 1): 1}
        assert ImpurityKind("bond_product", ((1, 1), (1, 1))).powers() == {(1, 1): 2}


class TestBondSplit:
    @pytest.mark.parametrize("J", [1.0, -1.0, 0.7, -2.3])
    def test_factors_reproduce_bond_matrix(self, J):
        from skeletonizer.models import bond_matrix, bond_root

        S = bond_matrix(0.4, J)
        a, b = bond_root(S)
        assert a.legs == ("spin", "bond")
        np.testing.assert_allclose(a.array @ b.array.T, S.array, rtol=1e-12)

    def test_ferromagnetic_split_is_symmetric(self):
        from skeletonizer.models import bond_matrix, bond_root

        a, b = bond_root(bond_matrix(0.4, 1.0))
        assert a is b

    def test_beta_zero_split_has_rank_one(self):
        from skeletonizer.models import bond_matrix, bond_root

        a, _ = bond_root(bond_matrix(0.0, 1.0))
        assert np.linalg.matrix_rank(a.array, tol=1e-12) == 1


class TestNetworkMatchesBruteForce:
    """The tensor network sums exactly the Boltzmann weights."""

    def _disordered(self, dim, L, beta, field, seed):
        import dataclasses

        from skeletonizer.models import IsingSpec, sample_ea_couplings

        base = IsingSpec(dim, L, beta, field, seed=seed)
        return dataclasses.replace(base, couplings=sample_ea_couplings(base, "gaussian"))

    @pytest.mark.parametrize("dim,L", [(2, 1), (2, 2), (3, 1)])
    def test_homogeneous(self, dim, L, rel_gap):
        from skeletonizer.models import IsingSpec, build_network
        from skeletonizer.network import contract_exact
        from skeletonizer.reference import brute_force

        spec = IsingSpec(dim, L, 0.37, field=0.2)
        assert rel_gap(contract_exact(build_network(spec)), brute_force(spec)) < 1e-10

    def test_disordered_with_field(self, rel_gap):
        from skeletonizer.models import build_network
        from skeletonizer.network import contract_exact
        from skeletonizer.reference import brute_force

        spec = self._disordered(2, 2, 0.8, 0.3, seed=5)
        assert rel_gap(contract_exact(build_network(spec)), brute_force(spec)) < 1e-10

    def test_impurity_networks(self):
        from skeletonizer.models import ImpurityKind, IsingSpec, build_network, central_bond
        from skeletonizer.network import contract_exact
        from skeletonizer.reference import brute_force

        spec = IsingSpec(2, 2, 0.5, field=0.1)
        i, j = central_bond(2, spec.n)
        for kind in (ImpurityKind.single_spin(i), ImpurityKind.bond_product(i, j)):
            tns = contract_exact(build_network(spec, kind)) / contract_exact(build_network(spec))
            exact = brute_force(spec, kind) / brute_force(spec)
            assert tns.to_float() == pytest.approx(exact.to_float(), rel=1e-10)


class TestDisorder:
    def test_sampling_is_deterministic(self):
        from skeletonizer.models import IsingSpec, sample_ea_couplings

        spec = IsingSpec(2, 2, 1.0)
        a = sample_ea_couplings(spec, "pm1", seed=3)
        b = sample_ea_couplings(spec, "pm1", seed=3)
        c = sample_ea_couplings(spec, "pm1", seed=4)
        assert a.values == b.values
        assert a.values != c.values
        assert set(a.values.values()) <= {-1.0, 1.0}
        assert a.distribution == "pm1"

    def test_unknown_distribution(self):
        from skeletonizer.models import IsingSpec, ModelArgumentError, sample_ea_couplings

        with pytest.raises(ModelArgumentError):
            sample_ea_couplings(IsingSpec(2, 1, 1.0), "cauchy")

    def test_gauge_transform_keeps_partition_function(self, rel_gap):
        import dataclasses

        from skeletonizer.models import IsingSpec, gauge_transform, random_gauge, sample_ea_couplings
        from skeletonizer.reference import brute_force

        base = IsingSpec(2, 2, 0.9, field=0.2)
        spec = dataclasses.replace(base, couplings=sample_ea_couplings(base, "pm1", seed=2))
        gauged = gauge_transform(spec, random_gauge(spec, 11))
        assert not gauged.homogeneous
        assert rel_gap(brute_force(gauged), brute_force(spec)) < 1e-12

    def test_realization_file(self, tmp_path):
        import dataclasses

        from skeletonizer.models import IsingSpec, load_disorder, sample_ea_couplings, save_disorder

        base = IsingSpec(2, 2, 0.0, seed=9)
        spec = dataclasses.replace(base, couplings=sample_ea_couplings(base, "gaussian"))
        path = save_disorder(spec, tmp_path / "r" / "seed_9.json")
        loaded = load_disorder(path, beta=0.5, field=0.1)
        assert loaded.seed == 9
        assert loaded.beta == 0.5
        assert loaded.couplings.distribution == "gaussian"
        assert dict(loaded.couplings.values) == dict(spec.couplings.values)

    def test_uniform_spec_is_not_a_realization(self):
        from skeletonizer.models import IsingSpec, ModelArgumentError, disorder_to_json

        with pytest.raises(ModelArgumentError):
            disorder_to_json(IsingSpec(2, 1, 0.3))
