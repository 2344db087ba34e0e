"""Tests for synthetic data generation and the reference oracles."""

import numpy as np
import pytest

from trlb.errors import DomainError
from trlb.model import CpModel, TrModel
from trlb.synth import (
    SynthSpec,
    generate,
    oracle_bias_element,
    oracle_cp_element,
    oracle_tr_element,
)


class TestGenerate:
    def test_noiseless_full_density_matches_oracle_exactly(self):
        spec = SynthSpec(dims=(3, 3, 2), true_rank=2, density=1.0,
                         noise_sigma=0.0, seed=5)
        tensor, truth = generate(spec)
        assert tensor.n_entries == 18
        for p in range(tensor.n_entries):
            e = tensor.entry(p)
            expected = oracle_tr_element(truth.cores[0], truth.cores[1],
                                         truth.cores[2], e.i, e.j, e.k)
            assert e.y == expected  # bit-exact: generation used the oracle

    def test_same_seed_reproducible(self):
        spec = SynthSpec(dims=(6, 5, 4), true_rank=2, density=0.3,
                         noise_sigma=0.5, seed=9)
        a, _ = generate(spec)
        b, _ = generate(spec)
        np.testing.assert_array_equal(a.values, b.values)
        for m in range(3):
            np.testing.assert_array_equal(a.coords[m], b.coords[m])

    def test_entry_count_from_density(self):
        spec = SynthSpec(dims=(20, 20, 10), true_rank=2, density=0.05, seed=1)
        tensor, _ = generate(spec)
        assert tensor.n_entries == 200

    def test_weights_non_negative_under_noise(self):
        spec = SynthSpec(dims=(8, 8, 4), true_rank=2, density=0.5,
                         noise_sigma=50.0, seed=2)
        tensor, _ = generate(spec)
        assert np.all(tensor.values >= 0.0)

    def test_mean_tracks_weight_scale(self):
        spec = SynthSpec(dims=(10, 10, 5), true_rank=3, density=0.5,
                         noise_sigma=0.0, weight_scale=6.0, seed=3)
        tensor, _ = generate(spec)
        assert float(np.mean(tensor.values)) == pytest.approx(3.0, rel=1e-9)

    def test_cp_family_ground_truth(self):
        spec = SynthSpec(dims=(4, 4, 3), true_rank=2, density=1.0, seed=4,
                         family="cp")
        tensor, truth = generate(spec)
        assert isinstance(truth, CpModel)
        e = tensor.entry(0)
        assert e.y == oracle_cp_element(truth.factors[0], truth.factors[1],
                                        truth.factors[2], e.i, e.j, e.k)

    def test_ground_truth_bias_is_zero(self):
        _, truth = generate(SynthSpec(dims=(3, 3, 3), true_rank=2, density=1.0, seed=6))
        assert isinstance(truth, TrModel)
        assert all(np.all(b == 0.0) for b in truth.biases)

    def test_generated_tensor_satisfies_invariants(self):
        tensor, _ = generate(SynthSpec(dims=(7, 6, 5), true_rank=3, density=0.2,
                                       noise_sigma=0.3, seed=7))
        for mode in range(3):
            covered = np.concatenate(
                [p for p in tensor.slice_index[mode] if p.size] or [np.array([])]
            )
            assert sorted(covered.tolist()) == list(range(tensor.n_entries))

    def test_invalid_spec_rejected(self):
        with pytest.raises(DomainError):
            SynthSpec(dims=(3, 3, 3), true_rank=0, density=0.5).validate()
        with pytest.raises(DomainError):
            SynthSpec(dims=(3, 3, 3), true_rank=1, density=0.0).validate()
        with pytest.raises(DomainError):
            SynthSpec(dims=(3, 3, 3), true_rank=1, density=1.5).validate()
        with pytest.raises(DomainError):
            SynthSpec(dims=(3, 3, 3), true_rank=1, density=0.5, family="tucker").validate()
        with pytest.raises(DomainError):
            SynthSpec(dims=(3, 3, 3), true_rank=1, density=0.5, noise_sigma=-1.0).validate()


class TestOracles:
    def test_rank_one_is_plain_product(self):
        u = np.full((1, 1, 1), 2.0)
        v = np.full((1, 1, 1), 5.0)
        w = np.full((1, 1, 1), 0.25)
        assert oracle_tr_element(u, v, w, 0, 0, 0) == pytest.approx(2.5, abs=1e-15)

    def test_identity_slices_give_rank(self):
        eye = np.eye(2)[:, None, :]
        assert oracle_tr_element(eye, eye, eye, 0, 0, 0) == pytest.approx(2.0, abs=1e-15)

    def test_shape_mismatch_rejected(self):
        u = np.ones((2, 1, 2))
        bad = np.ones((2, 1, 3))
        with pytest.raises(DomainError):
            oracle_tr_element(u, bad, u, 0, 0, 0)

    def test_bias_oracle_on_hand_example(self):
        # diag(1, 0) @ diag(1, 1) @ diag(2, 3) has trace 2
        assert oracle_bias_element([1.0, 0.0], [1.0, 1.0], [2.0, 3.0]) == 2.0

    def test_cp_element_rank_loop(self):
        f = np.array([[1.0, 2.0]])
        g = np.array([[3.0, 4.0]])
        h = np.array([[5.0, 6.0]])
        assert oracle_cp_element(f, g, h, 0, 0, 0) == pytest.approx(63.0, abs=1e-12)
