"""Tests for alphabets, policies, induced laws, and block extension."""

import json
import math

import numpy as np
import pytest

from privtest import (
    Alphabet,
    FeasibilityError,
    Pmf,
    PolicyKernel,
    Prior,
    SourceModel,
    ValidationError,
    blockwise_extend,
    constant_policy,
    feasible_outputs,
    identity_policy,
    induced_output_laws,
    policy_space,
    privacy_objective,
    product_laws,
    source_laws,
    validate_policy,
)
from privtest.model import UP_PAIRS, load_policy, model_from_dict, policy_from_dict, policy_to_dict


def make_model(thetas=(0.1, 0.25, 0.8, 0.9), z0=0.2):
    x_alpha = Alphabet((0.0, 1.0))
    z_alpha = Alphabet((0.0, 1.0))
    cond = {
        up: Pmf(labels=x_alpha.values, probs=(t, 1.0 - t))
        for up, t in zip(UP_PAIRS, thetas)
    }
    noise = Pmf(labels=z_alpha.values, probs=(z0, 1.0 - z0))
    return SourceModel(
        x_alphabet=x_alpha, z_alphabet=z_alpha, prior=Prior.uniform(), cond=cond, noise=noise
    )


class TestTypes:
    def test_alphabet_must_increase(self):
        with pytest.raises(ValidationError):
            Alphabet((1.0, 0.0))

    def test_prior_validation(self):
        with pytest.raises(ValidationError):
            Prior((0.3, 0.3, 0.3, 0.3))
        assert Prior.uniform().p_max == 0.25
        assert Prior((0.7, 0.1, 0.1, 0.1)).p_max == 0.7

    def test_demo_model_parameters(self, model):
        assert model.prior.p_max == 0.25
        assert model.cond[(0, 0)].prob(0.0) == 0.1
        assert model.cond[(0, 1)].prob(0.0) == 0.25
        assert model.cond[(1, 0)].prob(0.0) == 0.8
        assert model.cond[(1, 1)].prob(0.0) == 0.9
        assert model.noise.prob(0.0) == 0.2

    def test_cond_must_have_full_support(self):
        with pytest.raises(Exception):
            make_model(thetas=(0.0, 0.25, 0.8, 0.9))


class TestFeasibleOutputs:
    def test_single_slot_forced(self):
        alpha = Alphabet((0.0, 1.0))
        assert feasible_outputs(alpha, (1.0,), (0.0,), s=1.0) == ((1.0,),)

    def test_single_slot_both(self):
        alpha = Alphabet((0.0, 1.0))
        assert feasible_outputs(alpha, (0.0,), (1.0,), s=2.0) == ((0.0,), (1.0,))

    def test_two_slot_average(self):
        # enumerating the 4 candidate blocks against the average constraint
        # leaves only (1, 1)
        alpha = Alphabet((0.0, 1.0))
        assert feasible_outputs(alpha, (1.0, 1.0), (0.0, 0.0), s=1.0) == ((1.0, 1.0),)

    def test_may_be_empty(self):
        alpha = Alphabet((0.0, 1.0))
        assert feasible_outputs(alpha, (0.0,), (5.0,), s=0.5) == ()

    def test_length_mismatch(self):
        alpha = Alphabet((0.0, 1.0))
        with pytest.raises(ValidationError):
            feasible_outputs(alpha, (1.0, 0.0), (0.0,), s=1.0)


class TestInducedLaws:
    def test_identity_gives_product_extension(self, model):
        for k in (1, 2):
            laws = induced_output_laws(model, identity_policy(model, s=1.0, k=k))
            expected = source_laws(model, k=k)
            for up in UP_PAIRS:
                np.testing.assert_allclose(
                    laws.laws[up].probs, expected.laws[up].probs, atol=1e-12
                )

    def test_constant_policy_equalizes_laws(self, model):
        laws = induced_output_laws(model, constant_policy(model, s=2.0, y_value=1.0))
        for up in UP_PAIRS:
            assert laws.laws[up].prob((1.0,)) == pytest.approx(1.0, abs=1e-12)
        assert privacy_objective(laws) == 0.0

    def test_constant_zero_infeasible_at_s2(self, model):
        # y=0 cannot cover x=1 with z=0
        with pytest.raises(FeasibilityError):
            constant_policy(model, s=2.0, y_value=0.0)

    def test_identity_needs_noise_within_slack(self, model):
        # identity is feasible only when every noise value fits in [0, s]
        with pytest.raises(FeasibilityError):
            identity_policy(model, s=0.5)

    def test_hand_expansion_oracle(self, model):
        # s=1 family: rows (1,0)->1 and (0,1)->0 are forced; with
        # a = q(0|0,0) and b = q(0|1,1),
        #   law(y=0 | u,p) = p(0|u,p) (0.2 a + 0.8) + p(1|u,p) 0.8 b
        rng = np.random.default_rng(31)
        space = policy_space(model, s=1.0, k=1)
        for _ in range(5):
            a, b = rng.uniform(size=2)
            kernel = space.kernel_from_params(np.array([a, b]))
            laws = induced_output_laws(model, kernel)
            for up in UP_PAIRS:
                p0 = model.cond[up].prob(0.0)
                expected = p0 * (0.2 * a + 0.8) + (1.0 - p0) * 0.8 * b
                assert laws.laws[up].prob((0.0,)) == pytest.approx(expected, abs=1e-12)

    def test_mixing_kernels_mixes_laws(self, model):
        # laws are linear in the row stack
        rng = np.random.default_rng(37)
        space = policy_space(model, s=2.0, k=1)
        pa = rng.uniform(size=space.dim)
        pb = rng.uniform(size=space.dim)
        tau = 0.3
        la = induced_output_laws(model, space.kernel_from_params(pa))
        lb = induced_output_laws(model, space.kernel_from_params(pb))
        lmix = induced_output_laws(
            model, space.kernel_from_params(tau * pa + (1 - tau) * pb)
        )
        for up in UP_PAIRS:
            mixed = tau * np.array(la.laws[up].probs) + (1 - tau) * np.array(lb.laws[up].probs)
            np.testing.assert_allclose(lmix.laws[up].probs, mixed, atol=1e-12)

    def test_missing_rows_rejected(self, model):
        kernel = PolicyKernel(k=1, s=1.0, rows={((0.0,), (0.0,)): {(0.0,): 1.0}})
        with pytest.raises(Exception):
            induced_output_laws(model, kernel)


class TestValidatePolicy:
    def test_identity_with_zero_noise_valid(self):
        x_alpha = Alphabet((0.0, 1.0))
        z_alpha = Alphabet((0.0,))
        cond = {
            up: Pmf(labels=x_alpha.values, probs=(t, 1.0 - t))
            for up, t in zip(UP_PAIRS, (0.1, 0.25, 0.8, 0.9))
        }
        model = SourceModel(
            x_alphabet=x_alpha,
            z_alphabet=z_alpha,
            prior=Prior.uniform(),
            cond=cond,
            noise=Pmf(labels=(0.0,), probs=(1.0,)),
        )
        assert validate_policy(identity_policy(model, s=0.0)).ok

    def test_infeasible_mass_reported_with_triple(self, model):
        kernel = identity_policy(model, s=1.0)
        rows = dict(kernel.rows)
        # put half the mass of row (x=1, z=0) on the infeasible output y=0
        rows[((1.0,), (0.0,))] = {(0.0,): 0.5, (1.0,): 0.5}
        report = validate_policy(PolicyKernel(k=1, s=1.0, rows=rows))
        assert not report.ok
        assert len(report.violations) == 1
        assert "x=(1.0,)" in report.violations[0]
        assert "z=(0.0,)" in report.violations[0]
        assert "(0.0,)" in report.violations[0]

    def test_bad_normalization_reported(self, model):
        kernel = identity_policy(model, s=1.0)
        rows = dict(kernel.rows)
        rows[((0.0,), (0.0,))] = {(0.0,): 0.98}
        report = validate_policy(PolicyKernel(k=1, s=1.0, rows=rows))
        assert any("sum to 0.98" in v for v in report.violations)


class TestBlockwiseExtend:
    def test_l1_is_identity(self, model):
        kernel = identity_policy(model, s=1.0)
        assert blockwise_extend(kernel, 1) is kernel

    def test_sixteen_rows_and_product_laws(self, model):
        space = policy_space(model, s=1.0, k=1)
        kernel = space.kernel_from_params(np.array([0.35, 0.6]))
        extended = blockwise_extend(kernel, 2)
        assert extended.k == 2
        assert len(extended.rows) == 16
        laws = induced_output_laws(model, kernel)
        ext_laws = induced_output_laws(model, extended)
        expected = product_laws(laws, 2)
        assert ext_laws.block_labels == expected.block_labels
        for up in UP_PAIRS:
            np.testing.assert_allclose(
                ext_laws.laws[up].probs, expected.laws[up].probs, atol=1e-14
            )

    def test_chernoff_rate_preserved(self, model):
        # Chernoff information adds over independent blocks, so the
        # per-slot rate of the extension matches the base kernel
        space = policy_space(model, s=2.0, k=1)
        kernel = space.kernel_from_params(np.array([0.2, 0.7, 0.4]))
        laws = induced_output_laws(model, kernel)
        ext_laws = induced_output_laws(model, blockwise_extend(kernel, 2))
        assert privacy_objective(ext_laws) == pytest.approx(
            privacy_objective(laws), abs=1e-9
        )

    def test_extension_passes_validation(self, model):
        kernel = identity_policy(model, s=1.0)
        assert validate_policy(blockwise_extend(kernel, 3)).ok


class TestPolicySpace:
    def test_free_dimensions(self, model):
        assert policy_space(model, s=1.0, k=1).dim == 2
        assert policy_space(model, s=2.0, k=1).dim == 3

    def test_forced_rows(self, model):
        space = policy_space(model, s=1.0, k=1)
        forced = {
            (row.x_block, row.z_block): row.outputs
            for row in space.rows
            if len(row.outputs) == 1
        }
        assert forced[((1.0,), (0.0,))] == ((1.0,),)
        assert forced[((0.0,), (1.0,))] == ((0.0,),)

    def test_empty_feasible_set_rejected(self):
        x_alpha = Alphabet((0.0, 1.0))
        z_alpha = Alphabet((5.0,))
        cond = {
            up: Pmf(labels=x_alpha.values, probs=(t, 1.0 - t))
            for up, t in zip(UP_PAIRS, (0.1, 0.25, 0.8, 0.9))
        }
        model = SourceModel(
            x_alphabet=x_alpha,
            z_alphabet=z_alpha,
            prior=Prior.uniform(),
            cond=cond,
            noise=Pmf(labels=(5.0,), probs=(1.0,)),
        )
        with pytest.raises(FeasibilityError, match="z=\\(5.0,\\)"):
            policy_space(model, s=0.0, k=1)

    def test_params_roundtrip(self, model):
        space = policy_space(model, s=2.0, k=1)
        params = np.array([0.3, 0.55, 0.2])
        kernel = space.kernel_from_params(params)
        np.testing.assert_allclose(space.params_from_kernel(kernel), params, atol=1e-15)

    def test_batch_laws_match_induced(self, model):
        rng = np.random.default_rng(41)
        space = policy_space(model, s=2.0, k=1)
        batch = rng.uniform(size=(8, space.dim))
        laws_batch = space.batch_laws(batch)
        for g in range(8):
            laws = induced_output_laws(model, space.kernel_from_params(batch[g]))
            np.testing.assert_allclose(laws_batch[g], laws.arrays(), atol=1e-12)


class TestJsonInterfaces:
    def test_model_roundtrip(self, tmp_path, model):
        doc = {
            "x_alphabet": [0, 1],
            "z_alphabet": [0, 1],
            "prior": [0.25, 0.25, 0.25, 0.25],
            "cond": [[0.1, 0.9], [0.25, 0.75], [0.8, 0.2], [0.9, 0.1]],
            "noise": [0.2, 0.8],
        }
        parsed = model_from_dict(doc)
        for up in UP_PAIRS:
            assert parsed.cond[up].probs == model.cond[up].probs

    def test_model_bad_prior_rejected(self):
        doc = {
            "x_alphabet": [0, 1],
            "z_alphabet": [0, 1],
            "prior": [0.5, 0.25, 0.25, 0.25],
            "cond": [[0.1, 0.9], [0.25, 0.75], [0.8, 0.2], [0.9, 0.1]],
            "noise": [0.2, 0.8],
        }
        with pytest.raises(ValidationError):
            model_from_dict(doc)

    def test_policy_roundtrip(self, tmp_path, model):
        space = policy_space(model, s=1.0, k=1)
        kernel = space.kernel_from_params(np.array([0.25, 0.75]))
        doc = policy_to_dict(kernel)
        path = tmp_path / "policy.json"
        path.write_text(json.dumps(doc))
        loaded = load_policy(path)
        assert loaded.k == kernel.k and loaded.s == kernel.s
        for key, row in kernel.rows.items():
            for y, p in row.items():
                assert loaded.rows[key][y] == pytest.approx(p, abs=1e-15)
