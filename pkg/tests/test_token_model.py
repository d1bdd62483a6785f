import math

import numpy as np
import pytest

from patchwork.errors import (
    AuthorizationError,
    ContractViolation,
    LemmaPreconditionError,
    ParameterDomainError,
    RegistryError,
)
from patchwork.stats import binomial_interval
from patchwork.token_model import (
    DamageModel,
    Provenance,
    SchemeParams,
    amplify,
    required_verifications,
)

from .conftest import scheme


def test_key_gen_starts_at_version_zero(model):
    params = SchemeParams(security_param=8, completeness_error=0.05,
                          soundness_error=2**-8, copy_resistance_error=2**-8)
    key = model.key_gen(params, "B1")
    assert key.public_key_version == 0
    assert key.holder == "B1"
    assert model.registry.current_version(key.scheme_id) == 0


def test_key_gen_ids_are_unique(model):
    a = model.key_gen(scheme(), "B1")
    b = model.key_gen(scheme(), "B1")
    assert a.scheme_id != b.scheme_id


def test_epsilon_must_be_below_half():
    with pytest.raises(ParameterDomainError):
        SchemeParams(completeness_error=0.6)
    with pytest.raises(ParameterDomainError):
        SchemeParams(completeness_error=0.5)


def test_negligible_errors_default_to_two_to_minus_n():
    p = SchemeParams(security_param=10)
    assert p.soundness_error == p.copy_resistance_error == 2**-10


def test_mint_by_holder(model):
    key = model.key_gen(scheme(), "B1")
    shard = model.mint(key, "B1")
    assert shard.provenance is Provenance.VALID_MINT
    assert shard.minted_version == 0


def test_mint_by_other_bank_is_refused(model):
    key = model.key_gen(scheme(), "B1")
    with pytest.raises(AuthorizationError):
        model.mint(key, "B2")
    with pytest.raises(AuthorizationError):
        model.mint_for(key.scheme_id, "B2")


def test_five_mints_accept_at_rate_one_minus_eps(model, rng):
    key = model.key_gen(scheme(0.05), "B1")
    shards = [model.mint(key, "B1") for _ in range(5)]
    n = 100_000
    accepted = sum(model.verify(key.scheme_id, 0, shards[i % 5], rng) for i in range(n))
    lo, hi = binomial_interval(0.95, n)
    assert lo <= accepted / n <= hi
    assert model.mint_counts[(key.scheme_id, 0)] == 5


def test_zero_error_shard_always_accepts(model, rng):
    key = model.key_gen(scheme(0.0), "B1")
    shard = model.mint(key, "B1")
    assert all(model.verify(key.scheme_id, 0, shard, rng) for _ in range(1000))


def test_forged_shard_with_zero_soundness_always_rejected(model, rng):
    key = model.key_gen(scheme(0.0, soundness_error=0.0), "B1")
    forged = model.forge(key.scheme_id)
    assert not any(model.verify(key.scheme_id, 0, forged, rng) for _ in range(1000))


def test_valid_shard_acceptance_interval(model, rng):
    key = model.key_gen(scheme(0.05), "B1")
    shard = model.mint(key, "B1")
    n = 100_000
    rate = sum(model.verify(key.scheme_id, 0, shard, rng) for _ in range(n)) / n
    assert abs(rate - 0.95) <= 0.007


def test_missing_shard_rejected_and_future_version_error(model, rng):
    key = model.key_gen(scheme(), "B1")
    assert model.verify(key.scheme_id, 0, None, rng) is False
    with pytest.raises(RegistryError):
        model.verify(key.scheme_id, 3, model.mint(key, "B1"), rng)


def test_stale_and_foreign_shards_use_soundness_error(model):
    a = model.key_gen(scheme(0.0, soundness_error=0.125), "B1")
    b = model.key_gen(scheme(0.0, soundness_error=0.125), "B1")
    shard = model.mint(a, "B1")
    assert model.acceptance_probability(b.scheme_id, shard) == 0.125
    model.republish(a.scheme_id, "B1")
    assert model.acceptance_probability(a.scheme_id, shard) == 0.125


def test_damage_drift_lowers_acceptance(model, rng):
    key = model.key_gen(scheme(0.04, damage_model=DamageModel.SQRT_EPSILON_DRIFT), "B1")
    shard = model.mint(key, "B1")
    before = model.acceptance_probability(key.scheme_id, shard)
    model.verify(key.scheme_id, 0, shard, rng)
    after = model.acceptance_probability(key.scheme_id, shard)
    assert before == pytest.approx(0.96)
    assert after == pytest.approx(0.96 - math.sqrt(0.04))


def test_count_accepted_examples(model, rng):
    key = model.key_gen(scheme(0.0), "B1")
    assert model.count_accepted(key.scheme_id, 0, [], rng) == 0
    shards = [model.mint(key, "B1") for _ in range(3)]
    assert model.count_accepted(key.scheme_id, 0, shards, rng) == 3


def test_count_with_copy_attempts_bounded_by_valid(model, rng):
    eps = 0.1
    key = model.key_gen(scheme(eps), "B1")
    trials, p = 10_000, 3
    counts = []
    for _ in range(trials):
        shards = [model.mint(key, "B1") for _ in range(p)]
        shards = model.attempt_copy(shards, key.scheme_id, "X")
        shards = model.attempt_copy(shards, key.scheme_id, "X")
        counts.append(model.count_accepted(key.scheme_id, 0, shards, rng))
    mean = np.mean(counts)
    se = np.std(counts) / math.sqrt(trials)
    assert mean <= p * (1 - eps) + 3 * se


def test_copy_with_zero_delta_never_accepts(model, rng):
    key = model.key_gen(scheme(0.0, copy_resistance_error=0.0), "B1")
    out = model.attempt_copy([model.mint(key, "B1")], key.scheme_id, "X")
    assert len(out) == 2
    assert not any(model.verify(key.scheme_id, 0, out[1], rng) for _ in range(1000))


def test_copy_excess_rate_matches_delta(model, rng):
    key = model.key_gen(scheme(0.0, copy_resistance_error=0.01), "B1")
    trials = 10_000
    excess = 0
    for _ in range(trials):
        shards = model.attempt_copy([model.mint(key, "B1") for _ in range(2)], key.scheme_id, "X")
        excess += model.count_accepted(key.scheme_id, 0, shards, rng) > 2
    assert abs(excess / trials - 0.01) <= 0.003


def test_key_holder_cannot_call_attempt_copy(model):
    key = model.key_gen(scheme(), "B1")
    with pytest.raises(ContractViolation):
        model.attempt_copy([], key.scheme_id, "B1")


def test_amplify_zero_errors():
    out = amplify(SchemeParams(completeness_error=0.0, copy_resistance_error=0.0), 7)
    assert out.completeness_error == 2**-7
    assert 0 < out.copy_resistance_error < 1e-6


def test_amplify_rejects_precondition_boundary():
    with pytest.raises(LemmaPreconditionError):
        amplify(SchemeParams(completeness_error=0.4, copy_resistance_error=0.5), 3)


@pytest.mark.parametrize("q, score, expected", [(2, 3, 9), (2, 1, 1), (101, 2, 400), (3, 0.5, 1)])
def test_required_verifications(q, score, expected):
    assert required_verifications(q, score) == expected


def test_required_verifications_domain():
    with pytest.raises(ParameterDomainError):
        required_verifications(1, 1.0)
