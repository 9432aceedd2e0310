import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from timemark import wm_core
from timemark.wm_core import (
    ConfigError, WatermarkConfig, allocate, allocation, apply_bias, derive_seed, greenlist,
    is_green, prefix_digests, prefix_hash,
)

# openssl dgst -sha256 of the empty input and of 00000001 00000002
EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
PREFIX_1_2 = "0f585dd518ed0644f3edfd3f7d5012cc9f445c4c9d24e168e694c4d6f36faea6"

KEY = bytes(range(32))


def test_config_defaults_and_invariants(cfg):
    assert cfg.stage1_length == 315
    assert cfg.stage2_reps == 10
    with pytest.raises(ConfigError):
        WatermarkConfig(vocab_size=1023)
    with pytest.raises(ConfigError):
        WatermarkConfig(length=300)
    with pytest.raises(ConfigError):
        WatermarkConfig(length=946)
    with pytest.raises(ConfigError):
        WatermarkConfig(phi=0.5)
    assert WatermarkConfig.from_json(cfg.to_json()) == cfg


def test_prefix_hash_vectors():
    assert prefix_hash([]).hex() == EMPTY_SHA256
    assert prefix_hash([1, 2]).hex() == PREFIX_1_2
    assert prefix_hash([1, 2]) != prefix_hash([2, 1])
    assert prefix_hash([5, 6, 7]) == prefix_hash([5, 6, 7])
    with pytest.raises(ValueError):
        prefix_hash([1024], vocab_size=1024)
    with pytest.raises(ValueError):
        prefix_hash([-1])


def test_prefix_digests_match_direct_hash():
    toks = [3, 1, 4, 1, 5, 9, 2, 6]
    full = prefix_digests(toks)
    assert full == [prefix_hash(toks[:i]) for i in range(len(toks) + 1)]
    ctx = prefix_digests(toks, context_width=2)
    assert ctx == [prefix_hash(toks[max(0, i - 2):i]) for i in range(len(toks) + 1)]
    h = wm_core.PrefixHasher(context_width=2)
    for i, t in enumerate(toks):
        assert h.digest() == ctx[i]
        h.push(t)


def test_derive_seed_determinism_and_separation():
    pre = prefix_hash([1, 2, 3])
    r = [1, 0, 1, 1, 0, 0, 1, 0, 1, 0]
    assert derive_seed(KEY, r, pre) == derive_seed(KEY, r, pre)
    assert derive_seed(KEY, r, pre) != derive_seed(KEY, None, pre)
    assert len(derive_seed(KEY, None, pre)) == 32
    for j in range(10):
        flipped = list(r)
        flipped[j] ^= 1
        assert derive_seed(KEY, flipped, pre) != derive_seed(KEY, r, pre)
    assert derive_seed(KEY, None, pre) != derive_seed(bytes(32), None, pre)


def test_seed_is_hmac_sha256():
    import hmac
    pre = prefix_hash([])
    expected = hmac.new(KEY, wm_core.STAGE2_TAG + pre, hashlib.sha256).digest()
    assert derive_seed(KEY, None, pre) == expected


@pytest.mark.parametrize("vocab", [2, 4, 64, 1000, 1024])
def test_greenlist_half_split(vocab):
    for k in range(20):
        mask = greenlist(bytes([k]) * 32, vocab)
        assert mask.sum() == vocab // 2
        assert np.array_equal(mask, greenlist(bytes([k]) * 32, vocab))


def test_greenlist_odd_vocab_rejected():
    with pytest.raises(ConfigError):
        greenlist(KEY, 7)
    with pytest.raises(ConfigError):
        is_green(KEY, 7, 0)


def test_permutation_is_a_permutation():
    perm = wm_core.permutation(KEY, 1024)
    assert sorted(perm) == list(range(1024))


def test_swap_indices_in_range():
    js = wm_core.swap_indices(KEY, 64)
    assert len(js) == 63
    assert all(0 <= j <= i for i, j in zip(range(63, 0, -1), js))


@settings(max_examples=60, deadline=None)
@given(st.binary(min_size=32, max_size=32), st.sampled_from([2, 6, 64, 1024]), st.data())
def test_single_token_path_matches_full_mask(seed, vocab, data):
    tok = data.draw(st.integers(0, vocab - 1))
    assert is_green(seed, vocab, tok) == bool(greenlist(seed, vocab)[tok])


def test_encode_decode_seed_paths_agree():
    digests = prefix_digests([7, 8, 9, 10])
    r = [0, 1] * 5
    for d in digests:
        for rr in (r, None):
            seed = derive_seed(KEY, rr, d)
            mask = greenlist(seed, 1024)
            assert all(is_green(seed, 1024, t) == mask[t] for t in (0, 1, 511, 512, 1023))


def test_greenlist_membership_uniform():
    # 1e4 seeds, each token's green frequency within 5 binomial sigmas of 1/2
    vocab, trials = 1024, 10_000
    counts = np.zeros(vocab)
    for k in range(trials):
        counts += greenlist(hashlib.sha256(k.to_bytes(4, "big")).digest(), vocab)
    freq = counts / trials
    sigma = np.sqrt(0.25 / trials)
    assert np.all(np.abs(freq - 0.5) < 5 * sigma)


def test_allocation_rule(cfg):
    assert allocate(1, cfg) == 1
    assert allocate(63, cfg) == 63
    assert allocate(64, cfg) == 1
    assert allocate(315, cfg) == 63
    assert allocate(316, cfg) == 1
    assert allocate(945, cfg) == 63
    with pytest.raises(IndexError):
        allocate(0, cfg)
    with pytest.raises(IndexError):
        allocate(946, cfg)


def test_allocation_balance(cfg):
    a = allocation(cfg)
    s1, s2 = a[: cfg.stage1_length], a[cfg.stage1_length:]
    assert np.all(np.bincount(s1, minlength=63) == 5)
    assert np.all(np.bincount(s2, minlength=63) == 10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 20), st.integers(0, 6))
def test_allocation_balance_property(alpha, n, extra):
    cfg = WatermarkConfig(vocab_size=4, alpha=alpha, n=n, length=alpha * n + extra * n)
    a = allocation(cfg)
    assert np.all(np.bincount(a[: alpha * n], minlength=n) == alpha)
    if extra:
        assert np.all(np.bincount(a[alpha * n:], minlength=n) == extra)


def test_apply_bias_values():
    uniform = np.full(1024, 1 / 1024)
    mask = greenlist(KEY, 1024)
    assert np.allclose(apply_bias(uniform, mask, 1, 0.0), uniform)
    out = apply_bias(uniform, mask, 1, 2.5)
    assert out[mask].sum() == pytest.approx(0.9241, abs=1e-4)
    red = apply_bias(uniform, mask, 0, 2.5)
    assert red[~mask].sum() == pytest.approx(0.9241, abs=1e-4)
    # a distribution with green mass 0.35
    p = np.where(mask, 0.35 / 512, 0.65 / 512)
    assert apply_bias(p, mask, 1, 2.5)[mask].sum() == pytest.approx(0.8677, abs=1e-3)


def test_apply_bias_rejects_bad_input():
    mask = np.array([True, False])
    with pytest.raises(ValueError):
        apply_bias(np.array([0.7, 0.7]), mask, 1, 1.0)
    with pytest.raises(ValueError):
        apply_bias(np.array([1.5, -0.5]), mask, 1, 1.0)
    with pytest.raises(ValueError):
        apply_bias(np.array([0.5, 0.5]), mask, 1, -1.0)
    with pytest.raises(ValueError):
        apply_bias(np.array([0.5, 0.5, 0.0]), mask, 1, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=8, max_size=8), st.integers(0, 255),
       st.integers(0, 1), st.floats(0.0, 10.0))
def test_apply_bias_normalization_and_ratios(raw, seed, bit, delta):
    p = np.array(raw) / np.sum(raw)
    mask = greenlist(bytes([seed]) * 32, 8)
    out = apply_bias(p, mask, bit, delta)
    assert abs(out.sum() - 1.0) < 1e-12
    target = mask if bit else ~mask
    for sub in (target, ~target):
        idx = np.flatnonzero(sub)
        ratio_in = p[idx] / p[idx[0]]
        ratio_out = out[idx] / out[idx[0]]
        assert np.allclose(ratio_in, ratio_out, rtol=1e-12)
