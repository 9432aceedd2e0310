import numpy as np
import pytest

from timemark import gf_bch
from timemark.decoder import (
    Decision, DocumentLengthError, Step1Status, Verdict, decode_step1, identify_time,
    verify_step2, verify_window,
)
from timemark.encoder import GenerationRequest, WatermarkedDocument, encode_document, generate_plain
from timemark.keychain import Role
from timemark.token_source import SyntheticModel
from timemark.wm_core import allocation, derive_seed, greenlist, prefix_hash

KEY = bytes(range(32))
OTHER = bytes(range(1, 33))


def _encode(cfg, seed=0, key=KEY, gamma=0.0):
    req = GenerationRequest(0, cfg, SyntheticModel(0, cfg.vocab_size, gamma), seed)
    return encode_document(req, key, trace=True)


def _craft(cfg, key, r, stage2_bits_for_position):
    """Pick each token deterministically in or out of its greenlist.

    Stage I follows encode(r) exactly; Stage II follows the callback,
    which maps a 0-based position to the desired green membership.
    """
    p = gf_bch.encode(r)
    alloc = allocation(cfg)
    toks = []
    for idx in range(cfg.length):
        stage1 = idx < cfg.stage1_length
        seed = derive_seed(key, r if stage1 else None, prefix_hash(toks))
        mask = greenlist(seed, cfg.vocab_size)
        want = bool(p[alloc[idx]]) if stage1 else stage2_bits_for_position(idx)
        toks.append(int(np.flatnonzero(mask == want)[0]))
    return WatermarkedDocument(tuple(toks))


def test_roundtrip_recovers_r(small_cfg):
    for seed in range(100):
        doc, trace = _encode(small_cfg, seed)
        s1 = decode_step1(doc, KEY, small_cfg)
        assert s1.status is Step1Status.RECOVERED
        assert np.array_equal(s1.r_hat, trace.r)


def test_majority_tie_goes_to_zero(small_cfg):
    cfg = small_cfg
    r = gf_bch.int_to_bits(0b1111111111, 10)
    alloc = allocation(cfg)
    seen = {}

    def want(idx):
        j = alloc[idx]
        if j != 0:
            return True
        seen[j] = seen.get(j, 0) + 1
        return seen[j] <= 5  # 5 green, 5 red for bit 0

    doc = _craft(cfg, KEY, r, want)
    s1 = decode_step1(doc, KEY, cfg)
    assert s1.green_hits[0] == 5
    assert s1.p_hat[0] == 0
    assert np.all(s1.p_hat[1:] == 1)


def test_step2_uses_reencoded_payload(small_cfg):
    cfg = small_cfg
    r = gf_bch.int_to_bits(0b1011001110, 10)
    p = gf_bch.encode(r)
    flipped = {0, 5, 17}
    alloc = allocation(cfg)
    doc = _craft(cfg, KEY, r, lambda idx: bool(p[alloc[idx]]) ^ (alloc[idx] in flipped))
    s1 = decode_step1(doc, KEY, cfg)
    assert s1.status is Step1Status.RECOVERED and s1.errors_corrected == 3
    assert np.array_equal(s1.r_hat, r)
    rep = verify_window(doc, KEY, 0, cfg)
    assert rep.score == 1.0
    raw_score, _, _ = verify_step2(doc, KEY, s1.r_hat, s1.p_hat, cfg)
    assert raw_score == pytest.approx(1 - 3 * cfg.alpha / cfg.stage1_length)


def test_wrong_key_hits_near_half(small_cfg):
    rates = []
    for seed in range(20):
        doc, _ = _encode(small_cfg, seed)
        s1 = decode_step1(doc, OTHER, small_cfg)
        rates.append(s1.green_hits.sum() / (small_cfg.length - small_cfg.stage1_length))
    assert abs(np.mean(rates) - 0.5) < 0.02


def test_step2_scores(small_cfg):
    doc, trace = _encode(small_cfg, 3)
    score, matched, decision = verify_step2(doc, KEY, trace.r, None, small_cfg)
    assert decision is Decision.PASS and matched == round(score * 315)
    wrong_r = trace.r.copy()
    wrong_r[0] ^= 1
    for key, r in ((OTHER, trace.r), (KEY, wrong_r)):
        s, _, d = verify_step2(doc, key, r, None, small_cfg)
        assert d is Decision.FAIL and abs(s - 0.5) < 0.12


@pytest.mark.slow
def test_score_separation_1000_trials(small_cfg):
    correct, wrong = [], []
    for seed in range(1000):
        doc, trace = _encode(small_cfg, seed)
        correct.append(verify_step2(doc, KEY, trace.r, None, small_cfg)[0])
        wrong.append(verify_step2(doc, OTHER, trace.r, None, small_cfg)[0])
    assert min(correct) >= small_cfg.phi > max(wrong)
    assert np.mean(correct) == pytest.approx(0.9241, abs=0.005)
    assert np.mean(wrong) == pytest.approx(0.5, abs=0.01)


def test_identify_cases(small_cfg, vault):
    cfg = small_cfg
    t_star = 5
    key = vault.read_key(Role.AUTHORITY, t_star)
    doc, _ = _encode(cfg, 11, key=key)
    res = identify_time(doc, range(3, 8), vault, cfg)
    assert res.verdict is Verdict.IDENTIFIED and res.window == t_star
    assert [r.window for r in res.passing_windows] == [t_star]
    assert len(res.reports) == 5

    plain = generate_plain(SyntheticModel(0, cfg.vocab_size, 0.0), cfg.length, 11)
    assert identify_time(plain, range(3, 8), vault, cfg).verdict is Verdict.NO_WATERMARK
    assert identify_time(doc, [0, 1, 2, 8, 9], vault, cfg).verdict is Verdict.NO_WATERMARK


def test_ambiguity_is_surfaced(small_cfg):
    doc, _ = _encode(small_cfg, 2)
    res = identify_time(doc, [1, 2, 3], {1: KEY, 2: OTHER, 3: KEY}.__getitem__, small_cfg)
    assert res.verdict is Verdict.AMBIGUOUS and res.window is None
    assert [r.window for r in res.passing_windows] == [1, 3]
    js = res.to_json()
    assert js["verdict"] == "Ambiguous" and js["passing_windows"] == [1, 3]


def test_fallback_score_reported_but_fails(small_cfg):
    plain = generate_plain(SyntheticModel(0, small_cfg.vocab_size, 0.0), small_cfg.length, 1)
    rep = verify_window(plain, KEY, 0, small_cfg, fallback_score=True)
    assert rep.decision is Decision.FAIL
    if rep.step1_status is Step1Status.ECC_FAILURE:
        assert rep.score_basis == "nearest_codeword"
        assert 0.3 < rep.score < 0.7


def test_vault_denial_propagates(small_cfg, vault):
    doc, _ = _encode(small_cfg, 0)
    from timemark.keychain import WindowNotYetReached
    with pytest.raises(WindowNotYetReached):
        identify_time(doc, [vault.current_index + 1], vault, small_cfg)


def test_length_and_input_errors(small_cfg):
    doc, _ = _encode(small_cfg, 0)
    short = WatermarkedDocument(doc.tokens[:-1])
    with pytest.raises(DocumentLengthError):
        decode_step1(short, KEY, small_cfg)
    with pytest.raises(ValueError):
        identify_time(doc, [], {}.get, small_cfg)
    with pytest.raises(ValueError):
        identify_time(doc, [1, 1], {1: KEY}.__getitem__, small_cfg)
    bad = WatermarkedDocument(doc.tokens[:-1] + (small_cfg.vocab_size,))
    with pytest.raises(ValueError):
        decode_step1(bad, KEY, small_cfg)


def test_report_json(small_cfg):
    doc, trace = _encode(small_cfg, 0)
    rep = verify_window(doc, KEY, 7, small_cfg).to_json()
    assert rep["recovered_r"] == gf_bch.bits_to_hex(trace.r)
    assert rep["decision"] == "Pass" and rep["window"] == 7 and rep["phi"] == 0.65
