import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tbosim import protocol as pr
from tbosim.errors import DimensionMismatch, MalformedBits
from tbosim.sphere import UnitVector, acceptance_probability, uniform_sample

CODECS = [pr.MessageCode("unary"), pr.MessageCode("elias-gamma")] + [pr.MessageCode("golomb", m) for m in (1, 2, 3, 5, 7, 8, 9)]


def reference_elias_gamma(i):
    # textbook definition: floor(log2 i) zeros, then i in binary
    n = 0
    while (1 << (n + 1)) <= i:
        n += 1
    return "0" * n + bin(i)[2:]


def test_sign_output_boundary():
    v = UnitVector([1.0, 0.0])
    assert pr.sign_output(v, UnitVector([0.0, 1.0])) == 1
    assert pr.sign_output(v, np.array([-0.3, math.sqrt(1 - 0.09)])) == -1
    assert pr.sign_output(v, v) == 1
    with pytest.raises(DimensionMismatch):
        pr.sign_output(v, UnitVector([1.0, 0.0, 0.0]))


def test_codec_examples():
    eg = pr.MessageCode("elias-gamma")
    assert eg.encode(1) == "1"
    assert eg.encode(3) == "011" and eg.decode("011") == 3
    un = pr.MessageCode("unary")
    assert un.encode(1) == "1" and un.encode(4) == "0001"


def test_elias_gamma_matches_reference():
    eg = pr.MessageCode("elias-gamma")
    for i in range(1, 5000):
        assert eg.encode(i) == reference_elias_gamma(i)
        assert len(eg.encode(i)) == 2 * int(math.floor(math.log2(i))) + 1


def test_golomb_codewords_m3():
    # quotient in unary (zeros then 1), remainder truncated binary {0, 10, 11}
    g = pr.MessageCode("golomb", 3)
    assert [g.encode(i) for i in range(1, 8)] == ["10", "110", "111", "010", "0110", "0111", "0010"]


@pytest.mark.parametrize("codec", CODECS, ids=lambda c: c.identifier)
def test_round_trip_and_lengths(codec):
    values = np.arange(1, 3000)
    words = [codec.encode(int(i)) for i in values]
    assert [codec.decode(w) for w in words] == values.tolist()
    np.testing.assert_array_equal(codec.lengths(values), [len(w) for w in words])


@pytest.mark.parametrize("codec", CODECS, ids=lambda c: c.identifier)
def test_prefix_free(codec):
    words = [codec.encode(i) for i in range(1, 600)]
    words.sort()
    # in sorted order a prefix is immediately followed by a word it prefixes
    for w1, w2 in zip(words, words[1:]):
        assert not w2.startswith(w1)


@given(st.lists(st.integers(1, 10**4), min_size=1, max_size=20), st.sampled_from(CODECS))
def test_concatenated_stream_decodes(values, codec):
    bits = "".join(codec.encode(v) for v in values)
    pos, out = 0, []
    while pos < len(bits):
        v, pos = codec.decode_prefix(bits, pos)
        out.append(v)
    assert out == values


@pytest.mark.parametrize("bits", ["", "000", "0012", "1 ", "0121"])
@pytest.mark.parametrize("codec", CODECS, ids=lambda c: c.identifier)
def test_malformed(bits, codec):
    with pytest.raises(MalformedBits):
        codec.decode(bits)


def test_decode_prefix_rejects_bad_characters():
    with pytest.raises(MalformedBits):
        pr.MessageCode("golomb", 4).decode_prefix("1a0")


def test_malformed_trailing_and_truncated():
    with pytest.raises(MalformedBits):
        pr.MessageCode("unary").decode("11")
    with pytest.raises(MalformedBits):
        pr.MessageCode("elias-gamma").decode("0001")
    with pytest.raises(MalformedBits):
        pr.MessageCode("golomb", 4).decode("01")


def test_codec_identifiers():
    assert pr.MessageCode.parse("golomb:5") == pr.MessageCode("golomb", 5)
    assert pr.MessageCode.parse("elias-gamma").identifier == "elias-gamma"
    assert pr.MessageCode.golomb_for(acceptance_probability(7)).identifier == "golomb:2"
    with pytest.raises(ValueError):
        pr.MessageCode("huffman")
    with pytest.raises(ValueError):
        pr.MessageCode("golomb", 0)


def test_shared_streams_reproducible():
    s1, s2 = pr.SharedRandomness(123, 7), pr.SharedRandomness(123, 7)
    np.testing.assert_array_equal(s1.lambda_stream().take(50), s2.lambda_stream().take(50))
    np.testing.assert_array_equal(s1.accept_stream().take(50), s2.accept_stream().take(50))
    assert not np.array_equal(pr.SharedRandomness(124, 7).lambda_stream().take(5), s1.lambda_stream().take(5))


def test_stream_chunking_invariant():
    shared = pr.SharedRandomness(7, 3)
    whole = shared.lambda_stream().take(1000)
    st_ = shared.lambda_stream()
    parts = [st_.next() for _ in range(10)] + list(st_.take(490)) + list(st_.take(500))
    np.testing.assert_array_equal(np.array(parts), whole)
    np.testing.assert_allclose(np.linalg.norm(whole, axis=1), 1.0)


def test_substreams_independent():
    shared = pr.SharedRandomness(42, 1)
    lam = shared.lambda_stream().take(50_000)[:, 0]
    u = shared.accept_stream().take(50_000)
    r = np.corrcoef(lam, u)[0, 1]
    assert abs(r) <= 3 / math.sqrt(50_000)


@pytest.fixture
def vectors():
    rng = np.random.default_rng(3)
    return uniform_sample(7, rng), uniform_sample(7, rng)


def test_run_protocol_transcript(vectors):
    a, b = vectors
    codec = pr.MessageCode("elias-gamma")
    t = pr.run_protocol(a, b, pr.SharedRandomness(11, 7), codec)
    assert codec.decode(t.message_bits) == t.iteration
    lam = pr.SharedRandomness(11, 7).lambda_stream().take(t.iteration)[-1]
    assert t.output_a == pr.sign_output(a, lam)
    assert t.output_b == pr.sign_output(b, lam)
    assert t.codec == "elias-gamma"


def test_determinism(vectors):
    a, b = vectors
    codec = pr.MessageCode("golomb", 2)
    for seed in range(20):
        t1 = pr.run_protocol(a, b, pr.SharedRandomness(seed, 7), codec)
        t2 = pr.run_protocol(a, b, pr.SharedRandomness(seed, 7), codec)
        assert t1.to_json() == t2.to_json()


def test_bob_from_wire_bits_and_seed(vectors):
    a, b = vectors
    codec = pr.MessageCode("golomb", 2)
    for seed in range(50):
        t = pr.run_protocol(a, b, pr.SharedRandomness(seed, 7), codec)
        wire = json.loads(t.to_json())
        bob = pr.Bob(b, pr.SharedRandomness(wire["seed"], wire["n"]), pr.MessageCode.parse(wire["codec"]))
        assert bob.receive(wire["bits"]) == wire["B"]


def test_transcript_json_round_trip(vectors):
    a, b = vectors
    t = pr.run_protocol(a, b, pr.SharedRandomness(5, 7), pr.MessageCode("unary"))
    doc = json.loads(t.to_json())
    assert set(doc) == {"seed", "n", "i", "bits", "A", "B", "codec"}
    assert pr.ProtocolTranscript.from_json(t.to_json()) == t


def test_b_equals_a(vectors):
    a, _ = vectors
    res = pr.run_rounds(a, a, pr.SharedRandomness(1, 7), 10_000)
    assert np.all(res.output_a == res.output_b)
    for seed in range(30):
        t = pr.run_protocol(a, a, pr.SharedRandomness(seed, 7), pr.MessageCode("unary"))
        assert t.output_a == t.output_b


def test_b_equals_minus_a(vectors):
    a, _ = vectors
    res = pr.run_rounds(a, -a, pr.SharedRandomness(1, 7), 10_000)
    assert np.all(res.output_a == -res.output_b)


def test_orthogonal_vectors_zero_correlation():
    a = UnitVector(np.eye(8)[0])
    b = UnitVector(np.eye(8)[1])
    res = pr.run_rounds(a, b, pr.SharedRandomness(2024, 7), 100_000)
    bound = 3 / math.sqrt(100_000)
    assert abs(np.mean(res.output_a.astype(int) * res.output_b)) <= bound
    assert abs(res.output_a.mean()) <= bound
    assert abs(res.output_b.mean()) <= bound


def test_rounds_match_sequential_parties(vectors):
    a, b = vectors
    shared = pr.SharedRandomness(77, 7)
    codec = pr.MessageCode("golomb", 2)
    alice = pr.Alice(a, shared)
    bob = pr.Bob(b, shared, codec)
    seq = []
    for _ in range(300):
        i, out_a = alice.round()
        seq.append((i, out_a, bob.receive(codec.encode(i))))
    res = pr.run_rounds(a, b, shared, 300)
    assert list(zip(res.iterations.tolist(), res.output_a.tolist(), res.output_b.tolist())) == seq


def test_rounds_span_blocks(vectors, monkeypatch):
    a, b = vectors
    shared = pr.SharedRandomness(9, 7)
    expected = pr.run_rounds(a, b, shared, 500)
    monkeypatch.setattr(pr, "_BLOCK_FLOATS", 8 * 3)  # force many tiny blocks
    small = pr.run_rounds(a, b, shared, 500)
    np.testing.assert_array_equal(expected.iterations, small.iterations)
    np.testing.assert_array_equal(expected.output_b, small.output_b)


def test_first_round_equals_run_protocol(vectors):
    a, b = vectors
    for seed in range(20):
        t = pr.run_protocol(a, b, pr.SharedRandomness(seed, 7), pr.MessageCode("unary"))
        r = pr.run_rounds(a, b, pr.SharedRandomness(seed, 7), 1)
        assert (t.iteration, t.output_a, t.output_b) == (r.iterations[0], r.output_a[0], r.output_b[0])


def test_postselected_single_shot(vectors):
    a, b = vectors
    outcomes = [pr.run_postselected(a, b, pr.SharedRandomness(s, 7)) for s in range(2000)]
    ok = [o for o in outcomes if isinstance(o, pr.ProtocolTranscript)]
    assert all(o.message_bits == "" and o.iteration == 1 for o in ok)
    assert any(isinstance(o, pr.Abort) for o in outcomes)
    for seed in range(50):
        o = pr.run_postselected(a, b, pr.SharedRandomness(seed, 7))
        r = pr.run_postselected_rounds(a, b, pr.SharedRandomness(seed, 7), 1)
        assert isinstance(o, pr.ProtocolTranscript) == bool(r.accepted[0])


def test_postselected_rate_and_correlation():
    a = UnitVector(np.eye(8)[0])
    b = UnitVector(0.5 * np.eye(8)[0] + math.sqrt(0.75) * np.eye(8)[1])
    res = pr.run_postselected_rounds(a, b, pr.SharedRandomness(31, 7), 100_000)
    p = acceptance_probability(7)
    assert abs(res.accepted.mean() - p) <= 3 * math.sqrt(p * (1 - p) / 100_000)
    prod = (res.output_a.astype(int) * res.output_b)[res.accepted]
    assert abs(prod.mean() - 0.5) <= 3 * prod.std(ddof=1) / math.sqrt(prod.size)


def test_dimension_checks(vectors):
    a, _ = vectors
    with pytest.raises(DimensionMismatch):
        pr.run_protocol(a, UnitVector([1.0, 0.0]), pr.SharedRandomness(1, 7), pr.MessageCode("unary"))
    with pytest.raises(DimensionMismatch):
        pr.Alice(a, pr.SharedRandomness(1, 3))
