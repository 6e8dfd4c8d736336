"""Two-party simulation protocol: shared randomness, Alice's rejection loop,
the iteration-index message, and Bob's sign-rule output.

Communication is one-way, Alice to Bob.  Each party opens its own cursor on
the shared streams, so Bob never sees Alice's acceptance coins; all he gets
is the message bits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .errors import DimensionMismatch, IterationCap, MalformedBits
from .sphere import DEFAULT_ITERATION_CAP, UnitVector, acceptance_probability, accepts, normalize_rows

LAMBDA_STREAM_ID = 0
ACCEPT_STREAM_ID = 1

_BLOCK_FLOATS = 1 << 22


def sign(x: float | np.ndarray) -> int | np.ndarray:
    """sgn with sgn(0) = +1."""
    if np.ndim(x) == 0:
        return 1 if x >= 0 else -1
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def sign_output(v: UnitVector, lam: UnitVector | np.ndarray) -> int:
    lam_coords = lam.coords if isinstance(lam, UnitVector) else np.asarray(lam)
    if lam_coords.shape != v.coords.shape:
        raise DimensionMismatch(f"output vector has {v.coords.size} coords, lambda has {lam_coords.size}")
    return sign(float(v.coords @ lam_coords))


# ---------------------------------------------------------------------------
# shared randomness
# ---------------------------------------------------------------------------


class _BufferedStream:
    """Block-buffered cursor over a numpy Generator.

    numpy Generators emit the same sequence regardless of how draws are
    chunked, so reading k items here gives the same values as k single reads.
    """

    def __init__(self, gen: np.random.Generator, width: int | None) -> None:
        self._gen = gen
        self._width = width
        self._buf = self._draw(0)
        self._pos = 0
        self._next_block = 64
        self.consumed = 0

    def _draw(self, k: int) -> np.ndarray:
        if self._width is None:
            return self._gen.random(k)
        return normalize_rows(self._gen.standard_normal((k, self._width)), self._gen)

    def _block(self) -> int:
        # grow geometrically so single runs stay cheap and long runs amortize
        size = self._next_block
        self._next_block = min(2 * size, max(256, _BLOCK_FLOATS // (self._width or 1)))
        return size

    def take(self, k: int) -> np.ndarray:
        avail = self._buf.shape[0] - self._pos
        if avail < k:
            fresh = self._draw(max(k - avail, self._block()))
            self._buf = np.concatenate([self._buf[self._pos :], fresh])
            self._pos = 0
        out = self._buf[self._pos : self._pos + k]
        self._pos += k
        self.consumed += k
        return out

    def next(self) -> Any:
        return self.take(1)[0]

    def __iter__(self) -> _BufferedStream:
        return self

    def __next__(self) -> Any:
        return self.next()


@dataclass(frozen=True)
class SharedRandomness:
    """Seed shared in advance by Alice and Bob.

    ``lambda_stream()`` yields uniform points on S_n; ``accept_stream()`` yields
    uniforms in [0, 1) for Alice's acceptance test.  The two come from distinct
    spawn keys of the same seed, so they are independent, and every call opens
    a fresh cursor at the start of the stream.
    """

    seed: int
    n: int

    def _generator(self, stream_id: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def lambda_stream(self) -> _BufferedStream:
        return _BufferedStream(self._generator(LAMBDA_STREAM_ID), self.n + 1)

    def accept_stream(self) -> _BufferedStream:
        return _BufferedStream(self._generator(ACCEPT_STREAM_ID), None)


# ---------------------------------------------------------------------------
# message codecs
# ---------------------------------------------------------------------------


def _floor_log2(i: np.ndarray) -> np.ndarray:
    # frexp is exact on integers below 2**53
    return np.frexp(np.asarray(i, dtype=np.float64))[1].astype(np.int64) - 1


@dataclass(frozen=True)
class MessageCode:
    """Prefix-free code for positive integers.

    kinds: ``unary`` (i-1 zeros then a one), ``elias-gamma`` and ``golomb``
    with modulus ``m`` (unary quotient, truncated-binary remainder, applied
    to i-1).
    """

    kind: str
    m: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("unary", "elias-gamma", "golomb"):
            raise ValueError(f"unknown codec {self.kind!r}")
        if self.kind == "golomb":
            if self.m is None or self.m < 1:
                raise ValueError("golomb codec needs a modulus m >= 1")
        elif self.m is not None:
            raise ValueError(f"{self.kind} codec takes no parameter")

    @classmethod
    def golomb_for(cls, p: float) -> MessageCode:
        """Golomb code tuned to a geometric source with success probability p."""
        return cls("golomb", max(1, round(-1.0 / math.log2(1.0 - p))))

    @classmethod
    def parse(cls, identifier: str) -> MessageCode:
        kind, _, param = identifier.partition(":")
        return cls(kind, int(param) if param else None)

    @property
    def identifier(self) -> str:
        return f"golomb:{self.m}" if self.kind == "golomb" else self.kind

    # golomb remainder layout
    def _golomb_params(self) -> tuple[int, int]:
        b = (self.m - 1).bit_length()
        return b, (1 << b) - self.m

    def encode(self, i: int) -> str:
        i = int(i)
        if i < 1:
            raise ValueError(f"only positive integers are encodable, got {i}")
        if self.kind == "unary":
            return "0" * (i - 1) + "1"
        if self.kind == "elias-gamma":
            body = format(i, "b")
            return "0" * (len(body) - 1) + body
        q, r = divmod(i - 1, self.m)
        b, cutoff = self._golomb_params()
        if r < cutoff:
            tail = format(r, f"0{b - 1}b") if b > 1 else ""
        else:
            tail = format(r + cutoff, f"0{b}b") if b > 0 else ""
        return "0" * q + "1" + tail

    def decode_prefix(self, bits: str, pos: int = 0) -> tuple[int, int]:
        """Decode one codeword starting at ``pos``; return (value, next position)."""
        value, end = self._decode_at(bits, pos)
        if set(bits[pos:end]) - {"0", "1"}:
            raise MalformedBits("bit string may contain only '0' and '1'")
        return value, end

    def _decode_at(self, bits: str, pos: int) -> tuple[int, int]:
        stop = bits.find("1", pos)
        if stop < 0:
            raise MalformedBits("codeword has no terminating '1'")
        zeros = stop - pos
        if self.kind == "unary":
            return zeros + 1, stop + 1
        if self.kind == "elias-gamma":
            end = stop + zeros + 1
            if end > len(bits):
                raise MalformedBits("elias-gamma codeword truncated")
            try:
                return int(bits[stop:end], 2), end
            except ValueError as exc:
                raise MalformedBits(str(exc)) from exc
        b, cutoff = self._golomb_params()
        pos = stop + 1
        r = 0
        if b > 0:
            short = b - 1
            if pos + short > len(bits):
                raise MalformedBits("golomb remainder truncated")
            try:
                r = int(bits[pos : pos + short], 2) if short else 0
                pos += short
                if r >= cutoff:
                    if pos + 1 > len(bits):
                        raise MalformedBits("golomb remainder truncated")
                    r = int(bits[pos - short : pos + 1], 2) - cutoff
                    pos += 1
            except ValueError as exc:
                if isinstance(exc, MalformedBits):
                    raise
                raise MalformedBits(str(exc)) from exc
        return zeros * self.m + r + 1, pos

    def decode(self, bits: str) -> int:
        if set(bits) - {"0", "1"}:
            raise MalformedBits("bit string may contain only '0' and '1'")
        value, end = self.decode_prefix(bits)
        if end != len(bits):
            raise MalformedBits(f"{len(bits) - end} trailing bits after codeword")
        return value

    def lengths(self, i: np.ndarray) -> np.ndarray:
        """Codeword lengths for an array of positive integers."""
        i = np.asarray(i, dtype=np.int64)
        if np.any(i < 1):
            raise ValueError("only positive integers are encodable")
        if self.kind == "unary":
            return i.copy()
        if self.kind == "elias-gamma":
            return 2 * _floor_log2(i) + 1
        q, r = np.divmod(i - 1, self.m)
        b, cutoff = self._golomb_params()
        return q + 1 + np.where(r < cutoff, b - 1, b) if b > 0 else q + 1


# ---------------------------------------------------------------------------
# parties
# ---------------------------------------------------------------------------


class Alice:
    """Rejection sampler over the shared lambda stream."""

    def __init__(self, a: UnitVector, shared: SharedRandomness, max_iterations: int = DEFAULT_ITERATION_CAP):
        if a.n != shared.n:
            raise DimensionMismatch(f"Alice's vector is on S_{a.n}, shared randomness on S_{shared.n}")
        self.a = a
        self.max_iterations = max_iterations
        self._lambdas = shared.lambda_stream()
        self._uniforms = shared.accept_stream()

    def round(self) -> tuple[int, int]:
        """Run one rejection loop; return (iteration index, Alice's output)."""
        for i in range(1, self.max_iterations + 1):
            lam = self._lambdas.next()
            overlap = float(self.a.coords @ lam)
            if accepts(self._uniforms.next(), overlap):
                return i, sign(overlap)
        raise IterationCap(f"no acceptance within {self.max_iterations} iterations")


class Bob:
    """Receives message bits and outputs sgn(b . lambda_i).

    Holds only his vector, his own cursor on the lambda stream and the codec.
    """

    def __init__(self, b: UnitVector, shared: SharedRandomness, codec: MessageCode):
        if b.n != shared.n:
            raise DimensionMismatch(f"Bob's vector is on S_{b.n}, shared randomness on S_{shared.n}")
        self.b = b
        self.codec = codec
        self._lambdas = shared.lambda_stream()

    def receive(self, bits: str) -> int:
        i = self.codec.decode(bits)
        lam = self._lambdas.take(i)[-1]
        return sign_output(self.b, lam)


# ---------------------------------------------------------------------------
# transcripts and single runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolTranscript:
    seed: int
    n: int
    iteration: int
    message_bits: str
    output_a: int
    output_b: int
    codec: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "n": self.n,
                "i": self.iteration,
                "bits": self.message_bits,
                "A": self.output_a,
                "B": self.output_b,
                "codec": self.codec,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> ProtocolTranscript:
        doc = json.loads(line)
        return cls(
            seed=int(doc["seed"]),
            n=int(doc["n"]),
            iteration=int(doc["i"]),
            message_bits=str(doc["bits"]),
            output_a=int(doc["A"]),
            output_b=int(doc["B"]),
            codec=str(doc["codec"]),
        )


@dataclass(frozen=True)
class Abort:
    """Post-selected run whose single candidate was rejected."""

    seed: int
    n: int


POSTSELECTED_CODEC = "none"


def run_protocol(
    a: UnitVector,
    b: UnitVector,
    shared: SharedRandomness,
    codec: MessageCode,
    max_iterations: int = DEFAULT_ITERATION_CAP,
) -> ProtocolTranscript:
    if a.n != b.n:
        raise DimensionMismatch(f"a on S_{a.n}, b on S_{b.n}")
    alice = Alice(a, shared, max_iterations)
    bob = Bob(b, shared, codec)
    i, out_a = alice.round()
    bits = codec.encode(i)
    out_b = bob.receive(bits)
    return ProtocolTranscript(shared.seed, shared.n, i, bits, out_a, out_b, codec.identifier)


def run_postselected(a: UnitVector, b: UnitVector, shared: SharedRandomness) -> ProtocolTranscript | Abort:
    """Single rejection trial with no message: accept and output, or abort."""
    if a.n != b.n:
        raise DimensionMismatch(f"a on S_{a.n}, b on S_{b.n}")
    alice = Alice(a, shared, max_iterations=1)
    try:
        _, out_a = alice.round()
    except IterationCap:
        return Abort(shared.seed, shared.n)
    lam = shared.lambda_stream().next()
    return ProtocolTranscript(shared.seed, shared.n, 1, "", out_a, sign_output(b, lam), POSTSELECTED_CODEC)


# ---------------------------------------------------------------------------
# vectorized many-round runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundResults:
    """Outcomes of consecutive rounds over one shared stream."""

    iterations: np.ndarray
    output_a: np.ndarray
    output_b: np.ndarray


def run_rounds(
    a: UnitVector,
    b: UnitVector,
    shared: SharedRandomness,
    rounds: int,
    max_iterations: int = DEFAULT_ITERATION_CAP,
) -> RoundResults:
    """Run ``rounds`` protocol rounds back to back on one shared stream.

    Round k starts on the draw after round k-1's accepted lambda, and its
    message is the iteration count within that round.  Equivalent, draw for
    draw, to calling ``Alice.round`` and ``Bob.receive`` repeatedly.
    """
    if a.n != b.n or a.n != shared.n:
        raise DimensionMismatch(f"a on S_{a.n}, b on S_{b.n}, shared on S_{shared.n}")
    lambdas = shared.lambda_stream()
    uniforms = shared.accept_stream()
    cap = max(256, _BLOCK_FLOATS // (shared.n + 1))
    block = min(cap, 64 + int(1.1 * rounds / acceptance_probability(shared.n)))
    iters: list[np.ndarray] = []
    outs_a: list[np.ndarray] = []
    outs_b: list[np.ndarray] = []
    done = 0
    pending = 0
    while done < rounds:
        lam = lambdas.take(block)
        u = uniforms.take(block)
        overlap = lam @ a.coords
        hits = np.flatnonzero(accepts(u, overlap))[: rounds - done]
        if hits.size:
            steps = np.diff(hits, prepend=-1)
            steps[0] += pending
            if steps.max() > max_iterations:
                raise IterationCap(f"no acceptance within {max_iterations} iterations")
            iters.append(steps)
            outs_a.append(sign(overlap[hits]))
            outs_b.append(sign(lam[hits] @ b.coords))
            done += hits.size
            pending = block - 1 - hits[-1]
        else:
            pending += block
        block = cap
        if pending > max_iterations:
            raise IterationCap(f"no acceptance within {max_iterations} iterations")
    return RoundResults(
        np.concatenate(iters).astype(np.int64),
        np.concatenate(outs_a).astype(np.int8),
        np.concatenate(outs_b).astype(np.int8),
    )


@dataclass(frozen=True)
class PostselectedResults:
    accepted: np.ndarray
    output_a: np.ndarray
    output_b: np.ndarray


def run_postselected_rounds(a: UnitVector, b: UnitVector, shared: SharedRandomness, trials: int) -> PostselectedResults:
    """``trials`` one-shot attempts, attempt k using the k-th shared draw.

    Outputs are reported for every attempt; callers select ``accepted`` ones.
    """
    if a.n != b.n or a.n != shared.n:
        raise DimensionMismatch(f"a on S_{a.n}, b on S_{b.n}, shared on S_{shared.n}")
    lambdas = shared.lambda_stream()
    uniforms = shared.accept_stream()
    block = max(256, _BLOCK_FLOATS // (shared.n + 1))
    acc: list[np.ndarray] = []
    oa: list[np.ndarray] = []
    ob: list[np.ndarray] = []
    left = trials
    while left > 0:
        k = min(block, left)
        lam = lambdas.take(k)
        overlap = lam @ a.coords
        acc.append(accepts(uniforms.take(k), overlap))
        oa.append(sign(overlap))
        ob.append(sign(lam @ b.coords))
        left -= k
    return PostselectedResults(np.concatenate(acc), np.concatenate(oa), np.concatenate(ob))


Outcome = Union[ProtocolTranscript, Abort]
