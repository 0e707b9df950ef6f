"""Deterministic bit sources: MT19937, a SHA-1 counter generator, raw files.

Bit-order contract: a 32-bit generator word contributes its bits MSB-first;
a file contributes bytes in file order, each byte MSB-first. A real in [0,1)
consumes exactly 32 bits b1..b32 and equals sum(b_i * 2**(32-i)) / 2**32.

Parallel reproducibility: stream `s` of a given master seed is derived
independently of every other stream. For MT19937 the stream seed is the low
32 bits of SHA-1(master_seed || s); for the SHA-1 generator, output block i
of stream s is SHA-1(master_seed || s || i) with s and i as 8-byte
big-endian counters, so streams cannot overlap by construction.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels


class ConfigError(ValueError):
    """Invalid parameter or source configuration."""


class InsufficientInputError(RuntimeError):
    """A finite source ran out of bits."""

    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(f"insufficient input: {requested} bits requested, {available} available")


def sha1_block(key: bytes, counter: int) -> bytes:
    """SHA-1 digest (160 bits) of key || counter as 8-byte big-endian."""
    if not key:
        raise ConfigError("sha1 generator key must be non-empty")
    return hashlib.sha1(key + counter.to_bytes(8, "big")).digest()


def stream_seed32(master_seed: bytes, stream_index: int) -> int:
    """Low 32 bits of SHA-1(master_seed || stream_index) as the MT seed."""
    if not master_seed:
        raise ConfigError("master seed must be non-empty")
    d = hashlib.sha1(master_seed + stream_index.to_bytes(8, "big")).digest()
    return int.from_bytes(d[16:], "big")


def words_to_bits(words: np.ndarray) -> np.ndarray:
    """Expand uint32 words to a 0/1 uint8 array, MSB of each word first."""
    return np.unpackbits(np.ascontiguousarray(words, dtype=">u4").view(np.uint8))


class BitSource:
    """Base class: buffered bit access on top of a word or byte producer.

    A source is single-threaded; run distinct stream_index instances on
    distinct threads instead of sharing one.
    """

    kind = "abstract"

    def __init__(self, master_seed: bytes, stream_index: int):
        if stream_index < 0:
            raise ConfigError("stream_index must be non-negative")
        self.master_seed = master_seed
        self.stream_index = stream_index
        self.bits_consumed = 0
        self._bitbuf = np.empty(0, dtype=np.uint8)

    def _next_words(self, nwords: int) -> np.ndarray:
        raise NotImplementedError

    def take_bits(self, n: int) -> np.ndarray:
        """The next n bits as a 0/1 uint8 array."""
        if n < 1:
            raise ConfigError("bit count must be >= 1")
        if self._bitbuf.size >= n:
            out = self._bitbuf[:n]
            self._bitbuf = self._bitbuf[n:]
        else:
            missing = n - self._bitbuf.size
            fresh = words_to_bits(self._next_words((missing + 31) // 32))
            out = np.concatenate([self._bitbuf, fresh[:missing]])
            self._bitbuf = fresh[missing:]
        self.bits_consumed += n
        return out

    def take_words(self, nwords: int) -> np.ndarray:
        """The next nwords 32-bit values (same stream as take_bits, MSB-first)."""
        if nwords < 1:
            raise ConfigError("word count must be >= 1")
        if self._bitbuf.size == 0:
            out = self._next_words(nwords)
            self.bits_consumed += 32 * nwords
            return out
        bits = self.take_bits(32 * nwords)
        return np.frombuffer(np.packbits(bits).tobytes(), dtype=">u4").astype(np.uint32)

    def push_back(self, bits: np.ndarray) -> None:
        """Return unconsumed bits to the front of the stream."""
        self._bitbuf = np.concatenate([np.asarray(bits, dtype=np.uint8), self._bitbuf])
        self.bits_consumed -= len(bits)

    def uniform01(self) -> float:
        """One real in [0,1) from exactly 32 bits, MSB-first."""
        return float(self.take_words(1)[0]) / 4294967296.0

    def uniform01_array(self, count: int) -> np.ndarray:
        """count reals in [0,1), each consuming 32 bits."""
        return self.take_words(count).astype(np.float64) / 4294967296.0


@dataclass
class MtState:
    """Raw MT19937 state: 624 words plus the output cursor."""

    mt: np.ndarray
    mti: int

    @classmethod
    def from_seed(cls, seed: int) -> "MtState":
        st = np.empty(624, dtype=np.uint32)
        _kernels.mt_init(st, np.uint32(seed & 0xFFFFFFFF))
        return cls(mt=st, mti=624)


def mt_next_word(state: MtState) -> int:
    """Next tempered MT19937 output word; advances the state by one."""
    buf = np.empty(1, dtype=np.uint32)
    state.mti = _kernels.mt_fill(state.mt, state.mti, buf)
    return int(buf[0])


def mt_first_word_batch(seeds: np.ndarray) -> np.ndarray:
    """First output word for each 32-bit seed (vectorized across streams)."""
    out = np.empty(len(seeds), dtype=np.uint32)
    _kernels.mt_first_words(np.ascontiguousarray(seeds, dtype=np.uint32), out)
    return out


class MtSource(BitSource):
    """MT19937 stream seeded from SHA-1(master_seed || stream_index)."""

    kind = "mt19937"

    def __init__(self, master_seed: bytes, stream_index: int = 0):
        super().__init__(master_seed, stream_index)
        self._state = MtState.from_seed(stream_seed32(master_seed, stream_index))

    def _next_words(self, nwords: int) -> np.ndarray:
        out = np.empty(nwords, dtype=np.uint32)
        self._state.mti = _kernels.mt_fill(self._state.mt, self._state.mti, out)
        return out


class Sha1Source(BitSource):
    """SHA-1 counter-mode stream: block i is SHA-1(master || stream || i)."""

    kind = "sha1ctr"

    def __init__(self, master_seed: bytes, stream_index: int = 0):
        super().__init__(master_seed, stream_index)
        if not master_seed:
            raise ConfigError("sha1 generator key must be non-empty")
        self._key = master_seed + stream_index.to_bytes(8, "big")
        self._counter = 0
        self._wordbuf = np.empty(0, dtype=np.uint32)

    def _next_words(self, nwords: int) -> np.ndarray:
        if self._wordbuf.size < nwords:
            nblocks = (nwords - self._wordbuf.size + 4) // 5
            raw = b"".join(
                sha1_block(self._key, self._counter + i) for i in range(nblocks)
            )
            self._counter += nblocks
            fresh = np.frombuffer(raw, dtype=">u4").astype(np.uint32)
            self._wordbuf = np.concatenate([self._wordbuf, fresh])
        out = self._wordbuf[:nwords]
        self._wordbuf = self._wordbuf[nwords:]
        return out


class FileSource(BitSource):
    """Raw binary file, bytes in order, each byte MSB-first. No header.

    A positive stream_index requires an explicit per-stream stride (in bits,
    a multiple of 8): stream s starts at byte offset s * stride_bits / 8.
    """

    kind = "file"

    def __init__(self, path: str, stream_index: int = 0, stride_bits: int | None = None):
        super().__init__(b"\x00", stream_index)
        self.path = path
        self._f = open(path, "rb")
        self._limit_bytes: int | None = None
        if stream_index > 0:
            if stride_bits is None:
                raise ConfigError("file source with stream_index > 0 needs stride_bits")
            if stride_bits % 8:
                raise ConfigError("stride_bits must be a multiple of 8")
            self._f.seek(stream_index * (stride_bits // 8))
            self._limit_bytes = stride_bits // 8
        self._read_bytes = 0

    def take_bits(self, n: int) -> np.ndarray:
        if n < 1:
            raise ConfigError("bit count must be >= 1")
        if self._bitbuf.size < n:
            missing = n - self._bitbuf.size
            nbytes = (missing + 7) // 8
            if self._limit_bytes is not None:
                nbytes = min(nbytes, self._limit_bytes - self._read_bytes)
            data = self._f.read(nbytes)
            self._read_bytes += len(data)
            if 8 * len(data) < missing:
                available = self.bits_consumed + self._bitbuf.size + 8 * len(data)
                raise InsufficientInputError(self.bits_consumed + n, available)
            fresh = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
            self._bitbuf = np.concatenate([self._bitbuf, fresh])
        out = self._bitbuf[:n]
        self._bitbuf = self._bitbuf[n:]
        self.bits_consumed += n
        return out

    def take_words(self, nwords: int) -> np.ndarray:
        bits = self.take_bits(32 * nwords)
        return np.frombuffer(np.packbits(bits).tobytes(), dtype=">u4").astype(np.uint32)

    def close(self) -> None:
        self._f.close()


@dataclass(frozen=True)
class GeneratorSpec:
    """Which generator family to draw from (and the file path, if any)."""

    kind: str  # mt19937 | sha1 | file
    path: str | None = None

    def label(self) -> str:
        return f"file:{os.path.basename(self.path)}" if self.kind == "file" else self.kind


def parse_generator(text: str) -> GeneratorSpec:
    if text == "mt19937":
        return GeneratorSpec("mt19937")
    if text in ("sha1", "sha1ctr"):
        return GeneratorSpec("sha1")
    if text.startswith("file:"):
        path = text[5:]
        if not path:
            raise ConfigError("file generator needs a path: file:<path>")
        return GeneratorSpec("file", path)
    raise ConfigError(f"unknown generator {text!r} (expected mt19937, sha1, or file:<path>)")


def make_source(
    gen: GeneratorSpec,
    master_seed: bytes,
    stream_index: int,
    stride_bits: int | None = None,
) -> BitSource:
    if gen.kind == "mt19937":
        return MtSource(master_seed, stream_index)
    if gen.kind == "sha1":
        return Sha1Source(master_seed, stream_index)
    if gen.kind == "file":
        return FileSource(gen.path, stream_index, stride_bits)
    raise ConfigError(f"unknown generator kind {gen.kind!r}")
