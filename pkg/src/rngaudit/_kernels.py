"""Numba-compiled hot loops: MT19937 generation, GF(2) linear algebra helpers.

Everything here is an implementation detail; the public surfaces live in
`bitstream` and `nist`. All kernels are deterministic and single-threaded.
"""

import numpy as np
from numba import njit, uint32, uint64


@njit(cache=True)
def mt_init(state, seed):
    """Standard MT19937 initialization (init_genrand) from a 32-bit seed."""
    state[0] = seed
    for i in range(1, 624):
        state[i] = uint32(1812433253) * (state[i - 1] ^ (state[i - 1] >> uint32(30))) + uint32(i)


@njit(cache=True, inline="always")
def _mt_twist(state):
    for i in range(227):
        y = (state[i] & uint32(0x80000000)) | (state[i + 1] & uint32(0x7FFFFFFF))
        state[i] = state[i + 397] ^ (y >> uint32(1)) ^ ((uint32(0) - (y & uint32(1))) & uint32(0x9908B0DF))
    for i in range(227, 623):
        y = (state[i] & uint32(0x80000000)) | (state[i + 1] & uint32(0x7FFFFFFF))
        state[i] = state[i - 227] ^ (y >> uint32(1)) ^ ((uint32(0) - (y & uint32(1))) & uint32(0x9908B0DF))
    y = (state[623] & uint32(0x80000000)) | (state[0] & uint32(0x7FFFFFFF))
    state[623] = state[396] ^ (y >> uint32(1)) ^ ((uint32(0) - (y & uint32(1))) & uint32(0x9908B0DF))


@njit(cache=True)
def mt_fill(state, mti, out):
    """Write the next ``out.size`` tempered 32-bit outputs; returns new index."""
    n = out.shape[0]
    k = 0
    while k < n:
        if mti >= 624:
            _mt_twist(state)
            mti = 0
        take = 624 - mti
        if take > n - k:
            take = n - k
        for j in range(take):
            y = state[mti + j]
            y ^= y >> uint32(11)
            y ^= (y << uint32(7)) & uint32(0x9D2C5680)
            y ^= (y << uint32(15)) & uint32(0xEFC60000)
            y ^= y >> uint32(18)
            out[k + j] = y
        mti += take
        k += take
    return mti


@njit(cache=True)
def mt_first_words(seeds, out):
    """First tempered output word for each seed, without building full states.

    Only the recurrence up to index 397 is needed to twist slot 0, which keeps
    the per-stream cost low enough for harness runs that draw a single word
    per derived stream.
    """
    mask = uint64(0xFFFFFFFF)
    for s in range(seeds.shape[0]):
        # scalar recurrence: keep it in uint64 and truncate by hand, since
        # numba promotes mixed scalar arithmetic past 32 bits
        m_prev = uint64(seeds[s])
        m0 = m_prev
        m1 = uint64(0)
        for i in range(1, 398):
            m_prev = (uint64(1812433253) * (m_prev ^ (m_prev >> uint64(30))) + uint64(i)) & mask
            if i == 1:
                m1 = m_prev
        y = (m0 & uint64(0x80000000)) | (m1 & uint64(0x7FFFFFFF))
        odd = y & uint64(1)
        y = m_prev ^ (y >> uint64(1))
        if odd:
            y ^= uint64(0x9908B0DF)
        y ^= y >> uint64(11)
        y = (y ^ ((y << uint64(7)) & uint64(0x9D2C5680))) & mask
        y = (y ^ ((y << uint64(15)) & uint64(0xEFC60000))) & mask
        y ^= y >> uint64(18)
        out[s] = uint32(y)


@njit(cache=True, inline="always")
def _xor_shifted(dst, src, m, nwords):
    # dst ^= src << m, over little-endian 64-bit words
    ws = m >> 6
    bs = m & 63
    if bs == 0:
        for w in range(nwords - 1, ws - 1, -1):
            dst[w] ^= src[w - ws]
    else:
        for w in range(nwords - 1, ws, -1):
            dst[w] ^= (src[w - ws] << uint64(bs)) | (src[w - ws - 1] >> uint64(64 - bs))
        dst[ws] ^= src[0] << uint64(bs)


@njit(cache=True)
def berlekamp_massey_lengths(bits, block, out):
    """Linear complexity of each consecutive ``block``-bit slice of ``bits``.

    Uses the incremental-product formulation: instead of recomputing the
    discrepancy sum each step, the polynomial products s*C and s*B are kept
    up to date with shifted XORs, so each step costs O(block/64) words.
    """
    nblocks = out.shape[0]
    nwords = (block >> 6) + 2
    sc = np.empty(nwords, dtype=np.uint64)
    sb = np.empty(nwords, dtype=np.uint64)
    tmp = np.empty(nwords, dtype=np.uint64)
    for b in range(nblocks):
        base = b * block
        for w in range(nwords):
            sc[w] = uint64(0)
        for i in range(block):
            if bits[base + i]:
                sc[i >> 6] |= uint64(1) << uint64(i & 63)
        sb[:] = sc
        length = 0
        m = 1
        for t in range(block):
            d = (sc[t >> 6] >> uint64(t & 63)) & uint64(1)
            if d:
                if 2 * length <= t:
                    tmp[:] = sc
                    _xor_shifted(sc, sb, m, nwords)
                    sb[:] = tmp
                    length = t + 1 - length
                    m = 1
                else:
                    _xor_shifted(sc, sb, m, nwords)
                    m += 1
            else:
                m += 1
        out[b] = length


@njit(cache=True)
def gf2_rank_32x32(rows, out):
    """Rank over GF(2) of each 32x32 matrix given as 32 packed uint32 rows."""
    nmat = rows.shape[0]
    work = np.empty(32, dtype=np.uint32)
    for mi in range(nmat):
        for r in range(32):
            work[r] = rows[mi, r]
        rank = 0
        for bit in range(31, -1, -1):
            mask = uint32(1) << uint32(bit)
            pivot = -1
            for r in range(rank, 32):
                if work[r] & mask:
                    pivot = r
                    break
            if pivot < 0:
                continue
            t = work[pivot]
            work[pivot] = work[rank]
            work[rank] = t
            for r in range(32):
                if r != rank and (work[r] & mask):
                    work[r] ^= t
            rank += 1
            if rank == 32:
                break
        out[mi] = rank


@njit(cache=True)
def longest_one_runs(bits, block, out):
    """Longest run of ones within each consecutive ``block``-bit slice."""
    nblocks = out.shape[0]
    for b in range(nblocks):
        base = b * block
        best = 0
        cur = 0
        for i in range(block):
            if bits[base + i]:
                cur += 1
                if cur > best:
                    best = cur
            else:
                cur = 0
        out[b] = best


def warmup():
    """Force compilation of every kernel (cached on disk afterwards)."""
    st = np.empty(624, dtype=np.uint32)
    mt_init(st, np.uint32(0))
    buf = np.empty(2, dtype=np.uint32)
    mt_fill(st, 624, buf)
    mt_first_words(np.zeros(1, dtype=np.uint32), buf[:1])
    berlekamp_massey_lengths(np.zeros(8, dtype=np.uint8), 8, np.empty(1, dtype=np.int64))
    gf2_rank_32x32(np.zeros((1, 32), dtype=np.uint32), np.empty(1, dtype=np.int64))
    longest_one_runs(np.zeros(8, dtype=np.uint8), 8, np.empty(1, dtype=np.int64))
