"""Independent reference implementations used as oracles by the tests.

These are deliberately naive (dict scans, explicit loops, exhaustive
enumeration) and share no code with the package paths they check.
"""

import math


class Mt19937Ref:
    """Reference MT19937 transcription: init_genrand + genrand_int32."""

    N, M = 624, 397
    MATRIX_A = 0x9908B0DF
    UPPER = 0x80000000
    LOWER = 0x7FFFFFFF

    def __init__(self, seed):
        self.mt = [0] * self.N
        self.mt[0] = seed & 0xFFFFFFFF
        for i in range(1, self.N):
            self.mt[i] = (1812433253 * (self.mt[i - 1] ^ (self.mt[i - 1] >> 30)) + i) & 0xFFFFFFFF
        self.mti = self.N

    def next_word(self):
        if self.mti >= self.N:
            mag01 = (0, self.MATRIX_A)
            for kk in range(self.N):
                y = (self.mt[kk] & self.UPPER) | (self.mt[(kk + 1) % self.N] & self.LOWER)
                self.mt[kk] = self.mt[(kk + self.M) % self.N] ^ (y >> 1) ^ mag01[y & 1]
            self.mti = 0
        y = self.mt[self.mti]
        self.mti += 1
        y ^= y >> 11
        y ^= (y << 7) & 0x9D2C5680
        y ^= (y << 15) & 0xEFC60000
        y ^= y >> 18
        return y & 0xFFFFFFFF


def berlekamp_massey_ref(bits):
    """Textbook O(n^2) Berlekamp-Massey over GF(2); returns the LFSR length."""
    n = len(bits)
    c = [0] * n
    b = [0] * n
    c[0] = b[0] = 1
    length, m = 0, -1
    for i in range(n):
        d = bits[i]
        for j in range(1, length + 1):
            d ^= c[j] & bits[i - j]
        if d:
            t = c[:]
            shift = i - m
            for j in range(n - shift):
                c[j + shift] ^= b[j]
            if 2 * length <= i:
                length = i + 1 - length
                m = i
                b = t
    return length


def universal_statistic_ref(bits, L, Q, K):
    """Dict-based scan for the mean log2 gap between repeated L-bit blocks."""
    last = {}
    nblocks = Q + K
    values = []
    for i in range(nblocks):
        v = 0
        for j in range(L):
            v = (v << 1) | int(bits[i * L + j])
        values.append(v)
    for i in range(Q):
        last[values[i]] = i + 1  # 1-based block numbering, unseen -> 0
    total = 0.0
    for i in range(Q, nblocks):
        pos = i + 1
        total += math.log2(pos - last.get(values[i], 0))
        last[values[i]] = pos
    return total / K


def longest_run_class_counts(m, anchors):
    """Exhaustive per-class counts of the longest 1-run over all 2^m strings."""
    counts = [0] * len(anchors)
    for word in range(1 << m):
        best = cur = 0
        for b in range(m):
            if (word >> b) & 1:
                cur += 1
                best = max(best, cur)
            else:
                cur = 0
        if best <= anchors[0]:
            counts[0] += 1
        elif best >= anchors[-1]:
            counts[-1] += 1
        else:
            counts[anchors.index(best)] += 1
    return counts


def overlap_class_counts(m, window, top=5):
    """Exhaustive overlapping all-ones occurrence counts over 2^window strings."""
    counts = [0] * (top + 1)
    target = (1 << m) - 1
    for word in range(1 << window):
        occ = 0
        for start in range(window - m + 1):
            if (word >> start) & target == target:
                occ += 1
        counts[min(occ, top)] += 1
    return counts


def gf2_rank_ref(rows, width=32):
    """Gaussian elimination rank of a list of row bitmasks."""
    rows = list(rows)
    rank = 0
    for bit in range(width - 1, -1, -1):
        mask = 1 << bit
        pivot = None
        for i in range(rank, len(rows)):
            if rows[i] & mask:
                pivot = i
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i] & mask:
                rows[i] ^= rows[rank]
        rank += 1
    return rank


def psi_sq_ref(bits, m):
    """Naive overlapping m-pattern chi-square sum with wraparound."""
    if m <= 0:
        return 0.0
    n = len(bits)
    counts = {}
    for i in range(n):
        key = tuple(bits[(i + j) % n] for j in range(m))
        counts[key] = counts.get(key, 0) + 1
    return 2.0 ** m / n * sum(c * c for c in counts.values()) - n


def phi_ref(bits, m):
    """Naive overlapping m-pattern entropy term with wraparound."""
    if m == 0:
        return 0.0
    n = len(bits)
    counts = {}
    for i in range(n):
        key = tuple(bits[(i + j) % n] for j in range(m))
        counts[key] = counts.get(key, 0) + 1
    return sum((c / n) * math.log(c / n) for c in counts.values())


def walk_cycles_ref(bits):
    """Cycle list of the padded +-1 walk: each cycle is its interior states."""
    s = [0]
    for b in bits:
        s.append(s[-1] + (1 if b else -1))
    s.append(0)
    zeros = [i for i, v in enumerate(s) if v == 0]
    cycles = []
    for a, b2 in zip(zeros[:-1], zeros[1:]):
        cycles.append(s[a + 1 : b2])
    return cycles


def non_overlapping_count_ref(bits, template_bits):
    """Greedy non-overlapping template scan (advance by m on a match)."""
    m = len(template_bits)
    count = 0
    i = 0
    while i <= len(bits) - m:
        if list(bits[i : i + m]) == list(template_bits):
            count += 1
            i += m
        else:
            i += 1
    return count
