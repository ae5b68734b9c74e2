"""Reduced and cyclic words over a free group: generation, decomposition,
block statistics, equidistribution checks, and overlap analysis.

Letters of the rank-k alphabet are encoded as integers 0..2k-1, stored in
``bytes``. The generator x_{i+1} is letter 2i, its inverse is 2i+1, so
inversion is xor-with-1. Text form uses a..z for generators and A..Z for
inverses.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence


class WordError(ValueError):
    pass


class ResourceCapError(RuntimeError):
    """Raised when an enumeration would exceed a configured resource cap."""


def inv_letter(letter: int) -> int:
    return letter ^ 1


@dataclass(frozen=True)
class Alphabet:
    """Rank-k free group alphabet; the 2k letters are 0..2k-1."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 2:
            raise WordError(f"rank must be >= 2, got {self.k}")
        if self.k > 26:
            raise WordError("text serialization supports rank <= 26")

    @property
    def size(self) -> int:
        return 2 * self.k

    def letters(self) -> range:
        return range(2 * self.k)

    def letter_to_char(self, letter: int) -> str:
        gen, sign = divmod(letter, 2)
        ch = chr(ord("a") + gen)
        return ch.upper() if sign else ch

    def char_to_letter(self, ch: str) -> int:
        if ch.islower():
            gen = ord(ch) - ord("a")
            sign = 0
        elif ch.isupper():
            gen = ord(ch) - ord("A")
            sign = 1
        else:
            raise WordError(f"bad letter character: {ch!r}")
        if not 0 <= gen < self.k:
            raise WordError(f"letter {ch!r} outside rank-{self.k} alphabet")
        return 2 * gen + sign


def is_reduced(letters: bytes) -> bool:
    return all(letters[i + 1] != letters[i] ^ 1 for i in range(len(letters) - 1))


def free_reduce(letters: Sequence[int]) -> bytes:
    """Free reduction by stack cancellation."""
    out: list[int] = []
    for l in letters:
        if out and out[-1] == l ^ 1:
            out.pop()
        else:
            out.append(l)
    return bytes(out)


def inverse_word(letters: bytes) -> bytes:
    return bytes(l ^ 1 for l in reversed(letters))


@dataclass(frozen=True)
class ReducedWord:
    """A freely reduced word; no adjacent cancelling pair."""

    alphabet: Alphabet
    letters: bytes

    def __post_init__(self) -> None:
        if any(l >= self.alphabet.size for l in self.letters):
            raise WordError("letter outside alphabet")
        if not is_reduced(self.letters):
            raise WordError("word is not freely reduced")

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return "".join(self.alphabet.letter_to_char(l) for l in self.letters)

    def inverse(self) -> "ReducedWord":
        return ReducedWord(self.alphabet, inverse_word(self.letters))

    @classmethod
    def from_str(cls, k: int, text: str) -> "ReducedWord":
        ab = Alphabet(k)
        return cls(ab, bytes(ab.char_to_letter(c) for c in text))


@dataclass(frozen=True)
class CyclicWord:
    """A cyclically reduced cyclic word (stored at a fixed rotation)."""

    alphabet: Alphabet
    letters: bytes

    def __post_init__(self) -> None:
        if any(l >= self.alphabet.size for l in self.letters):
            raise WordError("letter outside alphabet")
        if not is_reduced(self.letters):
            raise WordError("word is not freely reduced")
        n = len(self.letters)
        if n >= 2 and self.letters[0] == self.letters[-1] ^ 1:
            raise WordError("word is not cyclically reduced")

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return "".join(self.alphabet.letter_to_char(l) for l in self.letters)

    def rotate(self, offset: int) -> "CyclicWord":
        n = len(self.letters)
        off = offset % n
        return CyclicWord(self.alphabet, self.letters[off:] + self.letters[:off])

    def letter_at(self, i: int) -> int:
        return self.letters[i % len(self.letters)]

    def segment(self, start: int, length: int) -> bytes:
        """Letters of the cyclic segment [start, start+length)."""
        n = len(self.letters)
        if length > n:
            raise WordError("segment longer than the word")
        start %= n
        end = start + length
        if end <= n:
            return self.letters[start:end]
        return self.letters[start:] + self.letters[: end - n]

    def inverse(self) -> "CyclicWord":
        return CyclicWord(self.alphabet, inverse_word(self.letters))

    @classmethod
    def from_str(cls, k: int, text: str) -> "CyclicWord":
        ab = Alphabet(k)
        return cls(ab, bytes(ab.char_to_letter(c) for c in text))


def word_to_json(word: ReducedWord | CyclicWord) -> str:
    return json.dumps(
        {
            "schema": "v1",
            "k": word.alphabet.k,
            "cyclic": isinstance(word, CyclicWord),
            "word": str(word),
        }
    )


def word_from_json(text: str) -> ReducedWord | CyclicWord:
    obj = json.loads(text)
    cls = CyclicWord if obj["cyclic"] else ReducedWord
    return cls.from_str(obj["k"], obj["word"])


def random_cyclic_word(alphabet: Alphabet, n: int, seed: int) -> CyclicWord:
    """Uniformly random cyclically reduced word of length n.

    First letter uniform; each next letter uniform over the 2k-1
    non-cancelling choices; the final letter is resampled against the first
    until the wrap-around is also reduced. Deterministic given the seed.
    """
    if n < 1:
        raise WordError("n must be >= 1")
    rng = random.Random(seed)
    size = alphabet.size
    randrange = rng.randrange
    out = bytearray(n)
    out[0] = randrange(size)
    prev_excl = out[0] ^ 1
    for i in range(1, n):
        c = randrange(size - 1)
        if c >= prev_excl:
            c += 1
        out[i] = c
        prev_excl = c ^ 1
    if n >= 2:
        first_excl = out[0] ^ 1
        prev_excl = out[n - 2] ^ 1
        while out[n - 1] == first_excl:
            c = randrange(size - 1)
            if c >= prev_excl:
                c += 1
            out[n - 1] = c
    return CyclicWord(alphabet, bytes(out))


def block_decomposition(
    w: CyclicWord, T: int, offset: int = 0
) -> tuple[list[bytes], bytes]:
    """Cut the rotation of w at `offset` into floor(n/T) blocks of length T
    plus a tail of length n mod T. Concatenation reproduces the rotation."""
    n = len(w)
    if not 1 <= T <= n:
        raise WordError(f"block length {T} out of range 1..{n}")
    if not 0 <= offset < n:
        raise WordError("offset out of range")
    rotated = w.letters[offset:] + w.letters[:offset]
    nblocks = n // T
    blocks = [rotated[i * T : (i + 1) * T] for i in range(nblocks)]
    return blocks, rotated[nblocks * T :]


def count_block_occurrences(
    w: CyclicWord, sigma: bytes, T: int, offset: int = 0
) -> int:
    """Exact number of blocks equal to sigma in the given decomposition."""
    if len(sigma) != T:
        raise WordError("sigma length must equal T")
    if not is_reduced(sigma):
        return 0
    blocks, _ = block_decomposition(w, T, offset)
    return sum(1 for b in blocks if b == sigma)


def reduced_word_count(k: int, T: int) -> int:
    """Number of reduced words of length T in rank k."""
    return 2 * k * (2 * k - 1) ** (T - 1) if T >= 1 else 1


def _unrank_reduced(k: int, T: int, rank: int) -> bytes:
    """Inverse of the positional ranking of reduced words of length T."""
    base = 2 * k - 1
    digits = []
    for _ in range(T - 1):
        rank, d = divmod(rank, base)
        digits.append(d)
    first = rank
    out = bytearray([first])
    for d in reversed(digits):
        excl = out[-1] ^ 1
        out.append(d + 1 if d >= excl else d)
    return bytes(out)


@dataclass(frozen=True)
class PseudorandomReport:
    T: int
    epsilon: float
    block_count: int
    worst_ratio_low: float
    worst_ratio_high: float
    offending_sigma: Optional[str]
    passed: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": "v1",
                "T": self.T,
                "epsilon": self.epsilon,
                "block_count": self.block_count,
                "worst_ratio_low": self.worst_ratio_low,
                "worst_ratio_high": self.worst_ratio_high,
                "offending_sigma": self.offending_sigma,
                "pass": self.passed,
            }
        )


def pseudorandomness_check(
    w: CyclicWord, T: int, epsilon: float, max_types: int = 4_000_000
) -> PseudorandomReport:
    """Block-frequency equidistribution test.

    For each offset 0..T-1 the rotation is cut into length-T blocks and, for
    every reduced word sigma of length T, the normalized frequency
    count/nblocks * (2k)(2k-1)^(T-1) must lie in [1-eps, 1+eps]. Offsets
    differing by T give the same block multiset up to one boundary block, so
    only T rotations are scanned.
    """
    if T < 1 or epsilon <= 0:
        raise WordError("need T >= 1 and epsilon > 0")
    k = w.alphabet.k
    total_types = reduced_word_count(k, T)
    if total_types > max_types:
        raise ResourceCapError(
            f"{total_types} block types exceed the cap of {max_types}"
        )
    n = len(w)
    if T > n:
        raise WordError("T larger than the word")
    nblocks = n // T
    norm = total_types / nblocks
    worst_low = float("inf")
    worst_high = float("-inf")
    offender: Optional[bytes] = None
    for offset in range(min(T, n)):
        blocks, _ = block_decomposition(w, T, offset)
        counts: dict[bytes, int] = {}
        for b in blocks:
            counts[b] = counts.get(b, 0) + 1
        if len(counts) < total_types:
            if 0.0 < worst_low:
                worst_low = 0.0
                for rank in range(total_types):
                    sigma = _unrank_reduced(k, T, rank)
                    if sigma not in counts:
                        offender = sigma
                        break
        for b, c in counts.items():
            ratio = c * norm
            if ratio > worst_high:
                worst_high = ratio
            if ratio < worst_low:
                worst_low = ratio
                offender = b
    passed = (1 - epsilon) <= worst_low and worst_high <= (1 + epsilon)
    off_str = None
    if offender is not None and not passed:
        off_str = "".join(w.alphabet.letter_to_char(l) for l in offender)
    return PseudorandomReport(
        T=T,
        epsilon=epsilon,
        block_count=nblocks,
        worst_ratio_low=worst_low,
        worst_ratio_high=worst_high,
        offending_sigma=off_str,
        passed=passed,
    )


def longest_border(letters: bytes) -> int:
    """Length of the longest proper prefix that is also a proper suffix."""
    n = len(letters)
    if n == 0:
        return 0
    fail = [0] * n
    j = 0
    for i in range(1, n):
        while j and letters[i] != letters[j]:
            j = fail[j - 1]
        if letters[i] == letters[j]:
            j += 1
        fail[i] = j
    return fail[-1]


def small_self_overlap(x: ReducedWord | bytes) -> bool:
    """True iff the longest border of x has length at most |x|/3."""
    letters = x.letters if isinstance(x, ReducedWord) else x
    if len(letters) < 1:
        raise WordError("empty word")
    return longest_border(letters) <= len(letters) / 3


def _occurrence_positions(haystack: bytes, length: int) -> dict[bytes, list[int]]:
    index: dict[bytes, list[int]] = {}
    for p in range(len(haystack) - length + 1):
        index.setdefault(haystack[p : p + length], []).append(p)
    return index


def find_subword_triple(
    s1: ReducedWord,
    s2: ReducedWord,
    s3: ReducedWord,
    len_x: int,
    disjoint: Optional[bool] = None,
) -> Optional[tuple[tuple[int, int, int], ReducedWord]]:
    """Earliest triple of flanked occurrences a1·x·a2, b1·x·b2, c1·x·c2.

    The common subword x of length len_x must have small self-overlaps, the
    three preceding letters must be pairwise distinct, and likewise the three
    following letters. Positions are ordered lexicographically; identical
    source words additionally require pairwise disjoint occurrences
    (including flanks). Returns None when no triple exists.
    """
    if len_x < 1:
        raise WordError("len_x must be >= 1")
    w1, w2, w3 = s1.letters, s2.letters, s3.letters
    if disjoint is None:
        disjoint = w1 == w2 == w3
    if len_x > min(len(w1), len(w2), len(w3)) - 2:
        return None
    idx2 = _occurrence_positions(w2, len_x)
    idx3 = _occurrence_positions(w3, len_x)
    overlap_ok: dict[bytes, bool] = {}
    for p1 in range(1, len(w1) - len_x):
        x = w1[p1 : p1 + len_x]
        ok = overlap_ok.get(x)
        if ok is None:
            ok = longest_border(x) <= len_x / 3
            overlap_ok[x] = ok
        if not ok:
            continue
        a1, a2 = w1[p1 - 1], w1[p1 + len_x]
        for p2 in idx2.get(x, ()):
            if not 1 <= p2 <= len(w2) - len_x - 1:
                continue
            if disjoint and abs(p2 - p1) < len_x + 2:
                continue
            b1, b2 = w2[p2 - 1], w2[p2 + len_x]
            if b1 == a1 or b2 == a2:
                continue
            for p3 in idx3.get(x, ()):
                if not 1 <= p3 <= len(w3) - len_x - 1:
                    continue
                if disjoint and (
                    abs(p3 - p1) < len_x + 2 or abs(p3 - p2) < len_x + 2
                ):
                    continue
                c1, c2 = w3[p3 - 1], w3[p3 + len_x]
                if c1 in (a1, b1) or c2 in (a2, b2):
                    continue
                return (p1, p2, p3), ReducedWord(s1.alphabet, x)
    return None


def all_reduced_words(k: int, T: int) -> Iterator[bytes]:
    """All reduced words of length T in rank order of the positional ranking."""
    for rank in range(reduced_word_count(k, T)):
        yield _unrank_reduced(k, T, rank)
