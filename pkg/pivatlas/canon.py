"""
Normal forms of square patterns up to row permutation and up to
row and column permutation, and enumeration of the classes.

Row order: a row is read as an n-bit number with column 0 as the most
significant bit; row_sorted() puts rows in non-increasing order of that
number. The canonical form of a matrix is the row-sorted image with the
smallest bit word over all column permutations. Atlas files are keyed
by that word, so these conventions must never change.
"""

from collections import Counter
from functools import lru_cache
from itertools import permutations
from logging import getLogger
from math import comb, factorial
from struct import pack, unpack
from typing import (
    Dict,
    Iterable,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from .bitmatrix import BitMatrix, MAXDIM
from .workers import fanout

__all__ = (
    "CanonicalKey",
    "ResourceGuardError",
    "canonical",
    "canonical_words",
    "class_weights",
    "count_row_classes",
    "enumerate_canonical_classes",
    "enumerate_row_classes",
    "row_sorted",
    "scan_canonical_classes",
    "scan_classes",
)

log = getLogger("pivatlas.canon")

ClassWeight = int

DESK_LIMIT: int = 6  # largest n enumerated without an override
ENUM_LIMIT: int = 7  # largest n enumerated at all
CHUNK_ELEMS: int = 1 << 21  # bound on (permutations x matrices x rows)


class ResourceGuardError(RuntimeError):
    pass


class CanonicalKey(NamedTuple):
    n: int
    bits: int

    @property
    def matrix(self) -> BitMatrix:
        return BitMatrix(self.n, self.n, self.bits)

    @property
    def hex(self) -> str:
        return f"{self.bits:016x}"


def guard(n: int, allow_large: bool = False) -> None:
    if n < 1 or n > ENUM_LIMIT:
        raise ResourceGuardError(f"Enumeration of size {n} is not supported")
    if n > DESK_LIMIT and not allow_large:
        raise ResourceGuardError(
            f"Enumeration of size {n} needs the large size override"
        )


@lru_cache(maxsize=None)
def _reverse(n: int) -> np.ndarray:
    """Layout byte <-> row value; the map is its own inverse"""
    rev = np.zeros(1 << n, dtype=np.uint8)
    for b in range(1 << n):
        rev[b] = sum(1 << (n - 1 - j) for j in range(n) if b >> j & 1)
    return rev


@lru_cache(maxsize=None)
def _perm_table(n: int) -> np.ndarray:
    """
    Row values under every column permutation: shape (n!, 2**n).
    Permutation s sends column s[j] to column j.
    """
    rev = _reverse(n)
    vals = np.arange(1 << n)
    bits = (vals[:, None] >> np.arange(n)) & 1
    weights = 1 << np.arange(n)
    perms = list(permutations(range(n)))
    table = np.zeros((len(perms), 1 << n), dtype=np.uint8)
    for p, sigma in enumerate(perms):
        moved = bits[:, list(sigma)] @ weights
        table[p, rev[vals]] = rev[moved]
    return table


def _words_of(rows: np.ndarray) -> np.ndarray:
    """(..., k) layout bytes to (...) words, row i in byte i"""
    shifts = np.arange(rows.shape[-1], dtype=np.uint64) * np.uint64(8)
    return (rows.astype(np.uint64) << shifts).sum(axis=-1, dtype=np.uint64)


def _rows_of(words: np.ndarray, k: int) -> np.ndarray:
    """Inverse of _words_of for k rows"""
    return (
        np.ascontiguousarray(words, dtype="<u8")
        .view(np.uint8)
        .reshape(-1, 8)[:, :k]
    )


def _canonical_chunk(
    rows: np.ndarray, n: int, distinct: bool
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    rev = _reverse(n)
    images = _perm_table(n)[:, rev[rows]]  # (n!, B, k) row values
    images.sort(axis=-1)
    words = _words_of(rev[images[..., ::-1]])  # (n!, B)
    if not distinct:
        return words.min(axis=0), None
    words.sort(axis=0)
    count = 1 + (np.diff(words, axis=0) != 0).sum(axis=0)
    return words[0], count


def canonical_words(
    rows: np.ndarray, n: int, distinct: bool = False
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Canonical words of a batch of matrices with k rows and n columns,
    given as a (B, k) array of layout bytes. With `distinct`, also the
    number of different row-sorted images over all column permutations.
    """
    rows = np.asarray(rows, dtype=np.uint8)
    if rows.ndim != 2:
        raise ValueError(f"Expected a (B, k) array, got shape {rows.shape}")
    batch, k = rows.shape
    if batch == 0 or k == 0 or n == 0:
        zeros = np.zeros(batch, dtype=np.uint64)
        return zeros, (np.ones(batch, dtype=np.int64) if distinct else None)
    step = max(1, CHUNK_ELEMS // (factorial(n) * k))
    wparts: List[np.ndarray] = []
    cparts: List[np.ndarray] = []
    for lo in range(0, batch, step):
        words, count = _canonical_chunk(rows[lo : lo + step], n, distinct)
        wparts.append(words)
        if count is not None:
            cparts.append(count)
    return (
        np.concatenate(wparts),
        np.concatenate(cparts) if distinct else None,
    )


def row_sorted(m: BitMatrix) -> BitMatrix:
    rev = _reverse(m.n_cols)
    return BitMatrix.from_rows(
        m.n_cols, sorted(m.rows(), key=lambda b: int(rev[b]), reverse=True)
    )


def canonical(m: BitMatrix) -> CanonicalKey:
    if not m.is_square:
        raise ValueError(f"Canonical form needs a square matrix, got {m!r}")
    if m.n_rows == 0:
        return CanonicalKey(0, 0)
    words, _ = canonical_words(np.array([m.rows()], dtype=np.uint8), m.n_cols)
    return CanonicalKey(m.n_rows, int(words[0]))


def _multiset_factor(rows: Iterable[int]) -> int:
    """Number of distinct row orders of a row multiset"""
    rows = list(rows)
    result = factorial(len(rows))
    for mult in Counter(rows).values():
        result //= factorial(mult)
    return result


def class_weights(words: Sequence[int], n: int) -> List[ClassWeight]:
    """Number of raw n x n matrices in each of the given classes"""
    if not len(words):
        return []
    rows = _rows_of(np.asarray(words, dtype=np.uint64), n)
    _, distinct = canonical_words(rows, n, distinct=True)
    assert distinct is not None
    return [
        int(cnt) * _multiset_factor(rws.tolist())
        for cnt, rws in zip(distinct, rows)
    ]


def count_row_classes(n: int) -> int:
    if n < 1 or n > MAXDIM:
        raise ValueError(f"Size {n} out of range")
    return comb((1 << n) + n - 1, n)


def _row_sorted_words(
    n: int, top_rows: Optional[Iterable[int]] = None
) -> Iterator[int]:
    """
    Words of row-sorted n x n matrices in ascending order. The last row
    is the most significant byte; `top_rows` restricts it to a range.
    """
    rev = [int(x) for x in _reverse(n)]
    order = range(1 << n)

    def extend(i: int, floor: int, word: int) -> Iterator[int]:
        if i < 0:
            yield word
            return
        for b in order:
            if rev[b] >= floor:
                yield from extend(i - 1, rev[b], word | b << (8 * i))

    for b in order if top_rows is None else sorted(top_rows):
        yield from extend(n - 2, rev[b], b << (8 * (n - 1)))


def enumerate_row_classes(
    n: int, allow_large: bool = False
) -> Iterator[BitMatrix]:
    guard(n, allow_large)
    for word in _row_sorted_words(n):
        yield BitMatrix(n, n, word)


def _batched(words: Iterable[int], size: int) -> Iterator[List[int]]:
    batch: List[int] = []
    for word in words:
        batch.append(word)
        if len(batch) >= size:
            yield batch
            batch = []
    if batch:
        yield batch


def scan_canonical_classes(
    n: int, top_rows: Optional[Iterable[int]] = None
) -> Dict[int, ClassWeight]:
    """
    Canonicalise every row-sorted matrix whose last row is in `top_rows`
    (all of them by default), accumulating raw matrix counts per class.
    Disjoint `top_rows` give disjoint parts of the row class stream.
    """
    weights: Dict[int, ClassWeight] = {}
    step = max(1, CHUNK_ELEMS // (factorial(n) * n))
    for batch in _batched(_row_sorted_words(n, top_rows), step):
        rows = _rows_of(np.array(batch, dtype=np.uint64), n)
        keys, _ = canonical_words(rows, n)
        for key, rws in zip(keys.tolist(), rows.tolist()):
            weights[key] = weights.get(key, 0) + _multiset_factor(rws)
    return weights


def _scan_part(n: int, top_rows: List[int]) -> Dict[int, ClassWeight]:
    return scan_canonical_classes(n, top_rows)


def scan_classes(
    n: int, workers: int = 1, allow_large: bool = False
) -> Dict[int, ClassWeight]:
    """
    Every class of n x n patterns with its raw matrix count, in
    ascending key order, by canonicalising every row-sorted matrix.
    The scan is split by last row over `workers` processes.
    """
    guard(n, allow_large)
    tops = [[top] for top in range(1 << n)]
    merged: Dict[int, ClassWeight] = {}
    for part in fanout(_scan_part, n, tops, workers):
        for key, weight in part.items():
            merged[key] = merged.get(key, 0) + weight
    log.info("Size %d: %d classes scanned", n, len(merged))
    return dict(sorted(merged.items()))


def _augment(frontier: np.ndarray, n: int) -> np.ndarray:
    """Classes of (k+1)-row matrices from classes of k-row ones"""
    nvals = 1 << n
    reps = np.repeat(frontier, nvals, axis=0)
    extra = np.tile(np.arange(nvals, dtype=np.uint8), len(frontier))
    cand = np.concatenate([reps, extra[:, None]], axis=1)
    words, _ = canonical_words(cand, n)
    return _rows_of(np.unique(words), frontier.shape[1] + 1)


def enumerate_canonical_classes(
    n: int, allow_large: bool = False
) -> Iterator[Tuple[CanonicalKey, ClassWeight]]:
    """
    Every class of n x n patterns up to row and column permutation,
    in ascending key order, with the number of raw matrices in it.
    Classes are grown one row at a time: every k-row class arises from
    some (k-1)-row class by appending a row.
    """
    guard(n, allow_large)
    frontier = np.zeros((1, 0), dtype=np.uint8)
    for k in range(1, n + 1):
        frontier = _augment(frontier, n)
        log.debug("%d classes of %dx%d patterns", len(frontier), k, n)
    words = _words_of(frontier).tolist()
    for word, weight in zip(words, class_weights(words, n)):
        yield CanonicalKey(n, int(word)), weight


def dump_keys(keys: Iterable[CanonicalKey], path: str) -> None:
    with open(path, "wb") as fl:
        for key in sorted(keys):
            fl.write(pack("<Q", key.bits))


def load_keys(path: str, n: int) -> List[CanonicalKey]:
    with open(path, "rb") as fl:
        data = fl.read()
    if len(data) % 8:
        raise ValueError(f"{path}: length {len(data)} is not a multiple of 8")
    return [
        CanonicalKey(n, bits)
        for (bits,) in (
            unpack("<Q", data[i : i + 8]) for i in range(0, len(data), 8)
        )
    ]
