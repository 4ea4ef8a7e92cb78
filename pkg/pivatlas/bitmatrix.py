"""
Zero/nonzero pattern matrices over the set {0, *} and one step of
Gaussian elimination on them, with exact operation counts for the
"field" (dividing) and "ring" (fraction free) variants.

A matrix of up to 8x8 is packed into one integer: bit (8 * i + j) is
set iff the entry in row i, column j is nonzero. All indices are 0-based.
"""

from enum import Enum
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple

__all__ = (
    "BitMatrix",
    "CostModel",
    "PatternError",
    "Pivot",
    "PivotError",
    "Profile",
    "density",
    "eliminate",
    "fill_in",
    "format_pattern",
    "is_free_pivot",
    "min_fill_in_pivots",
    "parse_pattern",
    "profile",
    "semiring_add",
    "semiring_mul",
    "step_cost",
)

MAXDIM: int = 8
COLMASK: int = 0x0101010101010101
ZERO = "0"
STAR = "*"


class PatternError(ValueError):
    pass


class PivotError(ValueError):
    pass


def popcount(x: int) -> int:
    return bin(x).count("1")


def semiring_add(x: str, y: str) -> str:
    return STAR if STAR in (x, y) else ZERO


def semiring_mul(x: str, y: str) -> str:
    return STAR if x == STAR and y == STAR else ZERO


class CostModel(Enum):
    FIELD = 0  # multipliers are formed by dividing by the pivot
    RING = 1  # affected rows are multiplied by the pivot


class Pivot(NamedTuple):
    row: int
    col: int

    def __str__(self) -> str:
        """1-based, the way patterns are written down by people"""
        return f"({self.row + 1},{self.col + 1})"


class Profile(NamedTuple):
    row_counts: Tuple[int, ...]
    col_counts: Tuple[int, ...]


class BitMatrix:
    """Immutable n_rows x n_cols zero/nonzero pattern"""

    __slots__ = ("n_rows", "n_cols", "bits")

    n_rows: int
    n_cols: int
    bits: int

    def __init__(self, n_rows: int, n_cols: int, bits: int = 0) -> None:
        if not (0 <= n_rows <= MAXDIM and 0 <= n_cols <= MAXDIM):
            raise PatternError(f"Dimensions {n_rows}x{n_cols} out of range")
        if bits & ~window(n_rows, n_cols):
            raise PatternError(
                f"Bits {bits:#x} outside of {n_rows}x{n_cols} window"
            )
        object.__setattr__(self, "n_rows", n_rows)
        object.__setattr__(self, "n_cols", n_cols)
        object.__setattr__(self, "bits", bits)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError(f"{self.__class__.__name__} is immutable")

    def __reduce__(self) -> Tuple[type, Tuple[int, int, int]]:
        return (self.__class__, (self.n_rows, self.n_cols, self.bits))

    @classmethod
    def from_rows(cls, n_cols: int, rows: Sequence[int]) -> "BitMatrix":
        """Construct from row bytes (column j is bit j of the row byte)"""
        bits = 0
        for i, row in enumerate(rows):
            bits |= row << (8 * i)
        return cls(len(rows), n_cols, bits)

    @classmethod
    def full(cls, n_rows: int, n_cols: int) -> "BitMatrix":
        return cls(n_rows, n_cols, window(n_rows, n_cols))

    def __repr__(self) -> str:
        return "{}({}, {}, {:#x})".format(
            self.__class__.__name__, self.n_rows, self.n_cols, self.bits
        )

    def __str__(self) -> str:
        return format_pattern(self)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, BitMatrix):
            return (self.n_rows, self.n_cols, self.bits) == (
                other.n_rows,
                other.n_cols,
                other.bits,
            )
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.n_rows, self.n_cols, self.bits))

    def __getitem__(self, pos: Tuple[int, int]) -> bool:
        i, j = pos
        return bool(self.bits >> (8 * i + j) & 1)

    def row(self, i: int) -> int:
        return (self.bits >> (8 * i)) & 0xFF

    def rows(self) -> List[int]:
        return [self.row(i) for i in range(self.n_rows)]

    def col(self, j: int) -> int:
        """Column j as a byte, bit i standing for row i"""
        return sum(
            1 << i for i in range(self.n_rows) if self.bits >> (8 * i + j) & 1
        )

    @property
    def popcount(self) -> int:
        return popcount(self.bits)

    @property
    def is_zero(self) -> bool:
        return self.bits == 0

    @property
    def is_square(self) -> bool:
        return self.n_rows == self.n_cols

    def nonzeros(self) -> Iterator[Pivot]:
        """Nonzero positions in lexicographic (row, then column) order"""
        for i in range(self.n_rows):
            row = self.row(i)
            for j in range(self.n_cols):
                if row >> j & 1:
                    yield Pivot(i, j)

    def transposed(self) -> "BitMatrix":
        return BitMatrix.from_rows(
            self.n_rows, [self.col(j) for j in range(self.n_cols)]
        )

    def permuted(
        self, row_perm: Sequence[int], col_perm: Sequence[int]
    ) -> "BitMatrix":
        """Entry (i, j) of the result is entry (row_perm[i], col_perm[j])"""
        rows = []
        for i in range(self.n_rows):
            src = self.row(row_perm[i])
            rows.append(
                sum(
                    1 << j
                    for j in range(self.n_cols)
                    if src >> col_perm[j] & 1
                )
            )
        return BitMatrix.from_rows(self.n_cols, rows)

    def padded(self, n: Optional[int] = None) -> "BitMatrix":
        """Embed top-left into an n x n frame, zero rows/columns added"""
        if n is None:
            n = max(self.n_rows, self.n_cols)
        if n < self.n_rows or n < self.n_cols:
            raise PatternError(
                f"Cannot embed {self.n_rows}x{self.n_cols} into {n}x{n}"
            )
        return BitMatrix(n, n, self.bits)


def window(n_rows: int, n_cols: int) -> int:
    rowmask = (1 << n_cols) - 1
    return sum(rowmask << (8 * i) for i in range(n_rows))


def parse_pattern(text: str) -> BitMatrix:
    """
    Parse "110/011/111" or the same with newlines. '0' or '.' is zero,
    '1' or '*' is nonzero.
    """
    lines = [
        ln.strip() for ln in text.replace("/", "\n").splitlines() if ln.strip()
    ]
    if not lines:
        return BitMatrix(0, 0)
    widths = set(len(ln) for ln in lines)
    if len(widths) != 1:
        raise PatternError(f"Rows of different length in {text!r}")
    n_cols = widths.pop()
    if len(lines) > MAXDIM or n_cols > MAXDIM:
        raise PatternError(f"Pattern {text!r} larger than {MAXDIM}x{MAXDIM}")
    rows = []
    for ln in lines:
        row = 0
        for j, ch in enumerate(ln):
            if ch in "1*":
                row |= 1 << j
            elif ch not in "0.":
                raise PatternError(f"Unexpected character {ch!r} in {ln!r}")
        rows.append(row)
    return BitMatrix.from_rows(n_cols, rows)


def format_pattern(m: BitMatrix, sep: str = "/") -> str:
    return sep.join(
        "".join("1" if m[i, j] else "0" for j in range(m.n_cols))
        for i in range(m.n_rows)
    )


def profile(m: BitMatrix) -> Profile:
    return Profile(
        tuple(popcount(m.row(i)) for i in range(m.n_rows)),
        tuple(popcount(m.bits & (COLMASK << j)) for j in range(m.n_cols)),
    )


def _check_pivot(m: BitMatrix, p: Pivot) -> None:
    if not (0 <= p.row < m.n_rows and 0 <= p.col < m.n_cols):
        raise PivotError(f"Pivot {p} outside of {m.n_rows}x{m.n_cols}")
    if not m[p]:
        raise PivotError(f"Pivot {p} is on a zero entry of {m}")


def _counts(m: BitMatrix, p: Pivot) -> Tuple[int, int]:
    _check_pivot(m, p)
    return popcount(m.row(p.row)), popcount(m.bits & (COLMASK << p.col))


def fill_in(m: BitMatrix, p: Pivot) -> int:
    r, c = _counts(m, p)
    return (r - 1) * (c - 1)


def is_free_pivot(m: BitMatrix, p: Pivot) -> bool:
    r, c = _counts(m, p)
    return r == 1 or c == 1


def _affected_rows(m: BitMatrix, p: Pivot) -> List[int]:
    return [k for k in range(m.n_rows) if k != p.row and m.row(k) >> p.col & 1]


def step_cost(m: BitMatrix, p: Pivot, model: CostModel) -> int:
    r, c = _counts(m, p)
    if r == 1 or c == 1:
        return 0
    prow = m.row(p.row) & ~(1 << p.col)
    affected = [m.row(k) for k in _affected_rows(m, p)]
    clashes = sum(popcount(row & prow) for row in affected)
    products = (r - 1) * (c - 1)
    if model is CostModel.FIELD:
        return (c - 1) + products + clashes
    return sum(popcount(row) - 1 for row in affected) + products + clashes


def _drop_col(row: int, j: int) -> int:
    return (row & ((1 << j) - 1)) | ((row >> (j + 1)) << j)


def eliminate(m: BitMatrix, p: Pivot) -> BitMatrix:
    """
    One elimination step: the pivot row is added into every row that
    has a nonzero in the pivot column, then the pivot row and column
    are removed. Same pattern for both cost models.
    """
    _check_pivot(m, p)
    prow = m.row(p.row)
    rows = []
    for k in range(m.n_rows):
        if k == p.row:
            continue
        row = m.row(k)
        if row >> p.col & 1:
            row |= prow
        rows.append(_drop_col(row, p.col))
    return BitMatrix.from_rows(m.n_cols - 1, rows)


def min_fill_in_pivots(m: BitMatrix) -> List[Pivot]:
    """Pivots of minimal fill-in, in lexicographic order; [] if m is zero"""
    rows, cols = profile(m)
    best: List[Pivot] = []
    bestfill = -1
    for p in m.nonzeros():
        fill = (rows[p.row] - 1) * (cols[p.col] - 1)
        if bestfill < 0 or fill < bestfill:
            best, bestfill = [p], fill
        elif fill == bestfill:
            best.append(p)
    return best


def free_pivots(m: BitMatrix) -> List[Pivot]:
    rows, cols = profile(m)
    return [p for p in m.nonzeros() if rows[p.row] == 1 or cols[p.col] == 1]


def density(m: BitMatrix) -> float:
    cells = m.n_rows * m.n_cols
    return m.popcount / cells if cells else 0.0
