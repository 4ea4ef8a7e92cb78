"""
Exhaustive elimination cost database.

For every class of n x n patterns up to row and column permutation the
atlas holds the least, greatest and median total elimination cost over
all pivot sequences, together with a best and a worst first pivot, for
both cost models, once with all nonzero pivots allowed and once with
only pivots of minimal fill-in. Size n is computed from size n - 1 by
doing one elimination step and looking the remainder up.
"""

from csv import reader, writer
from enum import Enum
from functools import lru_cache
from logging import getLogger
from statistics import median
from struct import calcsize, pack, unpack
from time import time
from typing import (
    Dict,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from .bitmatrix import (
    BitMatrix,
    CostModel,
    Pivot,
    eliminate,
    free_pivots,
    min_fill_in_pivots,
    step_cost,
)
from .canon import (
    canonical,
    canonical_words,
    class_weights,
    enumerate_canonical_classes,
    ResourceGuardError,
)
from .workers import fanout

__all__ = (
    "Atlas",
    "ClassRecord",
    "Costs",
    "FormatError",
    "IntegrityError",
    "Mode",
    "build",
    "export_csv",
    "import_csv",
    "load",
    "lookup",
    "oracle_cost",
    "save",
)

log = getLogger("pivatlas.atlas")

MAGIC = b"PIVATLAS"
VERSION = 1
HEADER = "<8sHB5xQ"
RECORD = "<Q" + "HHHBB" * 4
NOPIVOT = 0xFF
MAXCOST = 0xFFFF
QUANTUM = 4  # costmed is stored in units of 1/QUANTUM operation
CHUNK = 2048
ORACLE_LIMIT = 4

CSV_COLUMNS = (
    "key_hex",
    "n",
    "weight",
    "model",
    "mode",
    "costmin",
    "costmax",
    "costmed",
    "best_pivot",
    "worst_pivot",
)


class IntegrityError(Exception):
    pass


class FormatError(IntegrityError):
    pass


class Mode(Enum):
    ALL = 0
    MINFILLIN = 1


COMBOS: Tuple[Tuple[CostModel, Mode], ...] = (
    (CostModel.FIELD, Mode.ALL),
    (CostModel.FIELD, Mode.MINFILLIN),
    (CostModel.RING, Mode.ALL),
    (CostModel.RING, Mode.MINFILLIN),
)


class Costs(NamedTuple):
    costmin: int
    costmax: int
    costmed: float
    best: Optional[Pivot]
    worst: Optional[Pivot]


ZERO_COSTS = Costs(0, 0, 0.0, None, None)


class ClassRecord(NamedTuple):
    """Costs for the four (model, mode) combinations, in COMBOS order"""

    field_all: Costs
    field_minfillin: Costs
    ring_all: Costs
    ring_minfillin: Costs

    def get(self, model: CostModel, mode: Mode) -> Costs:
        return self[COMBOS.index((model, mode))]


ZERO_RECORD = ClassRecord(ZERO_COSTS, ZERO_COSTS, ZERO_COSTS, ZERO_COSTS)


class Atlas:
    """Records of all classes of one size, keyed by canonical bit word"""

    def __init__(
        self,
        n: int,
        records: Dict[int, ClassRecord],
        weights: Optional[Dict[int, int]] = None,
        metadata: Optional[Dict[str, str]] = None,
    ) -> None:
        self.n = n
        self.records = records
        self._weights = weights
        self.metadata = metadata or {}

    @classmethod
    def empty(cls) -> "Atlas":
        """The size 0 atlas: only the empty matrix, which costs nothing"""
        return cls(0, {0: ZERO_RECORD}, {0: 1})

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(n={self.n}, {len(self)} classes)"

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Atlas):
            return self.n == other.n and self.records == other.records
        return NotImplemented

    def keys(self) -> List[int]:
        return sorted(self.records)

    def items(self) -> Iterator[Tuple[int, ClassRecord]]:
        for key in self.keys():
            yield key, self.records[key]

    @property
    def weights(self) -> Dict[int, int]:
        if self._weights is None:
            keys = self.keys()
            self._weights = dict(zip(keys, class_weights(keys, self.n)))
        return self._weights

    def __getitem__(self, key: int) -> ClassRecord:
        try:
            return self.records[key]
        except KeyError:
            raise IntegrityError(
                f"Key {key:#018x} missing from the size {self.n} atlas"
            ) from None


def _checked(value: int, m: BitMatrix) -> int:
    if value > MAXCOST:
        raise IntegrityError(f"Cost {value} of {m} overflows the record")
    return value


def _aggregate(
    m: BitMatrix,
    pivots: Sequence[Pivot],
    steps: Sequence[int],
    succs: Sequence[Costs],
) -> Costs:
    """min / max / median of (step cost + remainder cost) over pivots"""
    lows = [o + s.costmin for o, s in zip(steps, succs)]
    highs = [o + s.costmax for o, s in zip(steps, succs)]
    best = lows.index(min(lows))
    worst = highs.index(max(highs))
    return Costs(
        _checked(lows[best], m),
        _checked(highs[worst], m),
        float(median(o + s.costmed for o, s in zip(steps, succs))),
        pivots[best],
        pivots[worst],
    )


def _record(
    m: BitMatrix, pivots: List[Pivot], succs: List[ClassRecord]
) -> ClassRecord:
    """Record of a matrix without free pivots from its successor records"""
    minfill = set(min_fill_in_pivots(m))
    costs = []
    for model, mode in COMBOS:
        chosen = [
            i for i, p in enumerate(pivots) if mode is Mode.ALL or p in minfill
        ]
        costs.append(
            _aggregate(
                m,
                [pivots[i] for i in chosen],
                [step_cost(m, pivots[i], model) for i in chosen],
                [succs[i].get(model, mode) for i in chosen],
            )
        )
    return ClassRecord(*costs)


def _free_record(free: Pivot, succ: ClassRecord) -> ClassRecord:
    return ClassRecord(
        *(Costs(c.costmin, c.costmax, c.costmed, free, free) for c in succ)
    )


def _plan(m: BitMatrix) -> List[Pivot]:
    """Pivots to try: the first free one if any, otherwise all nonzeros"""
    if m.is_zero:
        return []
    free = free_pivots(m)
    if free:
        return free[:1]
    return list(m.nonzeros())


def records_for(
    prev: Atlas, matrices: Sequence[BitMatrix]
) -> List[ClassRecord]:
    """Records of matrices of size prev.n + 1, successors looked up in prev"""
    plans = [_plan(m) for m in matrices]
    remainders = [
        eliminate(m, p).rows()
        for m, plan in zip(matrices, plans)
        for p in plan
    ]
    if prev.n and remainders:
        words, _ = canonical_words(
            np.array(remainders, dtype=np.uint8), prev.n
        )
        keys = words.tolist()
    else:
        keys = [0] * len(remainders)
    result = []
    pos = 0
    for m, plan in zip(matrices, plans):
        succs = [prev[key] for key in keys[pos : pos + len(plan)]]
        pos += len(plan)
        if not plan:
            result.append(ZERO_RECORD)
        elif len(plan) == 1 and len(free_pivots(m)) > 0:
            result.append(_free_record(plan[0], succs[0]))
        else:
            result.append(_record(m, plan, succs))
    return result


def _build_chunk(
    prev: Atlas, item: Tuple[int, List[int]]
) -> List[ClassRecord]:
    n, keys = item
    return records_for(prev, [BitMatrix(n, n, key) for key in keys])


def build(
    n: int,
    prev: Optional[Atlas] = None,
    workers: int = 1,
    allow_large: bool = False,
) -> Atlas:
    if prev is None:
        if n != 1:
            raise IntegrityError(f"Size {n} atlas needs the size {n - 1} one")
        prev = Atlas.empty()
    if prev.n != n - 1:
        raise IntegrityError(
            f"Size {n} atlas cannot be built from the size {prev.n} one"
        )
    start = time()
    weights = dict(
        (key.bits, weight)
        for key, weight in enumerate_canonical_classes(n, allow_large)
    )
    keys = sorted(weights)
    log.info(
        "Size %d: %d classes enumerated in %.1f s",
        n,
        len(keys),
        time() - start,
    )
    chunks = [(n, keys[i : i + CHUNK]) for i in range(0, len(keys), CHUNK)]
    parts = fanout(_build_chunk, prev, chunks, workers)
    records = {}
    for (_, chunk), recs in zip(chunks, parts):
        records.update(zip(chunk, recs))
    log.info(
        "Size %d: %d records built in %.1f s", n, len(records), time() - start
    )
    return Atlas(n, records, weights, {"n": str(n), "version": str(VERSION)})


def build_chain(
    n: int, workers: int = 1, allow_large: bool = False
) -> Iterator[Atlas]:
    """Atlases of size 1 to n, each built from the one before"""
    prev = None
    for size in range(1, n + 1):
        prev = build(size, prev, workers, allow_large)
        yield prev


def lookup(atlas: Atlas, m: BitMatrix) -> ClassRecord:
    """
    Record of the class of m. Best and worst pivots refer to the
    canonical representative canonical(m).matrix, not to m itself.
    """
    if not m.is_square or m.n_rows != atlas.n:
        raise IntegrityError(
            f"{m.n_rows}x{m.n_cols} matrix looked up in size {atlas.n} atlas"
        )
    return atlas[canonical(m).bits]


@lru_cache(maxsize=None)
def _oracle(
    n_rows: int, n_cols: int, bits: int
) -> Tuple[Tuple[int, int, float], ...]:
    m = BitMatrix(n_rows, n_cols, bits)
    plan = _plan(m)
    if not plan:
        return ((0, 0, 0.0),) * len(COMBOS)
    succs = []
    for p in plan:
        rest = eliminate(m, p)
        succs.append(_oracle(rest.n_rows, rest.n_cols, rest.bits))
    if len(plan) == 1 and free_pivots(m):
        return succs[0]
    minfill = set(min_fill_in_pivots(m))
    result = []
    for idx, (model, mode) in enumerate(COMBOS):
        vals = [
            (step_cost(m, p, model), succ[idx])
            for p, succ in zip(plan, succs)
            if mode is Mode.ALL or p in minfill
        ]
        result.append(
            (
                min(o + s[0] for o, s in vals),
                max(o + s[1] for o, s in vals),
                float(median(o + s[2] for o, s in vals)),
            )
        )
    return tuple(result)


def oracle_cost(
    m: BitMatrix, model: CostModel, mode: Mode, allow_large: bool = False
) -> Tuple[int, int, float]:
    """
    (costmin, costmax, costmed) by direct recursion on the raw matrix,
    no canonical forms involved. Meant as a check on build().
    """
    if max(m.n_rows, m.n_cols) > ORACLE_LIMIT and not allow_large:
        raise ResourceGuardError(
            f"Oracle on {m.n_rows}x{m.n_cols} needs the large size override"
        )
    return _oracle(m.n_rows, m.n_cols, m.bits)[COMBOS.index((model, mode))]


def _pivot_byte(p: Optional[Pivot]) -> int:
    return NOPIVOT if p is None else p.row * 16 + p.col


def _byte_pivot(b: int) -> Optional[Pivot]:
    return None if b == NOPIVOT else Pivot(b >> 4, b & 0xF)


def pack_record(key: int, rec: ClassRecord) -> bytes:
    fields: List[int] = [key]
    for c in rec:
        q = int(round(c.costmed * QUANTUM))
        if q > MAXCOST:
            raise IntegrityError(f"Median {c.costmed} of {key:#x} overflows")
        fields.extend(
            (
                c.costmin,
                c.costmax,
                q,
                _pivot_byte(c.best),
                _pivot_byte(c.worst),
            )
        )
    return pack(RECORD, *fields)


def unpack_record(buffer: bytes) -> Tuple[int, ClassRecord]:
    key, *fields = unpack(RECORD, buffer)
    costs = []
    for i in range(0, len(fields), 5):
        cmin, cmax, q, best, worst = fields[i : i + 5]
        costs.append(
            Costs(
                cmin,
                cmax,
                q / QUANTUM,
                _byte_pivot(best),
                _byte_pivot(worst),
            )
        )
    return key, ClassRecord(*costs)


def save(atlas: Atlas, path: str) -> None:
    with open(path, "wb") as fl:
        fl.write(pack(HEADER, MAGIC, VERSION, atlas.n, len(atlas)))
        for key, rec in atlas.items():
            fl.write(pack_record(key, rec))


def load(path: str) -> Atlas:
    with open(path, "rb") as fl:
        data = fl.read()
    hsize, rsize = calcsize(HEADER), calcsize(RECORD)
    if len(data) < hsize:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, n, count = unpack(HEADER, data[:hsize])
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if len(data) != hsize + rsize * count:
        raise FormatError(
            f"{path}: {len(data)} bytes, expected {hsize + rsize * count}"
            f" for {count} records"
        )
    records = dict(
        unpack_record(data[off : off + rsize])
        for off in range(hsize, len(data), rsize)
    )
    return Atlas(n, records, metadata={"n": str(n), "source": path})


def _pivot_text(p: Optional[Pivot]) -> str:
    return "" if p is None else str(p)


def _text_pivot(s: str) -> Optional[Pivot]:
    if not s:
        return None
    row, col = s.strip("()").split(",")
    return Pivot(int(row) - 1, int(col) - 1)


def export_csv(atlas: Atlas, path: str, meta: Optional[str] = None) -> None:
    """One line per class and (model, mode), medians at full precision"""
    weights = atlas.weights
    with open(path, "w", newline="") as fl:
        if meta:
            fl.write(meta.rstrip("\n") + "\n")
        out = writer(fl)
        out.writerow(CSV_COLUMNS)
        for key, rec in atlas.items():
            for (model, mode), c in zip(COMBOS, rec):
                out.writerow(
                    (
                        f"{key:016x}",
                        atlas.n,
                        weights[key],
                        model.name.lower(),
                        mode.name.lower(),
                        c.costmin,
                        c.costmax,
                        repr(c.costmed),
                        _pivot_text(c.best),
                        _pivot_text(c.worst),
                    )
                )


def import_csv(path: str) -> Atlas:
    rows: Dict[int, Dict[Tuple[CostModel, Mode], Costs]] = {}
    weights: Dict[int, int] = {}
    n = -1
    with open(path, newline="") as fl:
        lines = (ln for ln in fl if not ln.startswith("#"))
        for row in reader(lines):
            if tuple(row) == CSV_COLUMNS:
                continue
            try:
                key = int(row[0], 16)
                n = int(row[1])
                weights[key] = int(row[2])
                combo = (CostModel[row[3].upper()], Mode[row[4].upper()])
                rows.setdefault(key, {})[combo] = Costs(
                    int(row[5]),
                    int(row[6]),
                    float(row[7]),
                    _text_pivot(row[8]),
                    _text_pivot(row[9]),
                )
            except (IndexError, KeyError, ValueError) as e:
                raise FormatError(f"{path}: bad line {row}: {e}") from e
    records = {}
    for key, combos in rows.items():
        if len(combos) != len(COMBOS):
            raise FormatError(f"{path}: incomplete record for {key:#x}")
        records[key] = ClassRecord(*(combos[combo] for combo in COMBOS))
    return Atlas(n, records, weights, {"n": str(n), "source": path})
