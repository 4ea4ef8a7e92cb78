""" Cost atlases against the direct recursion, persistence and formats """

from os.path import getsize
import unittest

import numpy as np

from pivatlas.atlas import *
from pivatlas.atlas import (
    build_chain,
    COMBOS,
    CSV_COLUMNS,
    records_for,
    ZERO_RECORD,
)
from pivatlas.bitmatrix import (
    BitMatrix,
    CostModel,
    eliminate,
    free_pivots,
    parse_pattern,
    step_cost,
)
from pivatlas.canon import canonical, canonical_words, ResourceGuardError
from .common import all_matrices, atlases, example, TestWithTempFiles

CLASSES = {1: 2, 2: 7, 3: 36, 4: 317, 5: 5624}


class Build(unittest.TestCase):
    def test_sizes(self) -> None:
        for n, atlas in atlases(5).items():
            if n:
                self.assertEqual(len(atlas), CLASSES[n])
                self.assertEqual(sum(atlas.weights.values()), 1 << (n * n))

    def test_base_case(self) -> None:
        atlas = atlases(1)[1]
        self.assertEqual(atlas[0], ZERO_RECORD)
        for c in atlas[1]:
            self.assertEqual((c.costmin, c.costmax, c.costmed), (0, 0, 0.0))

    def test_full_2x2(self) -> None:
        rec = lookup(atlases(2)[2], BitMatrix.full(2, 2))
        for model in CostModel:
            for mode in Mode:
                c = rec.get(model, mode)
                self.assertEqual((c.costmin, c.costmax, c.costmed), (3, 3, 3))

    def test_chain_needs_predecessor(self) -> None:
        with self.assertRaises(IntegrityError):
            build(3)
        with self.assertRaises(IntegrityError):
            build(3, atlases(1)[1])

    def test_missing_successor(self) -> None:
        crippled = Atlas(1, {0: ZERO_RECORD})
        with self.assertRaises(IntegrityError):
            records_for(crippled, [BitMatrix.full(2, 2)])

    def test_worker_count_irrelevant(self) -> None:
        prev = atlases(4)[4]
        self.assertEqual(build(5, prev, workers=3), atlases(5)[5])

    def test_build_chain(self) -> None:
        chain = list(build_chain(3))
        self.assertEqual([a.n for a in chain], [1, 2, 3])
        self.assertEqual(chain[-1], atlases(3)[3])


class Records(unittest.TestCase):
    def test_invariants(self) -> None:
        built = atlases(5)
        for n in range(1, 6):
            prev = built[n - 1]
            for key, rec in built[n].items():
                m = BitMatrix(n, n, key)
                for model in CostModel:
                    self.assertLessEqual(
                        rec.get(model, Mode.ALL).costmin,
                        rec.get(model, Mode.MINFILLIN).costmin,
                    )
                for (model, mode), c in zip(COMBOS, rec):
                    self.assertLessEqual(c.costmin, c.costmed)
                    self.assertLessEqual(c.costmed, c.costmax)
                    if m.is_zero:
                        self.assertIsNone(c.best)
                        continue
                    for p, low in ((c.best, True), (c.worst, False)):
                        assert p is not None
                        self.assertTrue(m[p])
                        rest = prev[canonical(eliminate(m, p)).bits]
                        got = rest.get(model, mode)
                        value = step_cost(m, p, model) + (
                            got.costmin if low else got.costmax
                        )
                        self.assertEqual(
                            value, c.costmin if low else c.costmax
                        )

    def test_free_pivot_independence(self) -> None:
        built = atlases(5)
        for n in (4, 5):
            prev = built[n - 1]
            for key, rec in built[n].items():
                m = BitMatrix(n, n, key)
                free = free_pivots(m)
                if len(free) < 2:
                    continue
                for p in free:
                    rest = prev[canonical(eliminate(m, p)).bits]
                    self.assertEqual(
                        [c[:3] for c in rest], [c[:3] for c in rec]
                    )

    def test_lookup_invariance(self) -> None:
        atlas = atlases(4)[4]
        m = parse_pattern("1100/0110/0011/1001")
        rec = lookup(atlas, m)
        other = m.permuted([2, 0, 3, 1], [1, 3, 0, 2])
        self.assertEqual(lookup(atlas, other), rec)
        self.assertEqual(lookup(atlas, BitMatrix(4, 4)), ZERO_RECORD)
        with self.assertRaises(IntegrityError):
            lookup(atlas, BitMatrix(3, 3))


class Oracle(unittest.TestCase):
    def test_small_cases(self) -> None:
        full = BitMatrix.full(2, 2)
        self.assertEqual(
            oracle_cost(full, CostModel.FIELD, Mode.ALL), (3, 3, 3)
        )
        zero = BitMatrix(4, 4)
        for model, mode in COMBOS:
            self.assertEqual(oracle_cost(zero, model, mode), (0, 0, 0))
        with self.assertRaises(ResourceGuardError):
            oracle_cost(BitMatrix(5, 5), CostModel.FIELD, Mode.ALL)

    def test_example(self) -> None:
        m = example()
        expected = {
            (CostModel.FIELD, Mode.ALL): 11,
            (CostModel.FIELD, Mode.MINFILLIN): 32,
            (CostModel.RING, Mode.ALL): 15,
            (CostModel.RING, Mode.MINFILLIN): 55,
        }
        for (model, mode), costmin in expected.items():
            got = oracle_cost(m, model, mode, allow_large=True)
            self.assertEqual(got[0], costmin)

    def _sweep(self, n: int) -> None:
        atlas = atlases(n)[n]
        raw = all_matrices(n)
        words, _ = canonical_words(
            np.array([m.rows() for m in raw], dtype=np.uint8), n
        )
        for m, key in zip(raw, words.tolist()):
            rec = atlas[key]
            for (model, mode), c in zip(COMBOS, rec):
                self.assertEqual(
                    oracle_cost(m, model, mode),
                    (c.costmin, c.costmax, c.costmed),
                    f"{m} {model} {mode}",
                )

    def test_all_3x3(self) -> None:
        self._sweep(3)

    def test_all_4x4(self) -> None:
        self._sweep(4)


class Persistence(TestWithTempFiles):
    def test_binary_round_trip(self) -> None:
        atlas = atlases(4)[4]
        path = self.tmpfile(".pivdb")
        save(atlas, path)
        self.assertEqual(getsize(path), 24 + 40 * 317)
        loaded = load(path)
        self.assertEqual(loaded.n, 4)
        self.assertEqual(len(loaded), 317)
        for key, rec in atlas.items():
            for c, d in zip(rec, loaded[key]):
                self.assertEqual(c[:2] + c[3:], d[:2] + d[3:])
                self.assertEqual(round(c.costmed * 4) / 4, d.costmed)
        again = self.tmpfile(".again")
        save(loaded, again)
        with open(path, "rb") as f1, open(again, "rb") as f2:
            self.assertEqual(f1.read(), f2.read())

    def test_bad_files(self) -> None:
        atlas = atlases(3)[3]
        path = self.tmpfile(".pivdb")
        save(atlas, path)
        with open(path, "rb") as fl:
            data = fl.read()
        for bad in (data[:10], data[:-1], b"NOTATLAS" + data[8:]):
            with open(path, "wb") as fl:
                fl.write(bad)
            with self.assertRaises(FormatError):
                load(path)

    def test_csv_round_trip(self) -> None:
        atlas = atlases(4)[4]
        path = self.tmpfile(".csv")
        export_csv(atlas, path, "# pivatlas test")
        with open(path) as fl:
            lines = fl.read().splitlines()
        self.assertEqual(lines[0], "# pivatlas test")
        self.assertEqual(lines[1].split(","), list(CSV_COLUMNS))
        self.assertEqual(len(lines), 2 + 4 * 317)
        loaded = import_csv(path)
        self.assertEqual(loaded, atlas)
        self.assertEqual(loaded.weights, atlas.weights)


if __name__ == "__main__":
    unittest.main()
