""" Pattern matrices and single elimination steps """

from pickle import dumps, loads
import unittest

from hypothesis import given, settings

from pivatlas.bitmatrix import *
from pivatlas.bitmatrix import free_pivots, STAR, ZERO
from .common import example, matrices


class Semiring(unittest.TestCase):
    def test_tables(self) -> None:
        self.assertEqual(semiring_add(ZERO, ZERO), ZERO)
        self.assertEqual(semiring_add(ZERO, STAR), STAR)
        self.assertEqual(semiring_add(STAR, STAR), STAR)
        self.assertEqual(semiring_mul(ZERO, STAR), ZERO)
        self.assertEqual(semiring_mul(STAR, ZERO), ZERO)
        self.assertEqual(semiring_mul(STAR, STAR), STAR)


class Representation(unittest.TestCase):
    def test_parse(self) -> None:
        m = parse_pattern("110/011/111")
        self.assertEqual((m.n_rows, m.n_cols), (3, 3))
        self.assertEqual(m.bits, 0x3 | 0x6 << 8 | 0x7 << 16)
        self.assertEqual(parse_pattern("**.\n.**\n***"), m)
        self.assertEqual(format_pattern(m), "110/011/111")
        self.assertEqual(str(m), "110/011/111")

    def test_bad_patterns(self) -> None:
        with self.assertRaises(PatternError):
            parse_pattern("110/01")
        with self.assertRaises(PatternError):
            parse_pattern("1x0")
        with self.assertRaises(PatternError):
            parse_pattern("/".join(["1"] * 9))

    def test_window(self) -> None:
        with self.assertRaises(PatternError):
            BitMatrix(2, 2, 1 << 2)
        with self.assertRaises(PatternError):
            BitMatrix(2, 2, 1 << 16)
        with self.assertRaises(PatternError):
            BitMatrix(9, 1)
        self.assertEqual(BitMatrix.full(2, 3).bits, 0x707)

    def test_equality(self) -> None:
        self.assertEqual(BitMatrix(2, 2, 1), BitMatrix(2, 2, 1))
        self.assertNotEqual(BitMatrix(2, 2, 1), BitMatrix(2, 3, 1))
        self.assertEqual(len({BitMatrix(2, 2, 1), BitMatrix(2, 2, 1)}), 1)

    def test_immutable(self) -> None:
        m = BitMatrix(1, 1, 1)
        with self.assertRaises(AttributeError):
            m.bits = 0  # type: ignore
        self.assertEqual(loads(dumps(m)), m)

    def test_nonzeros_order(self) -> None:
        m = parse_pattern("011/100")
        self.assertEqual(
            list(m.nonzeros()), [Pivot(0, 1), Pivot(0, 2), Pivot(1, 0)]
        )
        self.assertEqual(str(Pivot(0, 1)), "(1,2)")

    def test_permute_transpose_pad(self) -> None:
        m = parse_pattern("110/001")
        self.assertEqual(format_pattern(m.transposed()), "10/10/01")
        self.assertEqual(
            format_pattern(m.permuted([1, 0], [2, 0, 1])), "100/011"
        )
        self.assertEqual(format_pattern(m.padded()), "110/001/000")
        with self.assertRaises(PatternError):
            m.padded(2)

    def test_profile(self) -> None:
        m = parse_pattern("110/011/111")
        self.assertEqual(profile(m), Profile((2, 2, 3), (2, 3, 2)))
        self.assertAlmostEqual(density(m), 7 / 9)


class Elimination(unittest.TestCase):
    def test_full_2x2(self) -> None:
        m = BitMatrix.full(2, 2)
        for p in m.nonzeros():
            self.assertEqual(fill_in(m, p), 1)
            self.assertEqual(step_cost(m, p, CostModel.FIELD), 3)
            self.assertEqual(step_cost(m, p, CostModel.RING), 3)
            self.assertEqual(eliminate(m, p), BitMatrix.full(1, 1))

    def test_free(self) -> None:
        m = parse_pattern("10/01")
        self.assertEqual(free_pivots(m), [Pivot(0, 0), Pivot(1, 1)])
        self.assertTrue(is_free_pivot(m, Pivot(0, 0)))
        self.assertEqual(step_cost(m, Pivot(1, 1), CostModel.RING), 0)
        self.assertEqual(eliminate(m, Pivot(0, 0)), BitMatrix.full(1, 1))

    def test_min_fill_in(self) -> None:
        m = parse_pattern("110/011/111")
        self.assertEqual(min_fill_in_pivots(m), [Pivot(0, 0), Pivot(1, 2)])
        self.assertEqual(min_fill_in_pivots(BitMatrix(3, 3)), [])

    def test_bad_pivot(self) -> None:
        m = parse_pattern("10/01")
        with self.assertRaises(PivotError):
            eliminate(m, Pivot(0, 1))
        with self.assertRaises(PivotError):
            step_cost(m, Pivot(2, 0), CostModel.FIELD)

    def test_example_steps(self) -> None:
        m = example()
        self.assertEqual(min_fill_in_pivots(m), [Pivot(4, 4), Pivot(4, 5)])
        self.assertEqual(fill_in(m, Pivot(0, 0)), 5)
        self.assertEqual(step_cost(m, Pivot(0, 0), CostModel.FIELD), 11)
        self.assertEqual(step_cost(m, Pivot(0, 0), CostModel.RING), 15)
        self.assertEqual(step_cost(m, Pivot(4, 4), CostModel.FIELD), 12)
        self.assertEqual(step_cost(m, Pivot(4, 4), CostModel.RING), 23)
        self.assertEqual(
            format_pattern(eliminate(m, Pivot(4, 4))),
            "11111/11111/00111/00011/00000",
        )

    def test_sketch(self) -> None:
        m = parse_pattern("110/011/111")
        self.assertEqual(step_cost(m, Pivot(0, 0), CostModel.FIELD), 3)
        self.assertEqual(step_cost(m, Pivot(0, 0), CostModel.RING), 4)
        self.assertEqual(eliminate(m, Pivot(0, 0)), BitMatrix.full(2, 2))
        # neither model dominates the other
        m = parse_pattern("11/10")
        self.assertEqual(step_cost(m, Pivot(0, 0), CostModel.FIELD), 2)
        self.assertEqual(step_cost(m, Pivot(0, 0), CostModel.RING), 1)

    def test_example_profile(self) -> None:
        m = example()
        self.assertEqual(
            profile(m), Profile((6, 6, 4, 3, 2, 0), (2, 2, 3, 4, 5, 5))
        )
        self.assertEqual(m.popcount, 21)
        self.assertAlmostEqual(density(m), 21 / 36)
        self.assertEqual(fill_in(m, Pivot(4, 4)), 4)

    def test_free_pivots_commute(self) -> None:
        m = parse_pattern("1000/0100/0011/0011")
        first, second = eliminate(m, Pivot(0, 0)), eliminate(m, Pivot(1, 1))
        for rest in (first, second):
            self.assertTrue(is_free_pivot(rest, Pivot(0, 0)))
            for model in CostModel:
                self.assertEqual(step_cost(rest, Pivot(0, 0), model), 0)
        self.assertEqual(
            eliminate(first, Pivot(0, 0)), eliminate(second, Pivot(0, 0))
        )
        self.assertEqual(str(eliminate(first, Pivot(0, 0))), "11/11")

    def test_minimum_fill_in_chain(self) -> None:
        m = example()
        field = ring = 0
        while not m.is_zero:
            p = min_fill_in_pivots(m)[0]
            field += step_cost(m, p, CostModel.FIELD)
            ring += step_cost(m, p, CostModel.RING)
            m = eliminate(m, p)
        self.assertEqual((field, ring), (32, 55))

    @settings(max_examples=200)
    @given(matrices())
    def test_step_properties(self, m: BitMatrix) -> None:
        for p in m.nonzeros():
            rest = eliminate(m, p)
            self.assertEqual(
                (rest.n_rows, rest.n_cols), (m.n_rows - 1, m.n_cols - 1)
            )
            free = is_free_pivot(m, p)
            for model in CostModel:
                cost = step_cost(m, p, model)
                self.assertEqual(cost == 0, free)
                self.assertGreaterEqual(cost, fill_in(m, p))
            # no cancellation: entries away from the pivot never vanish
            rows = [i for i in range(m.n_rows) if i != p.row]
            cols = [j for j in range(m.n_cols) if j != p.col]
            for ii, i in enumerate(rows):
                for jj, j in enumerate(cols):
                    if m[i, j]:
                        self.assertTrue(rest[ii, jj])


if __name__ == "__main__":
    unittest.main()
