""" Common housekeeping for tests that rely on atlases and temp files """

from os import unlink
from tempfile import mkstemp
from typing import Dict, List
from unittest import TestCase

from hypothesis.strategies import composite, DrawFn, integers, lists

from pivatlas.atlas import Atlas, build
from pivatlas.bitmatrix import BitMatrix, parse_pattern

# 6x6 example where minimum fill-in does worst against the optimum
EXAMPLE = "111111/111111/001111/000111/000011/000000"

_atlases: Dict[int, Atlas] = {0: Atlas.empty()}


def atlases(n: int) -> Dict[int, Atlas]:
    """Atlases of sizes 0 to n, built once per test run"""
    top = max(_atlases)
    for size in range(top + 1, n + 1):
        _atlases[size] = build(size, _atlases[size - 1])
    return dict((k, v) for k, v in _atlases.items() if k <= n)


@composite
def matrices(
    draw: DrawFn, min_dim: int = 1, max_dim: int = 6, square: bool = False
) -> BitMatrix:
    n_rows = draw(integers(min_dim, max_dim))
    n_cols = n_rows if square else draw(integers(min_dim, max_dim))
    rows = draw(
        lists(integers(0, (1 << n_cols) - 1), min_size=n_rows, max_size=n_rows)
    )
    return BitMatrix.from_rows(n_cols, rows)


def example() -> BitMatrix:
    return parse_pattern(EXAMPLE)


def all_matrices(n: int) -> List[BitMatrix]:
    """Every raw n x n pattern"""
    result = []
    for code in range(1 << (n * n)):
        rows = [(code >> (n * i)) & ((1 << n) - 1) for i in range(n)]
        result.append(BitMatrix.from_rows(n, rows))
    return result


class TestWithTempFiles(TestCase):
    def setUp(self) -> None:
        _, self.tmpfilebase = mkstemp(prefix="pivatlas-test")
        self.sfxs: List[str] = [""]

    def tmpfile(self, sfx: str) -> str:
        self.sfxs.append(sfx)
        return self.tmpfilebase + sfx

    def tearDown(self) -> None:
        for sfx in self.sfxs:
            try:
                unlink(self.tmpfilebase + sfx)
            except OSError:
                pass
