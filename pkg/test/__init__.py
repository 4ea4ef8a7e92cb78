""" Tests for pivatlas; run with python -m unittest """

from re import match
from typing import Callable, Tuple

__all__ = ("no_less_than",)


def _version(text: str) -> Tuple[int, ...]:
    vermatch = match(r"\d+(\.\d+)*", text)
    if vermatch is None:
        return ()
    return tuple(int(el) for el in vermatch.group().split("."))


def no_less_than(base: str) -> Callable[[str], bool]:
    """Predicate telling if a version string is at least `base`"""
    return lambda what: _version(what) >= _version(base)
