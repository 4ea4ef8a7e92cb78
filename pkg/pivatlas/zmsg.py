""" Zeromq messages between the fan-out driver and its workers """

from pickle import dumps, loads
from struct import calcsize, pack, unpack
from typing import Any, Tuple

__all__ = "READY", "Result", "STOP", "Task"

STOP: int = 0xFFFFFFFFFFFFFFFF  # task sequence number telling to exit
READY: int = 0xFFFFFFFFFFFFFFFE  # result sequence number of a fresh worker


class _Zmsg:
    """
    Fixed fields packed with the HEADER struct format, in KWARGS order,
    followed by the pickled PAYLOAD field.
    """

    HEADER: str
    KWARGS: Tuple[Tuple[str, Any], ...]
    PAYLOAD: str

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        if len(args) == 1 and not kwargs:
            self.decode(args[0])
        elif kwargs and not args:
            for k, v in self.KWARGS + ((self.PAYLOAD, None),):
                setattr(self, k, kwargs.get(k, v))
        else:
            raise RuntimeError(
                f"{self.__class__.__name__}: need a buffer or keywords,"
                f" got {args!r} and {kwargs!r}"
            )

    def _fields(self) -> Tuple[str, ...]:
        return tuple(k for k, _ in self.KWARGS) + (self.PAYLOAD,)

    def __repr__(self) -> str:
        return "{}({})".format(
            self.__class__.__name__,
            ", ".join(f"{k}={getattr(self, k)!r}" for k in self._fields()),
        )

    def __eq__(self, other: object) -> bool:
        if isinstance(other, self.__class__):
            return all(
                getattr(self, k) == getattr(other, k) for k in self._fields()
            )
        return NotImplemented

    def decode(self, buffer: bytes) -> None:
        size = calcsize(self.HEADER)
        values = unpack(self.HEADER, buffer[:size])
        for (k, v), val in zip(self.KWARGS, values):
            setattr(self, k, type(v)(val))
        setattr(self, self.PAYLOAD, loads(buffer[size:]))

    @property
    def packed(self) -> bytes:
        header = [int(getattr(self, k)) for k, _ in self.KWARGS]
        return pack(self.HEADER, *header) + dumps(getattr(self, self.PAYLOAD))


class Task(_Zmsg):
    """Unit of work pushed to a worker"""

    seq: int
    item: Any

    HEADER = "!Q"
    KWARGS = (("seq", 0),)
    PAYLOAD = "item"


class Result(_Zmsg):
    """Outcome of a task, or a readiness notice, pushed back by a worker"""

    seq: int
    pid: int
    ok: bool
    value: Any

    HEADER = "!QIB"
    KWARGS = (("seq", 0), ("pid", 0), ("ok", True))
    PAYLOAD = "value"
