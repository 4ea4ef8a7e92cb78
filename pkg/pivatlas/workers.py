""" Fan work out to worker processes over zmq and gather the results """

from logging import getLogger
from multiprocessing import Process
from os import close, cpu_count, getpid, unlink
from tempfile import mkstemp
from traceback import format_exc
from typing import Any, Callable, Dict, List, Sequence
import zmq

from .zmsg import READY, Result, STOP, Task

__all__ = "WorkerError", "available_workers", "fanout"

log = getLogger("pivatlas.workers")

Handler = Callable[[Any, Any], Any]

POLL_MS: int = 1000


class WorkerError(RuntimeError):
    pass


def available_workers() -> int:
    return cpu_count() or 1


def runworker(
    venturl: str, sinkurl: str, handler: Handler, context: Any
) -> None:
    # Is this https://github.com/zeromq/pyzmq/issues/1627 still not fixed?!
    zctx = zmq.Context()  # type: ignore
    zpull = zctx.socket(zmq.PULL)  # type: ignore
    zpull.connect(venturl)
    zpush = zctx.socket(zmq.PUSH)  # type: ignore
    zpush.connect(sinkurl)
    zpush.send(Result(seq=READY, pid=getpid()).packed)
    try:
        while True:
            task = Task(zpull.recv())
            if task.seq == STOP:
                break
            try:
                value = handler(context, task.item)
                ok = True
            except Exception:
                log.exception("Task %d failed in pid %d", task.seq, getpid())
                value = format_exc()
                ok = False
            zpush.send(
                Result(seq=task.seq, pid=getpid(), ok=ok, value=value).packed
            )
    finally:
        zpull.close()
        zpush.close()
        zctx.destroy()  # type: ignore


def _recv(zsink: Any, procs: List[Process]) -> Result:
    while True:
        if zsink.poll(POLL_MS):
            return Result(zsink.recv())
        dead = [p for p in procs if not p.is_alive() and p.exitcode != 0]
        if dead:
            raise WorkerError(
                "Worker(s) died: "
                + ", ".join(f"pid {p.pid} code {p.exitcode}" for p in dead)
            )


def fanout(
    handler: Handler, context: Any, items: Sequence[Any], nworkers: int
) -> List[Any]:
    """
    Return [handler(context, item) for item in items], computed by
    `nworkers` processes. The order of results is the order of items,
    whatever the number of workers.
    """
    if nworkers <= 1 or len(items) <= 1:
        return [handler(context, item) for item in items]
    nworkers = min(nworkers, len(items))
    fd, base = mkstemp(prefix="pivatlas")
    close(fd)
    venturl = "ipc://" + base + ".vent"
    sinkurl = "ipc://" + base + ".sink"
    zctx = zmq.Context()  # type: ignore
    zvent = zctx.socket(zmq.PUSH)  # type: ignore
    zsink = zctx.socket(zmq.PULL)  # type: ignore
    zvent.bind(venturl)
    zsink.bind(sinkurl)
    procs = [
        Process(target=runworker, args=(venturl, sinkurl, handler, context))
        for _ in range(nworkers)
    ]
    for p in procs:
        p.start()
    log.debug("Started %d workers for %d tasks", nworkers, len(items))
    results: Dict[int, Any] = {}
    failures: List[Result] = []
    try:
        ready = 0
        while ready < nworkers:
            if _recv(zsink, procs).seq == READY:
                ready += 1
        for seq, item in enumerate(items):
            zvent.send(Task(seq=seq, item=item).packed)
        while len(results) + len(failures) < len(items):
            res = _recv(zsink, procs)
            if res.ok:
                results[res.seq] = res.value
            else:
                failures.append(res)
    finally:
        for _ in procs:
            try:
                zvent.send(Task(seq=STOP).packed, zmq.NOBLOCK)
            except zmq.Again:
                break
        for p in procs:
            p.join(timeout=10)
            if p.is_alive():
                log.warning("Worker pid %s did not exit, terminating", p.pid)
                p.terminate()
                p.join()
        zvent.close(linger=0)
        zsink.close()
        zctx.destroy()  # type: ignore
        for sfx in ("", ".vent", ".sink"):
            try:
                unlink(base + sfx)
            except OSError:
                pass
    if failures:
        raise WorkerError(
            f"{len(failures)} task(s) failed, first in pid {failures[0].pid}:"
            f"\n{failures[0].value}"
        )
    return [results[seq] for seq in range(len(items))]
