""" Common housekeeping for all commands """

from configparser import ConfigParser
from getopt import getopt
from hashlib import sha256
from json import dumps
from logging import Formatter, getLogger, Logger, StreamHandler, DEBUG, INFO
from pkg_resources import get_distribution, DistributionNotFound
from sys import argv, stderr, stdout
from typing import Any, Dict, List, Optional, Tuple

CONF = "/etc/pivatlas.conf"

DEFAULTS: Dict[str, Dict[str, str]] = {
    "common": {
        "atlasdir": ".",
        "workers": "0",  # 0: all available cores
        "allow_large": "no",
    },
    "stats": {
        "aggregation": "all",
        "weighting": "all",
        "baseline": "all",
    },
    "strategies": {
        "lambda": "1.0",
        "tie_break": "lexicographic",
    },
    "dqn": {},
}

try:
    version = get_distribution("pivatlas").version
except DistributionNotFound:
    version = "<local>"


def init(
    log: Logger, opts: Optional[List[Tuple[str, str]]] = None
) -> ConfigParser:
    if opts is None:
        opts, _ = getopt(argv[1:], "c:d")
    dopts = dict(opts)
    conf = ConfigParser()
    conf.read_dict(DEFAULTS)
    conf.read(dopts["-c"] if "-c" in dopts else CONF)
    log.setLevel(DEBUG if "-d" in dopts else INFO)
    fhdl = StreamHandler(stderr)
    if stdout.isatty():
        fhdl.setFormatter(
            Formatter("%(asctime)s - %(levelname)s - %(message)s")
        )
    else:
        fhdl.setFormatter(
            Formatter("%(name)s[%(process)d]: %(levelname)s - %(message)s")
        )
    if not log.handlers:
        log.addHandler(fhdl)
    log.debug("%s starting with options: %s", version, dopts)
    return conf


class Report:
    TYPE: str

    def __repr__(self) -> str:
        fields = ", ".join(f"{k}={v!r}" for k, v in vars(self).items())
        return f"{self.__class__.__name__}({fields})"

    @property
    def json(self) -> str:
        return dumps(dict(self.__dict__, type=self.TYPE), sort_keys=True)


class RunConfig(Report):
    """Effective parameters of one command run"""

    TYPE = "runconfig"

    def __init__(self, *, command: str, **params: Any) -> None:
        self.command = command
        self.version = version
        for k, v in sorted(params.items()):
            setattr(self, k, v)

    @property
    def digest(self) -> str:
        return sha256(self.json.encode()).hexdigest()[:12]

    @property
    def metadata(self) -> str:
        """Header line for output files"""
        return f"# pivatlas {version} config={self.digest} {self.json}"
