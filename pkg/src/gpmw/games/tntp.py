"""Readers for TNTP network and trip files."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class TntpError(ValueError):
    pass


@dataclass
class RoadNetwork:
    """Directed road graph with BPR parameters and origin-destination demand."""

    init: np.ndarray  # 1-based node ids
    term: np.ndarray
    capacity: np.ndarray
    free_flow: np.ndarray
    demands: list[tuple[int, int, float]] = field(default_factory=list)

    def __post_init__(self):
        self.init = np.asarray(self.init, dtype=int)
        self.term = np.asarray(self.term, dtype=int)
        self.capacity = np.asarray(self.capacity, dtype=float)
        self.free_flow = np.asarray(self.free_flow, dtype=float)
        if not (len(self.init) == len(self.term) == len(self.capacity) == len(self.free_flow)):
            raise TntpError("edge arrays differ in length")
        if np.any(self.capacity <= 0) or np.any(self.free_flow <= 0):
            raise TntpError("capacities and free-flow times must be positive")

    @property
    def n_edges(self) -> int:
        return len(self.init)

    @property
    def nodes(self) -> list[int]:
        return sorted(set(self.init.tolist()) | set(self.term.tolist()))


def _data_lines(path: Path):
    in_meta = True
    with open(path) as fh:
        lines = fh.readlines()
    has_meta = any("<END OF METADATA>" in ln.upper() for ln in lines)
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if has_meta and in_meta:
            if "<END OF METADATA>" in line.upper():
                in_meta = False
            continue
        if not line or line.startswith("~") or line.startswith("<"):
            continue
        yield lineno, line


def read_network(path) -> RoadNetwork:
    """Parse a TNTP ``*_net.tntp`` file.

    Columns are positional: init_node, term_node, capacity, length,
    free_flow_time, then optional extras. Records end with ``;``.
    """
    path = Path(path)
    init, term, cap, fft = [], [], [], []
    for lineno, line in _data_lines(path):
        fields = line.rstrip(";").split()
        try:
            if len(fields) < 5:
                raise ValueError(f"expected at least 5 columns, found {len(fields)}")
            a, b = int(fields[0]), int(fields[1])
            c, t = float(fields[2]), float(fields[4])
        except ValueError as exc:
            raise TntpError(f"{path}:{lineno}: malformed edge record: {exc}") from None
        if c <= 0 or t <= 0:
            raise TntpError(f"{path}:{lineno}: capacity and free-flow time must be positive")
        init.append(a)
        term.append(b)
        cap.append(c)
        fft.append(t)
    if not init:
        raise TntpError(f"{path}: no edge records")
    return RoadNetwork(init, term, cap, fft)


_ORIGIN = re.compile(r"^origin\s+(\d+)", re.IGNORECASE)
_PAIR = re.compile(r"(\d+)\s*:\s*([-+0-9.eE]+)")


def read_trips(path) -> list[tuple[int, int, float]]:
    """Parse a TNTP ``*_trips.tntp`` file into (origin, destination, demand) triples.

    Zero-demand and origin == destination pairs are skipped.
    """
    path = Path(path)
    out = []
    origin = None
    for lineno, line in _data_lines(path):
        m = _ORIGIN.match(line)
        if m:
            origin = int(m.group(1))
            continue
        if origin is None:
            raise TntpError(f"{path}:{lineno}: destination data before any Origin line")
        body = line.replace(";", " ")
        pairs = _PAIR.findall(body)
        if not pairs or _PAIR.sub("", body).strip():
            raise TntpError(f"{path}:{lineno}: malformed destination:flow list")
        for dest, flow in pairs:
            try:
                u = float(flow)
            except ValueError:
                raise TntpError(f"{path}:{lineno}: bad flow value {flow!r}") from None
            if u < 0:
                raise TntpError(f"{path}:{lineno}: negative demand")
            if u > 0 and int(dest) != origin:
                out.append((origin, int(dest), u))
    return out


def load(net_path, trips_path=None) -> RoadNetwork:
    net = read_network(net_path)
    if trips_path is not None:
        net.demands = read_trips(trips_path)
    return net


def sioux_falls() -> RoadNetwork:
    """The bundled Sioux-Falls network (24 nodes, 76 edges) with its 528 OD demands."""
    data = resources.files("gpmw") / "data"
    with resources.as_file(data / "SiouxFalls_net.tntp") as net, resources.as_file(data / "SiouxFalls_trips.tntp") as trips:
        return load(net, trips)
