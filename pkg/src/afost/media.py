"""Rate-distortion packet traces for pre-encoded video.

One frame is one media packet. Frame sizes follow fixed I:P:B ratios with
lognormal jitter and add up to ``bitrate * gop_size / fps`` bits per GOP.
Each packet carries its own distortion and the dependency-inclusive
``delta_d``: own distortion plus that of every frame that cannot be decoded
without it.
"""

import csv
import heapq
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

TRACE_FIELDS = ["packet_id", "flow_id", "frame_type", "delta_r_bytes", "delta_d",
                "deadline_s", "deps"]


@dataclass(frozen=True)
class MediaPacket:
    packet_id: int
    flow_id: int
    delta_r: int
    delta_d: float
    deadline: float
    frame_type: str
    deps: Tuple[int, ...] = ()
    own_d: Optional[float] = None

    def __post_init__(self):
        if self.delta_r <= 0:
            raise ValueError("delta_r must be positive")
        if self.delta_d < 0:
            raise ValueError("delta_d must be non-negative")
        if self.frame_type not in ("I", "P", "B"):
            raise ValueError(f"unknown frame type {self.frame_type!r}")

    @property
    def gradient(self) -> float:
        return self.delta_d / self.delta_r


@dataclass(frozen=True)
class StreamConfig:
    bitrate: float = 203_000.0
    fps: float = 30.0
    gop_size: int = 32
    pattern: str = "IBBBP"
    startup_delay: float = 10.0
    size_ratios: Tuple[float, float, float] = (6.0, 3.0, 1.0)
    distortion_ratios: Tuple[float, float, float] = (10.0, 4.0, 1.0)
    distortion_unit: float = 100.0
    jitter: float = 0.2

    def __post_init__(self):
        if self.gop_size < 1:
            raise ValueError("gop_size must be >= 1")
        if not self.pattern or self.pattern[0] != "I" or set(self.pattern) - set("IPB"):
            raise ValueError("pattern must start with I and use only I, P, B")
        if self.fps <= 0 or self.bitrate <= 0:
            raise ValueError("fps and bitrate must be positive")

    @property
    def gop_duration(self) -> float:
        return self.gop_size / self.fps

    def frame_type(self, index_in_gop: int) -> str:
        if index_in_gop == 0:
            return "I"
        body = self.pattern[1:]
        if not body:
            return "I"
        return body[(index_in_gop - 1) % len(body)]


_TYPE_INDEX = {"I": 0, "P": 1, "B": 2}


def gop_dependencies(types: Sequence[str]) -> List[Tuple[int, ...]]:
    """Closed-GOP references: P on the previous anchor, B on both neighbours."""
    anchors = [i for i, t in enumerate(types) if t in "IP"]
    deps = []
    for i, t in enumerate(types):
        prev = [a for a in anchors if a < i]
        nxt = [a for a in anchors if a > i]
        if t == "I":
            deps.append(())
        elif t == "P":
            deps.append((prev[-1],) if prev else ())
        else:
            d = ([prev[-1]] if prev else []) + ([nxt[0]] if nxt else [])
            deps.append(tuple(d))
    return deps


def descendants(packets: Sequence[MediaPacket]) -> Dict[int, set]:
    """Map packet id to every id that transitively depends on it."""
    children: Dict[int, list] = {p.packet_id: [] for p in packets}
    for p in packets:
        for d in p.deps:
            children[d].append(p.packet_id)
    out: Dict[int, set] = {}

    def visit(i):
        if i not in out:
            acc = set()
            for c in children[i]:
                acc.add(c)
                acc |= visit(c)
            out[i] = acc
        return out[i]

    for p in packets:
        visit(p.packet_id)
    return out


def generate_trace(cfg: StreamConfig, n_gops: int, rng=None, flow_id: int = 0) -> List[MediaPacket]:
    """Synthetic packet trace in presentation order."""
    rng = np.random.default_rng(rng)
    gop_bytes = cfg.bitrate * cfg.gop_size / cfg.fps / 8.0
    types = [cfg.frame_type(i) for i in range(cfg.gop_size)]
    local_deps = gop_dependencies(types)
    tidx = np.array([_TYPE_INDEX[t] for t in types])
    size_r = np.asarray(cfg.size_ratios, dtype=float)[tidx]
    dist_r = np.asarray(cfg.distortion_ratios, dtype=float)[tidx]
    packets: List[MediaPacket] = []
    for g in range(n_gops):
        w = size_r * rng.lognormal(0.0, cfg.jitter, cfg.gop_size)
        sizes = np.maximum(1, np.rint(w / w.sum() * gop_bytes)).astype(int)
        own = dist_r * cfg.distortion_unit * rng.lognormal(0.0, cfg.jitter, cfg.gop_size)
        base = g * cfg.gop_size
        gop = [MediaPacket(packet_id=base + i, flow_id=flow_id, delta_r=int(sizes[i]),
                           delta_d=float(own[i]), own_d=float(own[i]),
                           deadline=(base + i) / cfg.fps + cfg.startup_delay,
                           frame_type=types[i],
                           deps=tuple(base + d for d in local_deps[i]))
               for i in range(cfg.gop_size)]
        packets.extend(_propagate(gop))
    return packets


def _propagate(packets: Sequence[MediaPacket]) -> List[MediaPacket]:
    own = {p.packet_id: p.own_d for p in packets}
    desc = descendants(packets)
    return [MediaPacket(p.packet_id, p.flow_id, p.delta_r,
                        own[p.packet_id] + sum(own[d] for d in desc[p.packet_id]),
                        p.deadline, p.frame_type, p.deps, p.own_d)
            for p in packets]


def with_own_distortion(packets: Sequence[MediaPacket]) -> List[MediaPacket]:
    """Recover own distortion from dependency-inclusive ``delta_d`` values."""
    desc = descendants(packets)
    own: Dict[int, float] = {}
    for p in sorted(packets, key=lambda q: len(desc[q.packet_id])):
        own[p.packet_id] = p.delta_d - sum(own[d] for d in desc[p.packet_id])
    return [MediaPacket(p.packet_id, p.flow_id, p.delta_r, p.delta_d, p.deadline,
                        p.frame_type, p.deps, own[p.packet_id]) for p in packets]


def _own(p: MediaPacket) -> float:
    return p.delta_d if p.own_d is None else p.own_d


def decodable(delivered: Union[Mapping[int, float], Iterable[int]],
              trace: Sequence[MediaPacket]) -> set:
    """Ids that arrived on time and whose references arrived in time for them.

    ``delivered`` maps packet id to arrival time; a plain collection of ids
    means every listed packet arrived on time.
    """
    if not isinstance(delivered, Mapping):
        delivered = {i: -np.inf for i in delivered}
    by_id = {p.packet_id: p for p in trace}
    memo: Dict[int, bool] = {}

    def ok(i):
        if i in memo:
            return memo[i]
        memo[i] = False
        p = by_id[i]
        res = i in delivered and delivered[i] <= p.deadline
        if res:
            res = all(ok(d) and delivered[d] <= p.deadline for d in p.deps)
        memo[i] = res
        return res

    return {p.packet_id for p in trace if ok(p.packet_id)}


def utility(delivered, trace: Sequence[MediaPacket]) -> float:
    """Distortion reduction credited for decodable, on-time packets."""
    good = decodable(delivered, trace)
    return float(sum(_own(p) for p in trace if p.packet_id in good))


def importance_order(packets: Sequence[MediaPacket]) -> List[MediaPacket]:
    """Descending utility gradient, never placing a packet before its references.

    References outside ``packets`` are treated as already satisfied.
    """
    ids = {p.packet_id for p in packets}
    waiting = {p.packet_id: sum(1 for d in p.deps if d in ids) for p in packets}
    children: Dict[int, list] = {p.packet_id: [] for p in packets}
    by_id = {p.packet_id: p for p in packets}
    for p in packets:
        for d in p.deps:
            if d in ids:
                children[d].append(p.packet_id)
    heap = [(-p.gradient, p.packet_id) for p in packets if waiting[p.packet_id] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, i = heapq.heappop(heap)
        out.append(by_id[i])
        for c in children[i]:
            waiting[c] -= 1
            if waiting[c] == 0:
                heapq.heappush(heap, (-by_id[c].gradient, c))
    if len(out) != len(packets):
        raise ValueError("dependency cycle in trace")
    return out


def rd_curve(ordered: Sequence[MediaPacket]) -> Tuple[np.ndarray, np.ndarray]:
    """Cumulative (bytes, distortion reduction) after each packet of ``ordered``."""
    r = np.cumsum([p.delta_r for p in ordered], dtype=float)
    d = np.cumsum([p.delta_d for p in ordered], dtype=float)
    return r, d


def split_gops(packets: Sequence[MediaPacket], gop_size: int) -> List[List[MediaPacket]]:
    groups: Dict[int, list] = {}
    for p in packets:
        groups.setdefault(p.packet_id // gop_size, []).append(p)
    return [groups[k] for k in sorted(groups)]


def write_trace(packets: Iterable[MediaPacket], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for p in packets:
            w.writerow([p.packet_id, p.flow_id, p.frame_type, p.delta_r, repr(float(p.delta_d)),
                        repr(float(p.deadline)), ";".join(str(d) for d in p.deps)])


def read_trace(path) -> List[MediaPacket]:
    """Load a trace file; own distortions are rebuilt per flow from the DAG."""
    rows: Dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRACE_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"trace file lacks columns {sorted(missing)}")
        for row in reader:
            deps = tuple(int(d) for d in row["deps"].split(";") if d.strip())
            p = MediaPacket(packet_id=int(row["packet_id"]), flow_id=int(row["flow_id"]),
                            delta_r=int(row["delta_r_bytes"]), delta_d=float(row["delta_d"]),
                            deadline=float(row["deadline_s"]),
                            frame_type=row["frame_type"].strip(), deps=deps)
            rows.setdefault(p.flow_id, []).append(p)
    out = []
    for flow in sorted(rows):
        out.extend(with_own_distortion(rows[flow]))
    return out
