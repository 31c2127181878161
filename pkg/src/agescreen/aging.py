"""Aging-scaled cell delays and static timing.

Controlled NBTI-style stress raises |Vth| and degrades mobility, both of
which stretch gate delay. On-current goes as mu * (vdd - vth)^2 and delay
as 1/I_on, so holding a cell at a duty-cycle stress level scales its fresh
delay by

    factor(duty) = [mu0 / mu(duty)] * [(vdd - vth0)^2 / (vdd - vth0 - dVth(duty))^2]

with dVth growing from 0 (fresh) to dvth_max (fully stressed). Delays are
annotated per cell on top of a fanout-loaded base library plus a global and
a local process-variation term, and the same annotation feeds both the
event simulator and the path engine here.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field

import numpy as np

from agescreen.netlist import Cell, CellKind, Netlist, fanout_map

AGING_GRID = tuple(range(0, 101, 10))

LINEAR = "LINEAR"
POWER = "POWER"


class AgingModelError(ValueError):
    """Non-physical aging parameters (device would not turn on)."""


@dataclass(frozen=True)
class AgingParams:
    vdd: float = 1.1
    vth0: float = 0.40
    dvth_max: float = 0.050
    dmu_max_frac: float = 0.05
    curve: str = LINEAR
    power_p: float = 1.0


@dataclass(frozen=True)
class AgingState:
    """One point on the standard stress grid."""
    duty: int

    def __post_init__(self):
        if self.duty not in AGING_GRID:
            raise ValueError(f"duty {self.duty} not in grid {AGING_GRID}")

    @staticmethod
    def grid() -> tuple["AgingState", ...]:
        return tuple(AgingState(d) for d in AGING_GRID)


def aging_factor(params: AgingParams, duty: float) -> float:
    """Delay multiplier at a stress duty cycle in percent. Exactly 1.0 at
    duty 0, strictly increasing in duty for positive degradation params."""
    if not 0 <= duty <= 100:
        raise ValueError(f"duty {duty} outside [0, 100]")
    d = duty / 100.0
    if params.curve == LINEAR:
        shape = d
    elif params.curve == POWER:
        shape = d ** params.power_p
    else:
        raise ValueError(f"unknown aging curve {params.curve!r}")
    dvth = params.dvth_max * shape
    mu_scale = 1.0 - params.dmu_max_frac * d
    overdrive = params.vdd - params.vth0
    if overdrive <= 0 or overdrive - dvth <= 0:
        raise AgingModelError(
            f"vdd {params.vdd} does not exceed vth {params.vth0} + dVth {dvth}")
    if mu_scale <= 0:
        raise AgingModelError(f"mobility fraction {params.dmu_max_frac} wipes out mu")
    return (1.0 / mu_scale) * (overdrive / (overdrive - dvth)) ** 2


@dataclass(frozen=True)
class BaseDelayLib:
    """Fresh intrinsic delays (ps) and per-extra-load coefficients.

    Values set the time scale of the artifact only; everything downstream
    is relative to the critical period they induce.
    """
    intrinsic: dict[str, float] = field(default_factory=lambda: {
        "INV": 8.0, "BUF": 10.0, "NAND2": 12.0, "NOR2": 14.0,
        "AND2": 16.0, "OR2": 16.0, "XOR2": 24.0, "XNOR2": 24.0,
        "MUX2": 22.0, "DFF": 20.0, "CONST0": 0.0, "CONST1": 0.0,
    })
    load_coeff: dict[str, float] = field(default_factory=lambda: {
        "INV": 3.0, "BUF": 3.0, "NAND2": 3.0, "NOR2": 3.0,
        "AND2": 3.0, "OR2": 3.0, "XOR2": 3.0, "XNOR2": 3.0,
        "MUX2": 3.0, "DFF": 3.0, "CONST0": 0.0, "CONST1": 0.0,
    })

    def check(self):
        for kind in CellKind:
            iv = self.intrinsic.get(kind.value)
            cv = self.load_coeff.get(kind.value)
            if iv is None or cv is None:
                raise ValueError(f"delay library misses kind {kind.value}")
            if kind in (CellKind.CONST0, CellKind.CONST1):
                if iv != 0 or cv != 0:
                    raise ValueError("constant drivers must have zero delay")
            elif iv <= 0 or cv < 0:
                raise ValueError(f"non-positive intrinsic for {kind.value}")


@dataclass(frozen=True)
class VariationSpec:
    """One simulated chip: a global speed offset plus per-cell jitter.

    global_frac shifts every delay by the same fraction; local jitter is
    N(0, local_sigma) truncated at three sigma, drawn per cell from a
    stream keyed by (seed, cell id) so annotation order cannot matter.
    """
    global_frac: float = 0.0
    local_sigma: float = 0.0
    seed: int = 0


NO_VARIATION = VariationSpec()


def make_variation(seed: int, global_span: float = 0.05, local_sigma: float = 0.04) -> VariationSpec:
    """Fresh chip instance: global offset drawn uniformly in +-global_span."""
    g = np.random.default_rng([0x5EED, seed]).uniform(-global_span, global_span)
    return VariationSpec(global_frac=float(g), local_sigma=local_sigma, seed=seed)


@dataclass(frozen=True)
class DelayAnnotation:
    duty: int
    seed: int
    delays: dict[str, float] = field(compare=False)

    def __getitem__(self, cell_name: str) -> float:
        return self.delays[cell_name]


def _local_jitter(seed: int, cell_name: str, sigma: float) -> float:
    if sigma == 0.0:
        return 0.0
    key = int.from_bytes(hashlib.blake2b(cell_name.encode(), digest_size=8).digest(), "big")
    rng = np.random.default_rng([seed, key])
    while True:  # resample outside the 3-sigma truncation
        g = rng.normal(0.0, sigma)
        if abs(g) <= 3.0 * sigma:
            return float(g)


def annotate(n: Netlist, params: AgingParams, duty: int,
             lib: BaseDelayLib | None = None,
             variation: VariationSpec = NO_VARIATION) -> DelayAnnotation:
    """Per-cell delays (ps) for one netlist at one stress level on one chip.

    delay = [intrinsic + load_coeff * max(0, fanout - 1)] * aging_factor
            * (1 + global_frac) * (1 + local_jitter)

    Constant drivers stay at exactly 0; everything else is positive.
    """
    lib = lib or BaseDelayLib()
    lib.check()
    af = aging_factor(params, duty)
    fo = fanout_map(n)
    gm = 1.0 + variation.global_frac
    delays: dict[str, float] = {}
    for c in n.cells:
        if c.kind in (CellKind.CONST0, CellKind.CONST1):
            delays[c.name] = 0.0
            continue
        base = lib.intrinsic[c.kind.value] + lib.load_coeff[c.kind.value] * max(0, fo[c.output] - 1)
        g = _local_jitter(variation.seed, c.name, variation.local_sigma)
        delays[c.name] = base * af * gm * (1.0 + g)
    return DelayAnnotation(duty=duty, seed=variation.seed, delays=delays)


def annotation_to_json(a: DelayAnnotation) -> str:
    doc = {"duty": a.duty, "seed": a.seed,
           "delays": {k: a.delays[k] for k in sorted(a.delays)}}
    return json.dumps(doc, sort_keys=True)


def annotation_from_json(text: str) -> DelayAnnotation:
    doc = json.loads(text)
    return DelayAnnotation(duty=int(doc["duty"]), seed=int(doc["seed"]),
                           delays={str(k): float(v) for k, v in doc["delays"].items()})


# -- static timing -----------------------------------------------------------

@dataclass(frozen=True)
class TimingPath:
    """One structural source-to-sink path: the cell sequence walked and the
    front-to-back sum of its delays. Flop-sourced paths begin with the flop
    itself so clock-to-q is part of the sum."""
    delay: float
    cells: tuple[str, ...]


@dataclass(frozen=True)
class RankedPaths:
    paths: tuple[TimingPath, ...]
    shortfall: bool  # True when the netlist holds fewer paths than asked for


def k_longest_paths(n: Netlist, ann: DelayAnnotation, k: int) -> RankedPaths:
    """The k longest structural paths, exactly, in strictly ranked order.

    Best-first search over path prefixes. The priority of a prefix is its
    accumulated delay plus the exact longest completion from its frontier
    net (a reverse-topological DP), so prefixes pop in the order of the
    best path through them and the k-th emitted terminal is exact, not a
    heuristic. Equal-delay paths rank by lexicographic cell sequence.

    Sources: primary inputs and flop Q pins. Sinks: flop D pins and
    primary outputs. Dead-end nets complete no path.
    """
    if k < 1:
        raise ValueError("k must be positive")
    d = ann.delays
    loads: dict[str, list[Cell]] = {}
    comb = []
    for c in n.cells:
        if c.kind in (CellKind.DFF, CellKind.CONST0, CellKind.CONST1):
            continue
        comb.append(c)
        for pin in c.inputs:
            loads.setdefault(pin, []).append(c)
    sink_nets = set(c.inputs[0] for c in n.cells if c.kind is CellKind.DFF)
    sink_nets.update(n.outputs)

    suffix = _longest_suffix(n, comb, loads, sink_nets, d)

    NEG = float("-inf")
    heap: list[tuple[float, tuple[str, ...], bool, float, str]] = []

    def push(acc, cells, net):
        if net in sink_nets:
            heapq.heappush(heap, (-acc, cells, False, acc, net))
        if suffix.get(net, NEG) > 0.0:
            # something still continues toward a sink
            heapq.heappush(heap, (-(acc + suffix[net]), cells, True, acc, net))

    pins = set(n.inputs)
    started = set()
    for c in n.cells:
        if c.kind is CellKind.DFF:
            push(d[c.name], (c.name,), c.output)
        elif c.kind not in (CellKind.CONST0, CellKind.CONST1):
            if c.name not in started and any(p in pins for p in c.inputs):
                started.add(c.name)
                push(d[c.name], (c.name,), c.output)

    out: list[TimingPath] = []
    while heap and len(out) < k:
        _, cells, live, acc, net = heapq.heappop(heap)
        if not live:
            out.append(TimingPath(acc, cells))
            continue
        for c in loads.get(net, ()):
            push(acc + d[c.name], cells + (c.name,), c.output)
    return RankedPaths(tuple(out), shortfall=len(out) < k)


def _longest_suffix(n, comb, loads, sink_nets, d):
    """net -> exact longest delay from that net to any sink (0 if the net
    itself is a sink and nothing longer continues)."""
    order = _reverse_topo(comb)
    suffix: dict[str, float] = {}
    NEG = float("-inf")
    for net in sink_nets:
        suffix[net] = 0.0
    for c in order:
        s_out = suffix.get(c.output, NEG)
        if s_out == NEG:
            continue
        reach = d[c.name] + s_out
        for pin in c.inputs:
            if suffix.get(pin, NEG) < reach:
                suffix[pin] = reach
    return suffix


def _reverse_topo(comb: list[Cell]) -> list[Cell]:
    produced = {c.output: i for i, c in enumerate(comb)}
    missing = [0] * len(comb)
    loads: list[list[int]] = [[] for _ in comb]
    for i, c in enumerate(comb):
        for pin in c.inputs:
            j = produced.get(pin)
            if j is not None:
                missing[i] += 1
                loads[j].append(i)
    ready = [i for i, m in enumerate(missing) if m == 0]
    order = []
    while ready:
        i = ready.pop()
        order.append(i)
        for j in loads[i]:
            missing[j] -= 1
            if missing[j] == 0:
                ready.append(j)
    return [comb[i] for i in reversed(order)]


def critical_path(n: Netlist, ann: DelayAnnotation) -> TimingPath:
    """Longest structural path; its delay is the critical period t_CP that
    a fresh chip needs per cycle. Raises if the netlist has no timed path."""
    ranked = k_longest_paths(n, ann, 1)
    if not ranked.paths:
        raise ValueError(f"netlist {n.name} has no source-to-sink path")
    return ranked.paths[0]
