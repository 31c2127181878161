"""Event-driven gate-level timing simulation.

Semantics, in one place because every downstream number depends on them:

* Transport delay with last-write-wins replacement: each net carries at
  most one pending transition; scheduling a different value supersedes it,
  while re-scheduling the value already pending keeps the earlier arrival
  (a no-op write must not postpone a real one). This is the simplest model
  that still captures stale values racing a too-early clock edge.
* One implicit global clock. Rising edges fall at t = k * clock_period for
  k = 1, 2, ...; at an edge every flop atomically samples the value its D
  net holds after all events strictly earlier than the edge have applied,
  then schedules Q at edge + its clock-to-q delay. Events landing exactly
  on the edge are applied after sampling, so the flop catches the pre-edge
  value.
* At t = 0 flops take their init bits, primary inputs take the applied
  word and hold it, constant drivers assert, every other net starts at 0,
  and every combinational cell evaluates once; the netlist then settles
  through ordinary event propagation.
* The output word is sampled an infinitesimal before read_cycle *
  clock_period (again: events strictly earlier than the sample instant).
* Ties in event time apply in ascending net id, so runs are reproducible
  to the bit.

A run that exceeds the event budget raises SimulationBudget, which signals
an unstable configuration rather than a crash.

The inner loop runs over flat integer arrays so numba can JIT it; without
numba the same function runs as plain Python, bit-for-bit equal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from agescreen.aging import DelayAnnotation
from agescreen.netlist import CellKind, Netlist, topo_order

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - sandbox always has it
    numba = None
    _HAVE_NUMBA = False

DEFAULT_EVENT_BUDGET = 10_000_000

_KIND_CODE = {
    CellKind.INV: 0, CellKind.BUF: 1, CellKind.AND2: 2, CellKind.NAND2: 3,
    CellKind.OR2: 4, CellKind.NOR2: 5, CellKind.XOR2: 6, CellKind.XNOR2: 7,
    CellKind.MUX2: 8, CellKind.DFF: 9, CellKind.CONST0: 10, CellKind.CONST1: 11,
}


class SimulationBudget(RuntimeError):
    """Event budget exhausted before the read point."""


@dataclass(frozen=True)
class ObservedOutput:
    input: int
    clock_ps: float
    duty: int
    output: int


class CompiledNetlist:
    """Netlist lowered to flat arrays for the event engine. Build once and
    reuse across inputs, clocks, and annotations."""

    def __init__(self, n: Netlist):
        self.netlist = n
        names: list[str] = list(n.inputs)
        index = {p: i for i, p in enumerate(names)}
        for c in n.cells:
            if c.output not in index:
                index[c.output] = len(names)
                names.append(c.output)
        for c in n.cells:
            for pin in c.inputs:
                if pin not in index:  # undriven only in invalid netlists
                    index[pin] = len(names)
                    names.append(pin)
        self.net_names = names
        self.net_index = index
        nn, nc = len(names), len(n.cells)

        self.cell_kind = np.zeros(nc, np.int8)
        self.cell_in = np.full((nc, 3), -1, np.int32)
        self.cell_out = np.zeros(nc, np.int32)
        self.init_vals = np.zeros(nn, np.int8)
        dffs = []
        for i, c in enumerate(n.cells):
            self.cell_kind[i] = _KIND_CODE[c.kind]
            for j, pin in enumerate(c.inputs):
                self.cell_in[i, j] = index[pin]
            self.cell_out[i] = index[c.output]
            if c.kind is CellKind.DFF:
                dffs.append(i)
                self.init_vals[index[c.output]] = c.init
            elif c.kind is CellKind.CONST1:
                self.init_vals[index[c.output]] = 1
        self.dff_cells = np.array(dffs, np.int32)
        self.comb_cells = np.array(
            [i for i, c in enumerate(n.cells)
             if c.kind not in (CellKind.DFF, CellKind.CONST0, CellKind.CONST1)],
            np.int32)

        # CSR of combinational loads per net; flop D pins are not loads here
        # because flops only look at D on clock edges
        loads: list[list[int]] = [[] for _ in range(nn)]
        for i in self.comb_cells:
            for j in range(3):
                net = self.cell_in[i, j]
                if net >= 0:
                    loads[net].append(i)
        self.load_ptr = np.zeros(nn + 1, np.int32)
        for net in range(nn):
            self.load_ptr[net + 1] = self.load_ptr[net] + len(loads[net])
        self.load_idx = np.zeros(self.load_ptr[-1], np.int32)
        for net in range(nn):
            self.load_idx[self.load_ptr[net]:self.load_ptr[net + 1]] = loads[net]

        self.pi_nets = np.array([index[p] for p in n.inputs], np.int32)
        self.po_nets = np.array([index[p] for p in n.outputs], np.int32)
        self.cell_pos = {c.name: i for i, c in enumerate(n.cells)}

    def bind(self, ann: DelayAnnotation) -> np.ndarray:
        """Annotation dict -> per-cell delay array in compiled cell order."""
        d = np.zeros(len(self.netlist.cells), np.float64)
        for name, i in self.cell_pos.items():
            d[i] = ann.delays[name]
        return d


def _engine(cell_kind, cell_in, cell_out, delays, load_ptr, load_idx,
            dff_cells, comb_cells, init_vals, pi_nets, po_nets, pi_bits,
            clock_period, read_cycle, budget):
    nn = init_vals.shape[0]
    value = init_vals.copy()
    for i in range(pi_nets.shape[0]):
        value[pi_nets[i]] = pi_bits[i]

    # one pending transition per net; the heap may hold stale duplicates
    # which are skipped by serial number on pop
    pend_serial = np.zeros(nn, np.int64)
    pend_live = np.zeros(nn, np.int8)
    pend_val = np.zeros(nn, np.int8)

    cap = 1024
    h_time = np.empty(cap, np.float64)
    h_net = np.empty(cap, np.int32)
    h_ser = np.empty(cap, np.int64)
    hsize = 0

    serial = 0
    applied = 0
    n_dff = dff_cells.shape[0]
    dsamp = np.empty(max(n_dff, 1), np.int8)

    def sift_up(ht, hn, hs, i):
        # order by (time, net id) so ties resolve the same way every run
        while i > 0:
            p = (i - 1) >> 1
            if ht[i] < ht[p] or (ht[i] == ht[p] and hn[i] < hn[p]):
                ht[i], ht[p] = ht[p], ht[i]
                hn[i], hn[p] = hn[p], hn[i]
                hs[i], hs[p] = hs[p], hs[i]
                i = p
            else:
                break

    def sift_down(ht, hn, hs, size):
        i = 0
        while True:
            l = 2 * i + 1
            m = i
            if l < size and (ht[l] < ht[m] or (ht[l] == ht[m] and hn[l] < hn[m])):
                m = l
            r = l + 1
            if r < size and (ht[r] < ht[m] or (ht[r] == ht[m] and hn[r] < hn[m])):
                m = r
            if m == i:
                break
            ht[i], ht[m] = ht[m], ht[i]
            hn[i], hn[m] = hn[m], hn[i]
            hs[i], hs[m] = hs[m], hs[i]
            i = m

    def compute(ci):
        k = cell_kind[ci]
        a = value[cell_in[ci, 0]]
        if k == 0:
            return 1 - a
        if k == 1:
            return a
        b = value[cell_in[ci, 1]]
        if k == 2:
            return a & b
        if k == 3:
            return 1 - (a & b)
        if k == 4:
            return a | b
        if k == 5:
            return 1 - (a | b)
        if k == 6:
            return a ^ b
        if k == 7:
            return 1 - (a ^ b)
        return b if value[cell_in[ci, 2]] else a  # MUX2

    t_sample = read_cycle * clock_period
    edge_k = 1
    next_edge = clock_period

    # t = 0: every combinational cell evaluates once against the reset state
    for idx in range(comb_cells.shape[0]):
        ci = comb_cells[idx]
        v = compute(ci)
        net = cell_out[ci]
        if v != value[net] or pend_live[net] == 1:
            serial += 1
            pend_serial[net] = serial
            pend_live[net] = 1
            pend_val[net] = v
            if hsize == cap:
                cap *= 2
                nt = np.empty(cap, np.float64); nt[:hsize] = h_time[:hsize]; h_time = nt
                na = np.empty(cap, np.int32); na[:hsize] = h_net[:hsize]; h_net = na
                ns = np.empty(cap, np.int64); ns[:hsize] = h_ser[:hsize]; h_ser = ns
            h_time[hsize] = delays[ci]
            h_net[hsize] = net
            h_ser[hsize] = serial
            hsize += 1
            sift_up(h_time, h_net, h_ser, hsize - 1)

    while True:
        at_edge = edge_k < read_cycle
        boundary = next_edge if at_edge else t_sample

        # apply everything strictly before the next edge or the read point
        while hsize > 0 and h_time[0] < boundary:
            ev_t = h_time[0]
            ev_net = h_net[0]
            ev_ser = h_ser[0]
            hsize -= 1
            if hsize > 0:
                h_time[0] = h_time[hsize]
                h_net[0] = h_net[hsize]
                h_ser[0] = h_ser[hsize]
                sift_down(h_time, h_net, h_ser, hsize)
            if ev_ser != pend_serial[ev_net]:
                continue  # superseded
            pend_live[ev_net] = 0
            v = pend_val[ev_net]
            if v == value[ev_net]:
                continue
            value[ev_net] = v
            applied += 1
            if applied > budget:
                return value, applied, 1
            for li in range(load_ptr[ev_net], load_ptr[ev_net + 1]):
                ci = load_idx[li]
                nv = compute(ci)
                onet = cell_out[ci]
                if nv != value[onet] or pend_live[onet] == 1:
                    serial += 1
                    pend_serial[onet] = serial
                    pend_live[onet] = 1
                    pend_val[onet] = nv
                    if hsize == cap:
                        cap *= 2
                        nt = np.empty(cap, np.float64); nt[:hsize] = h_time[:hsize]; h_time = nt
                        na = np.empty(cap, np.int32); na[:hsize] = h_net[:hsize]; h_net = na
                        ns = np.empty(cap, np.int64); ns[:hsize] = h_ser[:hsize]; h_ser = ns
                    h_time[hsize] = ev_t + delays[ci]
                    h_net[hsize] = onet
                    h_ser[hsize] = serial
                    hsize += 1
                    sift_up(h_time, h_net, h_ser, hsize - 1)

        if not at_edge:
            break

        # rising edge: atomic two-phase sample of every D pin
        for di in range(n_dff):
            dsamp[di] = value[cell_in[dff_cells[di], 0]]
        for di in range(n_dff):
            ci = dff_cells[di]
            qnet = cell_out[ci]
            v = dsamp[di]
            if v != value[qnet] or pend_live[qnet] == 1:
                serial += 1
                pend_serial[qnet] = serial
                pend_live[qnet] = 1
                pend_val[qnet] = v
                if hsize == cap:
                    cap *= 2
                    nt = np.empty(cap, np.float64); nt[:hsize] = h_time[:hsize]; h_time = nt
                    na = np.empty(cap, np.int32); na[:hsize] = h_net[:hsize]; h_net = na
                    ns = np.empty(cap, np.int64); ns[:hsize] = h_ser[:hsize]; h_ser = ns
                h_time[hsize] = next_edge + delays[ci]
                h_net[hsize] = qnet
                h_ser[hsize] = serial
                hsize += 1
                sift_up(h_time, h_net, h_ser, hsize - 1)
        edge_k += 1
        next_edge = edge_k * clock_period

    return value, applied, 0


if _HAVE_NUMBA:
    _engine_jit = numba.njit(cache=True, fastmath=False)(_engine)
else:  # pragma: no cover
    _engine_jit = _engine


def simulate(n: Netlist | CompiledNetlist, ann: DelayAnnotation, input_word: int,
             clock_period: float, read_cycle: int,
             budget: int = DEFAULT_EVENT_BUDGET) -> ObservedOutput:
    """Run one input word at one clock and one annotation; return the word
    sampled at the read point."""
    cn = n if isinstance(n, CompiledNetlist) else CompiledNetlist(n)
    delays = cn.bind(ann)
    return _simulate_bound(cn, delays, ann.duty, input_word, clock_period,
                           read_cycle, budget)


def _simulate_bound(cn: CompiledNetlist, delays: np.ndarray, duty: int,
                    input_word: int, clock_period: float, read_cycle: int,
                    budget: int) -> ObservedOutput:
    if clock_period <= 0:
        raise ValueError("clock_period must be positive")
    if read_cycle < 1:
        raise ValueError("read_cycle must be at least 1")
    if input_word < 0 or input_word >> len(cn.pi_nets):
        raise ValueError(f"input word {input_word:#x} wider than {len(cn.pi_nets)} bits")
    pi_bits = np.empty(len(cn.pi_nets), np.int8)
    for i in range(len(cn.pi_nets)):
        pi_bits[i] = (input_word >> i) & 1
    value, applied, status = _engine_jit(
        cn.cell_kind, cn.cell_in, cn.cell_out, delays, cn.load_ptr,
        cn.load_idx, cn.dff_cells, cn.comb_cells, cn.init_vals, cn.pi_nets,
        cn.po_nets, pi_bits, float(clock_period), int(read_cycle), int(budget))
    if status != 0:
        raise SimulationBudget(
            f"{applied} events without settling (clock {clock_period} ps)")
    word = 0
    for i, net in enumerate(cn.po_nets):
        word |= int(value[net]) << i
    return ObservedOutput(input=input_word, clock_ps=float(clock_period),
                          duty=duty, output=word)


def golden_output(n: Netlist, input_word: int, read_cycle: int) -> int:
    """Functional reference output: zero-delay, cycle-accurate evaluation.

    Independent of the event engine; the two are cross-checked in the test
    suite and the sweep stores this value as the per-input truth.
    """
    order = topo_order(n)
    dffs = [c for c in n.cells if c.kind is CellKind.DFF]
    state = {c.name: c.init for c in dffs}
    vals: dict[str, int] = {}
    for i, p in enumerate(n.inputs):
        vals[p] = (input_word >> i) & 1

    def settle():
        for c in dffs:
            vals[c.output] = state[c.name]
        for c in order:
            k = c.kind
            if k is CellKind.CONST0:
                vals[c.output] = 0
            elif k is CellKind.CONST1:
                vals[c.output] = 1
            elif k is CellKind.INV:
                vals[c.output] = 1 - vals[c.inputs[0]]
            elif k is CellKind.BUF:
                vals[c.output] = vals[c.inputs[0]]
            elif k is CellKind.AND2:
                vals[c.output] = vals[c.inputs[0]] & vals[c.inputs[1]]
            elif k is CellKind.NAND2:
                vals[c.output] = 1 - (vals[c.inputs[0]] & vals[c.inputs[1]])
            elif k is CellKind.OR2:
                vals[c.output] = vals[c.inputs[0]] | vals[c.inputs[1]]
            elif k is CellKind.NOR2:
                vals[c.output] = 1 - (vals[c.inputs[0]] | vals[c.inputs[1]])
            elif k is CellKind.XOR2:
                vals[c.output] = vals[c.inputs[0]] ^ vals[c.inputs[1]]
            elif k is CellKind.XNOR2:
                vals[c.output] = 1 - (vals[c.inputs[0]] ^ vals[c.inputs[1]])
            else:
                vals[c.output] = vals[c.inputs[1]] if vals[c.inputs[2]] else vals[c.inputs[0]]

    for _ in range(read_cycle - 1):
        settle()
        state = {c.name: vals[c.inputs[0]] for c in dffs}
    settle()
    word = 0
    for i, p in enumerate(n.outputs):
        word |= vals[p] << i
    return word


# -- sweep grid --------------------------------------------------------------

@dataclass
class OutputGrid:
    """Observed words over the (input x clock x duty) sweep plus the
    functional truth per input. observed[i][j][l] pairs inputs[i],
    clocks_ps[j], duties[l]; a None cell records a run that blew the event
    budget (kept non-fatal so one pathological point cannot sink a sweep)."""
    inputs: list[int]
    clocks_ps: list[float]
    duties: list[int]
    golden: list[int]
    observed: list[list[list[int | None]]]
    read_cycle: int

    def row(self, i: int, j: int, l: int) -> ObservedOutput:
        return ObservedOutput(self.inputs[i], self.clocks_ps[j],
                              self.duties[l], self.observed[i][j][l])

    def error_cells(self) -> list[tuple[int, int, int]]:
        out = []
        for i, per_clock in enumerate(self.observed):
            for j, per_duty in enumerate(per_clock):
                for l, word in enumerate(per_duty):
                    if word is None:
                        out.append((i, j, l))
        return out


def sweep(n: Netlist | CompiledNetlist, annotations: dict[int, DelayAnnotation],
          inputs: list[int], clocks_ps: list[float], read_cycle: int,
          budget: int = DEFAULT_EVENT_BUDGET) -> OutputGrid:
    """Exhaustive (input x clock x duty) sweep on one chip instance.

    Duty order follows sorted(annotations). Golden words come from the
    zero-delay evaluator, once per input.
    """
    cn = n if isinstance(n, CompiledNetlist) else CompiledNetlist(n)
    duties = sorted(annotations)
    bound = [(duty, cn.bind(annotations[duty])) for duty in duties]
    golden = [golden_output(cn.netlist, x, read_cycle) for x in inputs]
    observed: list[list[list[int | None]]] = []
    for x in inputs:
        per_clock = []
        for T in clocks_ps:
            per_duty: list[int | None] = []
            for duty, delays in bound:
                try:
                    obs = _simulate_bound(cn, delays, duty, x, T, read_cycle, budget)
                    per_duty.append(obs.output)
                except SimulationBudget:
                    per_duty.append(None)
            per_clock.append(per_duty)
        observed.append(per_clock)
    return OutputGrid(inputs=list(inputs), clocks_ps=[float(t) for t in clocks_ps],
                      duties=duties, golden=golden, observed=observed,
                      read_cycle=read_cycle)


def grid_to_jsonl(g: OutputGrid) -> str:
    """One line per (input, clock, duty) cell; header line carries the axes
    so the grid reassembles without guessing."""
    head = {"kind": "output_grid", "clocks_ps": g.clocks_ps, "duties": g.duties,
            "read_cycle": g.read_cycle}
    lines = [json.dumps(head, sort_keys=True)]
    for i, x in enumerate(g.inputs):
        for j, t in enumerate(g.clocks_ps):
            for l, duty in enumerate(g.duties):
                word = g.observed[i][j][l]
                lines.append(json.dumps(
                    {"input": format(x, "x"), "golden": format(g.golden[i], "x"),
                     "clock_ps": t, "duty": duty,
                     "observed": None if word is None else format(word, "x")},
                    sort_keys=True))
    return "\n".join(lines) + "\n"


def grid_from_jsonl(text: str) -> OutputGrid:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = json.loads(lines[0])
    if head.get("kind") != "output_grid":
        raise ValueError("not an output grid file")
    clocks = [float(t) for t in head["clocks_ps"]]
    duties = [int(d) for d in head["duties"]]
    per_cell = len(clocks) * len(duties)
    body = lines[1:]
    if len(body) % per_cell:
        raise ValueError("grid file truncated")
    inputs, golden, observed = [], [], []
    for off in range(0, len(body), per_cell):
        rows = [json.loads(ln) for ln in body[off:off + per_cell]]
        x = int(rows[0]["input"], 16)
        inputs.append(x)
        golden.append(int(rows[0]["golden"], 16))
        per_clock = []
        r = 0
        for j in range(len(clocks)):
            per_duty: list[int | None] = []
            for l in range(len(duties)):
                row = rows[r]; r += 1
                if int(row["input"], 16) != x or row["duty"] != duties[l]:
                    raise ValueError("grid rows out of order")
                obs = row["observed"]
                per_duty.append(None if obs is None else int(obs, 16))
            per_clock.append(per_duty)
        observed.append(per_clock)
    return OutputGrid(inputs=inputs, clocks_ps=clocks, duties=duties,
                      golden=golden, observed=observed,
                      read_cycle=int(head["read_cycle"]))
