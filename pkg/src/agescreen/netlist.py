"""Gate-level structural netlists: a small line-oriented text format plus
the graph queries the rest of the workbench leans on (single-driver check,
combinational topological order, fanout counts).

Format sketch::

    module mul8
    # meta n_read=9
    input a0 a1 ...
    output p0 p1 ...
    const0 lo
    const1 hi
    gate u1 NAND2 out=n1 in=a0,b0
    dff r0 q=s0 d=n9 init=0
    end

One driver per net, one implicit global clock, no tristate or buses.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum


class CellKind(Enum):
    INV = "INV"
    BUF = "BUF"
    AND2 = "AND2"
    NAND2 = "NAND2"
    OR2 = "OR2"
    NOR2 = "NOR2"
    XOR2 = "XOR2"
    XNOR2 = "XNOR2"
    MUX2 = "MUX2"
    DFF = "DFF"
    CONST0 = "CONST0"
    CONST1 = "CONST1"


# input pin count per kind (MUX2 pins are a, b, sel; out = b if sel else a)
KIND_ARITY = {
    CellKind.INV: 1,
    CellKind.BUF: 1,
    CellKind.AND2: 2,
    CellKind.NAND2: 2,
    CellKind.OR2: 2,
    CellKind.NOR2: 2,
    CellKind.XOR2: 2,
    CellKind.XNOR2: 2,
    CellKind.MUX2: 3,
    CellKind.DFF: 1,
    CellKind.CONST0: 0,
    CellKind.CONST1: 0,
}

COMB_KINDS = frozenset(k for k in CellKind if k not in (CellKind.DFF, CellKind.CONST0, CellKind.CONST1))

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")


class NetlistError(ValueError):
    """Raised for syntax errors and structural rule violations."""


@dataclass(frozen=True)
class Cell:
    name: str
    kind: CellKind
    inputs: tuple[str, ...]
    output: str
    init: int = 0  # DFF power-on state, ignored for other kinds

    def __post_init__(self):
        if len(self.inputs) != KIND_ARITY[self.kind]:
            raise NetlistError(
                f"cell {self.name}: kind {self.kind.value} takes "
                f"{KIND_ARITY[self.kind]} inputs, got {len(self.inputs)}")
        if self.init not in (0, 1):
            raise NetlistError(f"cell {self.name}: init must be 0 or 1")


@dataclass(frozen=True)
class Netlist:
    """Immutable netlist. Port order in `inputs`/`outputs` defines word bit
    order everywhere else (bit i of an input word feeds inputs[i])."""

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    cells: tuple[Cell, ...]
    meta: dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def width_in(self):
        return len(self.inputs)

    @property
    def width_out(self):
        return len(self.outputs)


@dataclass(frozen=True)
class NetlistStats:
    gate_count: int  # combinational cells, constants excluded
    dff_count: int
    const_count: int
    net_count: int
    width_in: int
    width_out: int


def netlist_stats(n: Netlist) -> NetlistStats:
    gates = sum(1 for c in n.cells if c.kind in COMB_KINDS)
    dffs = sum(1 for c in n.cells if c.kind is CellKind.DFF)
    consts = sum(1 for c in n.cells if c.kind in (CellKind.CONST0, CellKind.CONST1))
    nets = set(n.inputs)
    for c in n.cells:
        nets.add(c.output)
        nets.update(c.inputs)
    nets.update(n.outputs)
    return NetlistStats(gates, dffs, consts, len(nets), len(n.inputs), len(n.outputs))


def driver_map(n: Netlist) -> dict[str, Cell | None]:
    """Net -> driving cell, or None for primary inputs. Only driven nets
    appear; validation guarantees completeness for valid netlists."""
    drv: dict[str, Cell | None] = {p: None for p in n.inputs}
    for c in n.cells:
        drv[c.output] = c
    return drv


def fanout_map(n: Netlist) -> dict[str, int]:
    """Net -> number of sinks (cell input pins plus primary-output taps).

    Added load on a net is what makes an inserted cell visible to the delay
    model, so Trojan gates show up here even when logically dormant.
    """
    fo: dict[str, int] = {p: 0 for p in n.inputs}
    for c in n.cells:
        fo.setdefault(c.output, 0)
        for pin in c.inputs:
            fo[pin] = fo.get(pin, 0) + 1
    for p in n.outputs:
        fo[p] = fo.get(p, 0) + 1
    return fo


def validate(n: Netlist) -> list[str]:
    """Structural rule check. Returns a list of violation messages, empty
    when the netlist is well formed.

    Rules: unique cell names, unique port listings, exactly one driver per
    net, every cell input and primary output driven, and an acyclic
    combinational subgraph (DFF Q pins are sources, D pins are sinks).
    Nets with no sink are allowed.
    """
    errs: list[str] = []

    seen_cells: set[str] = set()
    for c in n.cells:
        if c.name in seen_cells:
            errs.append(f"duplicate cell id {c.name}")
        seen_cells.add(c.name)

    if len(set(n.inputs)) != len(n.inputs):
        errs.append("duplicate net in input ports")
    if len(set(n.outputs)) != len(n.outputs):
        errs.append("duplicate net in output ports")

    driver: dict[str, str] = {}
    for p in n.inputs:
        driver[p] = "<input>"
    for c in n.cells:
        if c.output in driver:
            errs.append(f"net {c.output}: multiple drivers ({driver[c.output]} and {c.name})")
        else:
            driver[c.output] = c.name

    for c in n.cells:
        for pin in c.inputs:
            if pin not in driver:
                errs.append(f"cell {c.name}: input net {pin} is undriven")
    for p in n.outputs:
        if p not in driver:
            errs.append(f"primary output {p} is undriven")

    errs.extend(_comb_cycle_check(n))
    return errs


def _comb_cycle_check(n: Netlist) -> list[str]:
    # Kahn on combinational cells only; whatever cannot be scheduled sits on
    # a cycle, and one witness loop is reported.
    comb = [c for c in n.cells if c.kind in COMB_KINDS]
    produced_by = {c.output: i for i, c in enumerate(comb)}
    deps: list[list[int]] = []  # comb cell -> comb cells feeding it
    loads: list[list[int]] = [[] for _ in comb]
    for i, c in enumerate(comb):
        dep = []
        for pin in c.inputs:
            j = produced_by.get(pin)
            if j is not None:
                dep.append(j)
                loads[j].append(i)
        deps.append(dep)
    missing = [len(d) for d in deps]
    ready = [i for i, m in enumerate(missing) if m == 0]
    done = 0
    while ready:
        i = ready.pop()
        done += 1
        for j in loads[i]:
            missing[j] -= 1
            if missing[j] == 0:
                ready.append(j)
    if done == len(comb):
        return []
    stuck = [i for i, m in enumerate(missing) if m > 0]
    witness = _cycle_witness(comb, deps, stuck)
    return ["combinational cycle through " + " -> ".join(witness)]


def _cycle_witness(comb, deps, stuck):
    stuck_set = set(stuck)
    start = stuck[0]
    seen = {}
    order = []
    i = start
    while i not in seen:
        seen[i] = len(order)
        order.append(i)
        i = next(d for d in deps[i] if d in stuck_set)
    loop = order[seen[i]:] + [i]
    return [comb[j].name for j in loop]


def topo_order(n: Netlist) -> list[Cell]:
    """Deterministic topological order of the non-DFF cells (constants
    first-come). DFFs are excluded; their Q nets count as already-available
    sources, as do primary inputs. Raises NetlistError on a cycle."""
    comb = [c for c in n.cells if c.kind is not CellKind.DFF]
    produced_by = {c.output: i for i, c in enumerate(comb)}
    loads: list[list[int]] = [[] for _ in comb]
    missing = [0] * len(comb)
    for i, c in enumerate(comb):
        for pin in c.inputs:
            j = produced_by.get(pin)
            if j is not None and comb[j].kind is not CellKind.DFF:
                missing[i] += 1
                loads[j].append(i)
    # pop lowest index first so the order is stable across runs
    import heapq
    ready = [i for i, m in enumerate(missing) if m == 0]
    heapq.heapify(ready)
    out: list[Cell] = []
    while ready:
        i = heapq.heappop(ready)
        out.append(comb[i])
        for j in loads[i]:
            missing[j] -= 1
            if missing[j] == 0:
                heapq.heappush(ready, j)
    if len(out) != len(comb):
        raise NetlistError("combinational cycle, run validate() for a witness")
    return out


# -- text format -------------------------------------------------------------

def parse_netlist(text: str) -> Netlist:
    """Parse the text format and validate the result.

    Raises NetlistError with a line number for syntax problems, or with the
    collected rule violations for structural ones.
    """
    name = None
    inputs: list[str] = []
    outputs: list[str] = []
    cells: list[Cell] = []
    meta: dict[str, str] = {}
    saw_end = False

    def fail(lineno, msg):
        raise NetlistError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("meta "):
                for tok in body[5:].split():
                    if "=" not in tok:
                        fail(lineno, f"malformed meta entry {tok!r}")
                    k, v = tok.split("=", 1)
                    meta[k] = v
            continue
        if saw_end:
            fail(lineno, "statement after end")
        toks = line.split()
        stmt = toks[0]
        if stmt == "module":
            if name is not None:
                fail(lineno, "second module statement")
            if len(toks) != 2 or not _NAME_RE.match(toks[1]):
                fail(lineno, "expected: module <name>")
            name = toks[1]
            continue
        if name is None:
            fail(lineno, "statement before module")
        if stmt == "input" or stmt == "output":
            dest = inputs if stmt == "input" else outputs
            if len(toks) < 2:
                fail(lineno, f"empty {stmt} list")
            for t in toks[1:]:
                if not _NAME_RE.match(t):
                    fail(lineno, f"bad net name {t!r}")
                dest.append(t)
        elif stmt == "const0" or stmt == "const1":
            kind = CellKind.CONST0 if stmt == "const0" else CellKind.CONST1
            if len(toks) != 2 or not _NAME_RE.match(toks[1]):
                fail(lineno, f"expected: {stmt} <net>")
            cells.append(Cell(f"_{stmt}_{toks[1]}", kind, (), toks[1]))
        elif stmt == "gate":
            if len(toks) != 5:
                fail(lineno, "expected: gate <id> <KIND> out=<net> in=<nets>")
            cid, kname, outf, inf = toks[1:]
            try:
                kind = CellKind[kname]
            except KeyError:
                fail(lineno, f"unknown cell kind {kname!r}")
            if kind in (CellKind.DFF, CellKind.CONST0, CellKind.CONST1):
                fail(lineno, f"kind {kname} is not a gate statement")
            if not _NAME_RE.match(cid):
                fail(lineno, f"bad cell id {cid!r}")
            if not outf.startswith("out=") or not inf.startswith("in="):
                fail(lineno, "expected out=<net> in=<nets>")
            out_net = outf[4:]
            in_nets = tuple(inf[3:].split(","))
            for t in (out_net, *in_nets):
                if not _NAME_RE.match(t):
                    fail(lineno, f"bad net name {t!r}")
            if len(in_nets) != KIND_ARITY[kind]:
                fail(lineno, f"{kname} takes {KIND_ARITY[kind]} inputs, got {len(in_nets)}")
            cells.append(Cell(cid, kind, in_nets, out_net))
        elif stmt == "dff":
            if len(toks) != 5:
                fail(lineno, "expected: dff <id> q=<net> d=<net> init=<0|1>")
            cid, qf, df, initf = toks[1:]
            if not (qf.startswith("q=") and df.startswith("d=") and initf.startswith("init=")):
                fail(lineno, "expected: dff <id> q=<net> d=<net> init=<0|1>")
            if initf[5:] not in ("0", "1"):
                fail(lineno, "init must be 0 or 1")
            for t in (cid, qf[2:], df[2:]):
                if not _NAME_RE.match(t):
                    fail(lineno, f"bad name {t!r}")
            cells.append(Cell(cid, CellKind.DFF, (df[2:],), qf[2:], init=int(initf[5:])))
        elif stmt == "end":
            if len(toks) != 1:
                fail(lineno, "trailing tokens after end")
            saw_end = True
        else:
            fail(lineno, f"unknown statement {stmt!r}")

    if name is None:
        raise NetlistError("missing module statement")
    if not saw_end:
        raise NetlistError("missing end statement")

    n = Netlist(name, tuple(inputs), tuple(outputs), tuple(cells), meta)
    errs = validate(n)
    if errs:
        raise NetlistError(f"netlist {name}: " + "; ".join(errs))
    return n


def serialize(n: Netlist, chunk: int = 12) -> str:
    """Canonical text form. parse(serialize(n)) reproduces n, and the text
    is a fixed point of another parse/serialize round."""
    lines = [f"module {n.name}"]
    for k in sorted(n.meta):
        lines.append(f"# meta {k}={n.meta[k]}")
    for stmt, ports in (("input", n.inputs), ("output", n.outputs)):
        for i in range(0, len(ports), chunk):
            lines.append(stmt + " " + " ".join(ports[i:i + chunk]))
    for c in n.cells:
        if c.kind is CellKind.CONST0:
            lines.append(f"const0 {c.output}")
        elif c.kind is CellKind.CONST1:
            lines.append(f"const1 {c.output}")
        elif c.kind is CellKind.DFF:
            lines.append(f"dff {c.name} q={c.output} d={c.inputs[0]} init={c.init}")
        else:
            lines.append(f"gate {c.name} {c.kind.value} out={c.output} in=" + ",".join(c.inputs))
    lines.append("end")
    return "\n".join(lines) + "\n"
