"""Independent reference implementations used as test oracles.

Everything here is deliberately written with a different shape than the
package code (dict-based recursion instead of compiled arrays, exhaustive
enumeration instead of best-first search) so that agreement between the two
routes is meaningful evidence, not an echo.
"""

from __future__ import annotations

import random

from agescreen.netlist import Cell, CellKind, Netlist


# -- reference logic evaluation ---------------------------------------------

def ref_eval_cell(kind: CellKind, ins: list[int]) -> int:
    if kind is CellKind.INV:
        return 1 - ins[0]
    if kind is CellKind.BUF:
        return ins[0]
    if kind is CellKind.AND2:
        return ins[0] & ins[1]
    if kind is CellKind.NAND2:
        return 1 - (ins[0] & ins[1])
    if kind is CellKind.OR2:
        return ins[0] | ins[1]
    if kind is CellKind.NOR2:
        return 1 - (ins[0] | ins[1])
    if kind is CellKind.XOR2:
        return ins[0] ^ ins[1]
    if kind is CellKind.XNOR2:
        return 1 - (ins[0] ^ ins[1])
    if kind is CellKind.MUX2:
        return ins[1] if ins[2] else ins[0]
    raise ValueError(kind)


def ref_cycle_run(n: Netlist, word: int, cycles: int) -> int:
    """Cycle-accurate zero-delay run: returns the output word visible after
    `cycles` clock edges have fired and the logic has settled.

    Memoized recursive evaluation per cycle over net names; no reliance on
    the package's topological order.
    """
    driver = {}
    for c in n.cells:
        driver[c.output] = c
    state = {c.name: c.init for c in n.cells if c.kind is CellKind.DFF}
    pin_val = {p: (word >> i) & 1 for i, p in enumerate(n.inputs)}

    def settle(cur_state):
        memo = dict(pin_val)
        for c in n.cells:
            if c.kind is CellKind.DFF:
                memo[c.output] = cur_state[c.name]
            elif c.kind is CellKind.CONST0:
                memo[c.output] = 0
            elif c.kind is CellKind.CONST1:
                memo[c.output] = 1

        def value(net):
            if net in memo:
                return memo[net]
            c = driver[net]
            memo[net] = v = ref_eval_cell(c.kind, [value(p) for p in c.inputs])
            return v

        return value

    for _ in range(cycles):
        value = settle(state)
        state = {c.name: value(c.inputs[0]) for c in n.cells if c.kind is CellKind.DFF}
    value = settle(state)
    out = 0
    for i, p in enumerate(n.outputs):
        out |= value(p) << i
    return out


# -- reference path enumeration ---------------------------------------------

def ref_all_paths(n: Netlist, delays: dict[str, float]):
    """Exhaustively enumerate every source-to-sink structural path as a cell
    name sequence with its delay (front-to-back float sum).

    Sources are primary inputs and DFF Q pins (path starts with the DFF
    cell, so its clock-to-q delay is included); sinks are DFF D pins and
    primary outputs. Dead-end nets terminate nothing, so prefixes that
    never reach a sink are discarded.
    """
    loads: dict[str, list[Cell]] = {}
    for c in n.cells:
        if c.kind in (CellKind.DFF, CellKind.CONST0, CellKind.CONST1):
            continue
        for pin in c.inputs:
            loads.setdefault(pin, []).append(c)
    dff_d = {}
    for c in n.cells:
        if c.kind is CellKind.DFF:
            dff_d[c.inputs[0]] = dff_d.get(c.inputs[0], 0) + 1
    po = set(n.outputs)

    out = []

    def walk(net, cells, acc):
        if net in dff_d or net in po:
            out.append((acc, tuple(cells)))
        for c in loads.get(net, ()):
            walk(c.output, cells + [c.name], acc + delays[c.name])

    for c in n.cells:
        if c.kind is CellKind.DFF:
            walk(c.output, [c.name], delays[c.name])
    started = set()
    pins = set(n.inputs)
    for c in n.cells:
        if c.kind in (CellKind.DFF, CellKind.CONST0, CellKind.CONST1):
            continue
        if c.name not in started and any(p in pins for p in c.inputs):
            started.add(c.name)
            walk(c.output, [c.name], delays[c.name])
    return out


def ref_count_paths(n: Netlist) -> int:
    """Number of distinct source-to-sink cell sequences, by dynamic
    programming (used to keep brute-force test cases tractable)."""
    loads: dict[str, list[Cell]] = {}
    for c in n.cells:
        if c.kind in (CellKind.DFF, CellKind.CONST0, CellKind.CONST1):
            continue
        for pin in c.inputs:
            loads.setdefault(pin, []).append(c)
    dff_d = set(c.inputs[0] for c in n.cells if c.kind is CellKind.DFF)
    po = set(n.outputs)
    memo: dict[str, int] = {}

    def suffixes(net):
        if net in memo:
            return memo[net]
        total = 1 if (net in dff_d or net in po) else 0
        for c in loads.get(net, ()):
            total += suffixes(c.output)
        memo[net] = total
        return total

    total = 0
    for c in n.cells:
        if c.kind is CellKind.DFF:
            total += suffixes(c.output)
    pins = set(n.inputs)
    seen = set()
    for c in n.cells:
        if c.kind in (CellKind.DFF, CellKind.CONST0, CellKind.CONST1):
            continue
        if c.name not in seen and any(p in pins for p in c.inputs):
            seen.add(c.name)
            total += suffixes(c.output)
    return total


# -- random structural netlists ---------------------------------------------

def random_netlist(rng: random.Random, n_gates=20, n_inputs=4, n_dffs=2,
                   n_outputs=3, fan_limit=3) -> Netlist:
    """Random valid netlist for property tests: acyclic by construction
    (gates only consume earlier nets), every net driven, ports well formed."""
    comb_kinds = [CellKind.INV, CellKind.BUF, CellKind.AND2, CellKind.NAND2,
                  CellKind.OR2, CellKind.NOR2, CellKind.XOR2, CellKind.XNOR2,
                  CellKind.MUX2]
    inputs = tuple(f"i{k}" for k in range(n_inputs))
    avail = list(inputs)
    cells: list[Cell] = []
    q_nets = []
    for d in range(n_dffs):
        q = f"q{d}"
        q_nets.append(q)
        avail.append(q)
    fan_used: dict[str, int] = {}

    def pick():
        # soft fanout cap keeps brute-force path counts small
        cands = [w for w in avail if fan_used.get(w, 0) < fan_limit]
        if not cands:
            cands = avail
        w = rng.choice(cands)
        fan_used[w] = fan_used.get(w, 0) + 1
        return w

    for g in range(n_gates):
        kind = rng.choice(comb_kinds)
        ins = tuple(pick() for _ in range(
            1 if kind in (CellKind.INV, CellKind.BUF) else
            3 if kind is CellKind.MUX2 else 2))
        out = f"n{g}"
        cells.append(Cell(f"g{g}", kind, ins, out))
        avail.append(out)
    for d, q in enumerate(q_nets):
        cells.append(Cell(f"f{d}", CellKind.DFF, (rng.choice(avail),), q,
                          init=rng.randint(0, 1)))
    outs = tuple(rng.sample([c.output for c in cells if c.kind is not CellKind.DFF] or list(inputs),
                            min(n_outputs, n_gates)))
    return Netlist("rand", inputs, outs, tuple(cells))
