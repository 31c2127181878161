"""Event simulator semantics tests.

The small cases are hand-traced: expected values were worked out on paper
from the documented semantics (transport delay, last-write-wins, pre-edge
sampling) before running anything.
"""

import random

import pytest
from hypothesis import given, settings, strategies as st

from agescreen.aging import AgingParams, DelayAnnotation, annotate, critical_path, make_variation
from agescreen.netlist import Cell, CellKind, Netlist, parse_netlist
from agescreen.sim import (
    CompiledNetlist, SimulationBudget, golden_output, grid_from_jsonl,
    grid_to_jsonl, simulate, sweep,
)
from support import ref_cycle_run

P = AgingParams()

DOUBLE_INV = parse_netlist("""\
module t1
input a
output y
gate u1 INV out=n1 in=a
gate u2 INV out=y in=n1
end
""")

REG_CHAIN = parse_netlist("""\
module t2
input a
output y
gate u1 INV out=n1 in=a
gate u2 INV out=n2 in=n1
dff r1 q=y d=n2 init=0
end
""")


def flat_ann(n, ps):
    return DelayAnnotation(duty=0, seed=0, delays={c.name: ps for c in n.cells})


def test_combinational_settle_and_glitch_suppression():
    ann = annotate(DOUBLE_INV, P, duty=0)  # 8 ps each inverter
    for a in (0, 1):
        out = simulate(DOUBLE_INV, ann, a, clock_period=100.0, read_cycle=1)
        assert out.output == a
    # trace for a=0: the start-up glitch on y scheduled at t=8 is superseded
    # by the t=16 write of the settled value, so y never pulses


def test_stale_capture_under_overclocking():
    ann = annotate(REG_CHAIN, P, duty=0)
    # n2 settles at t=8 for a=1; an edge at t=6 captures the stale 0
    ok = simulate(REG_CHAIN, ann, 1, clock_period=12.0, read_cycle=2)
    assert ok.output == 1
    bad = simulate(REG_CHAIN, ann, 1, clock_period=6.0, read_cycle=2)
    assert bad.output == 0
    assert golden_output(REG_CHAIN, 1, 2) == 1


def test_sample_is_before_the_read_edge():
    # flop output changes 20 ps after the edge; reading at cycle k shows the
    # value captured at edge k-1, not k
    ann = annotate(REG_CHAIN, P, duty=0)
    out = simulate(REG_CHAIN, ann, 1, clock_period=30.0, read_cycle=1)
    assert out.output == 0  # only the reset value, no edge has updated y yet
    out = simulate(REG_CHAIN, ann, 1, clock_period=30.0, read_cycle=2)
    assert out.output == 1


def test_event_on_edge_applies_after_sampling():
    # with clock == settle time the D update lands exactly on the edge and
    # must lose the race: the flop keeps the stale value
    n = parse_netlist("""\
module t3
input a
output y
gate u1 BUF out=n1 in=a
dff r1 q=y d=n1 init=0
end
""")
    ann = flat_ann(n, 10.0)
    out = simulate(n, ann, 1, clock_period=10.0, read_cycle=2)
    assert out.output == 0
    out = simulate(n, ann, 1, clock_period=10.000001, read_cycle=2)
    assert out.output == 1


def test_dff_init_vector_visible_before_any_edge():
    n = parse_netlist("""\
module t4
input a
output y0 y1
dff r0 q=y0 d=a init=1
dff r1 q=y1 d=a init=0
end
""")
    out = simulate(n, flat_ann(n, 5.0), 0, clock_period=50.0, read_cycle=1)
    assert out.output == 0b01


def test_mux_and_const_cells():
    n = parse_netlist("""\
module t5
input s
output y
const1 hi
const0 lo
gate m MUX2 out=y in=lo,hi,s
end
""")
    ann = annotate(n, P, duty=0)
    assert simulate(n, ann, 1, 100.0, 1).output == 1
    assert simulate(n, ann, 0, 100.0, 1).output == 0


def test_oscillator_trips_budget():
    ring = Netlist("ring", ("a",), ("n1",),
                   (Cell("u1", CellKind.INV, ("n1",), "n1"),))
    with pytest.raises(SimulationBudget):
        simulate(ring, flat_ann(ring, 5.0), 0, 1000.0, 1, budget=500)


def test_shift_register_timing():
    # two-stage shift: input reaches y after two edges
    n = parse_netlist("""\
module t6
input a
output y
dff r1 q=s1 d=a init=0
dff r2 q=y d=s1 init=0
end
""")
    ann = flat_ann(n, 20.0)
    assert simulate(n, ann, 1, 100.0, 1).output == 0
    assert simulate(n, ann, 1, 100.0, 2).output == 0
    assert simulate(n, ann, 1, 100.0, 3).output == 1
    assert golden_output(n, 1, 3) == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ample_clock_matches_both_golden_routes(seed):
    rng = random.Random(seed)
    n = None
    from support import random_netlist
    n = random_netlist(rng, n_gates=rng.randint(4, 25), n_dffs=rng.randint(0, 3),
                       n_inputs=4, n_outputs=3)
    duty = rng.choice([0, 40, 100])
    var = make_variation(seed % 13) if rng.random() < 0.5 else None
    ann = annotate(n, P, duty, variation=var) if var else annotate(n, P, duty)
    try:
        t_cp = critical_path(n, ann).delay
    except ValueError:
        t_cp = 0.0
    ample = 2.0 * max(t_cp, 50.0)
    read_cycle = rng.randint(1, 4)
    cn = CompiledNetlist(n)
    for _ in range(8):
        x = rng.randrange(1 << len(n.inputs))
        want = ref_cycle_run(n, x, read_cycle - 1)
        assert golden_output(n, x, read_cycle) == want
        got = simulate(cn, ann, x, ample, read_cycle)
        assert got.output == want


def test_determinism_same_bits():
    n = REG_CHAIN
    ann = annotate(n, P, duty=50, variation=make_variation(5))
    a = [simulate(n, ann, x, 9.0, 2).output for x in (0, 1)]
    b = [simulate(n, ann, x, 9.0, 2).output for x in (0, 1)]
    assert a == b


def test_sweep_grid_shape_and_jsonl_round_trip():
    n = REG_CHAIN
    anns = {d: annotate(n, P, d) for d in (0, 50, 100)}
    g = sweep(n, anns, inputs=[0, 1], clocks_ps=[6.0, 12.0, 40.0], read_cycle=2)
    assert g.duties == [0, 50, 100]
    assert len(g.observed) == 2 and len(g.observed[0]) == 3 and len(g.observed[0][0]) == 3
    assert g.golden == [golden_output(n, 0, 2), golden_output(n, 1, 2)]
    # aged inverters at duty 100 settle at 2 * 8 * 1.22 = 19.5 ps; the
    # 12 ps clock that was fine fresh now captures stale data
    i1 = g.inputs.index(1)
    j12 = g.clocks_ps.index(12.0)
    assert g.observed[i1][j12][0] == 1
    assert g.observed[i1][j12][2] == 0
    assert g.error_cells() == []
    back = grid_from_jsonl(grid_to_jsonl(g))
    assert back == g


def test_sweep_records_budget_blowups_as_none():
    ring = Netlist("ring", ("a",), ("n1",),
                   (Cell("u1", CellKind.INV, ("n1",), "n1"),))
    anns = {0: flat_ann(ring, 5.0)}
    g = sweep(ring, anns, inputs=[0], clocks_ps=[1000.0], read_cycle=1, budget=100)
    assert g.observed[0][0][0] is None
    assert g.error_cells() == [(0, 0, 0)]
    back = grid_from_jsonl(grid_to_jsonl(g))
    assert back == g


def test_input_width_checked():
    with pytest.raises(ValueError, match="wider"):
        simulate(DOUBLE_INV, flat_ann(DOUBLE_INV, 5.0), 2, 10.0, 1)
