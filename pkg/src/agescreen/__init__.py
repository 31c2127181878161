"""agescreen: a desk-scale workbench that screens gate-level ICs for
dormant hardware Trojans by sweeping controlled transistor aging against
over-clocked capture, turning the resulting bit errors into feature
tensors, and flagging outliers with a one-class detector trained only on
clean-chip behavior."""

from agescreen.netlist import (
    Cell,
    CellKind,
    Netlist,
    NetlistError,
    NetlistStats,
    netlist_stats,
    parse_netlist,
    serialize,
    validate,
)

__all__ = [
    "Cell",
    "CellKind",
    "Netlist",
    "NetlistError",
    "NetlistStats",
    "netlist_stats",
    "parse_netlist",
    "serialize",
    "validate",
]

__version__ = "0.1.0"
