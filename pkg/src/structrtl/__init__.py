"""Verilog-subset -> CDFG compiler with a structure-aware graph model for
post-synthesis area/delay estimation."""

__version__ = "0.1.0"

from .cdfg import Cdfg, Edge, Node, NodeType
from .elaborate import compile_verilog

__all__ = ["Cdfg", "Edge", "Node", "NodeType", "compile_verilog", "__version__"]
