"""Synthetic structural netlists for sampled configurations.

Stands in for an accelerator RTL generator so that every configuration has a
hierarchy to turn into an LHG. Configurations with the Axiline-style knobs
(benchmark, bitwidth, input_bitwidth, dimension, num_cycles) get a three-stage
pipeline whose lane count is ceil(dimension / num_cycles); any other space gets
one replicated block per parameter.
"""

from __future__ import annotations

import math
from collections.abc import Mapping

from .param_space import CAT, ParameterSpace

AXILINE_KEYS = ("benchmark", "bitwidth", "input_bitwidth", "dimension", "num_cycles")


class _Writer:
    def __init__(self) -> None:
        self.lines: list[str] = []
        self.defined: set[str] = set()

    def module(self, name, inputs, outputs, body):
        if name in self.defined:
            return
        self.defined.add(name)
        ports = [p for p, _ in inputs] + [p for p, _ in outputs]
        self.lines.append(f"module {name} ({', '.join(ports)});")
        for direction, group in (("input", inputs), ("output", outputs)):
            for p, w in group:
                rng = f" [{w - 1}:0]" if w > 1 else ""
                self.lines.append(f"  {direction}{rng} {p};")
        self.lines.extend("  " + b for b in body)
        self.lines.append("endmodule")
        self.lines.append("")

    def text(self) -> str:
        return "\n".join(self.lines)


def _gates(kind: str, count: int, n_in: int, prefix: str) -> list[str]:
    ins = ", ".join(f"n{j}" for j in range(n_in))
    return [f"{kind} {prefix}{i} (o{i}, {ins});" for i in range(count)]


def _inst(module: str, name: str) -> str:
    return f"{module} {name} (.clk(clk));"


def axiline_netlist(cfg: Mapping) -> str:
    bench = str(cfg["benchmark"])
    bw = int(cfg["bitwidth"])
    ibw = int(cfg["input_bitwidth"])
    dim = int(cfg["dimension"])
    cycles = int(cfg["num_cycles"])
    lanes = math.ceil(dim / cycles)
    w = _Writer()

    mac = f"mac_b{bw}_i{ibw}"
    w.module(
        mac,
        [("clk", 1), ("x", ibw), ("w", bw), ("acc_in", 2 * bw)],
        [("acc_out", 2 * bw)],
        _gates("and", bw * ibw, 2, "pp") + _gates("xor", 2 * bw, 3, "fa") + _gates("mux", bw, 3, "sel")
        + _gates("dff", 2 * bw, 2, "r"),
    )
    adder = f"adder_tree_l{lanes}_b{bw}"
    w.module(
        adder,
        [("clk", 1), ("psum", 2 * bw)],
        [("sum", 2 * bw)],
        _gates("xor", max(lanes - 1, 1) * bw, 3, "add") + _gates("and", max(lanes - 1, 1) * bw, 2, "cy"),
    )
    stage1 = f"stage1_l{lanes}"
    w.module(
        stage1,
        [("clk", 1), ("x", ibw * lanes), ("w", bw * lanes)],
        [("y", 2 * bw)],
        [_inst(mac, f"mac{i}") for i in range(lanes)] + [_inst(adder, "tree")],
    )

    if bench == "svm":
        body2 = _gates("xor", 2 * bw, 2, "cmp") + _gates("mux", 2 * bw, 3, "hinge")
    elif bench == "logistic":
        body2 = _gates("mem", 2, 2, "lut") + _gates("mux", 2 * bw, 3, "sig")
    elif bench == "recommender":
        body2 = _gates("and", bw * bw, 2, "mul") + _gates("xor", 2 * bw, 3, "acc")
    else:
        body2 = _gates("xor", 2 * bw, 3, "sub") + _gates("inv", bw, 1, "neg")
    stage2 = f"stage2_{bench}_b{bw}"
    w.module(stage2, [("clk", 1), ("y", 2 * bw)], [("g", bw)], body2 + _gates("dff", bw, 2, "r"))

    upd = f"update_b{bw}"
    w.module(
        upd,
        [("clk", 1), ("g", bw), ("w_in", bw)],
        [("w_out", bw)],
        _gates("and", bw * bw // 2, 2, "pp") + _gates("xor", bw, 3, "sub") + _gates("dff", bw, 2, "r"),
    )
    stage3 = f"stage3_l{lanes}"
    w.module(stage3, [("clk", 1), ("g", bw)], [("w", bw * lanes)], [_inst(upd, f"upd{i}") for i in range(lanes)])

    cbits = max(1, math.ceil(math.log2(cycles + 1)))
    ctrl = f"ctrl_c{cycles}"
    w.module(
        ctrl,
        [("clk", 1), ("start", 1)],
        [("phase", 2), ("done", 1)],
        _gates("dff", cbits + 2, 2, "st") + _gates("xor", cbits, 2, "inc") + _gates("and", cbits + 2, 3, "dec"),
    )
    n_mem = max(1, math.ceil(dim * ibw / 64))
    buf = f"buffer_d{dim}_i{ibw}"
    w.module(buf, [("clk", 1), ("din", ibw)], [("dout", ibw * lanes)], _gates("mem", n_mem, 2, "bank"))

    top = "axiline_top"
    w.module(
        top,
        [("clk", 1), ("start", 1), ("din", ibw)],
        [("dout", bw), ("done", 1)],
        [_inst(ctrl, "ctrl"), _inst(buf, "ibuf"), _inst(stage1, "s1"), _inst(stage2, "s2"), _inst(stage3, "s3")],
    )
    return w.text()


def generic_netlist(space: ParameterSpace, cfg: Mapping) -> str:
    w = _Writer()
    insts = []
    for spec in space:
        if spec.kind == CAT:
            idx = spec.choices.index(str(cfg[spec.name]))
            reps, width = 1, 2 + 2 * idx
        else:
            reps, width = 1 + round(4 * spec.normalize(cfg[spec.name])), 4
        cell = f"cell_{spec.name}_w{width}"
        w.module(cell, [("clk", 1), ("a", width)], [("y", width)], _gates("and", width, 2, "g") + _gates("dff", width, 2, "r"))
        block = f"block_{spec.name}_r{reps}"
        w.module(block, [("clk", 1)], [("y", 1)], [_inst(cell, f"c{i}") for i in range(reps)])
        insts.append(_inst(block, f"u_{spec.name}"))
    w.module("design_top", [("clk", 1)], [("y", 1)], insts)
    return w.text()


def netlist_for(space: ParameterSpace, cfg: Mapping) -> tuple[str, str]:
    """(netlist text, top module name) for a configuration."""
    if all(k in cfg for k in AXILINE_KEYS):
        return axiline_netlist(cfg), "axiline_top"
    return generic_netlist(space, cfg), "design_top"
