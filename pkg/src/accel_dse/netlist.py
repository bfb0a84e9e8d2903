"""Structural netlist parsing and logical hierarchy graph (LHG) construction.

The accepted text format is a small structural Verilog subset::

    module NAME ( port, ... ) ;
      input|output|wire [MSB:LSB] name, ... ;
      KIND inst ( out, in, ... ) ;            // KIND: and or nand nor xor xnor
                                              //       inv buf mux dff latch mem
      MODULE inst ( .port(net), ... ) ;
    endmodule

Node features count only a module's own body. Aggregating over the hierarchy
is left to the graph model.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COMB_KINDS = frozenset({"and", "or", "nand", "nor", "xor", "xnor", "inv", "buf", "mux"})
FLOP_KINDS = frozenset({"dff", "latch"})
MEM_KINDS = frozenset({"mem"})
PRIMITIVE_KINDS = COMB_KINDS | FLOP_KINDS | MEM_KINDS
_KEYWORDS = frozenset({"module", "endmodule", "input", "output", "wire"})

FEATURE_NAMES = (
    "in_signals",
    "out_signals",
    "avg_in_bits",
    "avg_out_bits",
    "comb_cells",
    "flops",
    "mems",
    "avg_comb_inputs",
)


class NetlistError(ValueError):
    pass


class NetlistSyntaxError(NetlistError):
    def __init__(self, msg: str, line: int, col: int):
        self.line, self.col = line, col
        super().__init__(f"line {line}, column {col}: {msg}")


class UndefinedModuleError(NetlistError):
    def __init__(self, name: str, parent: str):
        self.name = name
        super().__init__(f"module {parent!r} instantiates undefined module {name!r}")


class DuplicateModuleError(NetlistError):
    pass


class HierarchyCycleError(NetlistError):
    pass


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "input" | "output"
    width: int = 1
    msb: int | None = None
    lsb: int | None = None


@dataclass(frozen=True)
class Wire:
    name: str
    width: int = 1
    msb: int | None = None
    lsb: int | None = None


@dataclass(frozen=True)
class Primitive:
    kind: str
    name: str
    output: str
    inputs: tuple[str, ...]

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class Instance:
    module: str
    name: str
    connections: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ModuleDef:
    name: str
    port_order: tuple[str, ...]
    ports: tuple[Port, ...]
    wires: tuple[Wire, ...] = ()
    primitives: tuple[Primitive, ...] = ()
    instances: tuple[Instance, ...] = ()

    @property
    def inputs(self) -> tuple[Port, ...]:
        return tuple(p for p in self.ports if p.direction == "input")

    @property
    def outputs(self) -> tuple[Port, ...]:
        return tuple(p for p in self.ports if p.direction == "output")


@dataclass(frozen=True)
class NetlistAst:
    modules: dict[str, ModuleDef]

    def __getitem__(self, name: str) -> ModuleDef:
        return self.modules[name]


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_$]*)|(?P<num>\d+)|(?P<punct>[()\[\]:,;.])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise NetlistSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ident", "num", "punct"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i = min(self.i + 1, len(self.toks) - 1)
        return t

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        shown = tok.text if tok.kind != "eof" else "end of input"
        raise NetlistSyntaxError(f"{msg} (got {shown!r})", tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        if self.peek().text != text or self.peek().kind == "eof":
            self.fail(f"expected {text!r}")
        return self.next()

    def ident(self, what: str = "identifier") -> str:
        t = self.peek()
        if t.kind != "ident" or t.text in _KEYWORDS:
            self.fail(f"expected {what}")
        return self.next().text

    def number(self) -> int:
        t = self.peek()
        if t.kind != "num":
            self.fail("expected number")
        return int(self.next().text)

    def net(self) -> str:
        name = self.ident("net name")
        if self.peek().text == "[":
            self.next()
            hi = self.number()
            if self.peek().text == ":":
                self.next()
                lo = self.number()
                self.expect("]")
                return f"{name}[{hi}:{lo}]"
            self.expect("]")
            return f"{name}[{hi}]"
        return name

    def parse(self) -> NetlistAst:
        modules: dict[str, ModuleDef] = {}
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text != "module":
                self.fail("expected 'module'")
            mod = self.module()
            if mod.name in modules:
                raise DuplicateModuleError(f"line {tok.line}: duplicate module name {mod.name!r}")
            modules[mod.name] = mod
        for mod in modules.values():
            for inst in mod.instances:
                if inst.module not in modules:
                    raise UndefinedModuleError(inst.module, mod.name)
        return NetlistAst(modules)

    def module(self) -> ModuleDef:
        self.expect("module")
        head = self.peek()
        name = self.ident("module name")
        self.expect("(")
        port_order: list[str] = []
        if self.peek().text != ")":
            port_order.append(self.ident("port name"))
            while self.peek().text == ",":
                self.next()
                port_order.append(self.ident("port name"))
        self.expect(")")
        self.expect(";")
        ports: dict[str, Port] = {}
        wires: list[Wire] = []
        prims: list[Primitive] = []
        insts: list[Instance] = []
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                self.fail(f"missing 'endmodule' for module {name!r}")
            if tok.text == "endmodule":
                self.next()
                break
            if tok.text in ("input", "output", "wire"):
                self.declaration(ports, wires)
            elif tok.kind == "ident" and tok.text in PRIMITIVE_KINDS:
                prims.append(self.primitive())
            elif tok.kind == "ident" and tok.text not in _KEYWORDS:
                insts.append(self.instance())
            else:
                self.fail("expected declaration, instance or 'endmodule'")
        for p in port_order:
            if p not in ports:
                raise NetlistSyntaxError(f"port {p!r} of module {name!r} has no direction", head.line, head.col)
        for p in ports:
            if p not in port_order:
                raise NetlistSyntaxError(f"{p!r} declared as port but not in module {name!r} header", head.line, head.col)
        return ModuleDef(
            name=name,
            port_order=tuple(port_order),
            ports=tuple(ports[p] for p in port_order),
            wires=tuple(wires),
            primitives=tuple(prims),
            instances=tuple(insts),
        )

    def declaration(self, ports: dict[str, Port], wires: list[Wire]) -> None:
        kw = self.next().text
        msb = lsb = None
        if self.peek().text == "[":
            self.next()
            msb = self.number()
            self.expect(":")
            lsb = self.number()
            self.expect("]")
        width = abs(msb - lsb) + 1 if msb is not None else 1
        while True:
            t = self.peek()
            name = self.ident("signal name")
            if kw == "wire":
                wires.append(Wire(name, width, msb, lsb))
            else:
                if name in ports:
                    self.fail(f"port {name!r} declared twice", t)
                ports[name] = Port(name, kw, width, msb, lsb)
            if self.peek().text != ",":
                break
            self.next()
        self.expect(";")

    def primitive(self) -> Primitive:
        kind = self.next().text
        name = self.ident("instance name")
        self.expect("(")
        nets = [self.net()]
        while self.peek().text == ",":
            self.next()
            nets.append(self.net())
        self.expect(")")
        self.expect(";")
        if len(nets) < 2:
            self.fail(f"primitive {kind} {name!r} needs an output and at least one input")
        return Primitive(kind, name, nets[0], tuple(nets[1:]))

    def instance(self) -> Instance:
        module = self.ident("module name")
        name = self.ident("instance name")
        self.expect("(")
        conns = []
        if self.peek().text != ")":
            while True:
                self.expect(".")
                port = self.ident("port name")
                self.expect("(")
                conns.append((port, self.net()))
                self.expect(")")
                if self.peek().text != ",":
                    break
                self.next()
        self.expect(")")
        self.expect(";")
        return Instance(module, name, tuple(conns))


def parse_netlist(text: str) -> NetlistAst:
    return _Parser(text).parse()


def format_netlist(ast: NetlistAst) -> str:
    """Canonical text for ``ast``; parsing the result gives back an equal AST."""
    out = []
    for mod in ast.modules.values():
        out.append(f"module {mod.name} ({', '.join(mod.port_order)});")
        for p in mod.ports:
            rng = f" [{p.msb}:{p.lsb}]" if p.msb is not None else ""
            out.append(f"  {p.direction}{rng} {p.name};")
        for w in mod.wires:
            rng = f" [{w.msb}:{w.lsb}]" if w.msb is not None else ""
            out.append(f"  wire{rng} {w.name};")
        for g in mod.primitives:
            out.append(f"  {g.kind} {g.name} ({', '.join((g.output,) + g.inputs)});")
        for inst in mod.instances:
            conns = ", ".join(f".{p}({n})" for p, n in inst.connections)
            out.append(f"  {inst.module} {inst.name} ({conns});")
        out.append("endmodule")
        out.append("")
    return "\n".join(out)


# --- features --------------------------------------------------------------

@dataclass(frozen=True)
class NodeFeatures:
    in_signals: int
    out_signals: int
    avg_in_bits: float
    avg_out_bits: float
    comb_cells: int
    flops: int
    mems: int
    avg_comb_inputs: float

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURE_NAMES], dtype=float)


def _mean(xs) -> float:
    xs = list(xs)
    return float(sum(xs)) / len(xs) if xs else 0.0


def extract_features(mod: ModuleDef) -> NodeFeatures:
    """Structural counts of one module body (submodule contents excluded).

    Latches count as flip-flops. Bit widths are averaged per port.
    """
    comb = [g for g in mod.primitives if g.kind in COMB_KINDS]
    return NodeFeatures(
        in_signals=len(mod.inputs),
        out_signals=len(mod.outputs),
        avg_in_bits=_mean(p.width for p in mod.inputs),
        avg_out_bits=_mean(p.width for p in mod.outputs),
        comb_cells=len(comb),
        flops=sum(g.kind in FLOP_KINDS for g in mod.primitives),
        mems=sum(g.kind in MEM_KINDS for g in mod.primitives),
        avg_comb_inputs=_mean(g.n_inputs for g in comb),
    )


# --- logical hierarchy graph ----------------------------------------------

@dataclass(frozen=True)
class LhgNode:
    id: int
    module: str
    features: NodeFeatures


@dataclass(frozen=True)
class LogicalHierarchyGraph:
    nodes: tuple[LhgNode, ...]
    edges: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def feature_matrix(self) -> np.ndarray:
        return np.vstack([n.features.as_vector() for n in self.nodes])

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "module": n.module, "features": n.features.as_vector().tolist()}
                for n in self.nodes
            ],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_json(cls, d: dict) -> "LogicalHierarchyGraph":
        nodes = []
        for n in d["nodes"]:
            f = n["features"]
            feats = NodeFeatures(int(f[0]), int(f[1]), float(f[2]), float(f[3]), int(f[4]), int(f[5]), int(f[6]), float(f[7]))
            nodes.append(LhgNode(int(n["id"]), n["module"], feats))
        return cls(tuple(nodes), tuple((int(a), int(b)) for a, b in d["edges"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def load(cls, path: str | Path) -> "LogicalHierarchyGraph":
        return cls.from_json(json.loads(Path(path).read_text()))


def _check_acyclic(ast: NetlistAst, top: str) -> None:
    state: dict[str, int] = {}  # 1 = on stack, 2 = done
    stack = [(top, iter(ast[top].instances))]
    state[top] = 1
    while stack:
        name, it = stack[-1]
        inst = next(it, None)
        if inst is None:
            state[name] = 2
            stack.pop()
            continue
        child = inst.module
        if state.get(child) == 1:
            path = [s[0] for s in stack] + [child]
            raise HierarchyCycleError("hierarchy cycle: " + " -> ".join(path))
        if child not in state:
            state[child] = 1
            stack.append((child, iter(ast[child].instances)))


def build_lhg(ast: NetlistAst, top_name: str) -> LogicalHierarchyGraph:
    """Depth-first hierarchy walk from ``top_name``.

    Every submodule *instance* becomes its own node; ids are assigned in
    preorder and each non-root node gets one edge to its parent.
    """
    if top_name not in ast.modules:
        raise NetlistError(f"unknown top module {top_name!r}")
    _check_acyclic(ast, top_name)
    ref = {name: extract_features(mod) for name, mod in ast.modules.items()}
    nodes: list[LhgNode] = []
    edges: list[tuple[int, int]] = []

    def add_node(module: str, pid: int, next_id: int) -> int:
        node_id = next_id
        nodes.append(LhgNode(node_id, module, ref[module]))
        next_id += 1
        if pid != -1:
            edges.append((pid, node_id))
        for inst in ast[module].instances:
            next_id = add_node(inst.module, node_id, next_id)
        return next_id

    add_node(top_name, -1, 0)
    return LogicalHierarchyGraph(tuple(nodes), tuple(edges))


def extract_lhg(text: str, top_name: str) -> LogicalHierarchyGraph:
    return build_lhg(parse_netlist(text), top_name)


@dataclass(frozen=True)
class FeatureScaler:
    """Per-column standardization statistics for node features."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, graphs) -> "FeatureScaler":
        x = np.vstack([g.feature_matrix() for g in graphs])
        return cls(x.mean(axis=0), x.std(axis=0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (x - self.mean) / safe, 0.0)

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "FeatureScaler":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def lhg_to_matrices(lhg: LogicalHierarchyGraph, scaler: FeatureScaler | None = None):
    """(N x 8 node-feature matrix, E x 2 edge array); rows ordered by node id."""
    order = sorted(lhg.nodes, key=lambda n: n.id)
    x = np.vstack([n.features.as_vector() for n in order])
    if scaler is not None:
        x = scaler.transform(x)
    edges = np.asarray(lhg.edges, dtype=np.int64).reshape(-1, 2)
    return x, edges
