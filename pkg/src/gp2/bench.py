"""Host-graph generators, timing harness, and complexity-ratio analysis.

Timing covers command execution only: generating the host and printing
the result both happen outside the clock, since the backend comparison
is about execution behaviour.  Medians over repetitions resist
scheduler noise better than means.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass, field

from .engine import OK, ExecConfig, Executable
from .graph import Graph

LINEAR_BAND = (1.4, 2.6)
QUADRATIC_BAND = (3.2, 5.0)


class BenchError(Exception):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.kind}:{'x'.join(str(p) for p in self.params)}"


def parse_spec(text: str) -> GeneratorSpec:
    kind, _, rest = text.strip().partition(":")
    if not rest:
        raise BenchError(f"generator spec needs parameters: {text!r}")
    try:
        params = tuple(int(p) for p in rest.split("x"))
    except ValueError:
        raise BenchError(f"bad generator parameters in {text!r}")
    if kind not in _GENERATORS:
        raise BenchError(f"unknown graph kind {kind!r}")
    if any(p <= 0 for p in params):
        raise BenchError(f"generator parameters must be positive: {text!r}")
    expected = 2 if kind == "grid" else 1
    if len(params) != expected:
        raise BenchError(f"{kind} takes {expected} parameter(s)")
    return GeneratorSpec(kind, params)


MAX_GENERATED_NODES = 50_000_000


def _check_size(n: int) -> None:
    if n > MAX_GENERATED_NODES:
        raise BenchError(f"refusing to generate {n} nodes")


def gen_discrete(n: int) -> Graph:
    _check_size(n)
    g = Graph()
    for _ in range(n):
        g.add_node()
    return g


def gen_full_binary_tree(depth: int) -> Graph:
    """Full binary tree with ``depth`` levels: 2**depth - 1 nodes with
    edges parent -> child.  Deepest level is laid out first so the slot
    order starts at the leaves while the chain starts at the top."""
    _check_size(2 ** depth)
    g = Graph()
    levels = []
    for d in range(depth - 1, -1, -1):
        levels.append([g.add_node() for _ in range(2 ** d)])
    for upper, lower in zip(levels[1:], levels[:-1]):
        for i, parent in enumerate(upper):
            g.add_edge(parent, lower[2 * i])
            g.add_edge(parent, lower[2 * i + 1])
    return g


def gen_grid(w: int, h: int) -> Graph:
    """w*h nodes with an edge to the right and downward neighbour."""
    _check_size(w * h)
    g = Graph()
    rows = [[g.add_node() for _ in range(w)] for _ in range(h)]
    for y in range(h):
        for x in range(w):
            if x + 1 < w:
                g.add_edge(rows[y][x], rows[y][x + 1])
            if y + 1 < h:
                g.add_edge(rows[y][x], rows[y + 1][x])
    return g


def gen_linked_list(n: int) -> Graph:
    _check_size(n)
    g = Graph()
    nodes = [g.add_node() for _ in range(n)]
    for a, b in zip(nodes, nodes[1:]):
        g.add_edge(a, b)
    return g


def gen_star(n: int) -> Graph:
    """One centre plus n-1 spokes of alternating direction."""
    _check_size(n)
    g = Graph()
    centre = g.add_node()
    for i in range(n - 1):
        leaf = g.add_node()
        if i % 2 == 0:
            g.add_edge(centre, leaf)
        else:
            g.add_edge(leaf, centre)
    return g


def gen_sierpinski(level: int) -> Graph:
    """Sierpinski triangle of the given order, matching the engine's
    generator output including labels: level 1 is a single triangle and
    each following level splits every smallest triangle into three.

    A triangle is (apex, corner0, corner1) with edges apex-0->corner0,
    apex-1->corner1, corner0-2->corner1.
    """
    _check_size(3 ** level)
    g = Graph()
    apex = g.add_node(label=(1,))
    c0 = g.add_node(label=(0,))
    c1 = g.add_node(label=(0,))
    g.add_edge(apex, c0, label=(0,))
    g.add_edge(apex, c1, label=(1,))
    g.add_edge(c0, c1, label=(2,))
    triangles = [(apex, c0, c1)]
    for generation in range(1, level):
        next_triangles = []
        for apex, p, q in triangles:
            g.relabel_node(apex, (generation + 1,))
            mid_p = g.add_node(label=(generation + 1,))
            mid_q = g.add_node(label=(generation + 1,))
            corner = g.add_node(label=(0,))
            for edge in list(apex.out_chain):
                if edge.target in (p, q):
                    g.delete_edge(edge)
            for edge in list(p.out_chain):
                if edge.target is q:
                    g.delete_edge(edge)
            g.add_edge(apex, mid_p, label=(0,))
            g.add_edge(apex, mid_q, label=(1,))
            g.add_edge(mid_p, mid_q, label=(2,))
            g.add_edge(mid_q, corner, label=(0,))
            g.add_edge(mid_q, q, label=(1,))
            g.add_edge(corner, q, label=(2,))
            g.add_edge(mid_p, p, label=(0,))
            g.add_edge(mid_p, corner, label=(1,))
            g.add_edge(p, corner, label=(2,))
            next_triangles.append((apex, mid_p, mid_q))
            next_triangles.append((mid_q, corner, q))
            next_triangles.append((mid_p, p, corner))
        triangles = next_triangles
    return g


_GENERATORS = {
    "discrete": gen_discrete,
    "tree": gen_full_binary_tree,
    "grid": gen_grid,
    "list": gen_linked_list,
    "star": gen_star,
    "sierpinski": gen_sierpinski,
}


def generate(spec: GeneratorSpec) -> Graph:
    return _GENERATORS[spec.kind](*spec.params)


# -- the harness -----------------------------------------------------------


@dataclass
class BenchSample:
    program: str
    spec: GeneratorSpec
    backend: str
    mode: str
    reps: int
    median_ms: float
    all_ms: list[float]
    nodes: int
    edges: int
    outcome: str = "success"


def time_execution(executable: Executable, g: Graph) -> tuple[float, str]:
    t0 = time.perf_counter()
    status = executable.run(g)
    elapsed = (time.perf_counter() - t0) * 1000.0
    return elapsed, ("success" if status == OK else "fail")


def run_bench(program_name: str, program_text: str, specs, backends,
              reps: int = 3, mode: str = "preserve") -> list[BenchSample]:
    from .textio import parse_program

    parsed = parse_program(program_text)
    samples = []
    for spec in specs:
        for backend in backends:
            cfg = ExecConfig(backend=backend, root_mode=mode)
            executable = Executable(parsed, cfg)
            times = []
            outcome = "success"
            nodes = edges = 0
            for _ in range(reps):
                g = generate(spec)
                nodes, edges = g.node_count, g.edge_count
                ms, outcome = time_execution(executable, g)
                times.append(ms)
                g.teardown()
            samples.append(BenchSample(
                program=program_name, spec=spec, backend=backend, mode=mode,
                reps=reps, median_ms=statistics.median(times), all_ms=times,
                nodes=nodes, edges=edges, outcome=outcome))
    return samples


# -- ratio analysis ----------------------------------------------------------


def doubling_ratios(sizes_and_times: list[tuple[int, float]],
                    tolerance: float = 0.2) -> list[tuple[int, float]]:
    """Ratios t(2N)/t(N) over consecutive samples whose sizes roughly
    double; each ratio is keyed by the smaller size N."""
    if len(sizes_and_times) < 2:
        raise BenchError("need at least two sizes in a doubling progression")
    out = []
    ordered = sorted(sizes_and_times)
    for (n1, t1), (n2, t2) in zip(ordered, ordered[1:]):
        if not (2 * n1 * (1 - tolerance) <= n2 <= 2 * n1 * (1 + tolerance)):
            raise BenchError(f"sizes {n1} and {n2} are not a doubling step")
        out.append((n1, t2 / t1 if t1 > 0 else float("inf")))
    return out


def classify(ratios: list[float]) -> str:
    if all(LINEAR_BAND[0] <= r <= LINEAR_BAND[1] for r in ratios):
        return "~linear"
    if all(QUADRATIC_BAND[0] <= r <= QUADRATIC_BAND[1] for r in ratios):
        return "~quadratic"
    return "other"


def ratio_report(samples: list[BenchSample]) -> dict:
    """Group samples by (program, kind, backend, mode) and classify each
    group's growth from its doubling ratios."""
    groups: dict[tuple, list[BenchSample]] = {}
    for s in samples:
        groups.setdefault((s.program, s.spec.kind, s.backend, s.mode), []).append(s)
    report = {}
    for key, group in groups.items():
        pairs = [(s.nodes, s.median_ms) for s in group]
        ratios = doubling_ratios(pairs)
        report[key] = {
            "ratios": ratios,
            "classification": classify([r for _, r in ratios]),
        }
    return report


# -- CSV -------------------------------------------------------------------

CSV_COLUMNS = ["program", "kind", "params", "nodes", "edges", "backend",
               "mode", "reps", "median_ms", "all_ms"]


def emit_csv(samples: list[BenchSample]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for s in samples:
        writer.writerow([
            s.program, s.spec.kind, "x".join(str(p) for p in s.spec.params),
            s.nodes, s.edges, s.backend, s.mode, s.reps,
            f"{s.median_ms:.3f}", ";".join(f"{t:.3f}" for t in s.all_ms),
        ])
    return buf.getvalue()


def parse_csv(text: str) -> list[BenchSample]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_COLUMNS:
        raise BenchError("unexpected CSV header")
    samples = []
    for row in reader:
        spec = GeneratorSpec(row[1], tuple(int(p) for p in row[2].split("x")))
        samples.append(BenchSample(
            program=row[0], spec=spec, nodes=int(row[3]), edges=int(row[4]),
            backend=row[5], mode=row[6], reps=int(row[7]),
            median_ms=float(row[8]), all_ms=[float(t) for t in row[9].split(";")]))
    return samples


# -- configuration files -------------------------------------------------------


@dataclass
class BenchConfig:
    program: str = ""
    specs: list[GeneratorSpec] = field(default_factory=list)
    backends: list[str] = field(default_factory=lambda: ["chain"])
    reps: int = 3
    mode: str = "preserve"


def parse_config(text: str) -> BenchConfig:
    """Plain key = value lines: program, specs, backends, reps, mode."""
    cfg = BenchConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//")[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise BenchError(f"line {lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if key == "program":
            cfg.program = value
        elif key == "specs":
            cfg.specs = [parse_spec(p) for p in value.replace(",", " ").split()]
        elif key == "backends":
            cfg.backends = value.replace(",", " ").split()
            for b in cfg.backends:
                if b not in ("chain", "index_scan"):
                    raise BenchError(f"line {lineno}: unknown backend {b!r}")
        elif key == "reps":
            cfg.reps = int(value)
        elif key == "mode":
            if value not in ("preserve", "reflect"):
                raise BenchError(f"line {lineno}: unknown mode {value!r}")
            cfg.mode = value
        else:
            raise BenchError(f"line {lineno}: unknown key {key!r}")
    if not cfg.program:
        raise BenchError("config selects no program")
    if not cfg.specs:
        raise BenchError("config selects no generator specs")
    if cfg.reps < 1:
        raise BenchError("reps must be at least 1")
    return cfg
