"""Rooted graphs, spidernets and comb products.

A `RootedGraph` is a finite simple graph with a distinguished root, stored as
sorted neighbour lists. Graphs cut out of an infinite graph (truncated
spidernets, balls of comb products) record `exact_radius`: the root ball of
that radius coincides with the root ball of the untruncated graph, so closed
root walks of length up to 2 * exact_radius + 1 are counted exactly.

"""

from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from math import inf
from typing import NamedTuple

import networkx as nx
import numpy as np
from scipy.sparse import csr_array

from loewner_comb.exceptions import (
    InfeasibleSpec,
    LoewnerCombValueError,
    TruncationTooShallow,
)


@dataclass(frozen=True, eq=False)
class RootedGraph:
    """A simple undirected graph with a root vertex.

    Attributes:
        neighbors: sorted neighbour indices of every vertex.
        root: index of the root.
        labels: optional coordinate tuple per vertex; comb products label
            vertices by the coordinates of their factors.
        exact_radius: radius up to which the root ball is that of the
            untruncated graph; infinite for graphs that are not truncations.

    """

    neighbors: tuple[tuple[int, ...], ...]
    root: int = 0
    labels: tuple[tuple, ...] | None = None
    exact_radius: float = inf

    def __post_init__(self):
        neighbors = tuple(tuple(int(w) for w in row) for row in self.neighbors)
        object.__setattr__(self, 'neighbors', neighbors)
        if self.labels is not None:
            object.__setattr__(self, 'labels', tuple(map(tuple, self.labels)))
        validate_graph(self)

    @property
    def vertex_count(self) -> int:
        return len(self.neighbors)

    def degree(self, vertex: int) -> int:
        return len(self.neighbors[vertex])

    @property
    def max_degree(self) -> int:
        return max(len(row) for row in self.neighbors)

    def label(self, vertex: int) -> tuple:
        """Coordinate tuple of a vertex; (vertex,) for unlabelled graphs."""
        return (vertex,) if self.labels is None else self.labels[vertex]

    def edges(self) -> list[tuple[int, int]]:
        """Every edge once, as (smaller, larger)."""
        return [
            (vertex, other)
            for vertex, row in enumerate(self.neighbors)
            for other in row
            if vertex < other
        ]

    def to_networkx(self) -> nx.Graph:
        """networkx copy with the root and labels as node attributes."""
        graph = nx.Graph()
        for vertex in range(self.vertex_count):
            graph.add_node(vertex, label=self.label(vertex), root=vertex == self.root)
        graph.add_edges_from(self.edges())
        return graph

    @cached_property
    def distances(self) -> dict[int, int]:
        """Graph distance from the root to every reachable vertex."""
        return nx.single_source_shortest_path_length(self.to_networkx(), self.root)

    def adjacency_matrix(self) -> csr_array:
        """Sparse 0/1 adjacency matrix."""
        rows = [vertex for vertex, row in enumerate(self.neighbors) for _ in row]
        columns = [other for row in self.neighbors for other in row]
        return csr_array(
            (
                np.ones(len(rows), dtype=np.int64),
                (np.array(rows, dtype=np.int64), np.array(columns, dtype=np.int64)),
            ),
            shape=(self.vertex_count, self.vertex_count),
        )

    def dump(self) -> str:
        """Adjacency list text: "root <id>" then "id: n1 n2 ..." per vertex."""
        lines = [f'root {self.root}']
        lines.extend(
            f'{vertex}: {" ".join(map(str, row))}'.rstrip()
            for vertex, row in enumerate(self.neighbors)
        )
        return '\n'.join(lines) + '\n'


def validate_graph(graph: RootedGraph):
    """Check symmetry, loop-freeness, duplicate-freeness and the root index."""
    count = graph.vertex_count
    if count == 0:
        raise LoewnerCombValueError('A rooted graph needs at least one vertex.')
    if not 0 <= graph.root < count:
        raise LoewnerCombValueError(f'Root {graph.root} is not a vertex.')
    if graph.labels is not None and len(graph.labels) != count:
        raise LoewnerCombValueError('Need exactly one label per vertex.')

    for vertex, row in enumerate(graph.neighbors):
        if list(row) != sorted(set(row)):
            raise LoewnerCombValueError(
                f'Neighbours of {vertex} must be sorted and distinct: {row}'
            )
        if vertex in row:
            raise LoewnerCombValueError(f'Vertex {vertex} has a self-loop.')
        for other in row:
            if not 0 <= other < count:
                raise LoewnerCombValueError(
                    f'Vertex {vertex} has bad neighbour {other}.'
                )
            if vertex not in graph.neighbors[other]:
                raise LoewnerCombValueError(
                    f'Adjacency is not symmetric between {vertex} and {other}.'
                )


def graph_from_edges(
    vertex_count: int,
    edges: Sequence[tuple[int, int]],
    root: int = 0,
    labels: Sequence[tuple] | None = None,
    exact_radius: float = inf,
) -> RootedGraph:
    """Build a rooted graph from an undirected edge list."""
    neighbors = [set() for _ in range(vertex_count)]
    for first, second in edges:
        neighbors[first].add(second)
        neighbors[second].add(first)
    return RootedGraph(
        tuple(tuple(sorted(row)) for row in neighbors),
        root,
        None if labels is None else tuple(labels),
        exact_radius,
    )


def parse_graph(text: str) -> RootedGraph:
    """Inverse of RootedGraph.dump."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith('root '):
        raise LoewnerCombValueError('Graph dump must start with "root <id>".')

    root = int(lines[0].split()[1])
    neighbors = []
    for expected, line in enumerate(lines[1:]):
        vertex, _, rest = line.partition(':')
        if int(vertex) != expected:
            raise LoewnerCombValueError(f'Expected vertex {expected}, got "{line}".')
        neighbors.append(tuple(int(other) for other in rest.split()))
    return RootedGraph(tuple(neighbors), root)


def single_vertex() -> RootedGraph:
    """The graph with one vertex and no edges; a unit for comb products."""
    return RootedGraph(((),))


def path_graph(vertex_count: int) -> RootedGraph:
    """Path 0 - 1 - ... rooted at the end 0; path_graph(2) is the single edge P2."""
    return graph_from_edges(
        vertex_count, [(vertex, vertex + 1) for vertex in range(vertex_count - 1)]
    )


def star_graph(leaves: int) -> RootedGraph:
    """K_{1, leaves} rooted at its centre."""
    return graph_from_edges(leaves + 1, [(0, leaf) for leaf in range(1, leaves + 1)])


class SpidernetSpec(NamedTuple):
    """Spidernet data (a, b, c) truncated after `depth` shells.

    The root has a neighbours; every other vertex has c neighbours one shell
    out, b - 1 - c in its own shell and one shell in.

    """

    a: int
    b: int
    c: int
    depth: int

    @classmethod
    def meixner(cls, n: int, u: int, depth: int) -> 'SpidernetSpec':
        """Data (2n, n + 1 + u, n), whose root law has F = sqrt((z-u)^2 - 4n) + u."""
        return cls(2 * n, n + 1 + u, n, depth)

    @property
    def horizontal(self) -> int:
        """u = b - 1 - c."""
        return self.b - 1 - self.c

    def shell_sizes(self) -> list[int]:
        """|S_0| ... |S_D|."""
        return [1] + [self.a * self.c ** (d - 1) for d in range(1, self.depth + 1)]


def validate_spidernet(spec: SpidernetSpec):
    """Raise InfeasibleSpec unless the data can be realised."""
    if spec.a < 1 or spec.b < 2 or not 1 <= spec.c <= spec.b - 1 or spec.depth < 0:
        raise InfeasibleSpec(
            f'Spidernet data need a >= 1, b >= 2, 1 <= c <= b - 1, D >= 0: {spec}'
        )
    if spec.horizontal > spec.a - 1:
        raise InfeasibleSpec(
            f'Horizontal degree u={spec.horizontal} exceeds a - 1 = {spec.a - 1}.'
        )
    if spec.horizontal % 2 and any(size % 2 for size in spec.shell_sizes()[1:]):
        raise InfeasibleSpec(
            f'Odd horizontal degree u={spec.horizontal} needs even shells: '
            f'{spec.shell_sizes()}'
        )


def _circulant_offsets(size: int, degree: int) -> list[int]:
    """Offsets of a degree-regular circulant graph on `size` vertices."""
    offsets = []
    for step in range(1, degree // 2 + 1):
        offsets.extend((step, -step))
    if degree % 2:
        offsets.append(size // 2)
    return offsets


def build_spidernet(spec: SpidernetSpec) -> RootedGraph:
    """The canonical truncated spidernet with the given data.

    Shell S_d has a c^(d-1) vertices numbered consecutively. The root is
    joined to all of S_1, vertex i of S_d to vertices i c ... i c + c - 1 of
    S_{d+1}, and each shell carries a u-regular circulant graph (offsets
    +-1 ... +-floor(u/2), plus the antipode when u is odd).

    """
    validate_spidernet(spec)

    sizes = spec.shell_sizes()
    starts = np.cumsum([0] + sizes).tolist()
    edges = [(0, vertex) for vertex in range(1, 1 + sizes[1])] if spec.depth else []

    for depth in range(1, spec.depth + 1):
        size, start = sizes[depth], starts[depth]
        for index in range(size):
            for offset in _circulant_offsets(size, spec.horizontal):
                other = (index + offset) % size
                if index < other:
                    edges.append((start + index, start + other))
            if depth < spec.depth:
                child_start = starts[depth + 1] + index * spec.c
                edges.extend(
                    (start + index, child_start + child) for child in range(spec.c)
                )

    return graph_from_edges(starts[-1], edges, exact_radius=spec.depth)


def omega_profile(graph: RootedGraph, vertex: int) -> tuple[int, int, int]:
    """(omega_+, omega_0, omega_-) of a vertex.

    Counts of neighbours one shell out, in the same shell and one shell in.

    """
    distances = graph.distances
    if vertex not in distances:
        raise LoewnerCombValueError(f'Vertex {vertex} is not reachable from the root.')

    shells = [distances[other] - distances[vertex] for other in graph.neighbors[vertex]]
    return shells.count(1), shells.count(0), shells.count(-1)


def comb_product(first: RootedGraph, second: RootedGraph) -> RootedGraph:
    """The comb product first |> second.

    A copy of `second` hangs at every vertex of `first`.

    Vertex (x, y) has index x * |V_2| + y and label label(x) + label(y).
    (x, y) ~ (x', y') iff x ~ x' with y = y' = o_2, or x = x' with y ~ y'.

    """
    size = second.vertex_count
    edges = [
        (x * size + second.root, other * size + second.root)
        for x, other in first.edges()
    ]
    edges.extend(
        (x * size + y, x * size + other)
        for x in range(first.vertex_count)
        for y, other in second.edges()
    )
    labels = [
        first.label(x) + second.label(y)
        for x in range(first.vertex_count)
        for y in range(size)
    ]
    return graph_from_edges(
        first.vertex_count * size,
        edges,
        first.root * size + second.root,
        labels,
        min(first.exact_radius, second.exact_radius),
    )


def comb_fold(word: Sequence[RootedGraph]) -> RootedGraph:
    """G_1 |> G_2 |> ... |> G_k, folded from the left."""
    product = word[0]
    for factor in word[1:]:
        product = comb_product(product, factor)
    return product


def as_graph(factor: RootedGraph | SpidernetSpec) -> RootedGraph:
    """Build spidernet specs; pass graphs through."""
    return build_spidernet(factor) if isinstance(factor, SpidernetSpec) else factor


def root_ball(graph: RootedGraph, radius: int) -> RootedGraph:
    """Subgraph induced on the vertices within `radius` of the root.

    Vertices keep their relative order and their labels.

    """
    kept = sorted(vertex for vertex, d in graph.distances.items() if d <= radius)
    index = {vertex: position for position, vertex in enumerate(kept)}
    return RootedGraph(
        tuple(
            tuple(index[other] for other in graph.neighbors[vertex] if other in index)
            for vertex in kept
        ),
        index[graph.root],
        tuple(graph.label(vertex) for vertex in kept),
        min(graph.exact_radius, radius),
    )


def _ball_neighbors(
    key: tuple[tuple[int, int], ...], factors: Sequence[RootedGraph]
) -> list[tuple[tuple[int, int], ...]]:
    """Neighbours of a product vertex given by its non-root coordinates.

    `key` lists (position, vertex) for the coordinates away from their roots.
    Coordinate j may move only while every coordinate after j is at its root.

    """
    last = key[-1][0] if key else -1
    neighbors = []
    if key:
        head = key[:-1]
        graph = factors[last]
        for other in graph.neighbors[key[-1][1]]:
            neighbors.append(head if other == graph.root else (*head, (last, other)))
    for position in range(last + 1, len(factors)):
        graph = factors[position]
        neighbors.extend(
            (*key, (position, other)) for other in graph.neighbors[graph.root]
        )
    return neighbors


def comb_ball(word: Sequence[RootedGraph | SpidernetSpec], radius: int) -> RootedGraph:
    """Root ball of radius r in G_1 |> ... |> G_k, without building the product.

    Vertices are generated breadth first from the root; each is labelled by
    its full coordinate tuple. Every factor must be exact to radius r.

    Raises:
        TruncationTooShallow: if a factor is a truncation shallower than r.

    """
    if radius < 0:
        raise LoewnerCombValueError(f'Ball radius must be non-negative: {radius}')
    factors = [as_graph(factor) for factor in word]
    for factor in factors:
        if factor.exact_radius < radius:
            raise TruncationTooShallow(
                f'Factor exact to radius {factor.exact_radius} cannot give a ball '
                f'of radius {radius}.'
            )

    index = {(): 0}
    queue = deque([((), 0)])
    while queue:
        key, distance = queue.popleft()
        if distance == radius:
            continue
        for other in _ball_neighbors(key, factors):
            if other not in index:
                index[other] = len(index)
                queue.append((other, distance + 1))

    neighbors = [()] * len(index)
    for key, vertex in index.items():
        neighbors[vertex] = tuple(
            sorted(
                index[other]
                for other in _ball_neighbors(key, factors)
                if other in index
            )
        )

    labels = [None] * len(index)
    roots = [factor.root for factor in factors]
    for key, vertex in index.items():
        coordinates = list(roots)
        for position, value in key:
            coordinates[position] = value
        labels[vertex] = tuple(coordinates)

    return RootedGraph(tuple(neighbors), 0, tuple(labels), radius)
