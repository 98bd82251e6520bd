"""Walk counting moments on rooted graphs.

The vacuum state Phi(X) = <delta_o, X delta_o> of a rooted graph turns the
adjacency matrix into a random variable whose moments count closed walks at
the root. All counts are exact Python integers.

On a comb product G_1 |> ... |> G_k the adjacency matrix splits as the sum of
embedded operators

    X_j = I (x) ... (x) I (x) A_j (x) P (x) ... (x) P

(A_j in slot j, identities before it, root projections after it), which are
monotonically independent in the vacuum state.

"""

from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import sparse

from loewner_comb.exceptions import LoewnerCombValueError, TruncationTooShallow
from loewner_comb.graphs import RootedGraph, SpidernetSpec, as_graph, comb_fold
from loewner_comb.halfplane import MomentSequence

MAX_EXPLICIT_PRODUCT_SIZE = 10_000

Vector = dict[tuple[int, ...], int]


def root_moments(graph: RootedGraph, order: int) -> MomentSequence:
    """Closed walk counts m_k = <delta_o, A^k delta_o> for k = 0 ... K.

    Raises:
        TruncationTooShallow: if the graph is a truncation exact only to a
            radius below floor(K / 2).

    """
    if order < 0:
        raise LoewnerCombValueError(f'Moment order must be non-negative: {order}')
    if graph.exact_radius < order // 2:
        raise TruncationTooShallow(
            f'Moments up to order {order} need a graph exact to radius '
            f'{order // 2}, got {graph.exact_radius}.'
        )

    vector = {graph.root: 1}
    moments = [1]
    for _ in range(order):
        walked = defaultdict(int)
        for vertex, count in vector.items():
            for other in graph.neighbors[vertex]:
                walked[other] += count
        vector = walked
        moments.append(vector.get(graph.root, 0))
    return MomentSequence(tuple(moments))


@dataclass(frozen=True)
class EmbeddedOperator:
    """X_j acting on product basis vectors indexed by coordinate tuples.

    Positions are 0-based.

    """

    word: tuple[RootedGraph, ...]
    position: int

    def __post_init__(self):
        object.__setattr__(self, 'word', tuple(self.word))
        if not 0 <= self.position < len(self.word):
            raise LoewnerCombValueError(
                f'Position {self.position} outside a word of length {len(self.word)}.'
            )

    def apply(self, vector: Vector) -> Vector:
        """X_j v. Basis vectors with a non-root coordinate after j are annihilated."""
        graph = self.word[self.position]
        tail = tuple(factor.root for factor in self.word[self.position + 1 :])
        result = defaultdict(int)
        for coordinates, count in vector.items():
            if coordinates[self.position + 1 :] != tail:
                continue
            head = coordinates[: self.position]
            for other in graph.neighbors[coordinates[self.position]]:
                result[(*head, other, *tail)] += count
        return dict(result)

    def matrix(self) -> sparse.csr_array:
        """I (x) ... (x) A_j (x) P (x) ... (x) P in comb product vertex order."""
        blocks = []
        for index, graph in enumerate(self.word):
            if index < self.position:
                blocks.append(
                    sparse.eye_array(graph.vertex_count, dtype=np.int64, format='csr')
                )
            elif index == self.position:
                blocks.append(graph.adjacency_matrix())
            else:
                blocks.append(
                    sparse.csr_array(
                        ([1], ([graph.root], [graph.root])),
                        shape=(graph.vertex_count, graph.vertex_count),
                        dtype=np.int64,
                    )
                )
        return sparse.csr_array(
            reduce(lambda left, right: sparse.kron(left, right, format='csr'), blocks)
        )


def _root_key(word: Sequence[RootedGraph]) -> tuple[int, ...]:
    return tuple(graph.root for graph in word)


def embedded_moment(
    word: Sequence[RootedGraph | SpidernetSpec],
    pattern: Sequence[tuple[int, int]],
) -> int:
    """Phi(X_{j_1}^{p_1} ... X_{j_m}^{p_m}) as an exact integer.

    `pattern` lists (position, power) pairs from left to right; the rightmost
    factor acts on the root vector first. An empty pattern gives Phi(1) = 1.

    """
    graphs = tuple(as_graph(factor) for factor in word)
    vector = {_root_key(graphs): 1}
    for position, power in reversed(pattern):
        if power < 0:
            raise LoewnerCombValueError(f'Powers must be non-negative: {power}')
        operator = EmbeddedOperator(graphs, position)
        for _ in range(power):
            vector = operator.apply(vector)
    return vector.get(_root_key(graphs), 0)


def check_monotone_factorization(
    word: Sequence[RootedGraph | SpidernetSpec],
    p: int,
    q: int,
    r: int,
    positions: tuple[int, int] = (0, 1),
) -> bool:
    """True when Phi(X^p Y^q X^r) = Phi(Y^q) Phi(X^(p+r)).

    X and Y are the embedded operators at positions i < j.

    """
    first, second = positions
    if len(word) < 2 or not 0 <= first < second < len(word):
        raise LoewnerCombValueError(
            f'Need positions i < j inside the word, got {positions} for '
            f'length {len(word)}.'
        )
    graphs = [as_graph(factor) for factor in word]
    mixed = embedded_moment(graphs, [(first, p), (second, q), (first, r)])
    return mixed == embedded_moment(graphs, [(second, q)]) * embedded_moment(
        graphs, [(first, p + r)]
    )


def adjacency_vs_sum(word: Sequence[RootedGraph | SpidernetSpec]) -> bool:
    """True when the comb product adjacency equals the sum of embedded operators."""
    graphs = [as_graph(factor) for factor in word]
    size = int(np.prod([graph.vertex_count for graph in graphs]))
    if size > MAX_EXPLICIT_PRODUCT_SIZE:
        raise LoewnerCombValueError(
            f'Explicit product of size {size} exceeds {MAX_EXPLICIT_PRODUCT_SIZE}.'
        )

    explicit = comb_fold(graphs).adjacency_matrix()
    summed = reduce(
        lambda left, right: left + right,
        (
            EmbeddedOperator(tuple(graphs), position).matrix()
            for position in range(len(graphs))
        ),
    )
    difference = sparse.csr_array(explicit - summed)
    difference.eliminate_zeros()
    return difference.nnz == 0
