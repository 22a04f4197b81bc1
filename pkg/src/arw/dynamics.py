"""ARW transition law and trajectory sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import Graph
from .states import validate_configuration

NEG_INF = -math.inf
_CHUNK = 1 << 16


@dataclass(frozen=True)
class ArwKernel:
    """One-step law of the ARW chain.

    ``beta`` may be ``-math.inf`` (infinite repulsion, handled as its own
    rule rather than as a limit). ``lazy`` mixes the law half-half with the
    identity.
    """

    graph: Graph
    n: int
    beta: float
    lazy: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one particle")
        if math.isnan(self.beta) or self.beta == math.inf:
            raise ValueError(f"unsupported beta {self.beta}")

    @property
    def infinite_repulsion(self) -> bool:
        return self.beta == NEG_INF

    @property
    def k(self) -> int:
        return self.graph.k

    def with_beta(self, beta: float) -> "ArwKernel":
        return ArwKernel(self.graph, self.n, beta, self.lazy)

    def as_lazy(self, lazy: bool = True) -> "ArwKernel":
        return ArwKernel(self.graph, self.n, self.beta, lazy)


@dataclass(frozen=True)
class MoveDistribution:
    """Law of the next vertex of a particle currently at ``support[0]``."""

    support: np.ndarray  # [i, neighbours of i...]
    probabilities: np.ndarray

    def as_dict(self) -> dict[int, float]:
        return {int(v): float(p) for v, p in zip(self.support, self.probabilities)}

    def on_vertices(self, k: int) -> np.ndarray:
        out = np.zeros(k)
        out[self.support] = self.probabilities
        return out


def move_weights(x, i: int, g: Graph, n: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Candidate vertices ``[i, N(i)...]`` and their normalised probabilities."""
    nbrs = np.asarray(g.adjacency[i], dtype=np.int64)
    support = np.concatenate(([i], nbrs))
    counts = np.asarray([x[i] - 1] + [x[j] for j in nbrs], dtype=np.float64)
    if beta == NEG_INF:
        probs = (counts == counts.min()).astype(np.float64)
    elif beta == 0.0:
        probs = np.ones_like(counts)
    else:
        logits = (beta / n) * counts
        probs = np.exp(logits - logits.max())
    return support, probs / probs.sum()


def particle_move_distribution(kernel: ArwKernel, x, i: int) -> MoveDistribution:
    x = validate_configuration(x, kernel.graph, kernel.n)
    if x[i] < 1:
        raise ValueError(f"vertex {i} is empty in {x}")
    support, probs = move_weights(x, i, kernel.graph, kernel.n, kernel.beta)
    return MoveDistribution(support, probs)


def step_distribution(kernel: ArwKernel, x) -> dict[tuple[int, ...], float]:
    """Exact one-step law from ``x``, aggregated per destination configuration."""
    x = validate_configuration(x, kernel.graph, kernel.n)
    n = kernel.n
    out: dict[tuple[int, ...], float] = {}
    stay = 0.0
    for i in range(kernel.k):
        if x[i] == 0:
            continue
        support, probs = move_weights(x, i, kernel.graph, n, kernel.beta)
        pick = x[i] / n
        stay += float(pick * probs[0])
        for j, pj in zip(support[1:], probs[1:]):
            y = list(x)
            y[i] -= 1
            y[j] += 1
            y = tuple(y)
            out[y] = out.get(y, 0.0) + float(pick * pj)
    if kernel.lazy:
        out = {y: 0.5 * p for y, p in out.items()}
        stay = 0.5 + 0.5 * stay
    out[x] = stay
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def replica_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent PCG64 streams, one per replica, spawned from one seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def particle_positions(x) -> np.ndarray:
    return np.repeat(np.arange(len(x), dtype=np.int64), np.asarray(x, dtype=np.int64))


def even_configuration(k: int, n: int) -> tuple[int, ...]:
    base, extra = divmod(n, k)
    return tuple(base + (1 if v < extra else 0) for v in range(k))


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), k)

    @property
    def final(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.states[-1])


class _Runner:
    """Mutable chain state driven through the kernels in uniform-number chunks."""

    def __init__(self, kernel: ArwKernel, x0):
        x0 = validate_configuration(x0, kernel.graph, kernel.n)
        self.kernel = kernel
        self.x = np.array(x0, dtype=np.int64)
        self.pos = particle_positions(x0)
        self.indptr, self.indices = kernel.graph.csr
        self.w = np.zeros(kernel.graph.max_degree + 1)
        if kernel.infinite_repulsion:
            self.mode, self.scale = kernels.MODE_NEG_INF, 0.0
        else:
            self.mode, self.scale = kernels.MODE_FINITE, kernel.beta / kernel.n
        self.t = 0

    def advance(self, u: np.ndarray, stride: int, out: np.ndarray) -> int:
        rows = kernels.arw_run(
            self.x, self.pos, self.indptr, self.indices, self.scale, self.mode,
            self.kernel.lazy, u, self.t, stride, out, self.w,
        )
        self.t += u.shape[0]
        return rows


def simulate(kernel: ArwKernel, x0, steps: int, rng: np.random.Generator, stride: int = 1,
             dtype=np.int64) -> Trajectory:
    """Run ``steps`` transitions, recording t=0 and every ``stride``-th state.

    Each step consumes three uniforms (particle, destination, lazy coin),
    drawn in fixed-size chunks, so a seed pins the whole trajectory.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    runner = _Runner(kernel, x0)
    n_rows = steps // stride
    states = np.empty((n_rows + 1, kernel.k), dtype=dtype)
    states[0] = runner.x
    written = 1
    buf = np.empty((_CHUNK // stride + 1, kernel.k), dtype=np.int64)
    remaining = steps
    while remaining > 0:
        m = min(_CHUNK, remaining)
        u = rng.random((m, 3))
        rows = runner.advance(u, stride, buf)
        states[written:written + rows] = buf[:rows]
        written += rows
        remaining -= m
    times = np.arange(n_rows + 1, dtype=np.int64) * stride
    return Trajectory(times, states)


def sample_step(kernel: ArwKernel, x, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one transition (uses the same three-uniform scheme as ``simulate``)."""
    runner = _Runner(kernel, x)
    out = np.empty((1, kernel.k), dtype=np.int64)
    runner.advance(rng.random((1, 3)), 1, out)
    return tuple(int(v) for v in out[0])


def sample_step_infinite_repulsion(kernel: ArwKernel, x, rng: np.random.Generator) -> tuple[int, ...]:
    if not kernel.infinite_repulsion:
        raise ValueError("kernel does not have beta = -inf")
    return sample_step(kernel, x, rng)


def absorbing_band(k: int, n: int) -> tuple[int, int]:
    """Occupancy band {floor(n/k), floor(n/k)+1} of the absorbing set under infinite repulsion."""
    return n // k, n // k + 1


def in_absorbing_set(states: np.ndarray, n: int) -> np.ndarray:
    states = np.atleast_2d(states)
    lo, hi = absorbing_band(states.shape[1], n)
    return np.all((states >= lo) & (states <= hi), axis=1)
