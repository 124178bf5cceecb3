"""Relaxed Kaczmarz updates composed into tree and DAG iterations.

One iteration on a tree disperses an estimate from the root to the leaves,
applying the relaxed hyperplane projection of each node's equation on the
way down, then pools the leaf estimates back into a single weighted average.
On a DAG every minimal node holds its own estimate; dispersion walks the
nodes in topological order blending parent estimates with the dispersion
weights before each update, and pooling walks back in reverse order blending
successor estimates with the pooling weights.

A solve run owns its state and is single threaded; distinct runs over the
same immutable system and network may execute concurrently.  Pooling sums
always accumulate in ascending node order so results are schedule
independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateEquationError, DimensionError, DivergenceError, InvalidNetworkError
from .numerics import as_matrix, as_vector
from .topology import DagNetwork, TreeNetwork, path_weight, topological_order, validate_dag, validate_tree

DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class LinearSystem:
    """One equation per node: <x, a_v> = b_v.

    ``rows[v]`` stores the vector a_v whose conjugate transpose is row v of
    the system matrix, so for real data the rows coincide with the matrix.
    """

    rows: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        rows = as_matrix(self.rows)
        rhs = as_vector(self.rhs)
        if rows.shape[0] != rhs.shape[0]:
            raise DimensionError(
                f"{rows.shape[0]} rows but {rhs.shape[0]} right-hand side entries"
            )
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0.0):
            bad = int(np.argmin(norms))
            raise DegenerateEquationError(f"row {bad} has zero norm")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "rhs", rhs)

    @property
    def node_count(self) -> int:
        return self.rows.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.rows.shape[1]

    def system_matrix(self) -> np.ndarray:
        """The matrix A with rows a_v*; A @ x stacks the values <x, a_v>."""
        return self.rows.conj()

    def residual_norm(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.system_matrix() @ x - self.rhs))


@dataclass(frozen=True)
class RelaxationAssignment:
    """Per-node relaxation parameters plus a uniform scale in (0, 1]."""

    omega: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        if om.ndim != 1:
            raise DimensionError("omega must be one value per node")
        if not np.all(np.isfinite(om)) or np.any(om < 0.0):
            raise ValueError("relaxation parameters must be finite and nonnegative")
        if not (0.0 < self.scale <= 1.0):
            raise ValueError("scale must lie in (0, 1]")
        object.__setattr__(self, "omega", om)

    @classmethod
    def uniform(cls, node_count: int, value: float = 1.0, scale: float = 1.0):
        return cls(np.full(node_count, float(value)), scale)

    def effective(self) -> np.ndarray:
        return self.scale * self.omega

    def scaled(self, scale: float) -> "RelaxationAssignment":
        return RelaxationAssignment(self.omega, scale)


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 10_000
    step_tolerance: float = 1e-10
    initial_estimate: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.step_tolerance > 0.0:
            raise ValueError("step_tolerance must be positive")


@dataclass
class SolveReport:
    """Iteration outcome; trace lengths equal ``iterations_used``.

    ``final_estimates`` is a single vector for trees and one block per
    minimal node (ascending id) for DAGs.  On DAGs the step and residual
    traces record the worst block per iteration.
    """

    final_estimates: object
    iterations_used: int
    step_norms: list[float] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    converged: bool = False


# ---------------------------------------------------------------------------
# Single-equation updates


def kaczmarz_update(x, a, b, omega: float) -> np.ndarray:
    """Relaxed Kaczmarz step: x + omega * (b - a*x) / |a|^2 * a."""
    xv, av = as_vector(x), as_vector(a)
    nrm2 = float(np.vdot(av, av).real)
    if nrm2 == 0.0:
        raise DegenerateEquationError("zero row in Kaczmarz update")
    return xv + omega * ((b - np.vdot(av, xv)) / nrm2) * av


def project_null(x, a) -> np.ndarray:
    """Orthogonal projection of x onto the hyperplane a*x = 0."""
    xv, av = as_vector(x), as_vector(a)
    nrm2 = float(np.vdot(av, av).real)
    if nrm2 == 0.0:
        raise DegenerateEquationError("zero row in projection")
    return xv - (np.vdot(av, xv) / nrm2) * av


def project_affine(x, a, b) -> np.ndarray:
    """Affine projection of x onto the hyperplane a*x = b."""
    return kaczmarz_update(x, a, b, 1.0)


def relaxed_p(x, a, omega: float) -> np.ndarray:
    """(1 - omega) x + omega * project_null(x, a)."""
    xv = as_vector(x)
    return (1.0 - omega) * xv + omega * project_null(xv, a)


def relaxed_q(x, a, b, omega: float) -> np.ndarray:
    """(1 - omega) x + omega * project_affine(x, a, b); same as kaczmarz_update."""
    return kaczmarz_update(x, a, b, omega)


# ---------------------------------------------------------------------------
# Network iterations


def _require_valid_tree(sys: LinearSystem, net: TreeNetwork) -> None:
    if sys.node_count != net.node_count:
        raise DimensionError("system and network disagree on the node count")
    violations = validate_tree(net)
    if violations:
        raise InvalidNetworkError("invalid tree network", violations)


def _require_valid_dag(sys: LinearSystem, net: DagNetwork) -> None:
    if sys.node_count != net.node_count:
        raise DimensionError("system and network disagree on the node count")
    violations = validate_dag(net)
    if violations:
        raise InvalidNetworkError("invalid DAG network", violations)


def tree_iterate(
    sys: LinearSystem,
    net: TreeNetwork,
    relax: RelaxationAssignment,
    x,
    validated: bool = False,
) -> np.ndarray:
    """One dispersion/pooling pass over a rooted tree."""
    if not validated:
        _require_valid_tree(sys, net)
    xv = as_vector(x)
    omega = relax.effective()
    est: dict[int, np.ndarray] = {}
    r = net.root
    est[r] = kaczmarz_update(xv, sys.rows[r], sys.rhs[r], omega[r])
    stack = list(reversed(net.children.get(r, ())))
    while stack:
        v = stack.pop()
        u = net.parent[v]
        est[v] = kaczmarz_update(est[u], sys.rows[v], sys.rhs[v], omega[v])
        stack.extend(reversed(net.children.get(v, ())))
    pooled = np.zeros_like(xv)
    for leaf in net.leaves():  # ascending node order keeps sums schedule independent
        pooled = pooled + path_weight(net, r, leaf) * est[leaf]
    return pooled


def dag_iterate(
    sys: LinearSystem,
    net: DagNetwork,
    relax: RelaxationAssignment,
    blocks: Sequence[np.ndarray],
    validated: bool = False,
) -> list[np.ndarray]:
    """One dispersion/pooling pass over a DAG; one estimate per minimal node.

    Minimal nodes apply their own relaxed update at the start of dispersion;
    interior and maximal nodes first blend their parents' estimates with the
    dispersion weights.  Pooling blends successor estimates with the pooling
    weights in reverse topological order, so interior nodes relay without a
    second update.
    """
    if not validated:
        _require_valid_dag(sys, net)
    minimal = net.minimal_nodes
    if len(blocks) != len(minimal):
        raise DimensionError(f"expected {len(minimal)} estimate blocks, got {len(blocks)}")
    omega = relax.effective()
    order = topological_order(net)
    x: dict[int, np.ndarray] = {}
    start = {m: as_vector(b) for m, b in zip(minimal, blocks)}
    for v in order:
        ups = net.predecessors[v]
        if not ups:
            z = start[v]
        else:
            z = np.zeros(sys.ambient_dim, dtype=np.complex128)
            for u in ups:
                z = z + net.w_d[(u, v)] * x[u]
        x[v] = kaczmarz_update(z, sys.rows[v], sys.rhs[v], omega[v])
    y: dict[int, np.ndarray] = {}
    for v in reversed(order):
        downs = net.successors[v]
        if not downs:
            y[v] = x[v]
        else:
            acc = np.zeros(sys.ambient_dim, dtype=np.complex128)
            for u in downs:
                acc = acc + net.w_p[(v, u)] * y[u]
            y[v] = acc
    return [y[m] for m in minimal]


# ---------------------------------------------------------------------------
# Driver


def _initial_state(sys: LinearSystem, net, config: SolverConfig):
    if isinstance(net, TreeNetwork):
        if config.initial_estimate is None:
            return np.zeros(sys.ambient_dim, dtype=np.complex128)
        return as_vector(config.initial_estimate)
    minimal = net.minimal_nodes
    init = config.initial_estimate
    if init is None:
        return [np.zeros(sys.ambient_dim, dtype=np.complex128) for _ in minimal]
    init = np.asarray(init, dtype=np.complex128)
    if init.ndim == 1:
        return [as_vector(init).copy() for _ in minimal]
    if init.shape[0] != len(minimal):
        raise DimensionError("one initial block per minimal node required")
    return [as_vector(row) for row in init]


def _step_norm(new, old) -> float:
    if isinstance(new, np.ndarray):
        return float(np.linalg.norm(new - old))
    return max(float(np.linalg.norm(a - b)) for a, b in zip(new, old))


def _state_norm(state) -> float:
    if isinstance(state, np.ndarray):
        return float(np.linalg.norm(state))
    return max(float(np.linalg.norm(b)) for b in state)


def _residual(sys: LinearSystem, state) -> float:
    if isinstance(state, np.ndarray):
        return sys.residual_norm(state)
    return max(sys.residual_norm(b) for b in state)


def solve(
    sys: LinearSystem,
    net,
    relax: RelaxationAssignment,
    config: SolverConfig = SolverConfig(),
) -> SolveReport:
    """Iterate until the step norm falls below tolerance or the budget runs out.

    The stopping rule is step-norm based because inconsistent systems keep a
    nonzero limiting residual.  ``iterations_used`` is 0 when the initial
    estimate is already stationary.  Estimates whose norm exceeds
    ``1e12 * (1 + initial norm)`` (or turn non-finite) abort with
    :class:`DivergenceError` carrying the last finite iterate.
    """
    if isinstance(net, TreeNetwork):
        _require_valid_tree(sys, net)
        iterate = lambda s: tree_iterate(sys, net, relax, s, validated=True)
    elif isinstance(net, DagNetwork):
        _require_valid_dag(sys, net)
        iterate = lambda s: dag_iterate(sys, net, relax, s, validated=True)
    else:
        raise TypeError(f"unsupported network type {type(net)!r}")
    state = _initial_state(sys, net, config)
    bound = DIVERGENCE_FACTOR * (1.0 + _state_norm(state))
    steps: list[float] = []
    residuals: list[float] = []
    converged = False
    used = 0
    for n in range(1, config.max_iterations + 1):
        new_state = iterate(state)
        norm = _state_norm(new_state)
        if not np.isfinite(norm) or norm > bound:
            raise DivergenceError(
                f"estimate norm {norm:.3e} exceeded the divergence bound at iteration {n}",
                last_iterate=state,
                iteration=n,
            )
        step = _step_norm(new_state, state)
        state = new_state
        if n == 1 and step < config.step_tolerance:
            converged = True  # initial estimate was already stationary
            break
        steps.append(step)
        residuals.append(_residual(sys, state))
        used = n
        if step < config.step_tolerance:
            converged = True
            break
    return SolveReport(
        final_estimates=state,
        iterations_used=used,
        step_norms=steps,
        residual_norms=residuals,
        converged=converged,
    )
