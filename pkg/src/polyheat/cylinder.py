"""Fresnel integrals with polynomial phase on cylinder functions.

A cylinder function is ``f(x_1, ..., x_n) = sum_j w_j exp(i y_j . x)`` with
the ``x_k`` read at times ``t_1 < ... < t_n``; it is carried here by its
atomic Fourier measure (:class:`AtomicMeasure`).  Its Fresnel integral is
available two ways:

* :func:`fresnel_cylinder_closed` sums ``w exp(alpha sum_k Y_k^p dt_k)`` over
  the atoms, where ``Y_k`` are cumulative frequency sums;
* :func:`fresnel_cylinder_quadrature` integrates ``f`` against the chain of
  kernels ``prod_k g_{dt_k}(x_{k+1} - x_k)``, ``x_{n+1} = 0``, numerically.

The module also evaluates the kernel-chain pseudo-measure of boxes
(:func:`cylinder_set_measure`) and lattice lower bounds on its total
variation (:func:`total_variation_estimate`).  The chain is anchored at
``t_0 = 0`` and an explicit start point ``x0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ._atoms import merge_atoms
from .kernel import EvolutionParams, decay_extent, kernel_function
from .quad import DEFAULT_SPEC, QuadSpec, integrate_interval, richardson_zero

__all__ = [
    "AtomicMeasure",
    "TimePartition",
    "fresnel_cylinder_closed",
    "fresnel_cylinder_quadrature",
    "cylinder_set_measure",
    "total_variation_estimate",
]

MAX_QUADRATURE_DIM = 3


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite complex measure ``sum_j w_j delta_{y_j}`` on R^n.

    Atoms closer than the merge tolerance are combined on construction.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts, w = merge_atoms(self.points, self.weights)
        if pts.shape[1] < 1:
            raise ValueError("dimension must be positive")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[Sequence[float], complex]],
                   dim: Optional[int] = None) -> "AtomicMeasure":
        atoms = list(atoms)
        if not atoms:
            if dim is None:
                raise ValueError("dim is required for an empty measure")
            return cls(np.zeros((0, dim)), np.zeros(0, dtype=complex))
        pts = np.array([np.atleast_1d(np.asarray(y, dtype=float)) for y, _ in atoms])
        if dim is not None and pts.shape[1] != dim:
            raise ValueError(f"dimension mismatch: atoms have dim {pts.shape[1]}, expected {dim}")
        return cls(pts, np.array([w for _, w in atoms], dtype=complex))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def atoms(self) -> list[tuple[tuple[float, ...], complex]]:
        return [(tuple(p), complex(w)) for p, w in zip(self.points, self.weights)]

    @property
    def total_variation(self) -> float:
        return float(np.abs(self.weights).sum())

    def __len__(self) -> int:
        return len(self.weights)

    def __call__(self, x) -> complex:
        """Fourier transform ``sum_j w_j exp(i y_j . x)`` at a point."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return complex(np.sum(self.weights * np.exp(1j * self.points @ x)))


@dataclass(frozen=True)
class TimePartition:
    """Horizon ``t`` and strictly increasing nodes in ``[0, t)``."""

    horizon: float
    nodes: tuple[float, ...]

    def __post_init__(self):
        nodes = tuple(float(s) for s in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not nodes:
            raise ValueError("at least one node is required")
        if nodes[0] < 0 or nodes[-1] >= self.horizon:
            raise ValueError("nodes must lie in [0, horizon)")
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise ValueError("nodes must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def increments(self) -> np.ndarray:
        """``t_{k+1} - t_k`` for k = 1..n with ``t_{n+1} = horizon``."""
        return np.diff(np.array(self.nodes + (self.horizon,)))


def _check_dim(nu_F: AtomicMeasure, part: TimePartition):
    if nu_F.dim != part.n:
        raise ValueError(f"dimension mismatch: measure has dim {nu_F.dim}, "
                         f"partition has {part.n} nodes")


def fresnel_cylinder_closed(nu_F: AtomicMeasure, part: TimePartition,
                            params: EvolutionParams) -> complex:
    _check_dim(nu_F, part)
    if len(nu_F) == 0:
        return 0j
    cum = np.cumsum(nu_F.points, axis=1)
    expo = params.alpha * (cum**params.p @ part.increments())
    return complex(np.sum(nu_F.weights * np.exp(expo)))


def _chain_grid_value(nu_F, h, J, eps, centers, kernels):
    """Trapezoid value of the kernel chain on the grid h*[-J, J].

    Coordinate k of atom j is damped by exp(-eps (x - centers[j, k])^2).
    """
    x = h * np.arange(-J, J + 1)
    n = nu_F.dim

    def factor(k):
        return (np.exp(1j * np.outer(x, nu_F.points[:, k]))
                * np.exp(-eps * (x[:, None] - centers[None, :, k]) ** 2))

    # v[i, j]: partial chain ending at grid point i, for atom j
    v = factor(0)
    idx = np.arange(2 * J + 1)
    diff_index = idx[:, None] - idx[None, :] + 2 * J
    for k in range(1, n):
        v = h * (kernels[k - 1][diff_index] @ v) * factor(k)
    last = kernels[-1][3 * J - idx]  # g(0 - x_i)
    return complex(h * np.sum((last @ v) * nu_F.weights))


def _stationary_data(nu_F, dts, params):
    """Stationary point and phase curvature of each coordinate, per atom.

    Perturbing the frequency of coordinate k by K shifts every later
    cumulative frequency Y_j; the phase c sum_j dt_j Y_j^p then changes by
    K * centers[:, k] + K^2 * curvature[:, k] / 2 + O(K^3).
    """
    c = params.alpha.imag
    p = params.p
    Y = np.cumsum(nu_F.points, axis=1)
    d = np.asarray(dts)
    first = p * c * d * Y ** (p - 1)
    second = p * (p - 1) * c * d * Y ** (p - 2)
    # sums over j >= k
    centers = np.cumsum(first[:, ::-1], axis=1)[:, ::-1]
    curvature = np.cumsum(second[:, ::-1], axis=1)[:, ::-1]
    return centers, np.abs(curvature)


def fresnel_cylinder_quadrature(nu_F: AtomicMeasure, part: TimePartition,
                                params: EvolutionParams, spec: QuadSpec = DEFAULT_SPEC,
                                h: Optional[float] = None, eps0: float = 0.02,
                                levels: int = 4, decay: float = 36.0) -> complex:
    """Integrate the cylinder function against the kernel chain.

    All coordinates share one uniform grid; the trapezoid rule is
    spectrally accurate for these smooth integrands.  Decaying kernels are
    integrated over their numerical support.  For alpha = i c the chain is
    only conditionally convergent; each coordinate is then damped by a
    Gaussian centred on its stationary point, and results at ``levels``
    damping strengths are extrapolated to zero damping.  The strongest
    damping is ``eps0`` in units of the kernel length scale, reduced further
    when the phase curvature would make the damping bias non-analytic at
    that strength.

    Raises
    ------
    ValueError
        ``dimension unsupported`` for more than three nodes.
    """
    _check_dim(nu_F, part)
    n = part.n
    if n > MAX_QUADRATURE_DIM:
        raise ValueError(f"dimension unsupported: n = {n} > {MAX_QUADRATURE_DIM}")
    if len(nu_F) == 0:
        return 0j
    dts = [float(d) for d in part.increments()]
    scales = [(abs(params.alpha) * d) ** (1.0 / params.p) for d in dts]
    y_max = float(np.max(np.abs(np.cumsum(nu_F.points, axis=1))))
    if h is None:
        h = min(0.2 * min(scales), math.pi / (2.0 * max(y_max, 1e-300)))
    oscillatory = params.alpha.real == 0
    centers = np.zeros((len(nu_F), n))
    if oscillatory:
        centers, curvature = _stationary_data(nu_F, dts, params)
        # E[exp(i a K^2)], K ~ N(0, 2 eps), is analytic for eps < 1/(4a); stay well inside
        eps_top = min(eps0 / max(scales) ** 2, 0.05 / max(float(curvature.max()), 1e-300))
        eps = [eps_top / 2**j for j in range(levels)]
        half = float(np.abs(centers).max()) + math.sqrt(decay / eps[-1])
    else:
        eps = [0.0]
        half = sum(max(abs(e) for e in decay_extent(params, d, spec=spec)) for d in dts)
    J = int(math.ceil(half / h))
    grid = h * np.arange(-2 * J, 2 * J + 1)
    kernels = [kernel_function(params, d, spec)(grid) for d in dts]
    values = [_chain_grid_value(nu_F, h, J, e, centers, kernels) for e in eps]
    if not oscillatory:
        return values[0]
    value, _ = richardson_zero(eps, values)
    return value


# ---------------------------------------------------------------- pseudo-measure
def _chain_dts(part: TimePartition) -> np.ndarray:
    # anchored at t_0 = 0
    return np.diff(np.array((0.0,) + part.nodes))


def cylinder_set_measure(part: TimePartition, boxes: Sequence[tuple[float, float]],
                         x0: float, params: EvolutionParams,
                         spec: QuadSpec = DEFAULT_SPEC, order: int = 10,
                         max_panels: int = 256) -> complex:
    """Kernel-chain measure of the box ``prod_k [a_k, b_k]`` started at ``x0``.

    One node is integrated adaptively; several nodes use composite
    Gauss-Legendre per box, doubling the panel count until two successive
    results agree within the tolerances of ``spec``.  A node at ``t_1 = 0``
    pins ``x_1 = x0``.
    """
    boxes = [(float(a), float(b)) for a, b in boxes]
    if len(boxes) != part.n:
        raise ValueError(f"dimension mismatch: {len(boxes)} boxes for {part.n} nodes")
    for a, b in boxes:
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ValueError("boxes must be finite intervals with a < b")
    dts = _chain_dts(part)
    pinned = dts[0] == 0
    if pinned:
        a, b = boxes[0]
        if not a <= x0 <= b:
            return 0j
    if part.n == 1:
        if pinned:
            return 1 + 0j
        g = kernel_function(params, dts[0], spec)
        a, b = boxes[0]
        scale = (abs(params.alpha) * dts[0]) ** (1.0 / params.p)
        res = integrate_interval(lambda y: g(y - x0), a, b, spec, freq=4.0 / scale)
        if not res.converged:
            raise ArithmeticError(f"unconverged quadrature (err ~ {res.error:.2g})")
        return res.value

    xi, wi = np.polynomial.legendre.leggauss(order)

    def nodes(a, b, m):
        edges = np.linspace(a, b, m + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        hw = 0.5 * (edges[1:] - edges[:-1])
        return (mid[:, None] + hw[:, None] * xi).ravel(), (hw[:, None] * wi).ravel()

    def evaluate(m):
        X, W = nodes(*boxes[0], m)
        if pinned:
            X, v = np.array([float(x0)]), np.array([1.0 + 0j])
        else:
            v = W * kernel_function(params, dts[0], spec)(X - x0)
        for k in range(1, part.n):
            Xn, Wn = nodes(*boxes[k], m)
            K = kernel_function(params, dts[k], spec)(Xn[:, None] - X[None, :])
            v = Wn * (K @ v)
            X = Xn
        return complex(v.sum())

    m = 1
    prev = evaluate(m)
    while m < max_panels:
        m *= 2
        cur = evaluate(m)
        if abs(cur - prev) <= max(spec.abs_tol, spec.rel_tol * abs(cur)):
            return cur
        prev = cur
    raise ArithmeticError(f"unconverged quadrature (last change {abs(cur - prev):.2g})")


def total_variation_estimate(part: TimePartition, grid_step: float, extent: float,
                             x0: float, params: EvolutionParams,
                             spec: QuadSpec = DEFAULT_SPEC, order: int = 6,
                             max_cells: float = 2e7) -> float:
    """Sum of ``|cylinder_set_measure(box)|`` over a lattice of boxes.

    The lattice covers ``[x0 - extent, x0 + extent]^n`` with cubes of side
    ``grid_step``; the sum is a lower bound on the total variation of the
    pseudo-measure at this partition.  Cell masses are computed jointly by
    composite Gauss-Legendre, with the kernel sampled once per distinct node
    offset.
    """
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    if not extent > 0:
        raise ValueError("extent must be positive")
    dts = _chain_dts(part)
    if dts[0] == 0:
        raise ValueError("first node must be positive: t_1 = 0 pins x_1 to x0")
    C = int(round(2 * extent / grid_step))
    if C < 1:
        raise ValueError("grid_step exceeds the lattice extent")
    q = order
    if float(C) ** part.n * q > max_cells:
        raise ValueError(f"lattice too large: {C}^{part.n} cells")
    xi, wi = np.polynomial.legendre.leggauss(q)
    off = 0.5 * grid_step * (xi + 1.0)
    w = 0.5 * grid_step * wi
    edges = x0 - extent + grid_step * np.arange(C)
    X = edges[:, None] + off[None, :]

    # S[c_1, ..., c_k, a]: chain mass with the last coordinate at node (c_k, a)
    S = w * kernel_function(params, dts[0], spec)(X - x0)
    dc = np.arange(-(C - 1), C)
    cells = np.arange(C)
    for k in range(1, part.n):
        shift = (dc[:, None, None] * grid_step + off[None, None, :] - off[None, :, None])
        kv = kernel_function(params, dts[k], spec)(shift)  # (2C-1, q_prev, q_next)
        K = kv[cells[None, :] - cells[:, None] + C - 1]  # (C_prev, C_next, q, q)
        S = np.einsum("...ia,ijab,b->...ijb", S, K, w)
    return float(np.abs(S.sum(axis=-1)).sum())
