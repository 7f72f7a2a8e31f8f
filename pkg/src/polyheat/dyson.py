"""Dyson series and Feynman-Kac evaluation for plane-wave data.

The Cauchy problem du/dt = A u + V u with A = alpha D_p, where the symbol of
D_p is k^p, is solved for finite plane-wave sums

    u0(x) = sum_j a_j exp(i y_j x),      V(x) = sum_l b_l exp(i z_l x).

Every Dyson term S_n(t) u0 is again a finite plane-wave sum, with
frequencies y_j + z_l1 + ... + z_ln.  Two independent routes are provided:

* :func:`dyson_terms` / :func:`dyson_solve` solve the recursion
  S_n(t) = int_0^t exp((t - s) A) V S_{n-1}(s) ds on frequency amplitudes;
* :func:`feynman_kac_eval` sums, over atom tuples, the time-ordered
  integral of the closed cylinder exponent carried by the path functional.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.signal import lfilter
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammainc

from ._atoms import cluster, merge_atoms
from .kernel import EvolutionParams

__all__ = [
    "PlaneWaveState",
    "DysonConfig",
    "DysonResult",
    "StateExplosionError",
    "MeshTooCoarseWarning",
    "free_propagate",
    "apply_potential",
    "dyson_term",
    "dyson_terms",
    "dyson_solve",
    "truncation_bound",
    "feynman_kac_eval",
    "feynman_kac_term",
    "feynman_kac_cube_term",
    "simplex_integral",
    "state_eval",
]

ATOM_CAP = 100_000
N_MAX_CAP = 40


class StateExplosionError(RuntimeError):
    pass


class MeshTooCoarseWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class PlaneWaveState:
    """``sum_j a_j exp(i y_j x)`` with distinct frequencies ``y_j``."""

    freqs: np.ndarray
    amps: np.ndarray

    def __post_init__(self):
        y, a = merge_atoms(np.asarray(self.freqs, dtype=float).reshape(-1, 1),
                           np.asarray(self.amps, dtype=complex).reshape(-1))
        y = y[:, 0].copy()
        y.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "freqs", y)
        object.__setattr__(self, "amps", a)

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, complex]]) -> "PlaneWaveState":
        atoms = list(atoms)
        return cls(np.array([float(y) for y, _ in atoms]),
                   np.array([complex(a) for _, a in atoms], dtype=complex))

    @classmethod
    def zero(cls) -> "PlaneWaveState":
        return cls(np.zeros(0), np.zeros(0, dtype=complex))

    @property
    def atoms(self) -> list[tuple[float, complex]]:
        return [(float(y), complex(a)) for y, a in zip(self.freqs, self.amps)]

    @property
    def fresnel_norm(self) -> float:
        return float(np.abs(self.amps).sum())

    def __len__(self) -> int:
        return len(self.freqs)

    def __add__(self, other: "PlaneWaveState") -> "PlaneWaveState":
        return PlaneWaveState(np.concatenate([self.freqs, other.freqs]),
                              np.concatenate([self.amps, other.amps]))

    def __sub__(self, other: "PlaneWaveState") -> "PlaneWaveState":
        return PlaneWaveState(np.concatenate([self.freqs, other.freqs]),
                              np.concatenate([self.amps, -other.amps]))

    def scaled(self, c: complex) -> "PlaneWaveState":
        return PlaneWaveState(self.freqs, self.amps * c)


@dataclass(frozen=True)
class DysonConfig:
    """Truncation and discretization of the Dyson series.

    Attributes
    ----------
    n_max : int
        Highest series order kept.
    time_mesh : int
        Number of uniform Volterra nodes M (used by ``rule="trapezoid"`` and
        its M-vs-2M check).
    simplex_rule : int
        Gauss-Legendre points per dimension for the Feynman-Kac simplex
        integrals; 0 chooses them from the oscillation of the integrand.
    rule : {"exact", "trapezoid"}
        Volterra time rule.  ``"exact"`` integrates the recursion through the
        matrix exponential of its block generator; ``"trapezoid"`` is the
        composite trapezoid rule on the mesh, second order in 1/M.
    atom_cap : int
        Largest admissible atom count of any intermediate state.
    mesh_tol : float or None
        If set, trapezoid terms are recomputed with 2M nodes and a
        :class:`MeshTooCoarseWarning` is issued when the two differ (in
        Fresnel norm) by more than this.
    """

    n_max: int = 6
    time_mesh: int = 64
    simplex_rule: int = 0
    rule: str = "exact"
    atom_cap: int = ATOM_CAP
    mesh_tol: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.n_max <= N_MAX_CAP:
            raise ValueError(f"n_max must lie in [0, {N_MAX_CAP}]")
        if self.time_mesh < 2:
            raise ValueError("time_mesh must be >= 2")
        if self.simplex_rule < 0:
            raise ValueError("simplex_rule must be >= 0")
        if self.rule not in ("exact", "trapezoid"):
            raise ValueError(f"unknown time rule {self.rule!r}")
        if self.atom_cap < 1:
            raise ValueError("atom_cap must be positive")


class DysonResult(NamedTuple):
    state: PlaneWaveState
    truncation_bound: float


# ---------------------------------------------------------------- elementary ops
def free_propagate(state: PlaneWaveState, dt: float, params: EvolutionParams) -> PlaneWaveState:
    if dt < 0:
        raise ValueError("dt must be >= 0")
    return PlaneWaveState(state.freqs, state.amps * params.symbol(state.freqs, dt))


def _check_cap(size: int, cap: int):
    if size > cap:
        raise StateExplosionError(f"state explosion: {size} atoms exceed the cap of {cap}")


def apply_potential(state: PlaneWaveState, V: PlaneWaveState,
                    atom_cap: int = ATOM_CAP) -> PlaneWaveState:
    """Pointwise product ``V u`` as a plane-wave sum."""
    _check_cap(len(state) * len(V), atom_cap)
    y = (state.freqs[:, None] + V.freqs[None, :]).ravel()
    a = (state.amps[:, None] * V.amps[None, :]).ravel()
    out = PlaneWaveState(y, a)
    _check_cap(len(out), atom_cap)
    return out


def state_eval(state: PlaneWaveState, x) -> complex | np.ndarray:
    """``sum_j a_j exp(i y_j x)``; vectorized over ``x``."""
    x = np.asarray(x, dtype=float)
    vals = np.exp(1j * x[..., None] * state.freqs) @ state.amps
    return complex(vals) if vals.ndim == 0 else vals


def truncation_bound(n_max: int, t: float, v_norm: float, u_norm: float) -> float:
    """``sum_{n > n_max} (t |V|)^n / n! * |u0|`` in closed form."""
    x = t * v_norm
    if x == 0 or u_norm == 0:
        return 0.0
    # regularized lower incomplete gamma: e^-x sum_{n > N} x^n / n! = P(N + 1, x)
    return float(u_norm * math.exp(x) * gammainc(n_max + 1, x))


# ---------------------------------------------------------------- Volterra
class _Ladder(NamedTuple):
    """Frequency sets of every order and the potential's couplings between them."""

    freqs: list[np.ndarray]
    # couplings[n] = (rows in order n, cols in order n-1, V amplitudes)
    couplings: list[tuple[np.ndarray, np.ndarray, np.ndarray]]


def _ladder(u0: PlaneWaveState, V: PlaneWaveState, n_max: int, cap: int) -> _Ladder:
    freqs = [u0.freqs.copy()]
    couplings = [(np.zeros(0, int), np.zeros(0, int), np.zeros(0, complex))]
    m = len(V)
    for _ in range(n_max):
        prev = freqs[-1]
        _check_cap(len(prev) * m, cap)
        cand = (prev[:, None] + V.freqs[None, :]).ravel()
        reps, inverse = cluster(cand)
        _check_cap(len(reps), cap)
        cols = np.repeat(np.arange(len(prev)), m)
        b = np.tile(V.amps, len(prev))
        freqs.append(reps)
        couplings.append((inverse, cols, b))
    return _Ladder(freqs, couplings)


def _terms_exact(u0, V, t, n_max, params, cap):
    lad = _ladder(u0, V, n_max, cap)
    sizes = [len(f) for f in lad.freqs]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    if total == 0:
        return [PlaneWaveState.zero() for _ in range(n_max + 1)]
    rows, cols, vals = [], [], []
    for n, f in enumerate(lad.freqs):
        idx = offsets[n] + np.arange(len(f))
        rows.append(idx)
        cols.append(idx)
        vals.append(params.alpha * f**params.p)
        if n:
            r, c, b = lad.couplings[n]
            rows.append(offsets[n] + r)
            cols.append(offsets[n - 1] + c)
            vals.append(b)
    G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(total, total), dtype=complex)
    x0 = np.zeros(total, dtype=complex)
    x0[:sizes[0]] = u0.amps
    xt = expm_multiply(G * t, x0) if t > 0 else x0
    # the order-0 block is diagonal: use the closed form, free of expm_multiply roundoff
    return [free_propagate(u0, t, params)] + [
        PlaneWaveState(f, xt[offsets[n]:offsets[n + 1]]) for n, f in enumerate(lad.freqs) if n]


def _terms_trapezoid(u0, V, t, n_max, M, params, cap):
    lad = _ladder(u0, V, n_max, cap)
    s = np.linspace(0.0, t, M)
    h = s[1] - s[0] if M > 1 else 0.0
    # amplitudes of S_0 at every node
    amp = np.exp(params.alpha * np.outer(s, lad.freqs[0] ** params.p)) * u0.amps
    out = [PlaneWaveState(lad.freqs[0], amp[-1])]
    lag = s[:, None] - s[None, :]
    for n in range(1, n_max + 1):
        f = lad.freqs[n]
        r, c, b = lad.couplings[n]
        # V S_{n-1}(s_j), expressed on the order-n frequencies
        coupled = np.zeros((M, len(f)), dtype=complex)
        np.add.at(coupled.T, r, (amp[:, c] * b).T)
        new = np.zeros_like(coupled)
        for i in range(1, M):
            w = np.full(i + 1, h)
            w[0] = w[-1] = 0.5 * h
            prop = np.exp(params.alpha * np.outer(lag[i, :i + 1], f**params.p))
            new[i] = (w[:, None] * prop * coupled[:i + 1]).sum(axis=0)
        amp = new
        out.append(PlaneWaveState(f, amp[-1]))
    return out


def dyson_terms(u0: PlaneWaveState, V: PlaneWaveState, t: float, cfg: DysonConfig,
                params: EvolutionParams) -> list[PlaneWaveState]:
    """``[S_0(t) u0, ..., S_{n_max}(t) u0]``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if cfg.rule == "exact":
        return _terms_exact(u0, V, t, cfg.n_max, params, cfg.atom_cap)
    terms = _terms_trapezoid(u0, V, t, cfg.n_max, cfg.time_mesh, params, cfg.atom_cap)
    if cfg.mesh_tol is not None:
        fine = _terms_trapezoid(u0, V, t, cfg.n_max, 2 * cfg.time_mesh - 1, params, cfg.atom_cap)
        delta = max((a - b).fresnel_norm for a, b in zip(terms, fine))
        if delta > cfg.mesh_tol:
            warnings.warn(f"mesh too coarse: M vs 2M terms differ by {delta:.3g}",
                          MeshTooCoarseWarning, stacklevel=2)
    return terms


def dyson_term(u0: PlaneWaveState, V: PlaneWaveState, t: float, n: int, cfg: DysonConfig,
               params: EvolutionParams) -> PlaneWaveState:
    """Single Dyson term ``S_n(t) u0``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > N_MAX_CAP:
        raise ValueError(f"n exceeds the cap of {N_MAX_CAP}")
    sub = DysonConfig(n, cfg.time_mesh, cfg.simplex_rule, cfg.rule, cfg.atom_cap, cfg.mesh_tol)
    return dyson_terms(u0, V, t, sub, params)[n]


def dyson_solve(u0: PlaneWaveState, V: PlaneWaveState, t: float, cfg: DysonConfig,
                params: EvolutionParams) -> DysonResult:
    """Partial sum ``sum_{n <= n_max} S_n(t) u0`` and the bound on the rest."""
    terms = dyson_terms(u0, V, t, cfg, params)
    state = PlaneWaveState.zero()
    for term in terms:
        state = state + term
    bound = truncation_bound(cfg.n_max, t, V.fresnel_norm, u0.fresnel_norm)
    return DysonResult(state, bound)


# ---------------------------------------------------------------- Feynman-Kac
_XI, _WI = np.polynomial.legendre.leggauss(16)


def _cumulative_matrix(nodes: np.ndarray) -> np.ndarray:
    """Q with ``(Q f)_i = int_{-1}^{nodes_i} p(s) ds`` for the interpolant p of f."""
    q = len(nodes)
    V = np.polynomial.legendre.legvander(nodes, q - 1)
    ints = np.empty((q, q))
    for j in range(q):
        coef = np.zeros(q)
        coef[j] = 1.0
        ints[:, j] = np.polynomial.legendre.legval(nodes, np.polynomial.legendre.legint(coef, lbnd=-1))
    return ints @ np.linalg.inv(V)


_CUM = _cumulative_matrix(_XI)


def _simplex_iterated(lams: np.ndarray, t: float) -> complex:
    """Time-ordered integral by nested cumulative Gauss-Legendre in time.

    F_0(s) = exp(lams[0] s) and F_k(s) = int_0^s exp(lams[k] (s - r)) F_{k-1}(r) dr;
    the result is F_n(t).  Each panel carries F_k across by its own
    propagator, so every intermediate stays bounded when Re(lams) <= 0.
    """
    n = len(lams) - 1
    # panels short enough that every exponential factor is well resolved
    panels = max(1, int(math.ceil(float(np.abs(lams).max()) * t / 2.0)))
    h = t / panels
    left = h * np.arange(panels)
    local = 0.5 * h * (_XI + 1.0)
    s = left[:, None] + local
    F = np.exp(lams[0] * s)
    for k in range(1, n + 1):
        lam = lams[k]
        g = np.exp(-lam * local) * F
        within = 0.5 * h * (g @ _CUM.T)
        full = 0.5 * h * (g @ _WI)
        step = np.exp(lam * h)
        # F_k at panel starts: start[p + 1] = step * (start[p] + full[p])
        start = lfilter([0.0, step], [1.0, -step], full)
        F = np.exp(lam * local) * (start[:, None] + within)
        end = step * (start[-1] + full[-1])
    return complex(end)


def simplex_integral(lams: Sequence[complex], t: float, rule: int = 0,
                     budget: int = 2_000_000) -> complex:
    """``int_{0<s_1<...<s_n<t} exp(sum_k lams[k] (s_{k+1} - s_k)) ds``.

    With ``s_0 = 0`` and ``s_{n+1} = t``; ``len(lams) = n + 1``.  Up to three
    times use a Duffy map ``s_k = t prod_{j>=k} u_j`` of a tensor
    Gauss-Legendre rule on the unit cube (``rule`` points per axis, or chosen
    from the oscillation when 0).  More times, or oscillation beyond what
    ``budget`` points resolve, use nested cumulative Gauss-Legendre in time.
    """
    lams = np.asarray(lams, dtype=complex)
    n = len(lams) - 1
    if n < 0:
        raise ValueError("need at least one exponent")
    if n == 0:
        return complex(np.exp(lams[0] * t))
    if n > 3:
        return _simplex_iterated(lams, t)
    # exponent = lams[n] t + sum_k (lams[k-1] - lams[k]) s_k
    mu = lams[:-1] - lams[1:]
    if rule == 0:
        omega = t * float(np.abs(mu).sum())
        rule = int(math.ceil(0.7 * omega)) + 16
        if rule > int(budget ** (1.0 / n)):
            return _simplex_iterated(lams, t)
    xi, wi = np.polynomial.legendre.leggauss(rule)
    u = 0.5 * (xi + 1.0)
    w = 0.5 * wi
    grids = np.meshgrid(*([u] * n), indexing="ij")
    weight = np.ones_like(grids[0])
    s_next = np.full_like(grids[0], t)
    # the full exponent has Re <= 0 under admissibility, so it is exponentiated whole
    expo = np.full(grids[0].shape, lams[n] * t, dtype=complex)
    # k = n down to 1: s_k = s_{k+1} u_k, Jacobian factor s_{k+1}
    for k in range(n, 0, -1):
        weight = weight * s_next
        s_k = s_next * grids[k - 1]
        expo = expo + mu[k - 1] * s_k
        s_next = s_k
    wt = w
    for _ in range(n - 1):
        wt = np.multiply.outer(wt, w)
    return complex(np.sum(wt * weight * np.exp(expo)))


def _tuples(u0: PlaneWaveState, V: PlaneWaveState, n: int, cap: int):
    count = len(u0) * len(V) ** n
    _check_cap(count, cap)
    return itertools.product(range(len(u0)), *([range(len(V))] * n))


def _path_coefficients(u0, V, t, n, cfg, params):
    """Final frequency and x-independent weight of every order-n atom tuple."""
    freqs, coefs = [], []
    for combo in _tuples(u0, V, n, cfg.atom_cap):
        j, ls = combo[0], list(combo[1:])
        w = u0.freqs[j] + np.concatenate([[0.0], np.cumsum(V.freqs[ls])])
        amp = u0.amps[j] * np.prod(V.amps[ls])
        lams = params.alpha * w**params.p
        freqs.append(w[-1])
        coefs.append(amp * simplex_integral(lams, t, cfg.simplex_rule))
    return np.array(freqs), np.array(coefs, dtype=complex)


def feynman_kac_term(u0: PlaneWaveState, V: PlaneWaveState, t: float, x, n: int,
                     cfg: DysonConfig, params: EvolutionParams) -> complex | np.ndarray:
    """Order-n contribution of the path functional at ``x`` (scalar or array).

    For every tuple (y, z_1, ..., z_n) of atoms the integrand over the time
    simplex is the closed cylinder form with frequencies read at times
    (0, s_1, ..., s_n) and horizon t, times the phase exp(i x (y + sum z)).
    """
    w, coef = _path_coefficients(u0, V, t, n, cfg, params)
    x = np.asarray(x, dtype=float)
    vals = np.exp(1j * x[..., None] * w) @ coef if len(w) else np.zeros(x.shape, complex)
    return complex(vals) if vals.ndim == 0 else vals


def feynman_kac_cube_term(u0: PlaneWaveState, V: PlaneWaveState, t: float, x: float, n: int,
                          params: EvolutionParams, order: int = 8, panels: int = 64) -> complex:
    """Order-n contribution integrated over the full cube [0, t]^n.

    Each quadrature point's times are sorted before the integrand is formed;
    the cube integral counts every ordering once, so it is divided by n!.
    """
    xi, wi = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, t, panels + 1)
    half = 0.5 * np.diff(edges)
    nodes = ((0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * xi).ravel()
    weights = (half[:, None] * wi).ravel()
    grids = np.meshgrid(*([nodes] * n), indexing="ij")
    wt = weights
    for _ in range(n - 1):
        wt = np.multiply.outer(wt, weights)
    times = np.sort(np.stack([g.ravel() for g in grids]), axis=0) if n else np.zeros((0, 1))
    total = 0j
    for combo in _tuples(u0, V, n, ATOM_CAP):
        j, ls = combo[0], combo[1:]
        w = u0.freqs[j] + np.concatenate([[0.0], np.cumsum(V.freqs[list(ls)])])
        amp = u0.amps[j] * np.prod(V.amps[list(ls)])
        lams = params.alpha * w**params.p
        bounds = np.vstack([np.zeros((1, times.shape[1])), times,
                            np.full((1, times.shape[1]), t)])
        expo = (lams[:, None] * np.diff(bounds, axis=0)).sum(axis=0)
        total += amp * np.exp(1j * x * w[-1]) * np.sum(wt.ravel() * np.exp(expo))
    return complex(total / math.factorial(n))


def feynman_kac_eval(u0: PlaneWaveState, V: PlaneWaveState, t: float, x,
                     cfg: DysonConfig, params: EvolutionParams):
    """Truncated path-functional series at ``x`` (scalar or array) and the
    bound on its tail."""
    value = sum(feynman_kac_term(u0, V, t, x, n, cfg, params) for n in range(cfg.n_max + 1))
    if np.ndim(value) == 0:
        value = complex(value)
    return value, truncation_bound(cfg.n_max, t, V.fresnel_norm, u0.fresnel_norm)
