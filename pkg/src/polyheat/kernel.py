"""Fundamental solution of du/dt = (-i)^p alpha d^p u/dx^p.

The kernel is the inverse Fourier transform

    g(x) = 1/(2 pi) int exp(i k x) exp(alpha t k^p) dk

evaluated through one of several absolutely convergent representations:

* ``decaying``   Re(alpha) < 0, p even: the integral as written, truncated.
* ``rotated``    alpha = i c: each half-line of the k-integral is turned
  by the angle sign(c) pi/(2p); the half carrying a real stationary point is
  routed along the real axis up to that point first, so no exponentially
  large intermediate values occur.  Primary form for even p; for odd p it
  backs up the shifted line far out on the oscillatory side.
* ``shifted``    p odd, alpha = i c: the integration line is moved to
  Im z = eta with sign(eta) = sign(c).
* ``asymptotic`` stationary-phase closed forms for large |x|.
"""

from __future__ import annotations

import enum
import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .quad import (
    DEFAULT_SPEC,
    QuadSpec,
    convolve,
    damped_line_integral,
    integrate_interval,
    truncation_radius,
)

__all__ = [
    "AdmissibilityError",
    "OutsideRegimeError",
    "ShiftTooSmallError",
    "EvolutionParams",
    "Method",
    "KernelValue",
    "validate_params",
    "kernel_decaying",
    "kernel_rotated",
    "kernel_shifted",
    "kernel_asymptotic",
    "asymptotic_threshold",
    "asymptotic_envelope",
    "calibrate_threshold",
    "kernel",
    "kernel_table",
    "kernel_function",
    "decay_extent",
    "kernel_mass",
    "kernel_semigroup_defect",
]

TWO_PI = 2.0 * math.pi
# beyond this many natural length units on the oscillatory side, odd-p kernels
# use the rotated half-line instead of the (slowly decaying) shifted line
SHIFT_LIMIT = 12.0
# absolute accuracy attainable when summing O(1) integrands over O(10) lengths
ROUNDOFF_FLOOR = 1e-14


class AdmissibilityError(ValueError):
    pass


class OutsideRegimeError(ValueError):
    pass


class ShiftTooSmallError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EvolutionParams:
    p: int
    alpha: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))

    @property
    def c(self) -> float:
        """Imaginary part of alpha (the oscillatory coefficient)."""
        return self.alpha.imag

    @property
    def even(self) -> bool:
        return self.p % 2 == 0

    @property
    def dissipative(self) -> bool:
        return self.alpha.real < 0

    def symbol(self, k, t):
        """Fourier multiplier exp(alpha t k^p)."""
        return np.exp(self.alpha * t * np.asarray(k, dtype=float) ** self.p)

    def conjugate(self) -> "EvolutionParams":
        return EvolutionParams(self.p, self.alpha.conjugate())


def validate_params(p: int, alpha: complex) -> EvolutionParams:
    """Check |exp(alpha t k^p)| <= 1 for all real k and t >= 0."""
    if int(p) != p:
        raise AdmissibilityError("order must be an integer")
    p = int(p)
    alpha = complex(alpha)
    if p < 2:
        raise AdmissibilityError("order too low: p must be >= 2")
    if alpha == 0:
        raise AdmissibilityError("degenerate: alpha = 0")
    if p % 2:
        if alpha.real != 0:
            raise AdmissibilityError("inadmissible alpha: odd p needs purely imaginary alpha")
    elif alpha.real > 0:
        raise AdmissibilityError("inadmissible alpha: even p needs Re(alpha) <= 0")
    return EvolutionParams(p, alpha)


class Method(str, enum.Enum):
    DECAYING = "decaying"
    ROTATED = "rotated"
    SHIFTED = "shifted"
    ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class KernelValue:
    x: float
    t: float
    value: complex
    method: Method
    err_estimate: float
    converged: bool = True
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.err_estimate >= 0:
            raise ValueError("err_estimate must be >= 0")


def _check_t(t):
    if not t > 0:
        raise ValueError("t must be positive")


def _ray_end(p, c_abs, t, spec):
    if spec.truncation_radius_override is not None:
        return spec.truncation_radius_override
    return truncation_radius(p, c_abs, t, spec.abs_tol * 1e-3)


# ---------------------------------------------------------------- decaying
def kernel_decaying(params: EvolutionParams, t: float, x: float,
                    spec: QuadSpec = DEFAULT_SPEC) -> KernelValue:
    p, alpha = params.p, params.alpha
    if params.p % 2 or not alpha.real < 0:
        raise AdmissibilityError("decaying representation needs even p and Re(alpha) < 0")
    _check_t(t)
    x = float(x)

    def radius(tol):
        if spec.truncation_radius_override is not None:
            return spec.truncation_radius_override
        return truncation_radius(p, -alpha.real, t, tol)

    # the symbol is even in k, so fold onto [0, R]
    def f(k):
        return 2.0 * np.cos(k * x) * np.exp(alpha * t * k**p)

    sub = spec.tightened(TWO_PI)
    res = integrate_interval(f, 0.0, radius(spec.abs_tol * 1e-3), sub, freq=abs(x))
    # small tail values above the noise: refine toward rel_tol * |value|,
    # down to the roundoff floor
    target = max(spec.rel_tol * abs(res.value), ROUNDOFF_FLOOR)
    if res.converged and target < sub.abs_tol < 0.1 * abs(res.value):
        fine = integrate_interval(f, 0.0, radius(target * 1e-3),
                                  QuadSpec(target, sub.rel_tol, sub.max_subdivisions), freq=abs(x))
        if fine.converged:
            res = fine
    return KernelValue(x, t, res.value / TWO_PI, Method.DECAYING,
                       res.error / TWO_PI, res.converged)


# ---------------------------------------------------------------- rotated
def _half_line(sigma: int, xabs: float, c: float, t: float, p: int, spec: QuadSpec):
    """int_0^inf exp(i sigma q |x| + i c t q^p) dq along a decaying contour.

    When sigma*c < 0 the phase is stationary at q0 > 0; the contour runs along
    the real axis to q0 and leaves along the ray at angle sign(c) pi/(2p).
    Along that ray every binomial term of Im((q0 + r e^{i theta})^p) is
    non-negative, so the modulus decreases monotonically.
    """
    theta = math.copysign(math.pi / (2 * p), c)
    direction = complex(math.cos(theta), math.sin(theta))
    q0 = 0.0
    if sigma * c < 0 and xabs > 0:
        q0 = (xabs / (p * abs(c) * t)) ** (1.0 / (p - 1))

    def phase(q):
        return 1j * (sigma * q * xabs + c * t * q**p)

    total = 0j
    err = 0.0
    ok = True
    if q0 > 0:
        res = integrate_interval(lambda q: np.exp(phase(q)), 0.0, q0, spec, freq=xabs)
        total += res.value
        err += res.error
        ok &= res.converged
    r_end = _ray_end(p, abs(c), t, spec)

    def on_ray(r):
        return np.exp(phase(q0 + r * direction)) * direction

    res = integrate_interval(on_ray, 0.0, r_end, spec, freq=xabs)
    return total + res.value, err + res.error, ok and res.converged


def kernel_rotated(params: EvolutionParams, t: float, x: float,
                   spec: QuadSpec = DEFAULT_SPEC) -> KernelValue:
    p, alpha = params.p, params.alpha
    if alpha.real != 0 or alpha.imag == 0:
        raise AdmissibilityError("rotated representation needs alpha = i c, c != 0")
    _check_t(t)
    x = float(x)
    c = alpha.imag
    sub = spec.tightened(TWO_PI)
    if p % 2:
        # the negative half-line is the complex conjugate of the positive one
        half, err, ok = _half_line(1 if x >= 0 else -1, abs(x), c, t, p, sub)
        return KernelValue(x, t, complex(half.real / math.pi, 0.0), Method.ROTATED,
                           2 * err / TWO_PI, ok)
    plus, e1, ok1 = _half_line(+1, abs(x), c, t, p, sub)
    minus, e2, ok2 = _half_line(-1, abs(x), c, t, p, sub)
    return KernelValue(x, t, (plus + minus) / TWO_PI, Method.ROTATED,
                       (e1 + e2) / TWO_PI, ok1 and ok2)


# ---------------------------------------------------------------- shifted
def default_shift(params: EvolutionParams, t: float, x: float) -> float:
    """Height of the integration line for odd p.

    The base scale is min((1/(p|c|t))^(1/(p-1)), 1).  On the decaying side
    (x c > 0) the line is raised to the height of the nearest complex saddle
    so the integrand never exceeds the result by much; on the oscillatory
    side it is lowered so that exp(|x| eta) stays below e^3.
    """
    p, c = params.p, params.c
    base = min((1.0 / (p * abs(c) * t)) ** (1.0 / (p - 1)), 1.0)
    if x * c > 0:
        r = (abs(x) / (p * abs(c) * t)) ** (1.0 / (p - 1))
        eta = max(base, r * math.sin(math.pi / (p - 1)))
    elif x != 0:
        eta = min(base, 3.0 / abs(x))
    else:
        eta = base
    return math.copysign(eta, c)


def _log_modulus_line(u, x, eta, c, t, p):
    z = u + 1j * eta
    return (-x * eta) - c * t * np.imag(z**p)


def kernel_shifted(params: EvolutionParams, t: float, x: float,
                   spec: QuadSpec = DEFAULT_SPEC, eta: Optional[float] = None) -> KernelValue:
    p, alpha = params.p, params.alpha
    if p % 2 == 0 or alpha.real != 0 or alpha.imag == 0:
        raise AdmissibilityError("shifted representation needs odd p and alpha = i c, c != 0")
    _check_t(t)
    x = float(x)
    c = alpha.imag
    if eta is None:
        eta = default_shift(params, t, x)
    eta = float(eta)

    # peak modulus sets the scale of the result; tolerances are taken relative to it
    probe = np.linspace(-4.0, 4.0, 161) * max(1.0, abs(eta)) * max(1.0, abs(x)) ** 0.5
    log_peak = float(np.max(_log_modulus_line(probe, x, eta, c, t, p)))
    if log_peak < -700.0:
        # deep on the decaying side the value underflows
        return KernelValue(x, t, 0j, Method.SHIFTED, 0.0, True)
    scale = math.exp(min(log_peak, 0.0))
    cutoff = math.log(spec.abs_tol) + min(log_peak, 0.0) - 3.0

    U = 1.0
    while True:
        ends = _log_modulus_line(np.array([-U, U]), x, eta, c, t, p)
        if np.all(ends < cutoff):
            break
        U *= 1.5
        if U > 1e4:
            raise ShiftTooSmallError(
                f"shift too small / wrong sign: integrand does not decay on Im z = {eta:g}")

    def f(u):
        z = u + 1j * eta
        return np.exp(1j * x * z + 1j * c * t * z**p)

    freq = abs(x) + p * abs(c) * t * U ** (p - 1)
    sub = QuadSpec(spec.abs_tol * scale * TWO_PI, spec.rel_tol, spec.max_subdivisions)
    res = integrate_interval(f, -U, U, sub, freq=freq)
    value = res.value / TWO_PI
    # alpha imaginary and p odd: g is real
    value = complex(value.real, 0.0)
    return KernelValue(x, t, value, Method.SHIFTED, res.error / TWO_PI, res.converged)


# ---------------------------------------------------------------- asymptotic
def _saddle_term(p, c_abs, t, xabs):
    """Modulus and phase pieces of one real stationary point (c > 0 form)."""
    amp = xabs ** ((2.0 - p) / (2.0 * (p - 1))) / math.sqrt(TWO_PI)
    amp *= (p - 1) ** -0.5 * (p * c_abs * t) ** (-1.0 / (2 * (p - 1)))
    lam = xabs ** (p / (p - 1.0))
    phase = lam * (p - 1.0) / p * (1.0 / (p * c_abs * t)) ** (1.0 / (p - 1))
    return amp, phase


def _asymptotic_value(params: EvolutionParams, t: float, x: float):
    p, c = params.p, params.c
    xabs = abs(x)
    amp, phase = _saddle_term(p, abs(c), t, xabs)
    if p % 2 == 0:
        s = math.copysign(1.0, c)
        return amp * complex(math.cos(s * math.pi / 4 - s * phase),
                             math.sin(s * math.pi / 4 - s * phase)), ()
    # odd p: real stationary points exist only when x c < 0
    if x * c > 0:
        return 0j, ("super-polynomial decay",)
    # two conjugate stationary points; g is real
    return complex(2.0 * amp * math.cos(phase - math.pi / 4), 0.0), ()


def asymptotic_envelope(params: EvolutionParams, t: float, x: float) -> float:
    """Modulus scale of the stationary-phase form at |x| (both saddles for odd p)."""
    amp, _ = _saddle_term(params.p, abs(params.c), t, abs(x))
    return 2.0 * amp if params.p % 2 else amp


_BASE_THRESHOLD: dict[tuple[int, int], float] = {}


def asymptotic_threshold(params: EvolutionParams, t: float) -> float:
    """Calibrated switch-over |x| for the asymptotic formulas.

    Calibrated once per (p, sign c) at |c| t = 1 and carried to other
    (c, t) by the exact scaling x ~ (|c| t)^(1/p).
    """
    key = (params.p, 1 if params.c > 0 else -1)
    if key not in _BASE_THRESHOLD:
        base = EvolutionParams(params.p, complex(0.0, key[1]))
        _BASE_THRESHOLD[key] = calibrate_threshold(base, 1.0)
    return _BASE_THRESHOLD[key] * (abs(params.c) * t) ** (1.0 / params.p)


def kernel_asymptotic(params: EvolutionParams, t: float, x: float,
                      threshold: Optional[float] = None) -> KernelValue:
    if params.alpha.real != 0:
        raise OutsideRegimeError("asymptotic formulas require purely imaginary alpha")
    _check_t(t)
    x = float(x)
    if threshold is None:
        threshold = asymptotic_threshold(params, t)
    if abs(x) < threshold:
        raise OutsideRegimeError(f"outside asymptotic regime: |x| = {abs(x):g} < {threshold:g}")
    value, flags = _asymptotic_value(params, t, x)
    amp, _ = _saddle_term(params.p, abs(params.c), t, abs(x))
    # first neglected order is O(1/lambda) relative to the amplitude
    err = amp / abs(x) ** (params.p / (params.p - 1.0))
    return KernelValue(x, t, value, Method.ASYMPTOTIC, err, True, flags)


def calibrate_threshold(params: EvolutionParams, t: float, band: float = 0.05,
                        spec: QuadSpec = DEFAULT_SPEC, x_max: Optional[float] = None,
                        step: float = 0.25) -> float:
    """Sweep |x| and return the smallest x* beyond which the asymptotic form
    stays within ``band`` of quadrature, measured relative to the saddle
    amplitude (|g_asym - g| <= band * amplitude).

    For odd p the sweep runs on the side carrying real stationary points.
    """
    if params.alpha.real != 0:
        raise OutsideRegimeError("asymptotic formulas require purely imaginary alpha")
    scale = (abs(params.c) * t) ** (1.0 / params.p)
    if x_max is None:
        x_max = 16.0 * scale
    sign = 1.0
    if params.p % 2 and params.c > 0:
        sign = -1.0
    xs = np.arange(step, x_max + step / 2, step) * scale
    bad = []
    for xa in xs:
        x = sign * xa
        exact = kernel(params, t, x, spec).value
        approx, _ = _asymptotic_value(params, t, x)
        bad.append(abs(approx - exact) > band * asymptotic_envelope(params, t, x))
    bad = np.array(bad)
    if bad[-1]:
        raise OutsideRegimeError("asymptotic form did not settle within the sweep range")
    last_bad = np.nonzero(bad)[0]
    idx = 0 if last_bad.size == 0 else last_bad[-1] + 1
    return float(xs[idx])


# ---------------------------------------------------------------- dispatch
def kernel(params: EvolutionParams, t: float, x: float, spec: QuadSpec = DEFAULT_SPEC,
           use_asymptotic: bool = False, threshold: Optional[float] = None) -> KernelValue:
    """Evaluate g^p_t(x), choosing the representation from (p, alpha)."""
    if use_asymptotic and params.alpha.real == 0:
        thr = threshold if threshold is not None else asymptotic_threshold(params, t)
        if abs(x) >= thr:
            return kernel_asymptotic(params, t, x, thr)
    if params.alpha.real < 0:
        return kernel_decaying(params, t, x, spec)
    if params.p % 2 == 0:
        return kernel_rotated(params, t, x, spec)
    if x * params.c < 0 and abs(x) > SHIFT_LIMIT * (abs(params.c) * t) ** (1.0 / params.p):
        return kernel_rotated(params, t, x, spec)
    return kernel_shifted(params, t, x, spec)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("POLYHEAT_THREADS", "1")))
    except ValueError:
        return 1


def kernel_table(params: EvolutionParams, t: float, xs: Sequence[float],
                 spec: QuadSpec = DEFAULT_SPEC, use_asymptotic: bool = False) -> list[KernelValue]:
    """Kernel at every x; failures become NaN entries flagged with the error text."""

    def one(x):
        try:
            return kernel(params, t, x, spec, use_asymptotic)
        except (ArithmeticError, ValueError) as exc:
            return KernelValue(float(x), t, complex(math.nan, math.nan), Method.DECAYING,
                               math.inf, False, (f"error: {exc}",))

    xs = list(xs)
    n = _threads()
    if n > 1 and len(xs) > 1:
        with ThreadPoolExecutor(n) as pool:
            return list(pool.map(one, xs))
    return [one(x) for x in xs]


def kernel_function(params: EvolutionParams, t: float,
                    spec: QuadSpec = DEFAULT_SPEC) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized, memoized x -> g^p_t(x) for use as a quadrature integrand."""

    @functools.lru_cache(maxsize=None)
    def scalar(x: float) -> complex:
        return kernel(params, t, x, spec).value

    def f(xs):
        xs = np.asarray(xs, dtype=float)
        flat = [scalar(float(v)) for v in xs.ravel()]
        return np.array(flat, dtype=complex).reshape(xs.shape)

    f.cache = scalar
    return f


def _grid_round(x, h):
    # snap to the grid so memoized values are shared between shifted copies
    return np.round(np.asarray(x) / h) * h


def decay_extent(params: EvolutionParams, t: float, tol: Optional[float] = None,
                 spec: QuadSpec = DEFAULT_SPEC) -> tuple[float, float]:
    """Interval outside of which |g| < tol, for kernels that decay.

    ``tol`` defaults to ten times the quadrature tolerance, the noise floor of
    computed kernel values.  Oscillatory directions are reported as +-inf.
    """
    if tol is None:
        tol = 10.0 * spec.abs_tol
    p, alpha = params.p, params.alpha
    scale = (abs(alpha) * t) ** (1.0 / p)
    lo, hi = -math.inf, math.inf
    if alpha.real < 0:
        sides = (-1.0, 1.0)
    elif p % 2:
        sides = (1.0,) if alpha.imag > 0 else (-1.0,)
    else:
        return lo, hi
    out = {}
    for s in sides:
        x = scale
        run = 0
        while True:
            kv = kernel(params, t, s * x, spec)
            # values at the quadrature noise floor count as negligible
            run = run + 1 if abs(kv.value) < max(tol, kv.err_estimate) else 0
            if run >= 3:
                break
            x += 0.5 * scale
            if x > 1e3 * scale:
                raise ArithmeticError("kernel does not decay within 1000 length units")
        out[s] = s * x
    return out.get(-1.0, lo), out.get(1.0, hi)


def kernel_mass(params: EvolutionParams, t: float, spec: QuadSpec = DEFAULT_SPEC,
                h: Optional[float] = None, eps0: float = 0.02, levels: int = 4) -> tuple[complex, float]:
    """int_R g^p_t(x) dx.

    Decaying kernels are integrated directly.  For alpha = i c the integral is
    only conditionally convergent (|g| ~ |x|^((2-p)/(2(p-1)))); it is then
    Abel-summed with Gaussian damping exp(-eps x^2) at ``levels`` values of eps
    and extrapolated to eps = 0.  The damped mass equals E[exp(alpha t K^p)]
    with K ~ N(0, 2 eps), so its bias is a series in eps^(p/2) (p even) or
    eps^p (p odd); the extrapolation runs in that variable.
    """
    g = kernel_function(params, t, spec)
    lo, hi = decay_extent(params, t, spec=spec)
    scale = (abs(params.alpha) * t) ** (1.0 / params.p)
    if math.isfinite(lo) and math.isfinite(hi):
        res = integrate_interval(g, lo, hi, spec, freq=4.0 / scale)
        return res.value, res.error
    if h is None:
        h = 0.1 * scale
    eps = [eps0 / scale**2 / 2**j for j in range(levels)]
    power = params.p / 2 if params.even else params.p
    return damped_line_integral(g, h, eps, extent=(lo, hi), power=power)


def kernel_semigroup_defect(params: EvolutionParams, t: float, s: float, x: float,
                            spec: QuadSpec = DEFAULT_SPEC, h: Optional[float] = None,
                            eps0: float = 0.02, levels: int = 4) -> tuple[complex, complex, float]:
    """Compare (g_t * g_s)(x) with g_{t+s}(x).

    Returns ``(convolution, direct, err_estimate)``.  Products that decay on
    both sides go through :func:`polyheat.quad.convolve`; otherwise the
    convolution is Abel-summed like :func:`kernel_mass`.
    """
    gt = kernel_function(params, t, spec)
    gs = kernel_function(params, s, spec)
    direct = kernel(params, t + s, x, spec).value
    scale = (abs(params.alpha) * max(t, s)) ** (1.0 / params.p)
    lo_t, hi_t = decay_extent(params, t, spec=spec)
    lo_s, hi_s = decay_extent(params, s, spec=spec)
    # y ranges where g_s(y) and g_t(x - y) are non-negligible
    y_lo = max(lo_s, x - hi_t)
    y_hi = min(hi_s, x - lo_t)
    if math.isfinite(y_lo) and math.isfinite(y_hi):
        window = max(abs(y_lo - x), abs(y_hi - x))
        val = convolve(gt, gs, x, window, spec, freq=4.0 / scale)
        return val, direct, spec.abs_tol
    if h is None:
        h = 0.1 * scale
    if x != 0:
        # x must lie on the grid for the memoized values to be shared
        h = abs(x) / math.ceil(abs(x) / h)
    eps = [eps0 / scale**2 / 2**j for j in range(levels)]

    def integrand(y):
        y = _grid_round(y, h)
        return gt(_grid_round(x - y, h)) * gs(y)

    center = round(0.5 * x / h) * h
    val, err = damped_line_integral(integrand, h, eps, center=center, extent=(y_lo, y_hi))
    return val, direct, err
