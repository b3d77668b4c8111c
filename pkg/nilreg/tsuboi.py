"""
Tsuboi maps and interval lengths.

The flow of V(x) = x(1-x)^2 on [0,1] has the conserved quantity
F(x) = log(x/(1-x)) + 1/(1-x), so the time-t map solves F(y) = F(x) + t. With
w = y/(1-y) this is w + log w = F(x) + t - 1, whose root is the Wright omega
function. x = 0 is hyperbolic with derivative e^t; x = 1 is parabolic.

Points are carried together with their distance to 1 so that values close to
the right endpoint keep full precision.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import optimize, special

from nilreg.errors import DomainError, NumericalError, PreconditionError, StructuralError

logger = logging.getLogger(__name__)

MAX_TIME = 50.0
ADJACENCY_TOLERANCE = 1e-12
# above this A the lattice sum equals the integral up to exp(-2 pi A)
POISSON_THRESHOLD = 8.0
EXPLICIT_TERMS = 256

ArrayLike = Union[float, np.ndarray]
Interval = Tuple[float, float]


# --- FLOW ---
def conserved(x: float) -> float:
    return math.log(x / (1.0 - x)) + 1.0 / (1.0 - x)


def vector_field(x: ArrayLike) -> ArrayLike:
    return x * (1.0 - x) ** 2


def _check_time(t: ArrayLike) -> None:
    if np.any(np.abs(t) > MAX_TIME):
        raise PreconditionError(f"flow time outside [-{MAX_TIME}, {MAX_TIME}]", t=np.max(np.abs(t)))


def _omega_scalar(z: float) -> float:
    """Root w > 0 of w + log w = z, by bracketing in log w and a Newton polish."""
    h = lambda s: math.exp(s) + s - z  # noqa: E731
    if z <= 1.0:
        lo, hi = z - math.exp(z) - 1.0, z
    else:
        lo, hi = 0.0, math.log(z)
    try:
        s = optimize.brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (ValueError, RuntimeError) as exc:
        raise NumericalError(f"cannot bracket the flow inversion at z = {z}", z=z, bracket=(lo, hi)) from exc
    w = math.exp(s)
    return w - (w + math.log(w) - z) / (1.0 + 1.0 / w)


def flow(t: float, x: float) -> float:
    """Time-t map of V(x) = x(1-x)^2 for x in (0, 1)."""
    if not 0.0 < x < 1.0:
        raise DomainError(f"flow needs x in (0, 1), got {x}", x=x)
    _check_time(t)
    if t == 0.0:
        return x
    w = _omega_scalar(conserved(x) + t - 1.0)
    y = w / (1.0 + w)
    if abs(conserved(y) - conserved(x) - t) > 1e-12 * max(1.0, abs(conserved(x) + t)):
        raise NumericalError(f"flow inversion missed the tolerance at t = {t}, x = {x}", t=t, x=x)
    return y


def flow_derivative(t: float, x: float) -> float:
    """D flow(t, .)(x) = V(flow(t, x)) / V(x)."""
    y = flow(t, x)
    return float(vector_field(y) / vector_field(x))


def flow_array(t: ArrayLike, u: np.ndarray, ubar: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized time-t map on [0, 1] including the endpoints.

    Returns (y, 1 - y). ubar, when given, is 1 - u computed without cancellation.
    """
    _check_time(t)
    shape = np.shape(u)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    ubar = 1.0 - u if ubar is None else np.atleast_1d(np.asarray(ubar, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), u.shape)
    inside = (u > 0.0) & (ubar > 0.0)
    y = np.where(ubar <= 0.0, 1.0, 0.0)
    ybar = 1.0 - y
    if np.any(inside):
        ui, vi, ti = u[inside], ubar[inside], t[inside]
        z = np.log(ui) - np.log(vi) + 1.0 / vi + ti - 1.0
        w = special.wrightomega(z).real
        safe = np.maximum(w, np.finfo(float).tiny)
        w = np.maximum(w - (w + np.log(safe) - z) / (1.0 + 1.0 / safe), 0.0)
        y[inside] = w / (1.0 + w)
        ybar[inside] = 1.0 / (1.0 + w)
        still = ti == 0.0
        if np.any(still):
            idx = np.flatnonzero(inside)[still]
            y[idx], ybar[idx] = u[idx], ubar[idx]
    return y.reshape(shape), ybar.reshape(shape)


def log_flow_derivative(t: ArrayLike, u: np.ndarray, ubar: Optional[np.ndarray] = None) -> np.ndarray:
    """log D flow(t, .)(u); equals t at u = 0 and 0 at u = 1."""
    shape = np.shape(u)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    ubar = 1.0 - u if ubar is None else np.atleast_1d(np.asarray(ubar, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), u.shape)
    y, ybar = flow_array(t, u, ubar)
    out = np.where(u <= 0.0, t, 0.0).astype(float)
    inside = (u > 0.0) & (ubar > 0.0)
    if np.any(inside):
        out[inside] = (
            np.log(y[inside]) + 2.0 * np.log(ybar[inside]) - np.log(u[inside]) - 2.0 * np.log(ubar[inside])
        )
    return out.reshape(shape)


# --- TSUBOI MAPS ---
@dataclass(frozen=True)
class TsuboiMap:
    """phi: I -> J with derivative |J'|/|I'| at the left end of I and |J|/|I| at the right end."""

    source: Interval
    target: Interval
    t: float

    @property
    def scale(self) -> float:
        return (self.target[1] - self.target[0]) / (self.source[1] - self.source[0])

    def _local(self, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        a, b = self.source
        x = np.asarray(x, dtype=float)
        if np.any(x < a - ADJACENCY_TOLERANCE * max(1.0, abs(a))) or np.any(x > b + ADJACENCY_TOLERANCE * max(1.0, abs(b))):
            raise DomainError(f"point outside the source interval {self.source}")
        length = b - a
        return np.clip((x - a) / length, 0.0, 1.0), np.clip((b - x) / length, 0.0, 1.0)

    def evaluate(self, x: ArrayLike) -> ArrayLike:
        u, ubar = self._local(x)
        y, ybar = flow_array(self.t, u, ubar)
        c, d = self.target
        # anchor to whichever endpoint is closer
        out = np.where(y <= 0.5, c + (d - c) * y, d - (d - c) * ybar)
        return float(out) if out.ndim == 0 else out

    def log_derivative(self, x: ArrayLike) -> ArrayLike:
        u, ubar = self._local(x)
        out = math.log(self.scale) + log_flow_derivative(self.t, u, ubar)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, x: ArrayLike) -> ArrayLike:
        return np.exp(self.log_derivative(x))


def _length(interval: Interval) -> float:
    return interval[1] - interval[0]


def _adjacent(left: Interval, right: Interval) -> bool:
    return abs(left[1] - right[0]) <= ADJACENCY_TOLERANCE * max(1.0, abs(right[0]))


def flow_time(prev_source: float, source: float, prev_target: float, target: float) -> float:
    """t = log(|J'|/|I'|) - log(|J|/|I|) from the four lengths."""
    return math.log(prev_target / prev_source) - math.log(target / source)


def tsuboi_map(Ip: Interval, I: Interval, Jp: Interval, J: Interval) -> TsuboiMap:
    lengths = [_length(interval) for interval in (Ip, I, Jp, J)]
    if min(lengths) <= 0:
        raise PreconditionError("Tsuboi maps need intervals of positive length", lengths=lengths)
    if not _adjacent(Ip, I):
        raise StructuralError(f"{Ip} is not left-adjacent to {I}")
    if not _adjacent(Jp, J):
        raise StructuralError(f"{Jp} is not left-adjacent to {J}")
    t = flow_time(lengths[0], lengths[1], lengths[2], lengths[3])
    return TsuboiMap(source=tuple(I), target=tuple(J), t=t)


# --- LENGTHS ---
def _check_lengths(A: ArrayLike, eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise DomainError(f"epsilon = {eps} must lie in (0, 1)")
    if np.any(np.asarray(A) < 1.0):
        raise DomainError("A must be >= 1")


def interval_lengths(A: float, eps: float, j: ArrayLike) -> ArrayLike:
    """L_{A,eps}(j) = (A^2 + j^2)^(-(1+eps)/2)."""
    j = np.asarray(j, dtype=float)
    return (A * A + j * j) ** (-(1.0 + eps) / 2.0)


def _integral_tail(A: float, eps: float, K: float) -> float:
    """int_K^inf (A^2 + x^2)^(-s) dx with s = (1+eps)/2, as an incomplete beta function."""
    a = eps / 2.0
    u = A * A / (A * A + K * K)
    return 0.5 * A ** (-eps) * special.beta(a, 0.5) * special.betainc(a, 0.5, u)


def total_length(A: float, eps: float) -> float:
    """L(A) = sum over all j of L_{A,eps}(j)."""
    _check_lengths(A, eps)
    if A >= POISSON_THRESHOLD:
        return float(A ** (-eps) * special.beta(0.5, eps / 2.0))
    K = EXPLICIT_TERMS
    j = np.arange(1, K + 1, dtype=float)
    body = 1.0 / A ** (1.0 + eps) + 2.0 * float(np.sum(interval_lengths(A, eps, j)))
    s = (1.0 + eps) / 2.0
    f_K = (A * A + K * K) ** (-s)
    df_K = -2.0 * s * K * (A * A + K * K) ** (-s - 1.0)
    tail = _integral_tail(A, eps, K) - f_K / 2.0 - df_K / 12.0
    return body + 2.0 * tail


def invert_length(length: float, eps: float) -> float:
    """The A >= 1 with total_length(A, eps) = length."""
    top = total_length(1.0, eps)
    if not 0.0 < length <= top:
        raise DomainError(f"length {length} is outside (0, {top}]", length=length)
    if length == top:
        return 1.0
    closed = (length / special.beta(0.5, eps / 2.0)) ** (-1.0 / eps)
    if closed >= POISSON_THRESHOLD:
        return float(closed)
    g = lambda s: math.log(total_length(math.exp(s), eps)) - math.log(length)  # noqa: E731
    try:
        s = optimize.brentq(g, 0.0, math.log(POISSON_THRESHOLD), xtol=1e-14)
    except ValueError as exc:
        raise NumericalError(f"cannot invert the length {length}", length=length) from exc
    return math.exp(s)
