"""Quantum Fisher information of the probe for bath temperature or coupling g.

Three routes to the same number are provided:

* ``closed``: the three-term expression in (Gamma, Omega, p_z) and their
  parameter derivatives,
* ``bloch``: the single-qubit identity |dp|^2 + (p.dp)^2 / (1 - |p|^2),
* ``sld``: the spectral sum over eigenvalues and eigenvector overlaps.

Parameter derivatives of the Bloch vector come either from a Richardson
extrapolated central difference (default) or from differentiating the
class weights and rotations analytically.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import (
    COHERENCE_FLOOR,
    CoherenceCollapseError,
    _rotate_preparation,
    bloch_vectors,
    normalized_weights,
    reduced_density,
)
from .model import ClassArrays, ModelSpec, axis_overlaps, enumerate_classes

PARAMETERS = ("temperature", "coupling")
DERIVATIVE_METHODS = ("finite_difference", "analytic")
PURE_BRANCH = 1e-9
SUPPORT_CUTOFF = 1e-12
SINGULAR_THRESHOLD = 1e-12
NEGATIVE_SLACK = 1e-10


class StepCollisionError(ValueError):
    """The finite-difference stencil would leave the parameter domain."""


class ClosedFormSingularityError(ArithmeticError):
    """The closed form divides by e^{2 Gamma} - f ~ 0 (probe state nearly pure)."""


@dataclass(frozen=True)
class ParamSelector:
    """Which environment parameter is estimated and the point it is evaluated at."""

    which: str
    value: float

    def __post_init__(self):
        if self.which not in PARAMETERS:
            raise ValueError(f"parameter: must be one of {PARAMETERS}, got {self.which!r}")
        if not math.isfinite(self.value):
            raise ValueError("parameter value: must be finite")
        if self.which == "temperature" and self.value <= 0:
            raise ValueError(f"temperature: must be > 0, got {self.value}")

    @classmethod
    def of(cls, spec: ModelSpec, which: str) -> "ParamSelector":
        value = spec.temperature if which == "temperature" else spec.g
        return cls(which, value)

    def apply(self, spec: ModelSpec, value: float | None = None) -> ModelSpec:
        value = self.value if value is None else value
        if self.which == "temperature":
            return dataclasses.replace(spec, temperature=value)
        return dataclasses.replace(spec, g=value)


@dataclass(frozen=True)
class QfiPoint:
    t: float
    fq_closed: float
    fq_bloch: float
    fq_sld: float
    derivative_method: str


def _arrays(spec, classes):
    if classes is None:
        classes = enumerate_classes(spec)
    return classes if isinstance(classes, ClassArrays) else ClassArrays.from_classes(classes)


def fd_step(sel: ParamSelector) -> float:
    x = sel.value
    h = max(1e-5 * abs(x), 1e-7)
    if sel.which == "temperature" and x - h <= 0:
        h /= 10.0
        if x - h <= 0:
            raise StepCollisionError(f"temperature {x}: stencil x - h leaves T > 0")
    return h


def richardson_central(func, x: float, h: float):
    """Central difference at steps h and h/2 combined by one Richardson level."""
    d_h = (func(x + h) - func(x - h)) / (2.0 * h)
    d_half = (func(x + 0.5 * h) - func(x - 0.5 * h)) / h
    return (4.0 * d_half - d_h) / 3.0


def _fd_derivative(spec, arrays, times, sel, correlated):
    h = fd_step(sel)
    return richardson_central(
        lambda x: bloch_vectors(sel.apply(spec, x), arrays, times, correlated), sel.value, h
    )


def log_weight_derivative(arrays: ClassArrays, spec: ModelSpec, which: str, correlated: bool):
    """d/dx of each class's unnormalized log weight, x = beta or g.

    ``which`` is ``"beta"`` or ``"coupling"``.
    """
    beta = spec.beta
    if which == "beta":
        out = -arrays.bath_energy.copy()
    else:
        out = np.zeros_like(arrays.m)
    if not correlated:
        return out
    eps_tilde = spec.epsilon + spec.g * arrays.m
    eta = 0.5 * np.hypot(eps_tilde, spec.delta)
    px0, _, pz0 = spec.preparation
    live = eta > 0
    eta_s = np.where(live, eta, 1.0)
    h = 0.5 * (eps_tilde * pz0 + spec.delta * px0)
    one_minus_u, one_plus_u = axis_overlaps(eps_tilde, spec.delta, spec.preparation)
    s = np.exp(-2.0 * beta * eta_s)
    denom = one_minus_u + s * one_plus_u
    if which == "beta":
        dlog_a = eta_s * (one_minus_u - s * one_plus_u) / denom
    else:
        deta = eps_tilde * arrays.m / (4.0 * eta_s)
        dh = 0.5 * arrays.m * pz0
        du = (dh * eta_s - h * deta) / eta_s**2
        ds = -2.0 * beta * deta * s
        dlog_a = beta * deta + (-du * (1.0 - s) + ds * one_plus_u) / denom
    return out + np.where(live, dlog_a, 0.0)


def _analytic_derivative(spec, arrays, times, sel, correlated):
    spec = sel.apply(spec)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    weights = normalized_weights(arrays, spec, correlated)
    eps_tilde = spec.epsilon + spec.g * arrays.m
    p0 = np.asarray(spec.preparation)
    rp, (eta, u, theta, udotp, ucrossp) = _rotate_preparation(eps_tilde, spec.delta, times, p0)

    kind = "beta" if sel.which == "temperature" else "coupling"
    dlogw = log_weight_derivative(arrays, spec, kind, correlated)
    centred = dlogw - weights @ dlogw
    dp = np.einsum("k,tkj->tj", weights * centred, rp)

    if sel.which == "temperature":
        return -dp / spec.temperature**2

    live = eta > 0
    eta_s = np.where(live, eta, 1.0)
    deta = np.where(live, eps_tilde * arrays.m / (4.0 * eta_s), 0.0)
    dv = np.zeros_like(u)
    dv[:, 2] = arrays.m
    du = dv / (2.0 * eta_s)[:, None] - u * (deta / eta_s)[:, None]
    du[~live] = 0.0
    dtheta = 2.0 * np.multiply.outer(times, deta)
    c = np.cos(theta)[..., None]
    s = np.sin(theta)[..., None]
    dc = -s * dtheta[..., None]
    ds = c * dtheta[..., None]
    dudotp = du @ p0
    drp = (
        dc * (p0 - udotp[:, None] * u)
        + (1.0 - c) * (dudotp[:, None] * u + udotp[:, None] * du)
        + ds * ucrossp
        + s * np.cross(du, p0)
    )
    return dp + np.einsum("k,tkj->tj", weights, drp)


def bloch_derivative(
    spec: ModelSpec,
    classes,
    t,
    sel: ParamSelector,
    correlated: bool,
    method: str = "finite_difference",
) -> np.ndarray:
    """d p(t) / dx at x = ``sel.value``; shape (len(t), 3) for array ``t``."""
    arrays = _arrays(spec, classes)
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if method == "finite_difference":
        out = _fd_derivative(spec, arrays, times, sel, correlated)
    elif method == "analytic":
        out = _analytic_derivative(spec, arrays, times, sel, correlated)
    else:
        raise ValueError(f"derivative method: must be one of {DERIVATIVE_METHODS}, got {method!r}")
    return out[0] if scalar else out


def qfi_bloch_identity(p, dp):
    """F = |dp|^2 + (p.dp)^2 / (1 - |p|^2); pure branch |dp|^2 for |p| > 1 - 1e-9."""
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)
    norm2 = np.sum(p * p, axis=-1)
    grad2 = np.sum(dp * dp, axis=-1)
    proj = np.sum(p * dp, axis=-1)
    mixed = np.sqrt(norm2) <= 1.0 - PURE_BRANCH
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(mixed, grad2 + proj**2 / np.where(mixed, 1.0 - norm2, 1.0), grad2)
    return float(f) if np.ndim(f) == 0 else f


def closed_form_terms(p, dp):
    """Three-term closed form evaluated row-wise.

    Returns an array that is NaN where the transverse component collapsed or
    where e^{2 Gamma} - f <= 1e-12 (nearly pure state).
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    dp = np.atleast_2d(np.asarray(dp, dtype=float))
    px, py, pz = p.T
    dpx, dpy, dpz = dp.T
    transverse = px**2 + py**2
    ok = transverse >= COHERENCE_FLOOR
    tr = np.where(ok, transverse, 1.0)
    e2g = 1.0 / tr  # e^{2 Gamma}
    dgamma = -(px * dpx + py * dpy) / tr
    domega = (px * dpy - py * dpx) / tr
    f = 1.0 + pz**2 * e2g
    gap = e2g - f
    ok &= gap > SINGULAR_THRESHOLD
    gap = np.where(ok, gap, 1.0)
    value = (
        (dgamma - pz * dpz * e2g) ** 2 / (f * gap)
        + (dpz + pz * dgamma) ** 2 / f
        + domega**2 / e2g
    )
    return np.where(ok, value, np.nan)


def printed_closed_form_terms(p, dp):
    """The closed form with the second term as (e^{2G} (dpz - pz dG)^2 / f).

    Kept only to document that this variant disagrees with the Bloch identity.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    dp = np.atleast_2d(np.asarray(dp, dtype=float))
    px, py, pz = p.T
    dpx, dpy, dpz = dp.T
    tr = px**2 + py**2
    e2g = 1.0 / tr
    dgamma = -(px * dpx + py * dpy) / tr
    domega = (px * dpy - py * dpx) / tr
    f = 1.0 + pz**2 * e2g
    return (
        (dgamma - pz * dpz * e2g) ** 2 / (f * (e2g - f))
        + e2g * (dpz - pz * dgamma) ** 2 / f
        + domega**2 / e2g
    )


def _clamp(value):
    if np.any(value < -NEGATIVE_SLACK):
        raise ArithmeticError(f"negative quantum Fisher information {np.min(value):.3g}")
    return np.maximum(value, 0.0)


def qfi_sld(rho, drho) -> float:
    """Spectral QFI from a qubit density matrix and its parameter derivative.

    ``rho`` may be a 2x2 matrix or a ``ReducedDensity``.  Eigenvalues below
    1e-12 are dropped from the diagonal sum; overlaps <e_m|d e_n> come from
    <e_m|drho|e_n> / (lambda_n - lambda_m).
    """
    if hasattr(rho, "eigenvectors"):
        dec = rho
    else:
        rho = np.asarray(rho, dtype=complex)
        p = np.array([2.0 * rho[0, 1].real, -2.0 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])
        dec = reduced_density(p)
    lam = dec.eigenvalues
    vecs = dec.eigenvectors
    drho = np.asarray(drho, dtype=complex)
    if lam[0] == lam[1]:
        # Degenerate spectrum: the eigenbasis that is continuous in x diagonalizes drho.
        vecs = np.linalg.eigh(drho)[1]
    elements = vecs.conj().T @ drho @ vecs
    total = 0.0
    for n in range(2):
        if lam[n] >= SUPPORT_CUTOFF:
            total += elements[n, n].real ** 2 / lam[n]
    for n in range(2):
        for m in range(2):
            if n == m or lam[n] + lam[m] <= 0:
                continue
            gap = lam[n] - lam[m]
            if gap == 0.0:
                continue
            overlap2 = abs(elements[m, n]) ** 2 / gap**2
            total += 2.0 * gap**2 / (lam[n] + lam[m]) * overlap2
    return float(_clamp(np.array(total)))


def _drho(dp):
    dpx, dpy, dpz = dp
    return 0.5 * np.array([[dpz, dpx - 1j * dpy], [dpx + 1j * dpy, -dpz]])


def qfi_from_bloch(p, dp, method: str = "closed"):
    """Row-wise QFI from Bloch vectors and their derivatives.

    ``closed`` falls back to the Bloch identity where the closed form is
    singular; rows with collapsed transverse coherence are NaN for every
    method, matching the grid-exclusion rule used by the optimizer.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    dp = np.atleast_2d(np.asarray(dp, dtype=float))
    collapsed = p[:, 0] ** 2 + p[:, 1] ** 2 < COHERENCE_FLOOR
    bloch = qfi_bloch_identity(p, dp)
    bloch = np.atleast_1d(bloch)
    if method == "bloch":
        out = bloch
    elif method == "closed":
        closed = closed_form_terms(p, dp)
        out = np.where(np.isnan(closed), bloch, closed)
    elif method == "sld":
        out = np.array([qfi_sld(reduced_density(pi), _drho(di)) for pi, di in zip(p, dp)])
    else:
        raise ValueError(f"qfi method: must be closed, bloch or sld, got {method!r}")
    out = np.where(collapsed, np.nan, out)
    finite = np.isfinite(out)
    out[finite] = _clamp(out[finite])
    return out


def qfi_curve(
    spec: ModelSpec,
    sel: ParamSelector,
    times,
    correlated: bool,
    classes=None,
    method: str = "closed",
    derivative: str = "finite_difference",
) -> np.ndarray:
    """F_q(t) on an array of times for parameter ``sel``; NaN where undefined."""
    arrays = _arrays(spec, classes)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    point = sel.apply(spec)
    p = bloch_vectors(point, arrays, times, correlated)
    dp = bloch_derivative(point, arrays, times, sel, correlated, derivative)
    return qfi_from_bloch(p, dp, method)


def qfi_closed_form(
    spec: ModelSpec,
    t: float,
    sel: ParamSelector,
    correlated: bool,
    classes=None,
    derivative: str = "finite_difference",
) -> float:
    """Closed-form F_q at one time; raises where the expression is singular."""
    arrays = _arrays(spec, classes)
    point = sel.apply(spec)
    p = bloch_vectors(point, arrays, [t], correlated)
    if p[0, 0] ** 2 + p[0, 1] ** 2 < COHERENCE_FLOOR:
        raise CoherenceCollapseError(f"t = {t}: transverse coherence collapsed")
    dp = bloch_derivative(point, arrays, [t], sel, correlated, derivative)
    value = closed_form_terms(p, dp)[0]
    if np.isnan(value):
        raise ClosedFormSingularityError(
            f"t = {t}: e^(2 Gamma) - f <= {SINGULAR_THRESHOLD}, probe state nearly pure"
        )
    return float(_clamp(np.array(value)))


def qfi_point(
    spec: ModelSpec,
    t: float,
    sel: ParamSelector,
    correlated: bool,
    classes=None,
    derivative: str = "finite_difference",
) -> QfiPoint:
    """All three QFI routes at one (t, x) from a shared Bloch derivative."""
    arrays = _arrays(spec, classes)
    point = sel.apply(spec)
    p = bloch_vectors(point, arrays, [t], correlated)
    dp = bloch_derivative(point, arrays, [t], sel, correlated, derivative)
    closed = closed_form_terms(p, dp)[0]
    return QfiPoint(
        t=float(t),
        fq_closed=float(closed),
        fq_bloch=float(qfi_bloch_identity(p[0], dp[0])),
        fq_sld=qfi_sld(reduced_density(p[0]), _drho(dp[0])),
        derivative_method=derivative,
    )
