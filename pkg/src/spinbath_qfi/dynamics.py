"""Exact probe dynamics as a weighted mixture of per-sector rotations.

In bath sector n the probe evolves under exp(-i H_n t) with
H_n = eta_n (u_n . sigma), which acts on the Bloch vector as a rotation by
2 eta_n t about u_n = (delta, 0, eps_tilde_n) / (2 eta_n).  The global
phases from the bath energy drop out of the reduced state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import softmax

from .model import ClassArrays, ConfigClass, ClassQuantities, ModelSpec, class_log_weights

COHERENCE_FLOOR = 1e-300


class CoherenceCollapseError(ArithmeticError):
    """The transverse Bloch component vanished, so Gamma and Omega are undefined."""


@dataclass(frozen=True)
class ClassPropagator:
    """Rotation of the Bloch vector produced by one sector's unitary."""

    axis: np.ndarray
    angle: float
    matrix: np.ndarray


def rotation_matrix(axis, angle) -> np.ndarray:
    """Rodrigues rotation for a unit ``axis`` (right-handed, Bloch convention)."""
    ux, uy, uz = axis
    c, s = math.cos(angle), math.sin(angle)
    k = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    return c * np.eye(3) + (1.0 - c) * np.outer(axis, axis) + s * k


def _axis(eps_tilde, delta, eta):
    return np.array([delta, 0.0, eps_tilde]) / (2.0 * eta)


def class_propagator(q: ClassQuantities, t: float) -> ClassPropagator:
    if t < 0:
        raise ValueError(f"t: must be >= 0, got {t}")
    if q.eta == 0.0:
        axis = np.array([0.0, 0.0, 1.0])
        return ClassPropagator(axis=axis, angle=0.0, matrix=np.eye(3))
    axis = _axis(q.eps_tilde, q.delta, q.eta)
    angle = 2.0 * q.eta * t
    return ClassPropagator(axis=axis, angle=angle, matrix=rotation_matrix(axis, angle))


@dataclass(frozen=True)
class BlochState:
    """Probe Bloch vector at time ``t`` with its dephasing exponent and phase.

    ``gamma`` and ``omega_phase`` are NaN when the transverse component has
    collapsed below ``COHERENCE_FLOOR``.
    """

    t: float
    p: np.ndarray
    gamma: float
    omega_phase: float

    @classmethod
    def from_vector(cls, t, p) -> "BlochState":
        p = np.asarray(p, dtype=float)
        try:
            gamma, phase = gamma_and_phase(p)
        except CoherenceCollapseError:
            gamma, phase = math.nan, math.nan
        return cls(t=float(t), p=p, gamma=gamma, omega_phase=phase)


def gamma_and_phase(p) -> tuple[float, float]:
    """Return (Gamma, Omega) with Gamma = -ln(px^2 + py^2)/2, Omega = atan2(py, px)."""
    px, py = float(p[0]), float(p[1])
    transverse = px * px + py * py
    if transverse < COHERENCE_FLOOR:
        raise CoherenceCollapseError(f"px^2 + py^2 = {transverse:.3g}: Gamma undefined")
    return -0.5 * math.log(transverse), math.atan2(py, px)


def _rotate_preparation(eps_tilde, delta, times, p0):
    """R_k(t) p0 for every class k and time t; shape (len(times), K, 3).

    Also returns the pieces reused by the analytic derivative.
    """
    eta = 0.5 * np.hypot(eps_tilde, delta)
    safe_eta = np.where(eta > 0, eta, 1.0)
    u = np.stack([np.full_like(eps_tilde, delta), np.zeros_like(eps_tilde), eps_tilde], axis=-1)
    u = u / (2.0 * safe_eta)[:, None]
    u[eta == 0] = (0.0, 0.0, 1.0)
    theta = 2.0 * np.multiply.outer(times, eta)  # (T, K)
    c = np.cos(theta)[..., None]
    s = np.sin(theta)[..., None]
    udotp = u @ p0  # (K,)
    ucrossp = np.cross(u, p0)  # (K, 3)
    rp = c * p0 + (1.0 - c) * (udotp[:, None] * u) + s * ucrossp
    return rp, (eta, u, theta, udotp, ucrossp)


def normalized_weights(arrays: ClassArrays, spec: ModelSpec, correlated: bool) -> np.ndarray:
    """Class weights multiplicity * c_n [* A_n] / Z, normalized in log space."""
    return softmax(class_log_weights(arrays, spec, correlated))


def bloch_vectors(
    spec: ModelSpec,
    classes: Sequence[ConfigClass] | ClassArrays,
    times,
    correlated: bool,
) -> np.ndarray:
    """Bloch vectors p(t) for an array of times; returns shape (len(times), 3)."""
    arrays = classes if isinstance(classes, ClassArrays) else ClassArrays.from_classes(classes)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("t: must be >= 0")
    weights = normalized_weights(arrays, spec, correlated)
    eps_tilde = spec.epsilon + spec.g * arrays.m
    p0 = np.asarray(spec.preparation, dtype=float)
    rp, _ = _rotate_preparation(eps_tilde, spec.delta, times, p0)
    # Accumulating displacements from p0 keeps p(0) = p0 exactly even though
    # the normalized weights only sum to 1 up to rounding.
    return p0 + np.einsum("k,tkj->tj", weights, rp - p0)


def bloch_at(spec: ModelSpec, classes, t: float, correlated: bool) -> BlochState:
    p = bloch_vectors(spec, classes, [t], correlated)[0]
    return BlochState.from_vector(t, p)


def transverse_quantities(p: np.ndarray):
    """Vectorized (Gamma, Omega) over rows of ``p``; NaN where coherence collapsed."""
    p = np.atleast_2d(p)
    transverse = p[:, 0] ** 2 + p[:, 1] ** 2
    ok = transverse >= COHERENCE_FLOOR
    gamma = np.full(len(p), np.nan)
    gamma[ok] = -0.5 * np.log(transverse[ok])
    phase = np.where(ok, np.arctan2(p[:, 1], p[:, 0]), np.nan)
    return gamma, phase


_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class ReducedDensity:
    """Probe density matrix in the (|up>, |down>) basis with its eigenpairs.

    ``eigenvalues`` are (1 + |p|)/2, (1 - |p|)/2 and ``eigenvectors[:, i]`` is
    the matching eigenvector.
    """

    rho: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def density_matrix(p) -> np.ndarray:
    """0.5 (I + p . sigma), with the lower diagonal entry set so the trace is 1 exactly."""
    px, py, pz = p
    upper = 0.5 * (1.0 + pz)
    coherence = 0.5 * (px - 1j * py)
    return np.array([[upper, coherence], [np.conj(coherence), 1.0 - upper]])


def reduced_density(b: BlochState | np.ndarray) -> ReducedDensity:
    """Density matrix with analytic eigenpairs.

    The eigenvector for (1 + |p|)/2 is
    e^{-i Omega} sqrt((F + pz)/2F) |up> + sqrt((F - pz)/2F) |down>, the state
    pointing along p up to a global phase; the one for (1 - |p|)/2 is
    -e^{-i Omega} sqrt((F - pz)/2F) |up> + sqrt((F + pz)/2F) |down>.  At p = 0
    the spectrum is degenerate and the computational basis is returned.
    """
    p = np.asarray(b.p if isinstance(b, BlochState) else b, dtype=float)
    rho = density_matrix(p)
    norm = float(np.linalg.norm(p))
    lam = np.array([0.5 * (1.0 + norm), 0.5 * (1.0 - norm)])
    if norm == 0.0:
        return ReducedDensity(rho=rho, eigenvalues=lam, eigenvectors=np.eye(2, dtype=complex))
    pz = p[2]
    phase = np.exp(1j * math.atan2(p[1], p[0]))
    cos_half = math.sqrt(max(norm + pz, 0.0) / (2.0 * norm))
    sin_half = math.sqrt(max(norm - pz, 0.0) / (2.0 * norm))
    plus = np.array([np.conj(phase) * cos_half, sin_half])
    minus = np.array([-np.conj(phase) * sin_half, cos_half])
    return ReducedDensity(rho=rho, eigenvalues=lam, eigenvectors=np.column_stack([plus, minus]))
