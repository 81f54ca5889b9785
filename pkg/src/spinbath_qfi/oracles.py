"""Brute-force reference implementations for cross-checking the main path.

Nothing here reuses the class aggregation, the closed-form correlation
factor, the rotation-matrix propagators or the QFI formulas of the main
modules: every configuration is enumerated and every probe operator is an
explicit 2x2 (or full Hilbert-space) matrix.  Slow by design.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import expm

from .model import ModelSpec

MAX_SPINS = 20
MAX_FULL_HILBERT_SPINS = 8

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def _ket_from_bloch(p):
    theta = np.arctan2(np.hypot(p[0], p[1]), p[2])
    phi = np.arctan2(p[1], p[0])
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def _bloch_from_rho(rho):
    return np.real([np.trace(rho @ SX), np.trace(rho @ SY), np.trace(rho @ SZ)])


@dataclass(frozen=True)
class BruteForceState:
    """Every bath configuration with its sector energies."""

    spins: np.ndarray  # (2^N, N) entries +-1, spin i up <-> n_i = 0
    omega_n: np.ndarray
    alpha_n: np.ndarray
    e_tilde_n: np.ndarray

    @classmethod
    def build(cls, spec: ModelSpec) -> "BruteForceState":
        n = spec.n_spins
        if n > MAX_SPINS:
            raise ValueError(f"n_spins: brute force limited to {MAX_SPINS}, got {n}")
        occupations = np.array(list(itertools.product((0, 1), repeat=n)), dtype=int)
        spins = (-1.0) ** occupations
        omegas = np.broadcast_to(np.asarray(spec.omega, dtype=float), (n,))
        n_bonds = n if spec.chain_boundary == "periodic" else n - 1
        chis = np.broadcast_to(np.asarray(spec.chi, dtype=float), (n_bonds,))
        alpha = np.zeros(len(spins))
        for i in range(n_bonds):
            alpha += chis[i] * spins[:, i] * spins[:, (i + 1) % n]
        return cls(
            spins=spins,
            omega_n=spins @ omegas,
            alpha_n=alpha,
            e_tilde_n=spec.g * spins.sum(axis=1),
        )


def gibbs_expectation(eps_tilde, delta, preparation, beta):
    """<psi| exp(-beta H) |psi> for H = eps_tilde/2 sz + delta/2 sx via eigh.

    ``eps_tilde`` may be an array, giving one value per entry.
    """
    eps = np.atleast_1d(np.asarray(eps_tilde, dtype=float))
    h = 0.5 * eps[:, None, None] * SZ + 0.5 * delta * SX
    vals, vecs = np.linalg.eigh(h)
    psi = _ket_from_bloch(np.asarray(preparation, dtype=float))
    amps = np.einsum("kij,i->kj", vecs.conj(), psi)
    out = np.sum(np.abs(amps) ** 2 * np.exp(-beta * vals), axis=1)
    return float(out[0]) if np.ndim(eps_tilde) == 0 else out


def a_factor_oracle(q, preparation, beta) -> float:
    """Correlation factor of one class (anything with ``eps_tilde``, ``delta``)."""
    return gibbs_expectation(q.eps_tilde, q.delta, preparation, beta)


def brute_force_bloch(spec: ModelSpec, t: float, correlated: bool) -> np.ndarray:
    """Probe Bloch vector from an explicit sum over all 2^N configurations.

    Each configuration gets its own 2x2 unitary cos(eta t) - i sin(eta t) H / eta
    and its own Gibbs weight; the configurations are batched, never grouped.
    """
    state = BruteForceState.build(spec)
    beta = spec.beta
    psi = _ket_from_bloch(np.asarray(spec.preparation, dtype=float))
    rho0 = np.outer(psi, psi.conj())

    eps = spec.epsilon + state.e_tilde_n
    log_w = -beta * (0.5 * state.omega_n + state.alpha_n)
    if correlated:
        log_w = log_w + np.log(gibbs_expectation(eps, spec.delta, spec.preparation, beta))
    w = np.exp(log_w - log_w.max())
    w /= w.sum()

    eta = 0.5 * np.sqrt(eps**2 + spec.delta**2)
    h = 0.5 * eps[:, None, None] * SZ + 0.5 * spec.delta * SX
    safe = np.where(eta > 0, eta, 1.0)
    sinc = np.where(eta > 0, np.sin(eta * t) / safe, t)
    u = np.cos(eta * t)[:, None, None] * I2 - 1j * sinc[:, None, None] * h
    rho = np.einsum("k,kij,jl,kml->im", w, u, rho0, u.conj())
    return _bloch_from_rho(rho)


def _site_op(single, site, n_total):
    return reduce(np.kron, [single if k == site else I2 for k in range(n_total)])


def full_hamiltonian_bloch(spec: ModelSpec, t: float, correlated: bool) -> np.ndarray:
    """Probe Bloch vector from the full probe + bath Hilbert space.

    The correlated preparation projects exp(-beta H) onto |psi>; the
    uncorrelated one uses |psi><psi| x exp(-beta H_E).  Limited to 8 bath
    spins (dimension 512).
    """
    n = spec.n_spins
    if n > MAX_FULL_HILBERT_SPINS:
        raise ValueError(f"n_spins: full Hilbert space limited to {MAX_FULL_HILBERT_SPINS}")
    dim = n + 1
    omegas = np.broadcast_to(np.asarray(spec.omega, dtype=float), (n,))
    n_bonds = n if spec.chain_boundary == "periodic" else n - 1
    chis = np.broadcast_to(np.asarray(spec.chi, dtype=float), (n_bonds,))

    h_s = 0.5 * spec.epsilon * _site_op(SZ, 0, dim) + 0.5 * spec.delta * _site_op(SX, 0, dim)
    h_e = sum(0.5 * omegas[i] * _site_op(SZ, i + 1, dim) for i in range(n))
    for i in range(n_bonds):
        h_e = h_e + chis[i] * _site_op(SZ, i + 1, dim) @ _site_op(SZ, (i + 1) % n + 1, dim)
    total_z = sum(_site_op(SZ, i + 1, dim) for i in range(n))
    h_se = 0.5 * spec.g * _site_op(SZ, 0, dim) @ total_z
    h = h_s + h_e + h_se

    psi = _ket_from_bloch(np.asarray(spec.preparation, dtype=float))
    projector = np.kron(np.outer(psi, psi.conj()), np.eye(2**n))
    if correlated:
        gibbs = expm(-spec.beta * h)
        rho = projector @ gibbs @ projector
    else:
        rho = projector @ expm(-spec.beta * h_e) @ projector
    rho = rho / np.trace(rho)
    u = expm(-1j * h * t)
    rho_t = u @ rho @ u.conj().T
    reduced = rho_t.reshape(2, 2**n, 2, 2**n).trace(axis1=1, axis2=3)
    return _bloch_from_rho(reduced)


def _rho_from_bloch(p):
    return 0.5 * (I2 + p[0] * SX + p[1] * SY + p[2] * SZ)


def _aligned_eigh(rho, reference=None):
    vals, vecs = np.linalg.eigh(rho)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    if reference is not None:
        for k in range(2):
            overlap = np.vdot(reference[:, k], vecs[:, k])
            vecs[:, k] *= np.exp(-1j * np.angle(overlap))
    return vals, vecs


def qfi_finite_difference_oracle(spec: ModelSpec, t: float, sel, correlated: bool) -> float:
    """Spectral QFI with eigenvalues and eigenvectors differentiated numerically.

    ``sel`` is anything with ``which`` ("temperature" or "coupling") and
    ``value``.  rho(x) comes from ``brute_force_bloch``; eigenvectors at
    x +- h are phase-aligned to those at x before differencing.
    """
    which, value = sel.which, float(sel.value)
    if which not in ("temperature", "coupling"):
        raise ValueError(f"parameter: {which!r}")
    h = max(1e-4 * abs(value), 1e-6)
    if which == "temperature" and value - h <= 0:
        raise ValueError("step collision: temperature - h <= 0")

    def rho_at(x):
        field_name = "temperature" if which == "temperature" else "g"
        point = dataclasses.replace(spec, **{field_name: x})
        return _rho_from_bloch(brute_force_bloch(point, t, correlated))

    lam, vecs = _aligned_eigh(rho_at(value))

    def central(step):
        lam_p, vecs_p = _aligned_eigh(rho_at(value + step), vecs)
        lam_m, vecs_m = _aligned_eigh(rho_at(value - step), vecs)
        return (lam_p - lam_m) / (2 * step), (vecs_p - vecs_m) / (2 * step)

    (dl_h, dv_h), (dl_half, dv_half) = central(h), central(h / 2)
    dlam = (4 * dl_half - dl_h) / 3
    dvecs = (4 * dv_half - dv_h) / 3

    total = 0.0
    for n in range(2):
        if lam[n] > 1e-12:
            total += dlam[n] ** 2 / lam[n]
    for n in range(2):
        for m in range(2):
            if n != m and lam[n] + lam[m] > 0:
                overlap = np.vdot(vecs[:, m], dvecs[:, n])
                total += 2 * (lam[n] - lam[m]) ** 2 / (lam[n] + lam[m]) * abs(overlap) ** 2
    return float(total)
