"""Central-spin probe coupled to a finite Ising-type spin bath.

The bath Hamiltonian commutes with the probe-bath coupling, so every bath
configuration |n> labels an invariant sector in which the probe sees a
shifted two-level Hamiltonian.  Configurations that share magnetization
and nearest-neighbour alignment behave identically and are grouped into
degeneracy classes; all Gibbs weights are carried in log space.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

FULL_ENUMERATION_MAX_SPINS = 20

Real = Union[float, Sequence[float]]


def _as_tuple_or_float(value, name):
    try:
        if np.ndim(value) == 0:
            return float(value)
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ValueError(f"{name}: expected a number or a list of numbers, got {value!r}") from None


@dataclass(frozen=True)
class ModelSpec:
    """Full parameter point of the probe + bath model (hbar = k_B = 1).

    ``omega`` and ``chi`` may be scalars (uniform bath) or per-site /
    per-bond sequences.  Heterogeneous baths are handled by explicit
    enumeration and are limited to ``FULL_ENUMERATION_MAX_SPINS`` spins.
    """

    epsilon: float = 2.0
    delta: float = 1.0
    n_spins: int = 10
    omega: Real = 1.0
    chi: Real = 0.0
    g: float = 0.01
    temperature: float = 1.0
    preparation: tuple[float, float, float] = (1.0, 0.0, 0.0)
    chain_boundary: str = "open"

    def __post_init__(self):
        for name in ("epsilon", "delta", "g", "temperature"):
            value = getattr(self, name)
            if isinstance(value, bool) or not np.isscalar(value) or not np.isfinite(value):
                raise ValueError(f"{name}: must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.temperature <= 0:
            raise ValueError(f"temperature: must be > 0, got {self.temperature}")
        if isinstance(self.n_spins, bool) or int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ValueError(f"n_spins: must be a positive integer, got {self.n_spins!r}")
        object.__setattr__(self, "n_spins", int(self.n_spins))
        if self.chain_boundary not in ("open", "periodic"):
            raise ValueError(
                f"chain_boundary: must be 'open' or 'periodic', got {self.chain_boundary!r}"
            )

        omega = _as_tuple_or_float(self.omega, "omega")
        if isinstance(omega, tuple) and len(omega) != self.n_spins:
            raise ValueError(f"omega: expected {self.n_spins} site values, got {len(omega)}")
        chi = _as_tuple_or_float(self.chi, "chi")
        if isinstance(chi, tuple) and len(chi) != self.n_bonds:
            raise ValueError(f"chi: expected {self.n_bonds} bond values, got {len(chi)}")
        for name, value in (("omega", omega), ("chi", chi)):
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name}: values must be finite")
        if np.any(np.asarray(chi) < 0):
            raise ValueError("chi: must be >= 0")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "chi", chi)

        try:
            prep = np.asarray(self.preparation, dtype=float)
        except (TypeError, ValueError):
            raise ValueError(f"preparation: must be a real 3-vector, got {self.preparation!r}") from None
        if prep.shape != (3,) or not np.all(np.isfinite(prep)):
            raise ValueError("preparation: must be a real 3-vector")
        if abs(np.linalg.norm(prep) - 1.0) > 1e-12:
            raise ValueError(
                f"preparation: must be a unit vector, |p| = {np.linalg.norm(prep):.15g}"
            )
        object.__setattr__(self, "preparation", tuple(float(v) for v in prep))

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    @property
    def n_bonds(self) -> int:
        if self.chain_boundary == "periodic":
            return self.n_spins
        return self.n_spins - 1

    @property
    def is_uniform(self) -> bool:
        return _uniform_value(self.omega) is not None and _uniform_value(self.chi) is not None

    def site_omegas(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.omega, dtype=float), (self.n_spins,)).copy()

    def bond_chis(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.chi, dtype=float), (self.n_bonds,)).copy()


def _uniform_value(value):
    if isinstance(value, float):
        return value
    if len(value) == 0:
        return 0.0
    if all(v == value[0] for v in value):
        return value[0]
    return None


@dataclass(frozen=True)
class ConfigClass:
    """One degeneracy class of bath configurations.

    ``m`` is the magnetization sum_i (-1)^n_i and ``a`` the bond alignment
    sum (-1)^n_i (-1)^n_(i+1).  ``omega_n``, ``alpha_n`` and ``e_tilde_n``
    are the sector eigenvalues of sum_i omega_i sigma_z^i, of the bond term,
    and of g sum_i sigma_z^i at the spec the class was built for.
    """

    m: int
    a: int
    multiplicity: int
    omega_n: float
    alpha_n: float
    e_tilde_n: float
    log_multiplicity: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "log_multiplicity", _log_int(self.multiplicity))


def _log_int(n: int) -> float:
    if n <= 0:
        return -math.inf
    if n < 2**1000:
        return math.log(n)
    shift = n.bit_length() - 60
    return math.log(n >> shift) + shift * math.log(2.0)


@dataclass(frozen=True)
class ClassQuantities:
    """Per-class scalars derived from a ConfigClass at a given ModelSpec."""

    eps_tilde: float
    delta: float
    eta: float
    log_c: float
    log_a: float
    probe_energy: float  # <psi| H_n |psi>, H_n the shifted probe Hamiltonian

    @property
    def a_factor(self) -> float:
        return float(np.exp(self.log_a))


def _count_uniform(n_spins: int, periodic: bool, track_alignment: bool) -> dict:
    """Chain dynamic program over (m, a) with the boundary spins carried along."""
    # state key: (first spin, last spin, m, a) -> count
    states: dict = defaultdict(int)
    for s in (1, -1):
        states[(s, s, s, 0)] += 1
    for _ in range(n_spins - 1):
        nxt: dict = defaultdict(int)
        for (first, last, m, a), count in states.items():
            for s in (1, -1):
                bond = last * s if track_alignment else 0
                key = (first if periodic else 0, s, m + s, a + bond)
                nxt[key] += count
        states = nxt
    out: dict = defaultdict(int)
    for (first, last, m, a), count in states.items():
        if periodic and track_alignment:
            a += last * first
        out[(m, a)] += count
    return out


def _enumerate_uniform(spec: ModelSpec) -> list[ConfigClass]:
    omega = _uniform_value(spec.omega)
    chi = _uniform_value(spec.chi)
    track = chi != 0.0
    periodic = spec.chain_boundary == "periodic"
    counts = _count_uniform(spec.n_spins, periodic, track)
    classes = []
    for (m, a), count in sorted(counts.items(), key=lambda kv: (-kv[0][0], -kv[0][1])):
        classes.append(
            ConfigClass(
                m=m,
                a=a,
                multiplicity=count,
                omega_n=omega * m,
                alpha_n=chi * a,
                e_tilde_n=spec.g * m,
            )
        )
    return classes


def _enumerate_heterogeneous(spec: ModelSpec) -> list[ConfigClass]:
    n = spec.n_spins
    omegas = spec.site_omegas()
    chis = spec.bond_chis()
    spins = 1 - 2 * np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    right = np.roll(spins, -1, axis=1)[:, : spec.n_bonds]
    bonds = spins[:, : spec.n_bonds] * right
    m = spins.sum(axis=1)
    a = bonds.sum(axis=1)
    omega_n = spins @ omegas
    alpha_n = bonds @ chis
    grouped: dict = defaultdict(int)
    for key in zip(m.tolist(), a.tolist(), omega_n.tolist(), alpha_n.tolist()):
        grouped[key] += 1
    return [
        ConfigClass(m=k[0], a=k[1], multiplicity=c, omega_n=k[2], alpha_n=k[3], e_tilde_n=spec.g * k[0])
        for k, c in sorted(grouped.items(), key=lambda kv: (-kv[0][0], -kv[0][1], kv[0][2], kv[0][3]))
    ]


def enumerate_classes(spec: ModelSpec) -> list[ConfigClass]:
    """Collapse the 2^N bath configurations into weighted degeneracy classes.

    Uniform baths use a chain dynamic program in (magnetization, alignment);
    with ``chi == 0`` the alignment coordinate is dropped (``a = 0``).
    Heterogeneous site energies or bond couplings fall back to explicit
    enumeration, grouped by identical sector energies.
    """
    if spec.is_uniform:
        return _enumerate_uniform(spec)
    if spec.n_spins > FULL_ENUMERATION_MAX_SPINS:
        raise ValueError(
            f"n_spins: heterogeneous omega/chi needs full enumeration, "
            f"limited to {FULL_ENUMERATION_MAX_SPINS} spins (got {spec.n_spins})"
        )
    return _enumerate_heterogeneous(spec)


def probe_energy(eps_tilde, delta, preparation):
    """<psi| (eps_tilde/2 sz + delta/2 sx) |psi> for a Bloch vector ``preparation``."""
    return 0.5 * (eps_tilde * preparation[2] + delta * preparation[0])


def axis_overlaps(eps_tilde, delta, preparation):
    """(1 - n.p, 1 + n.p) for the class axis n and a unit preparation p.

    Evaluated as |n -+ p|^2 / 2 so neither factor suffers cancellation.
    """
    eps_tilde = np.asarray(eps_tilde, dtype=float)
    two_eta = np.hypot(eps_tilde, delta)
    safe = np.where(two_eta > 0, two_eta, 1.0)
    nx, nz = delta / safe, eps_tilde / safe
    px, py, pz = (float(v) for v in preparation)
    minus = 0.5 * ((nx - px) ** 2 + py**2 + (nz - pz) ** 2)
    plus = 0.5 * ((nx + px) ** 2 + py**2 + (nz + pz) ** 2)
    return minus, plus


def log_a_factor(eps_tilde, delta, preparation, beta):
    """log <psi| exp(-beta H_n) |psi> using H_n^2 = eta^2.

    With n the unit axis (delta, 0, eps_tilde) / (2 eta) and p the unit
    preparation vector, A_n = cosh(beta eta) - sinh(beta eta) n.p.  The
    factors 1 -+ n.p are taken as |n -+ p|^2 / 2, which avoids cancellation
    when p is nearly (anti)parallel to n, and exp(beta eta) is factored out
    so large beta * eta does not overflow.  Classes with eta = 0 get 0.
    """
    eps_tilde = np.asarray(eps_tilde, dtype=float)
    eta = 0.5 * np.hypot(eps_tilde, delta)
    if beta == 0:
        return np.zeros_like(eta)
    minus, plus = axis_overlaps(eps_tilde, delta, preparation)
    x = beta * eta
    with np.errstate(divide="ignore"):
        out = x - math.log(2.0) + np.logaddexp(np.log(minus), -2.0 * x + np.log(plus))
    return np.where(eta > 0, out, 0.0)


def compute_a_factor(q: ClassQuantities, preparation, beta: float) -> float:
    """Correlation factor A_n = <psi| exp(-beta H_n) |psi> > 0.

    Closed form cosh(beta eta) - sinh(beta eta) <psi|H_n|psi> / eta, valid
    because the shifted probe Hamiltonian squares to eta^2 times identity.
    """
    if q.eta == 0.0:
        return 1.0
    return float(np.exp(log_a_factor(q.eps_tilde, q.delta, preparation, beta)))


def compute_class_quantities(cls: ConfigClass, spec: ModelSpec) -> ClassQuantities:
    eps_tilde = spec.epsilon + spec.g * cls.m
    eta = 0.5 * math.hypot(eps_tilde, spec.delta)
    beta = spec.beta
    energy = probe_energy(eps_tilde, spec.delta, spec.preparation)
    log_a = float(log_a_factor(eps_tilde, spec.delta, spec.preparation, beta))
    return ClassQuantities(
        eps_tilde=eps_tilde,
        delta=spec.delta,
        eta=eta,
        log_c=-beta * (0.5 * cls.omega_n + cls.alpha_n),
        log_a=log_a,
        probe_energy=energy,
    )


@dataclass(frozen=True)
class ClassArrays:
    """Column view of a class list, convenient for vectorized evaluation."""

    m: np.ndarray
    log_mult: np.ndarray
    bath_energy: np.ndarray  # omega_n / 2 + alpha_n

    @classmethod
    def from_classes(cls, classes: Sequence[ConfigClass]) -> "ClassArrays":
        return cls(
            m=np.array([c.m for c in classes], dtype=float),
            log_mult=np.array([c.log_multiplicity for c in classes], dtype=float),
            bath_energy=np.array([0.5 * c.omega_n + c.alpha_n for c in classes], dtype=float),
        )


def class_log_weights(arrays: ClassArrays, spec: ModelSpec, correlated: bool, beta=None):
    """Unnormalized log weights log(multiplicity * c_n [* A_n]) per class."""
    beta = spec.beta if beta is None else beta
    logw = arrays.log_mult - beta * arrays.bath_energy
    if correlated:
        eps_tilde = spec.epsilon + spec.g * arrays.m
        logw = logw + log_a_factor(eps_tilde, spec.delta, spec.preparation, beta)
    return logw


def partition_functions(classes: Sequence[ConfigClass], spec: ModelSpec) -> tuple[float, float]:
    """Return (log Z_E, log Z_tilde) for the uncorrelated and correlated preparations."""
    arrays = ClassArrays.from_classes(classes)
    log_ze = logsumexp(class_log_weights(arrays, spec, correlated=False))
    log_zt = logsumexp(class_log_weights(arrays, spec, correlated=True))
    if not (np.isfinite(log_ze) and np.isfinite(log_zt)):
        raise FloatingPointError("partition function: every class weight vanished")
    return float(log_ze), float(log_zt)
