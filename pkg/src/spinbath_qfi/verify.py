"""Oracle battery run by ``spinbath-qfi verify``.

Each check compares the fast class-aggregated path against the brute-force
references on a fixed-seed batch of random parameter points.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass

import numpy as np

from .dynamics import bloch_vectors, class_propagator
from .model import ModelSpec, compute_a_factor, compute_class_quantities, enumerate_classes
from .oracles import (
    a_factor_oracle,
    brute_force_bloch,
    full_hamiltonian_bloch,
    qfi_finite_difference_oracle,
)
from .qfi import ParamSelector, bloch_derivative, qfi_point


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float


def random_spec(rng, n_spins, **overrides) -> ModelSpec:
    params = dict(
        epsilon=float(rng.uniform(0.5, 3.0)),
        delta=float(rng.uniform(0.3, 2.0)),
        n_spins=n_spins,
        omega=float(rng.uniform(0.5, 1.5)),
        chi=float(rng.choice([0.0, rng.uniform(0.0, 0.5)])),
        g=float(rng.uniform(0.01, 1.5)),
        temperature=float(rng.uniform(0.2, 5.0)),
    )
    params.update(overrides)
    return ModelSpec(**params)


def _check(name, errors, tol):
    worst = float(np.max(errors)) if len(errors) else 0.0
    return CheckResult(name, bool(worst < tol), worst, tol)


def check_multiplicities(max_spins=10):
    errors = []
    for n, boundary in itertools.product(range(1, max_spins + 1), ("open", "periodic")):
        spec = ModelSpec(n_spins=n, chi=0.3, chain_boundary=boundary)
        found = {(c.m, c.a): c.multiplicity for c in enumerate_classes(spec)}
        spins = np.array(list(itertools.product((1, -1), repeat=n)))
        n_bonds = n if boundary == "periodic" else n - 1
        counts: dict = {}
        for s in spins:
            key = (int(s.sum()), int(sum(s[i] * s[(i + 1) % n] for i in range(n_bonds))))
            counts[key] = counts.get(key, 0) + 1
        errors.append(0.0 if found == counts else 1.0)
    return _check("class multiplicities == brute-force counts", errors, 0.5)


def check_bloch(rng, n_spins=8, points=20):
    errors = []
    for _ in range(points):
        spec = random_spec(rng, n_spins)
        t = float(rng.uniform(0.0, 10.0))
        classes = enumerate_classes(spec)
        for corr in (True, False):
            fast = bloch_vectors(spec, classes, [t], corr)[0]
            slow = brute_force_bloch(spec, t, corr)
            errors.append(np.max(np.abs(fast - slow)))
    return _check(f"class dynamics == 2^N sum (N={n_spins})", errors, 1e-12)


def check_full_hamiltonian(rng, n_spins=4, points=5):
    errors = []
    for _ in range(points):
        spec = random_spec(rng, n_spins)
        t = float(rng.uniform(0.0, 5.0))
        classes = enumerate_classes(spec)
        for corr in (True, False):
            fast = bloch_vectors(spec, classes, [t], corr)[0]
            errors.append(np.max(np.abs(fast - full_hamiltonian_bloch(spec, t, corr))))
    return _check(f"class dynamics == full Hilbert space (N={n_spins})", errors, 1e-10)


def check_a_factor(rng, points=100):
    errors = []
    for _ in range(points):
        spec = random_spec(rng, 1)
        prep = rng.normal(size=3)
        prep /= np.linalg.norm(prep)
        spec = dataclasses.replace(spec, preparation=tuple(prep), epsilon=float(rng.uniform(-4, 4)))
        q = compute_class_quantities(enumerate_classes(spec)[0], spec)
        beta = float(rng.uniform(0.0, 5.0))
        exact = a_factor_oracle(q, prep, beta)
        errors.append(abs(compute_a_factor(q, prep, beta) - exact) / exact)
    return _check("A_n closed form == <psi|exp(-beta H_n)|psi>", errors, 1e-12)


def check_propagators(rng, points=50):
    errors = []
    for _ in range(points):
        spec = random_spec(rng, 3)
        q = compute_class_quantities(enumerate_classes(spec)[0], spec)
        r = class_propagator(q, float(rng.uniform(0, 20))).matrix
        errors.append(np.max(np.abs(r.T @ r - np.eye(3))))
        errors.append(abs(np.linalg.det(r) - 1.0))
    return _check("propagators orthogonal with det 1", errors, 1e-13)


def check_qfi_routes(rng, n_spins=6, points=6):
    errors = []
    for _ in range(points):
        spec = random_spec(rng, n_spins)
        t = float(rng.uniform(0.5, 8.0))
        classes = enumerate_classes(spec)
        for which, corr in itertools.product(("temperature", "coupling"), (True, False)):
            sel = ParamSelector.of(spec, which)
            pt = qfi_point(spec, t, sel, corr, classes)
            if not np.isfinite(pt.fq_closed):
                continue
            oracle = qfi_finite_difference_oracle(spec, t, sel, corr)
            scale = max(pt.fq_bloch, 1e-300)
            errors += [
                abs(pt.fq_closed - pt.fq_bloch) / scale,
                abs(pt.fq_sld - pt.fq_bloch) / scale,
                abs(oracle - pt.fq_bloch) / scale,
            ]
    return _check("QFI closed form == Bloch identity == SLD == numeric oracle", errors, 1e-6)


def check_derivatives(rng, n_spins=6, points=20):
    errors = []
    for _ in range(points):
        spec = random_spec(rng, n_spins)
        t = float(rng.uniform(0.5, 8.0))
        classes = enumerate_classes(spec)
        for which, corr in itertools.product(("temperature", "coupling"), (True, False)):
            sel = ParamSelector.of(spec, which)
            fd = bloch_derivative(spec, classes, t, sel, corr, "finite_difference")
            an = bloch_derivative(spec, classes, t, sel, corr, "analytic")
            errors.append(np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-300))
    return _check("analytic derivatives == Richardson differences", errors, 1e-6)


def run_battery(seed: int = 20240601) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_multiplicities(),
        check_bloch(rng),
        check_full_hamiltonian(rng),
        check_a_factor(rng),
        check_propagators(rng),
        check_qfi_routes(rng),
        check_derivatives(rng),
    ]
