"""Exact dephasing dynamics and quantum Fisher information of a qubit probe in a spin bath."""

from .model import (
    ClassQuantities,
    ConfigClass,
    ModelSpec,
    compute_a_factor,
    compute_class_quantities,
    enumerate_classes,
    partition_functions,
)
from .dynamics import (
    BlochState,
    ClassPropagator,
    CoherenceCollapseError,
    bloch_at,
    bloch_vectors,
    class_propagator,
    gamma_and_phase,
    reduced_density,
)
from .qfi import (
    ClosedFormSingularityError,
    ParamSelector,
    QfiPoint,
    StepCollisionError,
    bloch_derivative,
    qfi_bloch_identity,
    qfi_closed_form,
    qfi_curve,
    qfi_point,
    qfi_sld,
)

__version__ = "0.1.0"
