"""Linear response of 2-torus Anosov maps by splitting the perturbation."""

__version__ = "0.1.0"

from .errors import (ConfigError, ContractionViolation, DegenerateStart,  # noqa: E402
                     DerivativeUnavailable, InversionFailure, NodeBudgetExceeded,
                     NonHyperbolicSample, S3Error, WindowTooShort)
from .torus import (MapModel, Observable, OrbitSegment, TorusPoint,  # noqa: E402
                    VectorField, cat_map, evolve_orbit, perturbed_cat_map,
                    perturbed_map)
