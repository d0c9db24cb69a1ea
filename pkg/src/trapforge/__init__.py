"""Planar RF ion-trap electrostatics, pseudopotential analysis and escalator design."""

from .errors import (ConfigError, DomainError, GeometryError, NumericalError, TrackingError,
                     TrapforgeError, ValidationError)
from .geometry import (ControlPointSet, EscalatorSpec, FiveWireSpec, PlanarElectrode,
                       Segmentation, TrapLayout, build_escalator, build_five_wire)
from .pseudo import DriveParams, IonSpecies, characterize, find_rf_null

__version__ = "0.1.0"
