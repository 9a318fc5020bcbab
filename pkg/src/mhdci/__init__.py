"""Convex-integration toolkit for ideal MHD: phase space, wave cone, laminates, wave synthesis
and conserved quantities."""

from .errors import MhdciError, NotInRelaxedSet, SchemaError
from .laminates import HullParams, Laminate, decompose_full, goodify
from .phase_space import ConstraintParams, State15, State17, WaveVector

__version__ = "0.1.0"
