"""Localized waves, coverings and the convex-integration step."""

from .profiles import CubeSpec, SawtoothProfile, build_sawtooth, buildSawtooth
from .waves import (CrossWave, FluidPotential, LocalizedWave, PlaneWave, WaveSample,
                    fluid_matrix, fluid_potential, fluidPotential, plateau_fractions,
                    relaxed_residual, synthesize_laminate, synthesize_wave, synthesizeLaminate,
                    synthesizeWave)
from .covering import (Box, FlattenedField, constant_field, cover_domain, coverDomain,
                       flatten_clebsch, flattenClebsch)
from .improve import (ImprovedField, ImproveReport, certify_state, improve_step, improveStep,
                      weak_proxy)
