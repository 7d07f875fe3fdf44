"""Knot energies of O'Hara type: continuum, weighted, random and polygonal versions."""

from .curves import (Circle, ClosedCurve, FourierCurve, ParametricCurve, Polygon, PolygonCurve,
                     TabulatedCurve, arclength_reparametrize, curve_from_spec, make_circle,
                     make_ellipse, make_torus_knot, regular_polygon, unit_square)
from .energies import (EnergyParams, EnergyReport, integrand, ohara_energy, random_ohara_energy,
                       weighted_ohara_energy)
from .sampling import (CosineDensity, SampleSet, TabulatedDensity, UniformDensity,
                       quantile_transport_map, sample_iid)

__version__ = "0.1.0"
