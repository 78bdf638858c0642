# src/core/__init__.py
"""Core functionality for stretchlat"""

from src.core.count import (CountRequest, CountResult, LatticeSet, count, count_axis_subsets,
                            count_bruteforce)
from src.core.domain import (BodySpec, BoundaryPoint, Family, boundary_point_from_direction,
                             contains, gauge, graph_derivative)
from src.core.errors import (AnalysisError, CapacityError, ConfigParseError, ConfigurationError,
                             DegenerateDirectionError, FiniteTypeError, InputError,
                             NumericalEvaluationError, PartialResultError, StretchLatError)
from src.core.exponents import (ExponentReport, MultitypeReport, SamplingConfig, SectionCheck,
                                Strategy, exponent_report, multitype_at, nu_at,
                                section_multitype_check)
from src.core.measure import (SectionMeasures, StretchFactor, balanced_factor,
                              balanced_positive_floor, section_measure, section_measures, volume)
from src.core.stretchopt import (Mode, OptimizeConfig, OptimumReport, SearchStrategy,
                                 critical_values_2d, deviation_from_balanced, optimize)

__all__ = [
    'BodySpec', 'BoundaryPoint', 'Family', 'gauge', 'contains', 'boundary_point_from_direction',
    'graph_derivative',
    'StretchFactor', 'SectionMeasures', 'volume', 'section_measure', 'section_measures',
    'balanced_factor', 'balanced_positive_floor',
    'LatticeSet', 'CountRequest', 'CountResult', 'count', 'count_bruteforce', 'count_axis_subsets',
    'Strategy', 'MultitypeReport', 'ExponentReport', 'SamplingConfig', 'SectionCheck',
    'multitype_at', 'nu_at', 'exponent_report', 'section_multitype_check',
    'Mode', 'SearchStrategy', 'OptimizeConfig', 'OptimumReport', 'optimize', 'critical_values_2d',
    'deviation_from_balanced',
    'StretchLatError', 'InputError', 'DegenerateDirectionError', 'NumericalEvaluationError',
    'CapacityError', 'AnalysisError', 'FiniteTypeError', 'ConfigurationError', 'ConfigParseError',
    'PartialResultError',
]
