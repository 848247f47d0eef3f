"""Concavity tests for distribution functions on the unit interval.

The test statistic is the scaled L^p distance between the empirical CDF and
its least concave majorant; critical values come from simulating the limit
law under the uniform distribution, which stochastically dominates the limit
under every other concave CDF.
"""

from .limits import (
    COUPLING_TOL,
    DEFAULT_GRID,
    DEFAULT_REPLICATIONS,
    DEFAULT_SEED,
    CouplingIdentity,
    CriticalValueTable,
    DominanceCheck,
    QuantileEstimate,
    SampledPath,
    SimConfig,
    build_critical_table,
    concavity_gap,
    estimate_quantiles,
    gap_norm,
    limit_draw_derivative,
    limit_draw_general,
    limit_draw_uniform,
    p_key,
    parse_p,
    sample_wiener,
    to_bridge,
    uniform_grid,
    verify_dominance_coupling,
    verify_rescaling_identity,
)
from .models import (
    ConcaveCdf,
    IntervalStructure,
    PiecewiseAffineCdf,
    PowerCdf,
    UniformCdf,
    coupling_lengths,
    evaluate,
    extract_intervals,
    inverse_cdf_sample,
    pack_intervals,
    pit_transform,
    quantile,
    spec_from_dict,
    spec_to_dict,
    x_bar,
)
from .pwl import (
    MAJORIZATION_TOL,
    DiffSegments,
    GeometryError,
    PiecewiseLinear,
    StepCdf,
    build_ecdf,
    diff_segments,
    gap_pow_integral,
    gap_sup,
    lcm_gap_on_grid,
    lcm_of_path,
    lcm_of_step,
    lcm_values_on_grid,
    lp_norm,
)
from .stats import StatisticResult, empirical_stat, exact_gap_pow_integral, lp_stat, weighted_stat
from .streams import Stream, generator, seed_sequence, substream

__version__ = "0.1.0"
