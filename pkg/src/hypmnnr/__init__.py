"""Mark-aware cooperative pairing of Poisson point patterns via hyperbolic nearest neighbors."""

__version__ = "0.1.0"

from .analytics import (ExpectationSpec, PathlossModel, expected_interference,
                        expected_interference_pairs, expected_interference_pairs_general,
                        expected_interference_singles, pair_fraction, pair_fraction_estimate,
                        pair_probability, pathloss_tail_integral)
from .errors import (DegeneratePairError, HypMNNRError, InvalidArgumentError, NonConvergenceError,
                     UnsupportedOperationError)
from .hypgeom import MarkedAtom, euclidean_ball, hyperbolic_distance, lens_geometry
from .marks import (BetaMarks, CustomControl, DegenerateMarks, EmptyControl, FullControl, MaxRatio,
                    MinProduct, UniformMarks, beta_from_mean_var, parse_control_set, parse_mark_model)
from .mnnr import ClusterPartition, mnnr_partition, nearest_neighbor, nearest_neighbors
from .numerics import QuadratureSpec, VolumeEstimate, volume_F_mc, volume_F_paper, volume_F_slice
from .pointprocess import MarkedPattern, PlanarMetric, Window, read_pattern, sample_ppp, write_pattern
from .simharness import (EstimateSummary, ExperimentConfig, run_interference, run_interference_sweep,
                         run_pair_fraction, summarize)
