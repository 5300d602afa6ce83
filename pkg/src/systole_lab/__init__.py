"""systole-lab: desk-scale machinery for short-loop certificates.

Singular conformal metrics on the 2-sphere, integral geometry over great
circles, the football orbifold and its figure-eight geodesics, ovalless
real hyperelliptic surfaces, winding-parity loop surgery, and an
end-to-end certifier for the relative pi/4 short-loop bound.
"""

from .averaging import (AveragingReport, FootballSearchResult,
                        ShortCircleResult, find_short_football_geodesic,
                        find_short_great_circle, fubini_check)
from .distance import DistanceGrid, estimate_distance
from .errors import SystoleLabError
from .factors import factor_from_expression, factor_from_grid
from .football import (FootballGeodesic, af_factor, af_pullback,
                       double_cover_map, figure_eight_geodesic,
                       football_factor)
from .metrics import (ConformalFactor, Curve, Singularity, SphereInvolution,
                      average_metric, check_admissible, chart_segment_length,
                      constant_factor, curve_energy, curve_length,
                      metric_area, metric_area_report, mobius_pullback_factor,
                      mobius_pushforward_factor)
from .sphere import (ChartCircle, GreatCircle, INF, MobiusMap, is_infinity,
                     mobius_apply, mobius_normalize, project,
                     round_metric_factor, sample_great_circles, unproject)
from .surfaces import (HyperellipticSurface, SheetState, SquareRootCover,
                       build_surface, continue_sqrt, lift_closes,
                       ramification_points, winding_numbers)
from .surgery import (IntersectionRecord, PolyLoop, WindingProfile,
                      classify_intersections, ensure_generic, exchange_arcs,
                      find_odd_loop, find_odd_loop_ex, polyloop_length,
                      remove_bad_subloop, surgery, winding_profile)
from .verifier import (PuCertificate, SystoleEstimate, relative_systole,
                       short_loop_for_point, symmetrize, verify_pu_rp2,
                       verify_relative_pu)

__version__ = "0.1.0"
