"""Deformations of holomorphic pairs on finite spectral models.

Truncated power series, spectral models of the Dolbeault complexes of
``End(E)``, ``T_X`` and the Atiyah extension, the coupled differential graded
Lie algebra, finite Hodge theory, the Kuranishi solver, the long exact
sequence in cohomology and the first-order operator picture.
"""

from .appendix import D1Element, bracket_d1, intertwiner_check, phi_inverse, phi_iso
from .dgla import (AEForm, AESeriesForm, bracket_ae, dbar_ae, dbar_t_square_residual,
                   mc_residual, validate_dgla)
from .errors import (BandOverflowError, ConfigError, DegreeOverflowError,
                     IncompatibleBasesError, ModelError, NotFirstOrderDeformation, PairdefError,
                     ParseError, ShapeError, UnsupportedError)
from .hodge import build_hodge, cohomology_dims, hodge_apply, hodge_report
from .kuranishi import (completeness_check, first_order_class, mc_check, obstruction_map,
                        solve_kuranishi)
from .les import (exactness_check, les_maps, obstruction_diagram_check, trace_free_check,
                  unobstructed_criterion)
from .models import (BUILTINS, ModelConfig, SpectralModel, build_model, builtin, load_model,
                     save_model, validate_model)
from .reports import CheckLine, Report
from .series import TruncatedSeries, series_combine, series_mul

__all__ = [name for name in dir() if not name.startswith("_")]
