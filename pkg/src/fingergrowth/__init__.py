"""Growth-aware fingerprint analysis: isotropic rescaling of juvenile
minutiae templates via stature growth charts, shape/size statistics, a
minutiae matcher and verification/identification evaluation."""

__version__ = "0.1.0"

from .core_types import (CheckoutRecord, Dataset, FingerId, ImprintKind, Minutia,
                         MinutiaKind, Person, Sex, Template, load_dataset,
                         load_template, save_dataset, save_template)
from .errors import (DegenerateScoresError, DegenerateVarianceError,
                     FingergrowthError, NumericalError, ParseError, ValidationError)
from .geometry import RigidTransform, barycenter, rigid_align, smsd, spread
from .growth import (GrowthChart, ScaleFactor, builtin_chart, factor_set,
                     load_chart, median_stature, rescale_template, scale_factor)
from .matcher import MatchParams, MatchScore, best_over_factors, match_score
from .mixed_model import MixedFit, build_observations, fit_ml
from .shape import GpaMode, GpaResult, gpa, isotropy_report, variance_explained_by_size
from .synth import GalleryEntry, SynthConfig, distractor_gallery, generate

__all__ = [name for name in dir() if not name.startswith("_")]
