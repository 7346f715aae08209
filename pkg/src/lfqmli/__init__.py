"""No-reference light-field quality assessment from micro-lens and sub-aperture statistics."""

__version__ = "0.1.0"

from .entropy import EntropyPair, dct2, frequency_entropy, image_entropy, mli_global_entropy
from .evaluation import TrialReport, lcc, rmse, run_trials, srocc
from .features import (
    FEATURE_NAMES,
    FeatureConfig,
    FeatureVector,
    extract_feature_vector,
    ged_features,
    mean_skew,
    percentile_pool,
    spatial_quality_features,
    ulbp_features,
)
from .lightfield import (
    LightField,
    MicroLensImage,
    SubApertureImage,
    extract_mli,
    extract_sai,
    iter_mlis,
    load_light_field,
    load_sai_array,
    to_grayscale,
)
from .svr import Hyperparams, SvrModel, grid_search_cv, scale_apply, scale_fit, svr_predict, svr_train
from .texture import lbp_riu2_code, mli_range, ulbp_histogram
