"""Object classification with wavelet sub-band DBN ensembles.

Images are split into 16 sub-bands by a full two-level 2D DWT, one small deep
belief network is trained per sub-band, and the networks vote with weights
equal to their training accuracy.
"""
from .dbn import Dbn, DbnTrainConfig, build_dbn
from .ensemble import EnsembleModel, Preprocessing, predict_ensemble, train_ensemble
from .errors import DataFormatError, ModelFormatError, NumericalError, ValidationError
from .rbm import Rbm, RbmTrainConfig

__version__ = "0.1.0"

__all__ = [
    "Dbn", "DbnTrainConfig", "build_dbn",
    "EnsembleModel", "Preprocessing", "predict_ensemble", "train_ensemble",
    "DataFormatError", "ModelFormatError", "NumericalError", "ValidationError",
    "Rbm", "RbmTrainConfig",
]
