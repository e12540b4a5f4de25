"""Credit scoring with Gaussian-mixture clusters labeled by training outcomes."""

from .baseline import LogisticModel, fit_logistic, predict_logistic, predict_logistic_label
from .classifier import (CsgmModel, TrainingReport, assign_cluster, dependency_probabilities,
                         fit_csgm, label_clusters, posterior_good, predict, predict_hard)
from .dataset import (Column, DatasetConfig, EncodedDataset, Schema, SplitSpec, builtin_config,
                      drop_missing, encode_dummy, encode_integer, load_csv, load_encoded,
                      standardize_fit_apply, train_test_split)
from .errors import CsgmError, DataError, DegenerateComponentError, NumericalError
from .gmm import (EmConfig, FitReport, GmmParams, aic, bic, e_step, fit_em, log_gaussian_pdf,
                  m_step, param_count, select_components)
from .metrics import (ConfusionMatrix, RocCurve, accuracy, confusion_matrix, f1, precision, recall,
                      roc_curve, score_report)
from .resample import SmoteConfig, smote_balance

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
