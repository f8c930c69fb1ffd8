from .config import (
    CrossDeviceMethod,
    Engine,
    EngineConfig,
    Kernel,
    LocalizationEstimate,
    Metric,
    Transform,
)
from .gp import GaussianProcess, GPConditioningError, GPModel, gp_localize, gp_train, tune_gp_lengthscale
from .knn import cross_device_localize, knn_localize, knn_localize_batch
from .metrics import euclidean_distance, pearson_similarity, ratio_transform
from .svm import SVMModel, fit_svm, svm_localize, svm_train


def localize_all(rmap, queries, config: EngineConfig) -> list[LocalizationEstimate]:
    """Train the configured engine on `rmap` and localize every query."""
    if config.engine is Engine.KNN:
        return knn_localize_batch(rmap, queries, config)
    if config.metric is Metric.CORRELATION:
        raise ValueError("the correlation metric is only defined for the kNN engine")
    if config.engine is Engine.SVM:
        from .svm import svm_localize_map

        return svm_localize_map(svm_train(rmap, config), rmap, queries)
    from .gp import gp_localize_map

    return gp_localize_map(gp_train(rmap, config), rmap, queries)


__all__ = [
    "CrossDeviceMethod", "Engine", "EngineConfig", "Kernel", "LocalizationEstimate", "Metric", "Transform",
    "GaussianProcess", "GPConditioningError", "GPModel", "gp_localize", "gp_train", "tune_gp_lengthscale",
    "cross_device_localize", "knn_localize", "knn_localize_batch",
    "euclidean_distance", "pearson_similarity", "ratio_transform",
    "SVMModel", "fit_svm", "svm_localize", "svm_train", "localize_all",
]
