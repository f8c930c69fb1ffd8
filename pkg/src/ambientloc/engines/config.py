from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, replace
from typing import Optional


class Engine(str, enum.Enum):
    KNN = "knn"
    SVM = "svm"
    GP = "gp"


class Metric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    CORRELATION = "correlation"


class Transform(str, enum.Enum):
    BASIC = "basic"
    RATIO = "ratio"


class Kernel(str, enum.Enum):
    LINEAR = "linear"
    RBF = "rbf"


class CrossDeviceMethod(str, enum.Enum):
    BASIC = "basic"
    RATIO = "ratio"
    CORRELATION = "correlation"


@dataclass(frozen=True)
class LocalizationEstimate:
    x: float
    y: float
    matched_grid_index: Optional[int] = None
    score: float = 0.0
    environment_id: Optional[str] = None


@dataclass(frozen=True)
class EngineConfig:
    engine: Engine = Engine.KNN
    k: int = 1
    metric: Metric = Metric.EUCLIDEAN
    fingerprint_transform: Transform = Transform.BASIC
    log_ratio: bool = False
    ratio_epsilon: float = 1e-6
    svm_c: float = 10.0
    svm_kernel: Kernel = Kernel.LINEAR
    svm_gamma: float = 1.0
    gp_lengthscale: float = 0.5
    gp_signal_variance: float = 1.0
    gp_noise_variance: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name, cls in (("engine", Engine), ("metric", Metric),
                          ("fingerprint_transform", Transform), ("svm_kernel", Kernel)):
            object.__setattr__(self, name, cls(getattr(self, name)))
        if self.k < 1:
            raise ValueError("k must be at least 1")
        for name in ("ratio_epsilon", "svm_c", "svm_gamma", "gp_lengthscale",
                     "gp_signal_variance", "gp_noise_variance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def for_method(self, method: "CrossDeviceMethod | str") -> "EngineConfig":
        method = CrossDeviceMethod(method)
        if method is CrossDeviceMethod.RATIO:
            return replace(self, metric=Metric.EUCLIDEAN, fingerprint_transform=Transform.RATIO)
        if method is CrossDeviceMethod.CORRELATION:
            return replace(self, metric=Metric.CORRELATION, fingerprint_transform=Transform.BASIC)
        return replace(self, metric=Metric.EUCLIDEAN, fingerprint_transform=Transform.BASIC)

    def to_dict(self) -> dict:
        """Nested config block: {engine, k, metric, transform, svm:{...}, gp:{...}}."""
        d = asdict(self)
        return {
            "engine": self.engine.value,
            "k": self.k,
            "metric": self.metric.value,
            "transform": self.fingerprint_transform.value,
            "log_ratio": self.log_ratio,
            "ratio_epsilon": self.ratio_epsilon,
            "svm": {"c": d["svm_c"], "kernel": self.svm_kernel.value, "gamma": d["svm_gamma"]},
            "gp": {"lengthscale": d["gp_lengthscale"], "signal": d["gp_signal_variance"],
                   "noise": d["gp_noise_variance"]},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EngineConfig":
        kw = {}
        for key in ("engine", "k", "metric", "log_ratio", "ratio_epsilon", "seed"):
            if key in doc:
                kw[key] = doc[key]
        if "transform" in doc:
            kw["fingerprint_transform"] = doc["transform"]
        svm = doc.get("svm", {})
        for src, dst in (("c", "svm_c"), ("kernel", "svm_kernel"), ("gamma", "svm_gamma")):
            if src in svm:
                kw[dst] = svm[src]
        gp = doc.get("gp", {})
        for src, dst in (("lengthscale", "gp_lengthscale"), ("signal", "gp_signal_variance"),
                         ("noise", "gp_noise_variance")):
            if src in gp:
                kw[dst] = gp[src]
        unknown = set(doc) - {"engine", "k", "metric", "transform", "log_ratio", "ratio_epsilon",
                              "seed", "svm", "gp"}
        if unknown:
            raise ValueError(f"unknown engine config keys: {sorted(unknown)}")
        return cls(**kw)
