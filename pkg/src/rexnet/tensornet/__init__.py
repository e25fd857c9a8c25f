from . import tensor
from .cnn import CnnModel
from .gradcam import grad_cam, grad_cam_all_classes
from .gradcheck import grad_check
from .layers import SGD, Conv2d, Dense
from .lrp import lrp_attribute
from .tensor import Tensor, no_grad
from .train import (FeatureCache, FeatureStats, Hyper, TrainingDiverged,
                    compute_features, train_classifier)

__all__ = [
    "tensor", "Tensor", "no_grad", "Conv2d", "Dense", "SGD", "CnnModel",
    "grad_cam", "grad_cam_all_classes", "grad_check", "lrp_attribute",
    "Hyper", "FeatureCache", "FeatureStats", "TrainingDiverged",
    "compute_features", "train_classifier",
]
