# Commands package

from .data import register as register_data
from .train import register as register_train
from .infer import register as register_infer
from .evaluate import register as register_evaluate

__all__ = [
    "register_data",
    "register_train",
    "register_infer",
    "register_evaluate",
]
