"""JSON save/load for fitted working models."""

import json
from pathlib import Path

from .base import LinearGaussianModel
from .forest import ForestGaussianModel, QuantileForest
from .gamma import GammaRegressionModel
from .mixture import MixtureRegressionModel

_FAMILIES = {
    cls.family: cls
    for cls in (LinearGaussianModel, MixtureRegressionModel, GammaRegressionModel,
                ForestGaussianModel, QuantileForest)
}


def model_from_dict(d):
    try:
        cls = _FAMILIES[d["family"]]
    except KeyError:
        raise ValueError(f"unknown model family {d.get('family')!r}") from None
    return cls.from_dict(d)


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
