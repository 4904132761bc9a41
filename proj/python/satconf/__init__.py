"""Python access to the satconf core.

Configs are plain dicts using the same keys as the CLI config sections.
"""

import json

from . import _satconf
from ._satconf import (
    AcousticModel as _AcousticModel,
    ConfigError,
    DimensionError,
    NumericalError,
    downsampled_length,
    grad_suite,
    load_corpus,
    weighted_simple_add,
)

__all__ = [
    "AcousticModel",
    "ConfigError",
    "DimensionError",
    "NumericalError",
    "count_parameters",
    "desk_model_config",
    "downsampled_length",
    "gen_corpus",
    "grad_suite",
    "load_corpus",
    "full_model_config",
    "weighted_simple_add",
]


def desk_model_config():
    return json.loads(_satconf.desk_model_config())


def full_model_config():
    return json.loads(_satconf.full_model_config())


def count_parameters(model_config):
    return _satconf.count_parameters(json.dumps(model_config))


def gen_corpus(corpus_config, out_dir):
    _satconf.gen_corpus(json.dumps(corpus_config), str(out_dir))


class AcousticModel:
    def __init__(self, model_config, seed=0, _native=None):
        self._m = _native if _native is not None else _AcousticModel(json.dumps(model_config), seed)

    @classmethod
    def load(cls, path):
        return cls(None, _native=_AcousticModel.load(str(path)))

    def save(self, path):
        self._m.save(str(path))

    @property
    def config(self):
        return json.loads(self._m.config())

    def num_parameters(self):
        return self._m.num_parameters()

    def forward(self, features, embedding=None):
        return self._m.forward(features, embedding)
