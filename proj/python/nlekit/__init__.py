"""Python bindings for nlekit.

Divergences, features and embeddings are thin wrappers over the C++ core.
`Pipeline` drives the same staged workflow as the `nlekit` command.
"""

import json as _json
import os as _os

from ._core import (
    NlekitError,
    kld,
    log_mel,
    model_digest,
    mutual_distance,
    nle_columns,
    nle_digest,
    nle_rtsl_loss,
    pairwise_skld,
    pca,
    posteriors,
    read_lmfb,
    read_wav,
    silhouette,
    skld,
    smoothed_l1,
    tsne,
)
from . import _core

__all__ = [
    "NlekitError", "Pipeline", "load_config", "validate_config",
    "kld", "skld", "smoothed_l1", "mutual_distance", "nle_rtsl_loss",
    "log_mel", "read_wav", "read_lmfb", "nle_columns", "nle_digest",
    "model_digest", "posteriors", "pairwise_skld", "tsne", "pca", "silhouette",
]


def load_config(path, overrides=()):
    """Config file (// comments allowed) with dotted.key=value overrides applied."""
    return _json.loads(_core._read_config(_os.fspath(path), list(overrides)))


def _as_dict(config):
    if isinstance(config, (str, _os.PathLike)):
        return load_config(config)
    return dict(config)


def validate_config(config):
    """Every violation as 'dotted.key: problem'; empty when the config is usable."""
    return _core._validate_config(_json.dumps(_as_dict(config)))


class Pipeline:
    """Staged run in config['workdir']; every stage is idempotent."""

    def __init__(self, config, workers=1, force=False):
        self.config = _as_dict(config)
        self._p = _core._Pipeline(_json.dumps(self.config), workers, force)

    @property
    def workdir(self):
        return self._p.workdir()

    def gen_corpus(self):
        self._p.gen_corpus()

    def extract_features(self):
        self._p.extract_features()

    def train_source(self, seed, all_devices=False):
        self._p.train_source(seed, all_devices)

    def learn_nle(self, seed):
        self._p.learn_nle(seed)

    def adapt(self, seed, regime):
        self._p.adapt(seed, regime)

    def evaluate(self, seed):
        return self._p.evaluate(seed)

    def visualize(self, seed):
        self._p.visualize(seed)

    def run_all(self):
        self._p.run_all()
