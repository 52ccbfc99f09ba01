"""Multiparametric QP solving with partially supervised networks.

Problems, cases, atlases and models are plain dicts (the JSON documents the
CLI reads and writes). Numeric inputs and outputs are numpy arrays.
"""

import json
import os
from pathlib import Path

_data = Path(__file__).with_name("data")
if _data.is_dir() and not os.environ.get("MPQP_DATA_DIR"):
    os.environ["MPQP_DATA_DIR"] = str(_data)

from . import _mpqp  # noqa: E402
from ._mpqp import (  # noqa: E402,F401
    Error,
    FingerprintMismatch,
    InfeasibleError,
    NumericError,
    ValidationError,
)

__all__ = [
    "Error",
    "FingerprintMismatch",
    "InfeasibleError",
    "NumericError",
    "ValidationError",
    "load_case",
    "build_qp",
    "fingerprint",
    "num_varying",
    "realistic_dataset",
    "extreme_dataset",
    "solve",
    "kkt_report",
    "discover",
    "populate",
    "train_psnn",
    "predict",
    "train_baseline",
    "predict_baseline",
]


def _dump(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def load_case(name):
    """Shipped case by name ("case6", "case30", "case57", "toy2") or a file path."""
    return json.loads(_mpqp.load_case(str(name)))


def build_qp(case):
    return json.loads(_mpqp.build_qp(_dump(case)))


def fingerprint(problem):
    return _mpqp.fingerprint(_dump(problem))


def num_varying(problem):
    return _mpqp.num_varying(_dump(problem))


def realistic_dataset(case, n, seed):
    return _mpqp.realistic_dataset(_dump(case), n, seed)


def extreme_dataset(case, n, seed):
    return _mpqp.extreme_dataset(_dump(case), n, seed)


def solve(problem, theta, method="auto"):
    """Oracle solve at the varying-parameter vector theta."""
    return _mpqp.solve(_dump(problem), theta, method)


def kkt_report(problem, theta, x, lambda_, mu):
    return json.loads(_mpqp.kkt_report(_dump(problem), theta, x, lambda_, mu))


def discover(problem, theta0, axis, theta_plus, alpha=0.01, tol=1e-8, refine=False):
    return json.loads(_mpqp.discover(_dump(problem), theta0, axis, theta_plus, alpha, tol, refine))


def populate(atlas, per_region, seed):
    """Returns (inputs, mu targets, region ids)."""
    return _mpqp.populate(_dump(atlas), per_region, seed)


def train_psnn(atlas, per_region=200, seed=0, init="warm", max_epochs=50000, learning_rate=1e-3):
    return json.loads(_mpqp.train_psnn(_dump(atlas), per_region, seed, init, max_epochs, learning_rate))


def predict(model, thetas, clamp=True):
    """Batch prediction; one row of thetas per point."""
    return _mpqp.predict(_dump(model), thetas, clamp)


def train_baseline(problem, train_thetas, val_thetas, seed=0, max_epochs=1000, hidden=(64, 64, 64)):
    return json.loads(_mpqp.train_baseline(_dump(problem), train_thetas, val_thetas, seed, max_epochs, list(hidden)))


def predict_baseline(model, problem, thetas):
    return _mpqp.predict_baseline(_dump(model), _dump(problem), thetas)
