"""Python bindings for the hmmob C++ core.

Priors and sampler settings are plain dicts using the same schema as the
experiment config files, e.g. ``{"type": "dirichlet", "alphas": [4, 4]}``.
"""

import json as _json

from . import _hmmob
from ._hmmob import (
    ConfigError,
    EmissionModel,
    Error,
    HmmParams,
    NumericalError,
    ObservationSequence,
    PreconditionError,
    RateConditionError,
    SamplerStuckError,
    UnderflowError,
    forgetting_rho,
    l1_marginal_distance,
    log_likelihood,
    marginal_density,
    merged_state_count,
    mixing_profile,
    prediction_filter,
    simulate,
    stationary_distribution,
    two_state_mixing,
)


def _dump(obj):
    return obj if isinstance(obj, str) else _json.dumps(obj)


def run_chain(y, k, row_prior, emission, em_prior=None, sampler=None):
    """Posterior samples for a k-state fit; returns a dict of trace columns."""
    return _hmmob.run_chain(list(y), k, _dump(row_prior), "" if em_prior is None else _dump(em_prior),
                            emission, _dump(sampler or {}))


def threshold_schedule(n, k, d, row_prior):
    return _json.loads(_hmmob.threshold_schedule(n, k, d, _dump(row_prior)))


def posterior_order(samples, n, d, row_prior):
    """Returns (pmf dict, mode) of the merged-state count over samples."""
    return _hmmob.posterior_order(list(samples), n, d, _dump(row_prior))


def config_hash(config):
    return _hmmob.config_hash(_dump(config))
