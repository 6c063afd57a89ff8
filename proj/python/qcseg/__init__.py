"""Protocol-adherence segmentation of sensor-based clinimetric tests.

The heavy lifting lives in the compiled ``_core`` extension; this package
re-exports it and adds a couple of conveniences.
"""

import json as _json

from ._core import (
    QcsegError,
    adjusted_rand_index,
    ar_psd,
    fit_hdp_ar,
    l1_trend_filter,
    naive_bayes_cv,
    power_spectrum,
    preprocess,
    run_pipeline as _run_pipeline,
    segment_gmm,
    synth,
    tp_tn_ba,
)

__all__ = [
    "QcsegError",
    "adjusted_rand_index",
    "ar_psd",
    "fit_hdp_ar",
    "l1_trend_filter",
    "naive_bayes_cv",
    "power_spectrum",
    "preprocess",
    "run_pipeline",
    "segment_gmm",
    "synth",
    "tp_tn_ba",
]


def run_pipeline(config):
    """Run the file-based pipeline. ``config`` is a dict or a JSON string."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _run_pipeline(config)
