"""Event classification with constraint-satisfaction trained networks.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._core import (  # noqa: F401
    Dataset,
    EbpConfig,
    Equilibrium,
    GaConfig,
    MinimaSet,
    NetworkShape,
    NoConvergence,
    NoMinimaFound,
    Parameters,
    QgsSettings,
    ScenarioConfig,
    TrainConfig,
    TrainedModel,
    TwoStageConfig,
    TwoStageModel,
    activation,
    build_dataset,
    default_gain_table,
    enumerate_minima,
    evaluate,
    flatten_params,
    integrate_forward,
    make_system,
    network_residual_jacobian,
    network_residuals,
    network_sse,
    predict,
    qgs_cost,
    qgs_field,
    step,
    train_ebp,
    train_ga,
    train_qgs,
    train_two_stage,
    two_stage_from_json,
    unflatten_params,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
