"""Piecewise-constant quadratic ODE schedules: compile, simulate, verify."""

import json as _json

from ._qode import (  # noqa: F401
    BudgetInfeasibleError,
    IntegrationFailureError,
    InvalidScheduleError,
    Schedule,
    builtin_targets,
    choose_parameters,
    compile_sobolev,
    direct_eval,
    embed_input,
    error_bound,
    log_psi_eval,
    min_sharpness,
    net_eval as _net_eval,
    compile_ffnet as _compile_ffnet,
    perturbation_bound,
    perturbation_threshold,
    psi_eval,
    tanh_closed_form,
    target_value,
    verify_ffnet as _verify_ffnet,
    verify_perturbation,
    verify_sobolev,
)


def _net_to_json(net):
    if isinstance(net, str):
        return net
    return _json.dumps(net)


def compile_ffnet(net, eps):
    """Compile a feedforward net (dict or JSON string) into a Schedule."""
    return _compile_ffnet(_net_to_json(net), eps)


def net_eval(net, x):
    """Reference forward pass of a feedforward net (dict or JSON string)."""
    return _net_eval(_net_to_json(net), x)


def verify_ffnet(schedule, net, eps, grid=21):
    return _verify_ffnet(schedule, _net_to_json(net), eps, grid)


__all__ = [
    "BudgetInfeasibleError",
    "IntegrationFailureError",
    "InvalidScheduleError",
    "Schedule",
    "builtin_targets",
    "choose_parameters",
    "compile_ffnet",
    "compile_sobolev",
    "direct_eval",
    "embed_input",
    "error_bound",
    "log_psi_eval",
    "min_sharpness",
    "net_eval",
    "perturbation_bound",
    "perturbation_threshold",
    "psi_eval",
    "tanh_closed_form",
    "target_value",
    "verify_ffnet",
    "verify_perturbation",
    "verify_sobolev",
]
