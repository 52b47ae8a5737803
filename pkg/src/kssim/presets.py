"""Named scenarios, stored in the same nested layout as a TOML config file."""
from __future__ import annotations

import copy

_GRID_1D = {"extent": [10.0], "cells": [256]}
_GRID_2D = {"extent": [12.0, 12.0], "cells": [128, 128]}

# concentrated bump with total mass 100 on the 12 x 12 box: 85.6 in the bump, 14.4 in the floor
_BUMP_2D = {"kind": "gaussian_bump", "width": 1.5, "floor": 0.1, "mass": 85.6}

PRESETS: dict[str, dict] = {
    "suppress1d": {
        "description": "gamma = exp(-v) with f = log(1+u): degradation against a decreasing motility",
        "grid": _GRID_1D,
        "motility": {"kind": "exp_decay", "chi": 1.0},
        "source": {"kind": "log_power", "lam": 1.0, "alpha": 1.0, "mu": 0.0},
        "initial": {"kind": "gaussian_bump", "width": 1.0, "amplitude": 5.0, "floor": 0.5},
        "step": {"diagnostics_stride": 100},
        "run": {"horizon": 50.0},
        "classifier": {"min_time": 10.0},
    },
    "concave1d": {
        "description": "gamma = 1 + log(1+v), increasing and concave, initial peak 10",
        "grid": _GRID_1D,
        "motility": {"kind": "log_growth", "c": 1.0},
        "source": {"kind": "log_power", "lam": 1.0, "alpha": 1.0, "mu": 0.0},
        "initial": {"kind": "gaussian_bump", "width": 1.0, "amplitude": 9.5, "floor": 0.5},
        "step": {"diagnostics_stride": 100},
        "run": {"horizon": 50.0},
        "classifier": {"min_time": 10.0},
    },
    "nonmono1d": {
        "description": "gamma = 3 + v + 2 sin v (unbounded, non-monotone), logistic-like source with equilibrium e - 1",
        "grid": _GRID_1D,
        "motility": {"kind": "affine_osc", "a": 3.0, "b": 2.0},
        "source": {"kind": "log_power", "lam": 2.0, "alpha": 1.0, "mu": 2.0},
        "initial": {"kind": "gaussian_bump", "width": 1.0, "amplitude": 6.0, "floor": 0.5},
        "step": {"diagnostics_stride": 500},
        "run": {"horizon": 50.0},
        "classifier": {"min_time": 10.0},
    },
    "boundedgamma1d": {
        "description": "gamma = exp(-2v), bounded at infinity, source with equilibrium e - 1",
        "grid": _GRID_1D,
        "motility": {"kind": "exp_decay", "chi": 2.0},
        "source": {"kind": "log_power", "lam": 2.0, "alpha": 1.0, "mu": 2.0},
        "initial": {"kind": "gaussian_bump", "width": 1.0, "amplitude": 6.0, "floor": 0.5},
        "step": {"diagnostics_stride": 100},
        "run": {"horizon": 50.0},
        "classifier": {"min_time": 10.0},
    },
    "blowup2d": {
        "description": "gamma = exp(-v), no source, concentrated bump on a 128^2 grid",
        "grid": _GRID_2D,
        "motility": {"kind": "exp_decay", "chi": 1.0},
        "source": {"kind": "zero"},
        "initial": _BUMP_2D,
        "step": {"diagnostics_stride": 200},
        "run": {"horizon": 160.0},
        "classifier": {"min_time": 10.0},
    },
    "suppress2d": {
        "description": "blowup2d with f = log(1+u)",
        "grid": _GRID_2D,
        "motility": {"kind": "exp_decay", "chi": 1.0},
        "source": {"kind": "log_power", "lam": 1.0, "alpha": 1.0, "mu": 0.0},
        "initial": _BUMP_2D,
        "step": {"diagnostics_stride": 200},
        "run": {"horizon": 160.0},
        "classifier": {"min_time": 10.0},
    },
}


def preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
