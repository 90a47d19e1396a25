# pyDiapir Module - Built-in Scenarios
# -*- coding: utf-8 -*-
"""
 Raw scenario tables in the config-file schema. Units: m, Pa, kg/m^3, Pa Ma, Ma.

    diapir_6_1    # Single diapir from an interface perturbation
    incline_6_2   # Salt migration under a 1 degree tilt of the base
"""
import copy

SALT = {
    "rho0": 2.2e3,
    "s1": 0.0,
    "s2": -0.2e3,
    "lambda": -10.0e3,
    "mu1": 15.0e3,
    "mu2": 0.0,
    "mu3": 0.0,
    "beta": 1e9,
    "nearly_incompressible": True,
}

SEDIMENT = {
    "rho0": 3.0e3,
    "s1": 2.5e3,
    "s2": -7.5e3,
    "lambda": 0.0,
    "mu1": 0.0,
    "mu2": 0.0,
    "mu3": 0.0,
    "beta": 1e9,
    "nearly_incompressible": True,
}

# salt layer growth rate is about drho g h / (4 mu1), 13 per Ma for these tables;
# rate * dt / SUBSTEPS must stay well below 1
SUBSTEPS = 10

SOLVER = {
    "method": "direct",
    "tol": 1e-6,
    "max_iter": 500,
    "te_update": "increment",
}

DIAPIR_6_1 = {
    "geometry": {
        "length": 1200.0,
        "salt_height": 100.0,
        "sediment_height": 200.0,
        "nx": 120,
        "ny_salt": 10,
        "ny_sediment": 20,
    },
    "salt": SALT,
    "sediment": SEDIMENT,
    "time": {"dt": 0.1, "n_steps": 300, "substeps": SUBSTEPS},
    "gravity": {
        "magnitude": 9.81,
        "ramp_angle_deg": 0.0,
        "ramp_steps": 1,
        "traction_x": 0.0,
        "traction_y": 0.0,
    },
    # center, width and amplitude resolve from the geometry
    "perturbation": {"enabled": True},
    "output": {"directory": "out", "cadence": 10, "decomposition": False},
    "solver": SOLVER,
}

INCLINE_6_2 = {
    "geometry": {
        "length": 5000.0,
        "salt_height": 100.0,
        "sediment_height": 200.0,
        "nx": 250,
        "ny_salt": 5,
        "ny_sediment": 10,
    },
    "salt": dict(SALT, beta=2e9),
    "sediment": dict(SEDIMENT, beta=2e9),
    "time": {"dt": 0.1, "n_steps": 1500, "substeps": SUBSTEPS},
    "gravity": {
        "magnitude": 9.81,
        "ramp_angle_deg": 1.0,
        "ramp_steps": 10,
        "traction_x": 0.0,
        "traction_y": 0.0,
    },
    "perturbation": {"enabled": False},
    "output": {"directory": "out", "cadence": 50, "decomposition": False},
    "solver": SOLVER,
}

PRESETS = {
    "diapir_6_1": DIAPIR_6_1,
    "incline_6_2": INCLINE_6_2,
}

DEFAULT_PRESET = "diapir_6_1"


def preset_table(name):
    """Deep copy of a preset's raw table; KeyError if unknown"""
    return copy.deepcopy(PRESETS[name])
