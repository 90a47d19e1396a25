# pyDiapir Module
# -*- coding: utf-8 -*-
"""
 Python module to simulate salt diapirism with the successive linear
 approximation (SLA) method

 For more information see README.md

 Features
    * Two-layer salt/sediment body on a structured triangular mesh
    * Mooney-Rivlin type viscoelastic solids, nearly incompressible
    * Quasi-static large deformation by successive linearization about the
      present configuration, no re-meshing
    * Interface perturbation and gravity tilt ramps to trigger instabilities
    * Sparse direct (SuperLU) or preconditioned GMRES solves
    * Legacy VTK snapshots and CSV diagnostics

 Classes
    Simulation(config)

 Parameters
    config                    # ScenarioConfig (see load_config, load_preset)

 Functions
    initialize()              # Build the equilibrium state at t0
    perturb(spec)             # Apply the interface bump (default: the scenario's)
    step(dt)                  # Advance one step, returns the Diagnostics record
    run(n_steps, out_dir)     # Advance n steps, writing snapshots and diagnostics.csv
    snapshot(path)            # Write the current state as VTK
    mass()                    # Mass per region
    apex()                    # Highest interface point (m)
    structures(threshold)     # Interface maxima above threshold

 Requirements
    This module requires the following modules: numpy, scipy, tomli (Python < 3.11)
    pip install numpy scipy tomli
"""
import logging
import sys

from pydiapir import sla
from pydiapir.aux import env_workers
from pydiapir.exceptions import PyDiapirException, ValidationError
from pydiapir.scenario_io import (ScenarioConfig, load_config, load_preset, parse_config, serialize_config,
                                  write_snapshot)
from pydiapir.solver import make_solver

version_tuple = (0, 1, 1)
version = __version__ = '%d.%d.%d' % version_tuple

log = logging.getLogger(__name__)
log.debug('%s version %s', __name__, __version__)
log.debug('Python %s on %s', sys.version, sys.platform)

__all__ = ["Simulation", "ScenarioConfig", "load_config", "load_preset", "parse_config", "serialize_config",
           "set_debug", "PyDiapirException"]


def set_debug(toggle=True, color=True):
    """Enable verbose logging"""
    if toggle:
        if color:
            logging.basicConfig(format='\x1b[31;1m%(levelname)s:%(message)s\x1b[0m', level=logging.DEBUG)
        else:
            logging.basicConfig(format='%(levelname)s:%(message)s', level=logging.DEBUG)
        log.setLevel(logging.DEBUG)
        log.debug("%s [%s]\n" % (__name__, __version__))
    else:
        log.setLevel(logging.NOTSET)


class Simulation(object):
    def __init__(self, config, workers=None):
        """
        Represents one scenario advanced step by step.

        Args:
            config  = ScenarioConfig
            workers = element batches assembled concurrently (default: SLA_THREADS)
        """
        if not isinstance(config, ScenarioConfig):
            raise ValidationError("Simulation expects a ScenarioConfig")
        self.config = config
        self.workers = env_workers() if workers is None else workers
        self.solver = make_solver(config.solver.method, config.solver.tol, config.solver.max_iter)
        self.state = None
        self.diagnostics = []

    def initialize(self):
        self.state = sla.initialize(self.config)
        self.diagnostics = []
        return self.state

    def _require_state(self):
        if self.state is None:
            self.initialize()
        return self.state

    def perturb(self, spec=None):
        """Apply spec, or the scenario's perturbation when None (no-op if disabled)"""
        state = self._require_state()
        spec = spec if spec is not None else self.config.perturbation
        if spec is not None:
            self.state = sla.apply_perturbation(state, spec)
        return self.state

    def step(self, dt=None):
        state = self._require_state()
        self.state, record = sla.step(state, dt or self.config.dt, solver=self.solver,
                                      decomposition=self.config.output.decomposition, workers=self.workers,
                                      substeps=self.config.substeps)
        self.diagnostics.append(record)
        return record

    def run(self, n_steps=None, out_dir=None):
        """
        Advance n_steps (default: the scenario's), writing a snapshot every
        output cadence and diagnostics.csv when out_dir is given
        """
        def track(state, record):
            self.state = state

        sla.run(self.config, n_steps, out_dir, workers=self.workers, callback=track, state=self._require_state(),
                solver=self.solver, series=self.diagnostics)
        return self.diagnostics

    def snapshot(self, path):
        return write_snapshot(self._require_state(), path)

    def mass(self):
        return sla.region_mass(self._require_state())

    def apex(self):
        return sla.apex_height(self._require_state().mesh)

    def structures(self, threshold):
        return sla.interface_maxima(self._require_state().mesh, threshold)
