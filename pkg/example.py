# Example run of pydiapir
import os

import pydiapir

if __name__ == "__main__":
    # Optional: Turn on Debug Mode
    pydiapir.set_debug(True)

    # Scenario - built-in preset with a coarser mesh
    # Set appropriate env vars or change the defaults
    nx = os.environ.get('SLA_EXAMPLE_NX', '60')
    steps = int(os.environ.get('SLA_EXAMPLE_STEPS', '50'))
    out_dir = os.environ.get('SLA_EXAMPLE_OUT', 'example-out')
    config = pydiapir.load_preset("diapir_6_1", [f"geometry.nx={nx}", "geometry.ny_salt=5",
                                                 "geometry.ny_sediment=10"])

    # Equilibrium, perturbation and time stepping
    sim = pydiapir.Simulation(config)
    sim.initialize()
    print("Initial mass: %r" % sim.mass())
    sim.perturb()
    print("Apex after perturbation: %0.3f m" % sim.apex())
    series = sim.run(steps, out_dir=out_dir)

    # Diagnostics
    for record in series[::10]:
        print("step %4d  t = %5.1f Ma  apex = %8.3f m  min area ratio = %0.3f" %
              (record.step, record.time, record.apex_height, record.min_area_ratio))
    print("Salt structures: %r" % sim.structures(config.geometry.salt_height + 1.0))
    print("Final mass: %r" % sim.mass())
