"""resetloop: reset-control frequency analysis and hybrid loop simulation.

The package provides:

- `lti`: SISO state-space blocks, composition algebra, exact ZOH
  discretization;
- `reset_system`: reset elements (Clegg integrator, first-order reset
  element, resettable filters) and their composition;
- `harmonic_analysis`: describing functions and higher-order harmonics of
  reset systems;
- `controllers`: the eight benchmark controller designs, constant-gain lead
  design, gain tuning and phase margins;
- `plant`: the default desk-scale stage and FRF ingestion/fitting;
- `simulate`: fixed-step hybrid closed-loop simulation;
- `metrics`: RMS/max error, cumulative PSD, step metrics;
- `cli`: the `resetloop` command-line front end.
"""

__version__ = "0.1.0"
