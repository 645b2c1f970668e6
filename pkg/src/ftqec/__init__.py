"""Simulation toolkit for a fault-tolerant [[7,1,3]] color-code memory.

Modules
-------
pauli, code      Pauli algebra, the code definition, logical Pauli frames
circuit          timed instruction IR with classical registers and conditions
tableau          CHP stabilizer tableau
backends         batched tableau / Pauli-frame / state-vector simulators
noise            stochastic error model, fault sampling and enumeration
runtime          shot execution with noise attachment and seeding
protocol         encoders, flagged syndrome extraction, decoders, experiments
analysis         jackknife, decay fits, channel inversion, error budget, threshold
ftcheck          exhaustive single-fault injection
pipeline         experiment families with derived seeds and jackknifed fits
report           CSV, JSON and SVG writers
cli              command-line front end
"""

__version__ = "0.1.0"
