"""Stochastic-tree Taylor expansions and exponential one-step schemes for
semilinear parabolic SPDEs with additive noise, with a Monte Carlo strong-order
harness.

Subpackage map:

- ``trees``      — labeled rooted trees/woods, expansion operator, order functional
- ``kernels``    — stable exponential moment primitives and divided differences
- ``model``      — spectral models, nonlinearities with directional derivatives
- ``sampler``    — exact Gaussian sampling of convolution increments and their
                   time integrals; fine-grid aggregation oracle
- ``evaluator``  — numeric evaluation of expansion terms on a common noise record
- ``schemes``    — closed-form one-step integrators and trajectory integration
- ``harness``    — coupled-path strong-error experiments, regression, reporting
- ``config``/``cli`` — structured-text configuration and the command-line front end
"""

__version__ = "0.1.0"
