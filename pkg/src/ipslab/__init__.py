"""Exact and Monte Carlo tools for two-site interacting particle systems.

Modules:

* ``tensor``: exact tensor-product lattice operators.
* ``models``: the catalog of two-site generators and their relations.
* ``classify``: exhaustive searches for stochastic idempotent generators.
* ``duality``: duality functions, dual actions and coordinate Hecke operators.
* ``exact``: closed-form solutions and a dual-equation integrator.
* ``yangbaxter``: Baxterisation and Yang-Baxter residuals.
* ``replab``: the spin-chain representation of the ARW generator algebra.
* ``simulate``: continuous-time Monte Carlo and a z-score comparison harness.
* ``cli``: the ``ipslab`` command.
"""

__version__ = "0.1.0"
