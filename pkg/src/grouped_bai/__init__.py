"""Feasibility-constrained best-arm identification in grouped bandits.

Modules: ``instance`` (problem model and ground truth), ``env`` (seeded
rewards), ``css_lucb`` (the main policy), ``baselines``, ``diagnostics``,
``harness`` (sweeps and persistence), ``plotting`` and ``cli``.
"""

__version__ = "0.1.0"
