"""Escalation With Overdose Control (EWOC) dose finding.

Subpackages cover the statistical kernel (`links`), the dose-toxicity model
and posterior backends (`model`, `posterior`), the sequential trial state
machine (`trial`), the Monte Carlo study harness (`study`), the operator CLI
(`cli`) and the trial-conduct HTTP service (`service`).
"""

__version__ = "0.1.0"
