"""Continuous semantic caching laboratory.

Library + CLI implementing epsilon-net discretization of a query embedding
space, kernel-ridge-regression cost learning with confidence bounds, the
reverse-greedy cache oracle, offline / online low-switching / stage-frozen
learners, reference baselines, and a seeded experiment harness.
"""

__version__ = "0.1.0"
