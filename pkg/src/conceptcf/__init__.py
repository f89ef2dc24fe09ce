"""Concept-guided diffusion counterfactuals for image classifiers.

Generates counterfactual images whose changes are restricted to a small
set of semantic concepts (channels of an internal classifier layer),
with optional spatial localization, concept visualization, and a
quantitative evaluation suite.
"""

__version__ = "0.1.0"
