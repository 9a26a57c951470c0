"""Learning combinatorial-optimization pipelines from instances alone.

A statistical model maps instance features to the parameters of an easy
combinatorial problem; solving it and post-processing the solution yields
a feasible solution of the hard problem.  The model weights are trained
by derivative-free minimization of the observed pipeline cost, with no
target solutions involved.  Two applications ship with the library:
two-stage maximum-weight spanning trees and single-machine scheduling
with release dates (total completion time).
"""

from . import cli, graphs, learning, model, scheduling, two_stage

__all__ = ["graphs", "model", "two_stage", "scheduling", "learning", "cli"]
__version__ = "0.1.0"
