"""Pinned regression instance with an externally verified optimum.

A five-variable maximization with a budgeted objective, one box row, one
deterministic row and three polyhedral rows. The optimal value and solution
were verified independently of this codebase and are frozen here; the
`verify-paper` CLI command and the acceptance suite re-derive them through
the reformulator and solver.
"""

from __future__ import annotations

from .lpcore import GE, LE, MAX
from .model import Box, Budget, Deterministic, Polyhedral, RobustInstance, RowSpec

REFERENCE_ID = "5_16_T011"
REFERENCE_F_STAR = 29.6985
REFERENCE_X_STAR = (1.8, 1.0231, 1.8, 0.0, 0.8)
REFERENCE_TOL = 1e-3


def reference_instance() -> RobustInstance:
    """The frozen five-variable instance behind `verify-paper`."""
    return RobustInstance(
        id=REFERENCE_ID,
        n=5,
        sense=MAX,
        c_nom=(7.7, -1.8, 8.8, -2.9, 2.7),
        objective_uncertainty=Budget(support=(3, 4), delta=(0.5, 0.5), gamma=0.8),
        rows=(
            RowSpec(
                a_nom=(0.0, 0.0, -0.1, 0.0, -0.7),
                sense=GE,
                b=-1.0,
                uncertainty=Box(support=(2, 4), delta=(0.1, 0.1)),
            ),
            RowSpec(
                a_nom=(-0.2, -1.3, 0.0, -0.7, -1.3),
                sense=LE,
                b=-2.73,
                uncertainty=Deterministic(),
            ),
            RowSpec(
                a_nom=(-0.4, 0.0, 0.0, 0.0, -1.1),
                sense=GE,
                b=-2.64,
                uncertainty=Polyhedral(
                    support=(0, 4),
                    F=((-0.2, -0.2),),
                    g=(0.06,),
                    lower=-0.2,
                    upper=0.0,
                    zero_eq=(1, 2, 3),
                ),
            ),
            RowSpec(
                a_nom=(0.0, 1.8, -1.4, -0.2, 0.9),
                sense=LE,
                b=6.8,
                uncertainty=Polyhedral(
                    support=(1, 3, 4),
                    F=((-0.2, 0.0, -0.1), (-0.1, 0.1, 0.0)),
                    g=(0.04, 0.01),
                    lower=-0.2,
                    upper=0.0,
                    zero_eq=(0, 2),
                ),
            ),
            RowSpec(
                a_nom=(0.3, 1.0, -1.1, 0.0, 0.0),
                sense=GE,
                b=-2.76,
                uncertainty=Polyhedral(
                    support=(0, 1),
                    F=((-0.1, -0.1),),
                    g=(0.04,),
                    lower=-0.2,
                    upper=0.0,
                    zero_eq=(2, 3, 4),
                ),
            ),
        ),
        bounds=(0.0, 1.8),
    )
