"""Quaternionic linear algebra, flat quaternionic calculus, ABP estimates and a
Newton solver for the quaternionic Calabi equation on flat tori."""

__version__ = "0.1.0"

from .abp import (
    AbpReport,
    BoxField,
    ContactSet,
    contact_set,
    pointwise_det_inequality,
    verify_key_lemma,
    verify_key_proposition,
)
from .calculus import (
    CalibrationConstant,
    RealQuadraticForm,
    TwoFormI,
    TwoJet,
    calibrate_kappa,
    ddJ,
    haar_average_mc,
    hess_field,
    hess_quaternionic,
    is_psh,
    pluriharmonic_extend,
    su2_average,
    wedge_top_coefficient,
)
from .exceptions import *  # noqa: F401,F403
from .grid import ScalarField
from .hyperhermitian import HyperHermitianMatrix, moore_det, real_embedding_oracle
from .pfaffian import pfaffian
from .quaternion import ImaginaryDirection, Quaternion, haar_sample_su2, right_act
from .solver import (
    CalabiSolver,
    SolveReport,
    SolverSettings,
    SweepRecord,
    TorusProblem,
    c0_sweep,
    residual,
    solve,
    uniqueness_check,
)
