import os
from dotenv import load_dotenv

load_dotenv()


def _float(name: str, default: float) -> float:
    value = os.environ.get(name)
    return float(value) if value not in (None, "") else default


def _int(name: str, default: int) -> int:
    value = os.environ.get(name)
    return int(value) if value not in (None, "") else default


class Config:
    # Solver tolerances. Training happens in a space normalized to roughly [0,1]^n,
    # so these sit well below the smallest errors worth reporting.
    FEAS_TOL = _float('POLYAPPROX_FEAS_TOL', 1e-8)
    VALUE_TOL = _float('POLYAPPROX_VALUE_TOL', 1e-9)
    LP_PIVOT_TOL = _float('POLYAPPROX_LP_PIVOT_TOL', 1e-9)
    LP_MAX_PIVOTS = _int('POLYAPPROX_LP_MAX_PIVOTS', 50000)
    LP_REFACTOR_EVERY = _int('POLYAPPROX_LP_REFACTOR_EVERY', 50)

    QP_TOL = _float('POLYAPPROX_QP_TOL', 1e-8)
    QP_GAP_TOL = _float('POLYAPPROX_QP_GAP_TOL', 1e-10)
    QP_MAX_SWEEPS = _int('POLYAPPROX_QP_MAX_SWEEPS', 100000)
    QP_WINDOW = _int('POLYAPPROX_QP_WINDOW', 500)

    # Major steps of the nearest-point method behind lifted and Minkowski projections
    LIFT_MAX_ROUNDS = _int('POLYAPPROX_LIFT_MAX_ROUNDS', 1000)

    # Learning-rate halvings tried before a training step that unbounds P aborts
    STEP_BACKOFF_MAX = _int('POLYAPPROX_STEP_BACKOFF_MAX', 30)

    # Geometry
    ACT_TOL = _float('POLYAPPROX_ACT_TOL', 1e-6)
    DIR_EPS = _float('POLYAPPROX_DIR_EPS', 1e-12)
    ROW_EPS = _float('POLYAPPROX_ROW_EPS', 1e-12)

    # Exit codes used by the command line front end
    EXIT_OK = 0
    EXIT_THRESHOLD = 1  # bench --strict with a failing case
    EXIT_RUNTIME = 2
    EXIT_USAGE = 64

    LOG_LEVEL = os.environ.get('POLYAPPROX_LOG_LEVEL') or 'INFO'

    # Numbers in every written document use this many significant digits
    SIGNIFICANT_DIGITS = 17
