import numpy as np
import pytest

from qcorr.analysis import EQ3_CONSTANT
from qcorr.oracle import (
    ConventionError,
    calibrate_eq3_constant,
    calibration_family,
    cross_validate,
    oracle_execute,
    random_scenarios,
)
from qcorr.protocol import build_qc_sequence, execute_exact
from qcorr.spins import build_bath


def test_calibrated_constant_is_one():
    c = calibrate_eq3_constant()
    assert c == pytest.approx(1.0, abs=0.01)
    assert EQ3_CONSTANT == 1.0


def test_calibration_detects_inconsistent_cases():
    # coupling scaled by sqrt(2) behind the parameters' back doubles one case's ratio
    sys, t, delays = calibration_family()[0]
    skewed = sys.with_coupling(sys.b_op * np.sqrt(2))
    with pytest.raises(ConventionError):
        calibrate_eq3_constant([(sys, t, delays), (skewed, t, delays)])


def test_calibration_needs_single_spin():
    sys = build_bath([1e6, 2e6], 0.0, [1e4, 1e4], [0.5, 0.5], n_spins=2)
    with pytest.raises(ValueError):
        calibrate_eq3_constant([(sys, 0.1e-6, [1e-6])])


def test_random_scenarios_reproducible():
    a = random_scenarios(4, seed=3)
    b = random_scenarios(4, seed=3)
    for (sa, ya, ta), (sb, yb, tb) in zip(a, b):
        assert sa == sb
        np.testing.assert_array_equal(ya.b_op, yb.b_op)
        assert (ta is None) == (tb is None)


def test_cross_validate_small():
    assert cross_validate(4, seed=5) <= 1e-8


def test_oracle_unpolarized_bath_gives_no_qc():
    sys = build_bath(2 * np.pi * 300e3, 0.0, 2 * np.pi * 80e3, 0.0)
    seq = build_qc_sequence(0.3e-6, 1.4e-6)
    assert abs(oracle_execute(seq, sys, n_substeps=32)) < 1e-12
    assert abs(execute_exact(seq, sys).value) < 1e-12


def test_oracle_argument_checks():
    sys = build_bath(1e6, 0.0, 1e5, 0.5)
    with pytest.raises(ValueError):
        oracle_execute(build_qc_sequence(1e-7, 1e-6), sys, n_phases=1)
