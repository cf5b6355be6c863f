"""Predictor design: robustness filter, interpolation, prediction block.

The reference numbers for the worked example were recomputed from the
design equations with an independent linear solve below, then frozen.
"""

import numpy as np
import pytest

from netsmith.lti_core import NumericError, Polynomial, RationalTF, roots
from netsmith.presets import demo_controller, demo_design, demo_plant, demo_prefilter
from netsmith.smith_design import (PredictorDesign, build_H, check_delay_bounds,
                                   delay_free_reference, design_filter,
                                   interpolation_residuals, make_design,
                                   nominal_closed_loop)

LAM = 0.9


def test_demo_filter_matches_independent_solve():
    """Recompute the 2x2 interpolation system by hand and compare."""
    d = demo_design()
    F = d.filter
    z0 = 1.051
    # mu_F = a*z + b with (z-lam) denominator; F(1)=1 and
    # z^tau_hat (z-lam) - mu_F = 0 at the unstable plant pole
    A = np.array([[1.0, 1.0], [z0, 1.0]])
    rhs = np.array([1.0 - LAM, z0 ** 5 * (z0 - LAM)])
    a, b = np.linalg.solve(A, rhs)
    assert F.num.coeffs == pytest.approx([a, b], abs=1e-12)
    assert list(F.den.coeffs) == [1.0, -LAM]


def test_demo_filter_frozen_snapshot():
    F = demo_design().filter
    assert F.num.coeffs == pytest.approx(
        [1.836038683050351, -1.7360386830503511], abs=1e-12)
    assert F(1.0) == pytest.approx(1.0, abs=1e-9)


def test_demo_interpolation_residuals_vanish():
    d = demo_design()
    res = interpolation_residuals(d.plant_nominal, d.filter, d.tau_hat)
    assert len(res) == 1
    node, order, r = res[0]
    assert node == pytest.approx(1.051)
    assert order == 0
    assert r < 1e-9


def test_demo_prediction_block_is_stable():
    H = demo_design().predictor_block
    assert H.den.degree == 6
    mods = np.abs(roots(H.den))
    assert mods.max() == pytest.approx(0.9, abs=1e-9)


def test_demo_delay_free_reference_frozen():
    T = delay_free_reference(demo_design()).normalized()
    assert T.num.coeffs == pytest.approx(
        [0.025000386024768003, -0.022500347422291195], abs=1e-12)
    assert T.den.coeffs == pytest.approx(
        [1.0, -1.8997300415970009, 0.90222599591084118], abs=1e-12)


def test_demo_disturbance_rejection_at_dc():
    _, Td = nominal_closed_loop(demo_design())
    assert abs(Td(1.0)) < 1e-9


def test_nominal_reference_includes_full_delay():
    d = demo_design()
    Tr, _ = nominal_closed_loop(d)
    Tfree = delay_free_reference(d)
    z = np.exp(0.3j)
    assert Tr(z) == pytest.approx(Tfree(z) * z ** -d.tau_hat, rel=1e-9)


def test_filter_order_one_per_extra_constraint():
    # two real unstable poles need a second-order filter denominator
    plant = RationalTF([0.01], Polynomial.from_roots([1.2, 1.05], 1.0).coeffs, 1.0)
    F = design_filter(plant, 3, LAM)
    assert F.den.degree == 2
    for _, _, r in interpolation_residuals(plant, F, 3):
        assert r < 1e-8
    assert F(1.0) == pytest.approx(1.0, abs=1e-9)


def test_filter_conjugate_pair_counts_once():
    # poles 1.05 +/- 0.1j give two constraint rows (re, im), so with
    # F(1)=1 the filter denominator is quadratic
    plant = RationalTF([0.02], [1.0, -2.1, 1.1125], 1.0)
    F = design_filter(plant, 2, LAM)
    assert F.den.degree == 2
    for _, _, r in interpolation_residuals(plant, F, 2):
        assert r < 1e-8


def test_integrator_plant_dedupes_unit_node():
    # the pole at z=1 shares its constraint with F(1)=1
    plant = RationalTF([1.0], [1.0, -1.0], 1.0)
    F = design_filter(plant, 3, LAM)
    assert F.den.degree == 0
    assert F(1.0) == pytest.approx(1.0)
    H = build_H(plant, F, 3)
    if H.den.degree > 0:
        assert np.abs(roots(H.den)).max() < 1.0 - 1e-8


def test_double_integrator_keeps_derivative_row():
    plant = RationalTF([1.0], [1.0, -2.0, 1.0], 1.0)
    F = design_filter(plant, 2, LAM)
    assert F.den.degree == 1
    res = interpolation_residuals(plant, F, 2)
    assert any(order == 1 for _, order, _ in res)
    for _, _, r in res:
        assert r < 1e-8


def test_slow_pole_compensation_is_opt_in():
    plant = RationalTF([0.1], [1.0, -0.95], 1.0)
    F_plain = design_filter(plant, 2, LAM)
    assert F_plain.den.degree == 0
    F_slow = design_filter(plant, 2, LAM, slow_pole_threshold=0.9)
    assert F_slow.den.degree == 1
    for _, _, r in interpolation_residuals(plant, F_slow, 2):
        assert r < 1e-8


def test_prediction_block_cancels_unstable_plant_pole():
    d = demo_design()
    H = build_H(d.plant_nominal, d.filter, d.tau_hat)
    # no pole of H may sit at the open-loop unstable plant pole
    if H.den.degree > 0:
        assert np.min(np.abs(roots(H.den) - 1.051)) > 0.1


def test_delay_bounds_validation_messages():
    with pytest.raises(ValueError, match="non-negative"):
        check_delay_bounds(-1, 0, 2)
    with pytest.raises(ValueError):
        check_delay_bounds(2, 3, 1)
    with pytest.raises(ValueError):
        check_delay_bounds(2, 0, 0)
    with pytest.raises(ValueError):
        check_delay_bounds(0, 0, 2)  # predictor needs at least one sample
    check_delay_bounds(5, 0, 2)


def test_make_design_validates_result():
    d = make_design(demo_plant(), demo_controller(), demo_prefilter(),
                    d_hat=5, tau_n_min=0, tau_n_max=2, lam=LAM)
    assert d.tau_hat == 5
    assert d.tau_bar == 2
    d.validate()


def test_validate_rejects_tampered_filter():
    d = demo_design()
    import dataclasses
    bad = dataclasses.replace(d, filter=RationalTF.constant(1.0, 1.0))
    with pytest.raises(ValueError):
        bad.validate()


def test_design_json_round_trip():
    d = demo_design()
    back = PredictorDesign.from_json(d.to_json())
    back.validate()
    assert back.d_hat == d.d_hat
    assert back.tau_n_min == d.tau_n_min
    assert back.tau_n_max == d.tau_n_max
    assert np.allclose(back.filter.num.coeffs, d.filter.num.coeffs)
    assert np.allclose(back.predictor_block.den.coeffs, d.predictor_block.den.coeffs)
    assert back.h == d.h
