"""Closed-loop simulation: packetized loop and sample-delay abstraction."""

import numpy as np
import pytest

from netsmith.lmi_assembly import assemble_augmented
from netsmith.packet_channel import PacketTrace, Protocol, worst_case_trace
from netsmith.presets import demo_design
from netsmith.sim_engine import SimScenario, SimTrace, simulate, simulate_sample_delay
from netsmith.smith_design import make_design
from netsmith.presets import demo_controller, demo_plant, demo_prefilter


def _constant_trace(c, steps, lo, hi):
    return PacketTrace((c,) * steps, lo, hi)


def _run(design, kind, trace, steps, model="packetized", amplitude=1.0,
         selector="oldest"):
    scenario = SimScenario(design=design, protocol=Protocol(kind, selector=selector),
                           trace=trace, reference=np.full(steps, amplitude),
                           steps=steps, model=model)
    return simulate(scenario)


@pytest.mark.parametrize("c", [0, 1, 2])
def test_cross_model_agreement_constant_delay(c):
    d = demo_design()
    tr = _constant_trace(c, 200, 0, 2)
    pk = _run(d, "p1", tr, 200)
    sd = _run(d, "p1", tr, 200, model="sample_delay")
    assert np.max(np.abs(pk.y - sd.y)) < 1e-9


@pytest.mark.parametrize("c", [1, 2, 3])
def test_cross_model_agreement_with_transport_minimum(c):
    d = make_design(demo_plant(), demo_controller(), demo_prefilter(),
                    d_hat=5, tau_n_min=1, tau_n_max=3)
    tr = _constant_trace(c, 200, 1, 3)
    pk = _run(d, "p1", tr, 200)
    sd = _run(d, "p1", tr, 200, model="sample_delay")
    assert np.max(np.abs(pk.y - sd.y)) < 1e-9


def test_protocols_agree_under_constant_delay():
    d = demo_design()
    tr = _constant_trace(2, 150, 0, 2)
    outs = [_run(d, kind, tr, 150, selector=sel).y
            for kind, sel in [("p1", "oldest"), ("p2", "oldest"),
                              ("p3", "oldest"), ("p3", "newest")]]
    for other in outs[1:]:
        assert np.array_equal(outs[0], other)


def test_loop_is_linear_in_the_reference():
    d = demo_design()
    tr = worst_case_trace(120, 2)
    one = _run(d, "p1", tr, 120, amplitude=1.0)
    three = _run(d, "p1", tr, 120, amplitude=3.0)
    assert np.allclose(three.y, 3.0 * one.y, rtol=1e-12, atol=1e-12)
    assert np.allclose(three.u, 3.0 * one.u, rtol=1e-12, atol=1e-12)


def test_certified_worst_case_run_tracks_reference():
    # tau_bar = 2 is certified for every protocol at the default filter
    d = demo_design()
    tr = worst_case_trace(400, 2)
    for kind in ("p1", "p2", "p3"):
        out = _run(d, kind, tr, 400)
        assert not out.diverged
        assert abs(out.y[-1] - 1.0) < 0.05
        assert np.max(np.abs(out.y)) < 3.0


def test_divergence_is_recorded():
    d = demo_design(lam=0.85, tau_n_max=4)
    tr = worst_case_trace(1300, 4)
    out = _run(d, "p3", tr, 1300)
    assert out.diverged
    assert out.divergence_step is not None
    assert np.max(np.abs(out.y)) > 1e6
    # nothing past the recorded step is meaningful
    assert out.divergence_step <= 1300


def test_scenario_validation():
    d = demo_design()
    tr = worst_case_trace(10, 2)
    r = np.ones(10)
    with pytest.raises(ValueError, match="model"):
        SimScenario(d, Protocol("p1"), tr, r, 10, model="continuous")
    with pytest.raises(ValueError, match="horizon"):
        SimScenario(d, Protocol("p1"), tr, r, 0)
    with pytest.raises(ValueError, match="covers"):
        SimScenario(d, Protocol("p1"), tr, r, 50)
    wide = PacketTrace((3,) * 10, 0, 3)
    with pytest.raises(ValueError, match="bounds"):
        SimScenario(d, Protocol("p1"), wide, r, 10)


def test_disturbance_rejection_settles():
    d = demo_design()
    steps = 400
    dist = np.zeros(steps)
    dist[50:] = 0.2  # constant load after step 50
    tr = _constant_trace(1, steps, 0, 2)
    scenario = SimScenario(design=d, protocol=Protocol("p1"), trace=tr,
                           reference=np.ones(steps), steps=steps,
                           disturbance=dist)
    out = simulate(scenario)
    assert not out.diverged
    assert abs(out.y[-1] - 1.0) < 0.02


def test_trace_csv_shape():
    d = demo_design()
    out = _run(d, "p2", worst_case_trace(12, 2), 12)
    lines = out.to_csv().strip().splitlines()
    assert lines[0] == "k,r,u,y,y_hat,y_F,y_H,selected_index"
    assert len(lines) == 13


def test_sample_delay_scenario_masks_internal_signals():
    d = demo_design()
    out = _run(d, "p1", _constant_trace(1, 20, 0, 2), 20, model="sample_delay")
    assert np.all(np.isnan(out.u))
    assert np.all(out.selected_index == -1)
    assert not np.any(np.isnan(out.y))


def test_sample_delay_rejects_out_of_range_delay():
    d = demo_design()
    model = assemble_augmented(d)
    with pytest.raises(ValueError):
        simulate_sample_delay(model, [5] * 20, 20)


def test_sample_delay_direct_call_matches_scenario_path():
    d = demo_design()
    model = assemble_augmented(d)
    steps = 80
    delays = [2] * steps
    # the scenario path prefilters the reference; replicate that here
    from netsmith.lti_core import realize
    V = realize(d.prefilter)
    x = V.zero_state()
    r_V = np.empty(steps)
    for k in range(steps):
        r_V[k] = V.output(x, 1.0)
        x = V.advance(x, 1.0)
    _, y = simulate_sample_delay(model, delays, steps, reference=r_V)
    via_scenario = _run(d, "p1", _constant_trace(2, steps, 0, 2), steps,
                        model="sample_delay")
    assert np.allclose(y, via_scenario.y, atol=1e-12)
