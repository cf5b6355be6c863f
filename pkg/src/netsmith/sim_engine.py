"""Closed-loop time-domain simulation.

Two models of the same loop:

  packetized     the plant output is sampled, packetized, and sent over
                 the bounded-delay channel; the receiver applies a
                 selection protocol with zero-order hold.  This is the
                 loop the certificates are about.
  sample_delay   the channel is replaced by a pure time-varying sample
                 delay acting on the measured output, the abstraction
                 behind the LMI model.  The two models agree for constant
                 delays and can disagree dramatically for varying ones:
                 a protocol that re-uses stale packets can destabilize a
                 loop whose sample-delay abstraction is perfectly tame.

All states start at zero.  The simulation declares divergence when the
measured output magnitude crosses DIVERGENCE_LIMIT and stops recording
at that step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import io

import numpy as np

from .lmi_assembly import AugmentedModel, assemble_augmented
from .lti_core import realize
from .packet_channel import ChannelState, PacketTrace, Protocol, channel_step
from .smith_design import PredictorDesign

DIVERGENCE_LIMIT = 1e6
MODELS = ("packetized", "sample_delay")


@dataclass
class SimScenario:
    """One closed-loop run: design, protocol, delay trace, and inputs.

    reference and disturbance are per-step arrays (shorter arrays are
    zero-padded); ``model`` picks the packetized loop or its sample-delay
    abstraction, in which case the trace delays act as per-step sample
    delays and the protocol is irrelevant.
    """
    design: PredictorDesign
    protocol: Protocol
    trace: PacketTrace
    reference: np.ndarray
    steps: int
    disturbance: np.ndarray | None = None
    model: str = "packetized"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.steps < 1:
            raise ValueError("horizon must be at least 1 step")
        if len(self.trace) < self.steps:
            raise ValueError(
                f"delay trace covers {len(self.trace)} packets; horizon needs {self.steps}")
        if (self.trace.tau_min < self.design.tau_n_min
                or self.trace.tau_max > self.design.tau_n_max):
            raise ValueError(
                f"trace delay bounds [{self.trace.tau_min}, {self.trace.tau_max}] exceed "
                f"the design bounds [{self.design.tau_n_min}, {self.design.tau_n_max}]")


@dataclass
class SimTrace:
    """Per-step closed-loop records, truncated at divergence."""
    k: np.ndarray
    r: np.ndarray
    u: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray
    y_F: np.ndarray
    y_H: np.ndarray
    selected_index: np.ndarray
    diverged: bool = False
    divergence_step: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k,r,u,y,y_hat,y_F,y_H,selected_index\n")
        for i in range(len(self.k)):
            vals = (self.r[i], self.u[i], self.y[i], self.y_hat[i],
                    self.y_F[i], self.y_H[i])
            buf.write(f"{int(self.k[i])}," + ",".join(f"{v:.17g}" for v in vals)
                      + f",{int(self.selected_index[i])}\n")
        return buf.getvalue()


def _padded(seq, n: int) -> np.ndarray:
    out = np.zeros(n)
    if seq is not None:
        m = min(len(seq), n)
        out[:m] = np.asarray(seq, dtype=float)[:m]
    return out


def simulate(scenario: SimScenario) -> SimTrace:
    """Run the scenario and return the recorded trace.

    Packetized loop, per step k: the measured output y_k (the delay-free
    plant output lagged d_hat samples) is sent as packet k; the channel
    delivers and selects y_hat; the filter output y_F (driven by y_hat)
    and predictor output y_H (driven by u) are subtracted from the
    prefiltered reference to form the tracking error; the controller
    yields u_k; the disturbance adds at the plant input.
    """
    if scenario.model == "sample_delay":
        return _simulate_sample_delay_scenario(scenario)
    design = scenario.design
    sp = realize(design.plant_nominal)
    sh = realize(design.predictor_block)
    sf = realize(design.filter)
    sc = realize(design.controller)
    sv = realize(design.prefilter)

    n = scenario.steps
    r = _padded(scenario.reference, n)
    w = _padded(scenario.disturbance, n)
    x_p, x_h, x_f, x_c, x_v = (s.zero_state() for s in (sp, sh, sf, sc, sv))
    ybuf = [0.0] * design.d_hat
    state = ChannelState()
    sent = []

    rec = {name: np.zeros(n) for name in ("r", "u", "y", "y_hat", "y_F", "y_H")}
    sel = np.zeros(n, dtype=int)
    diverged = False
    div_step = None
    last = n
    for k in range(n):
        y_raw = sp.output(x_p, 0.0) if sp.order else 0.0
        y_k = ybuf[0] if design.d_hat else y_raw
        sent.append(y_k)
        state.send(k, scenario.trace.arrival(k))
        y_hat = channel_step(state, scenario.protocol, k, sent)
        y_f = sf.output(x_f, y_hat)
        y_h = sh.output(x_h, 0.0)
        r_v = sv.output(x_v, r[k])
        e = r_v - y_f - y_h
        u = sc.output(x_c, e)

        rec["r"][k] = r[k]
        rec["u"][k] = u
        rec["y"][k] = y_k
        rec["y_hat"][k] = y_hat
        rec["y_F"][k] = y_f
        rec["y_H"][k] = y_h
        sel[k] = state.selected_index
        if abs(y_k) > DIVERGENCE_LIMIT:
            diverged = True
            div_step = k
            last = k + 1
            break

        x_p = sp.advance(x_p, u + w[k])
        x_h = sh.advance(x_h, u)
        x_f = sf.advance(x_f, y_hat)
        x_c = sc.advance(x_c, e)
        x_v = sv.advance(x_v, r[k])
        if design.d_hat:
            ybuf.pop(0)
            ybuf.append(y_raw)

    return SimTrace(k=np.arange(last), r=rec["r"][:last], u=rec["u"][:last],
                    y=rec["y"][:last], y_hat=rec["y_hat"][:last],
                    y_F=rec["y_F"][:last], y_H=rec["y_H"][:last],
                    selected_index=sel[:last],
                    diverged=diverged, divergence_step=div_step)


def simulate_sample_delay(model: AugmentedModel, delay_sequence, steps: int,
                          reference=None, disturbance=None):
    """Iterate the sample-delay closed loop and return (xi_history, y).

    delay_sequence holds the per-step network delay tau_k^N, each within
    the model bounds; the state reaches back d_hat + tau_k^N samples with
    zero history.  reference must already be prefiltered (it enters the
    tracking error directly); y is the measured plant output, lagging the
    delay-free plant state by d_hat samples.
    """
    if len(delay_sequence) < steps:
        raise ValueError(f"delay sequence covers {len(delay_sequence)} steps; need {steps}")
    for k in range(steps):
        t = int(delay_sequence[k])
        if not model.tau_n_min <= t <= model.tau_n_max:
            raise ValueError(
                f"delay {t} at step {k} outside bounds "
                f"[{model.tau_n_min}, {model.tau_n_max}]")
    r = _padded(reference, steps)
    w = _padded(disturbance, steps)
    nxi = model.n_xi
    hist = np.zeros((steps + 1, nxi))
    for k in range(steps):
        back = k - model.d_hat - int(delay_sequence[k])
        delayed = hist[back] if back >= 0 else np.zeros(nxi)
        hist[k + 1] = (model.A_tilde @ hist[k] + model.A_d_tilde @ delayed
                       + model.input_reference * r[k]
                       + model.input_disturbance * w[k])
    y = np.zeros(steps)
    for k in range(steps):
        back = k - model.d_hat
        y[k] = model.output_row @ hist[back] if back >= 0 else 0.0
    return hist[1:], y


def _simulate_sample_delay_scenario(scenario: SimScenario) -> SimTrace:
    design = scenario.design
    model = assemble_augmented(design)
    sv = realize(design.prefilter)
    n = scenario.steps
    r = _padded(scenario.reference, n)
    r_v = np.zeros(n)
    x_v = sv.zero_state()
    for k in range(n):
        r_v[k] = sv.output(x_v, r[k])
        x_v = sv.advance(x_v, r[k])
    _, y = simulate_sample_delay(model, scenario.trace.delays[:n], n,
                                 reference=r_v, disturbance=scenario.disturbance)
    diverged = bool(np.any(np.abs(y) > DIVERGENCE_LIMIT))
    last = int(np.argmax(np.abs(y) > DIVERGENCE_LIMIT)) + 1 if diverged else n
    nan = np.full(last, np.nan)
    return SimTrace(k=np.arange(last), r=r[:last], u=nan.copy(), y=y[:last],
                    y_hat=nan.copy(), y_F=nan.copy(), y_H=nan.copy(),
                    selected_index=np.full(last, -1, dtype=int),
                    diverged=diverged,
                    divergence_step=(last - 1) if diverged else None)
