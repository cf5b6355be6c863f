"""Canned models used by the docs, the CLI demo mode, and the test suite."""
from __future__ import annotations

from .lti_core import RationalTF
from .smith_design import PredictorDesign, make_design


def demo_plant(h: float = 1.0) -> RationalTF:
    """Unstable first-order sampled plant 0.0051271/(z - 1.051)."""
    return RationalTF([0.0051271], [1.0, -1.051], h)


def demo_controller(h: float = 1.0) -> RationalTF:
    """PI-type controller 29.504(z - 0.9835)/(z - 1) for the demo plant."""
    return RationalTF([29.504, -29.504 * 0.9835], [1.0, -1.0], h)


def demo_prefilter(h: float = 1.0) -> RationalTF:
    """Reference prefilter 0.16527(z - 0.9)/(z - 0.9835)."""
    return RationalTF([0.16527, -0.16527 * 0.9], [1.0, -0.9835], h)


def demo_design(lam: float = 0.9, tau_n_min: int = 0, tau_n_max: int = 2,
                h: float = 1.0) -> PredictorDesign:
    """Full predictor design for the demo plant: d_hat = 5 plus a
    packetized network channel with delays in [tau_n_min, tau_n_max]."""
    return make_design(demo_plant(h), demo_controller(h), demo_prefilter(h),
                       d_hat=5, tau_n_min=tau_n_min, tau_n_max=tau_n_max,
                       lam=lam)
