"""MMSE estimate of the signal from the latest delivered sample.

Between deliveries the estimate decays from the received value toward the
long-run mean:

    X_hat(t) = Q e^{-theta (t - S)} + mu (1 - e^{-theta (t - S)}),   t in [D_i, D_{i+1})

Knowledge that nothing has arrived since the last delivery is ignored.
"""

from dataclasses import dataclass

import numpy as np

from .errors import StaleState
from .process import decay


@dataclass
class EstimatorState:
    params: object
    x0: float = 0.0
    last_packet: object = None

    def deliver(self, packet):
        if self.last_packet is not None and packet.d < self.last_packet.d:
            raise StaleState("deliveries must arrive in time order")
        self.last_packet = packet


def predict(q, s, t, params):
    """Mean of X_t given X_s = q; vectorized over ``t``."""
    w = decay(np.asarray(t, dtype=float) - s, params)
    return q * w + params.mu * (1.0 - w)


def estimate(t, state):
    """X_hat at time(s) ``t`` given the estimator state.

    Before the first delivery the estimate is the prior mean trajectory from
    the known initial value X_0.
    """
    pkt = state.last_packet
    if pkt is None:
        return predict(state.x0, 0.0, t, state.params)
    if np.min(t) < pkt.d:
        raise StaleState("estimate requested at t=%g before delivery at %g" % (np.min(t), pkt.d))
    return predict(pkt.q, pkt.s, t, state.params)


def error_path_integral(times, signal, est):
    """Trapezoidal integral of (signal - est)^2 over the grid ``times``."""
    err2 = (np.asarray(signal, dtype=float) - np.asarray(est, dtype=float)) ** 2
    if err2.size < 2:
        return 0.0
    return float(np.trapezoid(err2, np.asarray(times, dtype=float)))
