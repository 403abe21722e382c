"""Photon wave packets, their remaining tail mass, and the source couplings.

A single photon in channel i is described by a real pulse shape xi_i(t)
normalized to unit L2 norm.  Two derived functions drive everything else:

    w(t)      remaining probability mass of the pulse after time t,
    lambda(t) = xi(t) / sqrt(w(t)), the coupling of the emitter qubit that
              generates the photon from vacuum.

Supported shapes:

    rising_exp(gamma)             -sqrt(gamma) exp(gamma t / 2) for t < 0
    delayed_rising_exp(gamma, T)  the same shifted to end at t = -T
    gaussian(omega, tau)          peak arrival tau, bandwidth omega
    vacuum()                      no photon: xi = 0, w = 1, lambda = 0

All rates are dimensionless; the atomic decay rate kappa = 1 sets the time
unit.  lambda(t) is clamped to 0 once w(t) < EPS_W: by then the photon has
been emitted with probability 1 - EPS_W and the divergence of xi/sqrt(w) is
purely formal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

__all__ = [
    "EPS_W",
    "PulseShape",
    "rising_exp",
    "delayed_rising_exp",
    "gaussian",
    "vacuum",
    "eval_xi",
    "eval_w",
    "eval_lambda",
]

EPS_W = 1e-12

_KINDS = ("rising_exp", "delayed_rising_exp", "gaussian", "vacuum")


@dataclass(frozen=True)
class PulseShape:
    """Parametrized photon wave packet.

    kind is one of 'rising_exp', 'delayed_rising_exp', 'gaussian', 'vacuum'.
    gamma is the FWHM rate of the exponential shapes, T >= 0 the delay of the
    delayed variant, omega the Gaussian bandwidth and tau its peak arrival
    time.  Unused fields are zero.
    """

    kind: str
    gamma: float = 0.0
    T: float = 0.0
    omega: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.kind in ("rising_exp", "delayed_rising_exp") and self.gamma <= 0:
            raise ValueError("exponential pulses need gamma > 0")
        if self.kind == "delayed_rising_exp" and self.T < 0:
            raise ValueError("delay T must be >= 0")
        if self.kind == "gaussian" and self.omega <= 0:
            raise ValueError("gaussian pulses need omega > 0")

    @property
    def is_vacuum(self) -> bool:
        return self.kind == "vacuum"

    def xi(self, t):
        return eval_xi(self, t)

    def w(self, t):
        return eval_w(self, t)

    def lam(self, t):
        return eval_lambda(self, t)

    def default_start(self) -> float | None:
        """Earliest time the pulse must be tracked from (None for vacuum).

        Chosen so the not-yet-arrived mass satisfies 1 - w(start) < 1e-8.
        """
        if self.kind == "rising_exp":
            return -20.0 / self.gamma
        if self.kind == "delayed_rising_exp":
            return -self.T - 20.0 / self.gamma
        if self.kind == "gaussian":
            return self.tau - 6.0 / self.omega
        return None

    def grid_anchor(self) -> float | None:
        """Discontinuity that must coincide with a time-grid point."""
        if self.kind == "rising_exp":
            return 0.0
        if self.kind == "delayed_rising_exp":
            return -self.T
        return None


def rising_exp(gamma: float) -> PulseShape:
    return PulseShape("rising_exp", gamma=gamma)


def delayed_rising_exp(gamma: float, T: float) -> PulseShape:
    return PulseShape("delayed_rising_exp", gamma=gamma, T=T)


def gaussian(omega: float, tau: float) -> PulseShape:
    return PulseShape("gaussian", omega=omega, tau=tau)


def vacuum() -> PulseShape:
    return PulseShape("vacuum")


def eval_xi(p: PulseShape, t):
    """Pulse amplitude xi(t); real for all supported kinds.

    The exponential shapes have support strictly before their cutoff, so the
    cutoff point itself evaluates to 0.
    """
    t = np.asarray(t, dtype=float)
    if p.kind == "vacuum":
        return np.zeros_like(t)
    if p.kind in ("rising_exp", "delayed_rising_exp"):
        cut = 0.0 if p.kind == "rising_exp" else -p.T
        amp = -math.sqrt(p.gamma) * np.exp(0.5 * p.gamma * (t - cut))
        return np.where(t < cut, amp, 0.0)
    # gaussian
    x = t - p.tau
    return (p.omega**2 / (2.0 * math.pi)) ** 0.25 * np.exp(
        -(p.omega**2) * x * x / 4.0
    )


def eval_w(p: PulseShape, t):
    """Remaining pulse mass w(t), in [0, 1]; w = 1 for a vacuum channel."""
    t = np.asarray(t, dtype=float)
    if p.kind == "vacuum":
        return np.ones_like(t)
    if p.kind in ("rising_exp", "delayed_rising_exp"):
        cut = 0.0 if p.kind == "rising_exp" else -p.T
        return np.where(t < cut, -np.expm1(p.gamma * np.minimum(t - cut, 0.0)), 0.0)
    return 0.5 * erfc(p.omega * (t - p.tau) / math.sqrt(2.0))


def eval_lambda(p: PulseShape, t):
    """Source coupling xi(t)/sqrt(w(t)), clamped to 0 where w(t) < EPS_W."""
    if p.kind == "vacuum":
        return np.zeros_like(np.asarray(t, dtype=float))
    w = eval_w(p, t)
    xi = eval_xi(p, t)
    safe = w >= EPS_W
    return np.where(safe, xi / np.sqrt(np.where(safe, w, 1.0)), 0.0)
