"""Ready-made scenarios with embedded reference peak values.

The presets cover single- and two-photon drives with rising-exponential,
delayed, and Gaussian wave packets.  Each carries the reference excitation
peaks its master curve is expected to reproduce (empty for the qualitative
delay-scan presets); ``cli.run_scenario`` turns these into acceptance
flags.  The beam-splitter setting r = 1/sqrt(2) is a balanced default: the
master curve is provably independent of r, so the reference peaks do not
depend on this choice.

All presets start the atom in the ground state and default to master-only
output (n_traj = 0); trajectory counts are runtime options.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import SimulationConfig
from .filters import ModelParams, two_homodyne
from .pulses import delayed_rising_exp, gaussian, rising_exp, vacuum

__all__ = ["PeakTarget", "ScenarioPreset", "PRESETS", "get_preset", "preset_names"]

R_DEFAULT = 1.0 / math.sqrt(2.0)

# Single-photon optimum bandwidth for a Gaussian packet, in units of kappa.
GAUSS_OPT = 1.46


@dataclass(frozen=True)
class PeakTarget:
    """Reference excitation peak: value, optional location, tolerances."""

    pe: float
    t: float | None = None
    pe_tol: float = 0.02
    t_tol: float = 0.1
    kind: str = "global"  # 'global' or 'local'


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    description: str
    cfg: SimulationConfig
    targets: tuple = ()
    qualitative: bool = False


def _cfg(kappa1, kappa2, pulse1, pulse2, r=R_DEFAULT, **kw) -> SimulationConfig:
    params = ModelParams(
        kappa1=kappa1, kappa2=kappa2, r=r, pulse1=pulse1, pulse2=pulse2
    )
    return SimulationConfig(params=params, scheme=two_homodyne(), **kw)


def _build() -> dict:
    p = {}

    p["fig3a_black"] = ScenarioPreset(
        "fig3a_black",
        "single rising-exponential photon, matched width (gamma = kappa)",
        _cfg(1.0, 0.0, rising_exp(1.0), vacuum()),
        targets=(PeakTarget(pe=1.0, t=0.0),),
    )
    p["fig3a_blue"] = ScenarioPreset(
        "fig3a_blue",
        "two identical rising-exponential photons, gamma = 5 kappa",
        _cfg(1.0, 1.0, rising_exp(5.0), rising_exp(5.0)),
        targets=(PeakTarget(pe=0.5),),
    )
    p["fig3a_red"] = ScenarioPreset(
        "fig3a_red",
        "two identical rising-exponential photons, gamma = kappa",
        _cfg(1.0, 1.0, rising_exp(1.0), rising_exp(1.0)),
        targets=(PeakTarget(pe=0.28),),
    )
    p["fig3a_purple"] = ScenarioPreset(
        "fig3a_purple",
        "identical photons, asymmetric couplings kappa2 = 0.1 kappa1",
        _cfg(1.0, 0.1, rising_exp(1.0), rising_exp(1.0)),
        targets=(PeakTarget(pe=0.77),),
    )
    p["fig3a_green"] = ScenarioPreset(
        "fig3a_green",
        "fast photon (gamma1 = 2) plus quasi-monochromatic photon (gamma2 = 0.01)",
        _cfg(1.0, 1.0, rising_exp(2.0), rising_exp(0.01)),
        targets=(PeakTarget(pe=0.5),),
    )
    p["fig3b_T10"] = ScenarioPreset(
        "fig3b_T10",
        "sequential photons, delay T = 10, gamma = 2 kappa",
        _cfg(1.0, 1.0, delayed_rising_exp(2.0, 10.0), rising_exp(2.0)),
        targets=(PeakTarget(pe=0.5),),
    )
    p["fig3b_T5"] = ScenarioPreset(
        "fig3b_T5",
        "sequential photons, delay T = 5 (qualitative delay scan)",
        _cfg(1.0, 1.0, delayed_rising_exp(2.0, 5.0), rising_exp(2.0)),
        qualitative=True,
    )
    p["fig3b_T1"] = ScenarioPreset(
        "fig3b_T1",
        "sequential photons, delay T = 1 (qualitative delay scan)",
        _cfg(1.0, 1.0, delayed_rising_exp(2.0, 1.0), rising_exp(2.0)),
        qualitative=True,
    )
    p["fig3b_weak"] = ScenarioPreset(
        "fig3b_weak",
        "sequential photons, delay T = 10, weak second coupling kappa2 = 0.1",
        _cfg(1.0, 0.1, delayed_rising_exp(1.0, 10.0), rising_exp(1.0)),
        targets=(PeakTarget(pe=0.91),),
    )
    p["fig4a"] = ScenarioPreset(
        "fig4a",
        "single Gaussian photon at the single-photon optimum bandwidth",
        _cfg(1.0, 0.0, gaussian(GAUSS_OPT, 3.0), vacuum()),
        targets=(PeakTarget(pe=0.80, t=4.0),),
    )
    p["fig4b"] = ScenarioPreset(
        "fig4b",
        "two Gaussian photons arriving at tau = 3 and tau = 6",
        _cfg(1.0, 1.0, gaussian(2 * GAUSS_OPT, 3.0), gaussian(2 * GAUSS_OPT, 6.0)),
        targets=(
            PeakTarget(pe=0.40, t=3.5, kind="local"),
            PeakTarget(pe=0.40, t=6.5, kind="local"),
        ),
    )
    p["fig4c"] = ScenarioPreset(
        "fig4c",
        "Gaussian photon in channel 1, vacuum in the coupled channel 2",
        _cfg(1.0, 1.0, gaussian(2 * GAUSS_OPT, 3.0), vacuum()),
        targets=(PeakTarget(pe=0.40),),
    )
    p["fig4d"] = ScenarioPreset(
        "fig4d",
        "two simultaneous Gaussian photons (tau1 = tau2 = 3)",
        _cfg(1.0, 1.0, gaussian(2 * GAUSS_OPT, 3.0), gaussian(2 * GAUSS_OPT, 3.0)),
        targets=(PeakTarget(pe=0.71, t=3.5),),
    )
    return p


PRESETS = _build()


def preset_names() -> list:
    return list(PRESETS)


def get_preset(name: str) -> ScenarioPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(PRESETS)}"
        ) from None
