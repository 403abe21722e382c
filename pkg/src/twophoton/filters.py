"""Conditioned-state equations for the photon-driven two-level atom.

The conditional state of the atom under continuous measurement of the two
mixed output fields is carried by ten coupled 2x2 component matrices
rho^{jk;mn}, indexed by a pair of grades per channel (11, 10, 01, 00).  The
top component rho^{11;11} is the physical conditioned density matrix; the
lower grades track correlations with the not-yet-absorbed part of each
photon wave packet.  Six more components are adjoints of stored ones:

    rho^{01;11} = (rho^{10;11})+      rho^{11;01} = (rho^{11;10})+
    rho^{10;01} = (rho^{01;10})+      rho^{01;01} = (rho^{10;10})+
    rho^{00;01} = (rho^{00;10})+      rho^{01;00} = (rho^{10;00})+

Two detection schemes are implemented:

    hh: both outputs homodyned -> two diffusive innovations dW1, dW2
    hp: output 1 homodyned, output 2 photon-counted -> dW1 and clicks dN

The drift (shared by both schemes) and the hh gain equations are
adjoint-consistent and preserve trace and hermiticity of rho^{11;11}.  The
hp jump update is transcribed exactly from its defining equations, which
contain coefficient asymmetries (2 vs 1 on adjoint-paired terms) and a
click-rate pairing that break those conservation laws at jumps; they are
kept verbatim by design, and the independent augmented-model propagator in
``oracle`` is the arbiter used to quantify the resulting deviation.

The state array has shape (10, ..., 2, 2); an optional batch axis in the
middle lets an ensemble of trajectories step in lockstep through the same
code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .operators import (
    EXCITED_PROJECTOR,
    SIGMA_MINUS,
    SIGMA_PLUS,
    commutator,
    dag,
    dissipator,
    ket,
    projector,
    trace,
)
from .pulses import PulseShape, eval_xi

__all__ = [
    "COMPONENTS",
    "EPS_K",
    "FilterState",
    "ModelParams",
    "MeasurementScheme",
    "two_homodyne",
    "homodyne_photocount",
    "component",
    "init_state",
    "z_signals",
    "k_signals",
    "KSignals",
    "drift_increment",
    "drift_raw",
    "hh_step",
    "hp_step",
    "jump_numerators",
    "master_step",
    "excitation_probability",
    "renormalized",
    "IntegrationBlowupError",
    "DegenerateJumpError",
]

# Stored (independent) components, in a fixed order.
COMPONENTS = (
    "11;11",
    "10;11",
    "00;11",
    "11;10",
    "10;10",
    "01;10",
    "00;10",
    "11;00",
    "10;00",
    "00;00",
)
IDX = {label: i for i, label in enumerate(COMPONENTS)}

# Virtual components, realized as adjoints of stored partners.
ADJOINT_PAIRS = {
    "01;11": "10;11",
    "11;01": "11;10",
    "10;01": "01;10",
    "01;01": "10;10",
    "00;01": "00;10",
    "01;00": "10;00",
}

EPS_K = 1e-10  # click-rate floor below which a jump is degenerate


class IntegrationBlowupError(RuntimeError):
    """State left the finite range; the step size is too coarse."""


class DegenerateJumpError(RuntimeError):
    """A click arrived while the predicted click rate was ~ 0."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters: couplings, mixer setting, pulses, initial state."""

    kappa1: float
    kappa2: float
    r: float
    pulse1: PulseShape
    pulse2: PulseShape
    eta: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0], complex))

    def __post_init__(self):
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ValueError("coupling rates must be nonnegative")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"beam splitter parameter r={self.r} outside [0, 1]")
        object.__setattr__(self, "eta", ket(self.eta))


@dataclass(frozen=True)
class MeasurementScheme:
    """Detector wiring: 'hh' (two homodyne) or 'hp' (homodyne + counting).

    F1 and F2 select quadrature and intensity contributions of the two
    output channels in the measured records.
    """

    kind: str
    F1: np.ndarray
    F2: np.ndarray


def two_homodyne() -> MeasurementScheme:
    return MeasurementScheme("hh", np.eye(2), np.zeros((2, 2)))


def homodyne_photocount() -> MeasurementScheme:
    return MeasurementScheme("hp", np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))


@dataclass
class FilterState:
    """Stacked component matrices, shape (10, ..., 2, 2), plus current time."""

    rho: np.ndarray
    t: float

    @property
    def batch_shape(self):
        return self.rho.shape[1:-2]

    def copy(self) -> "FilterState":
        return FilterState(self.rho.copy(), self.t)


def component(rho: np.ndarray, label: str) -> np.ndarray:
    """Return component `label`, resolving adjoint-paired virtual labels."""
    if label in IDX:
        return rho[IDX[label]]
    return dag(rho[IDX[ADJOINT_PAIRS[label]]])


def init_state(params: ModelParams, t0: float, batch_shape=()) -> FilterState:
    """Initial condition: |eta><eta| in the four corner components, 0 elsewhere.

    Valid when both pulses still have essentially unit remaining mass at t0,
    so every cross-grade expectation vanishes.
    """
    rho = np.zeros((10,) + tuple(batch_shape) + (2, 2), dtype=complex)
    p = projector(params.eta)
    for label in ("11;11", "00;11", "11;00", "00;00"):
        rho[IDX[label]] = p
    return FilterState(rho, float(t0))


def _xis(params: ModelParams, t: float) -> tuple[complex, complex]:
    return (
        complex(eval_xi(params.pulse1, t)),
        complex(eval_xi(params.pulse2, t)),
    )


def excitation_probability(state: FilterState):
    """Population of |e> under rho^{11;11}; scalar or batch array."""
    ee = state.rho[IDX["11;11"]][..., 0, 0]
    imag = np.max(np.abs(ee.imag)) if ee.size else 0.0
    if imag > 1e-8:
        import warnings

        warnings.warn(
            f"excitation probability has imaginary part {imag:.2e} > 1e-8",
            RuntimeWarning,
        )
    out = ee.real
    return float(out) if out.ndim == 0 else out


def drift_increment(state: FilterState, params: ModelParams, t: float) -> np.ndarray:
    """Deterministic part of d(rho)/dt for all ten components.

    Shared by both measurement schemes; dropping the noise terms and
    propagating this alone is the unconditional master equation.
    """
    x1, x2 = _xis(params, t)
    return drift_raw(state.rho, params, x1, x2)


def drift_raw(rho: np.ndarray, params: ModelParams, x1: complex, x2: complex):
    """Drift with the pulse amplitudes passed explicitly.

    Linear in the stored components (up to the adjoint pairings) and in
    each amplitude separately, which lets the engine materialize it as a
    sparse matrix for fast deterministic integration.
    """
    rk1, rk2 = np.sqrt(params.kappa1), np.sqrt(params.kappa2)
    out = (params.kappa1 + params.kappa2) * dissipator(SIGMA_MINUS, rho)

    def comm_right(a):  # [a, sigma_+]
        return commutator(a, SIGMA_PLUS)

    def comm_left(a):  # [sigma_-, a]
        return commutator(SIGMA_MINUS, a)

    for label in COMPONENTS:
        jk, mn = label.split(";")
        i = IDX[label]
        acc = 0.0
        if rk1 != 0.0:
            if jk == "11":
                acc = acc + rk1 * x1 * comm_right(component(rho, "01;" + mn))
                acc = acc + rk1 * np.conj(x1) * comm_left(component(rho, "10;" + mn))
            elif jk == "10":
                acc = acc + rk1 * x1 * comm_right(component(rho, "00;" + mn))
            elif jk == "01":
                acc = acc + rk1 * np.conj(x1) * comm_left(component(rho, "00;" + mn))
        if rk2 != 0.0:
            if mn == "11":
                acc = acc + rk2 * x2 * comm_right(component(rho, jk + ";01"))
                acc = acc + rk2 * np.conj(x2) * comm_left(component(rho, jk + ";10"))
            elif mn == "10":
                acc = acc + rk2 * x2 * comm_right(component(rho, jk + ";00"))
            elif mn == "01":
                acc = acc + rk2 * np.conj(x2) * comm_left(component(rho, jk + ";00"))
        if not np.isscalar(acc) or acc != 0.0:
            out[i] = out[i] + acc
    return out


def z_signals(state: FilterState, params: ModelParams, t: float):
    """Predicted quadrature means (z11, z12) of the two pre-mixer channels."""
    x1, x2 = _xis(params, t)
    return _z_signals_raw(state.rho, params, x1, x2)


def _z_signals_raw(rho: np.ndarray, params: ModelParams, x1: complex, x2: complex):
    rk1, rk2 = np.sqrt(params.kappa1), np.sqrt(params.kappa2)
    pm = SIGMA_PLUS + SIGMA_MINUS
    t1111 = trace(pm @ rho[IDX["11;11"]])
    z11 = (
        np.conj(x1) * trace(component(rho, "10;11"))
        + x1 * trace(component(rho, "01;11"))
        + rk1 * t1111
    )
    z12 = (
        np.conj(x2) * trace(component(rho, "11;10"))
        + x2 * trace(component(rho, "11;01"))
        + rk2 * t1111
    )
    return z11.real, z12.real


class KSignals(NamedTuple):
    k11: float
    k12: float
    kp: float      # click rate, clamped at 0
    kp_raw: float  # unclamped value, for diagnostics


def k_signals(state: FilterState, params: ModelParams, t: float) -> KSignals:
    """Homodyne means plus the photon-counting click rate Kp.

    Kp is the defining trace expression evaluated verbatim, with the photon
    amplitudes entering as scalar insertions; it can go slightly negative
    through discretization, so the clamped value is what jump sampling uses.
    """
    x1, x2 = _xis(params, t)
    k11, k12 = _z_signals_raw(state.rho, params, x1, x2)
    kp_raw = _kp_raw(state.rho, params, x1, x2)
    return KSignals(k11, k12, np.maximum(kp_raw, 0.0), kp_raw)


def _kp_raw(rho: np.ndarray, params: ModelParams, x1: complex, x2: complex):
    rk1, rk2 = np.sqrt(params.kappa1), np.sqrt(params.kappa2)
    r = params.r
    s = np.sqrt(1.0 - r * r)

    def quad_form(xa, ka, xb, kb, comp):
        # Tr[(xa* + ka sigma_+)(xb + kb sigma_-) comp]
        op = (
            np.conj(xa) * xb * np.eye(2)
            + np.conj(xa) * kb * SIGMA_MINUS
            + ka * xb * SIGMA_PLUS
            + ka * kb * EXCITED_PROJECTOR
        )
        return trace(op @ comp)

    kp = (
        r * r * quad_form(x1, rk1, x1, rk1, component(rho, "11;00"))
        - r * s * quad_form(x2, rk2, x1, rk1, component(rho, "10;01"))
        - r * s * quad_form(x1, rk1, x2, rk2, component(rho, "01;10"))
        + (1 - r * r) * quad_form(x2, rk2, x2, rk2, component(rho, "00;11"))
    )
    return kp.real


def _channel_blocks(rho: np.ndarray, params: ModelParams, x1: complex, x2: complex):
    """Per-channel gain blocks A1, A2 for every stored component.

    A1 collects the channel-1 quadrature terms (photon amplitude x1 and
    atomic emission sqrt(kappa1)); A2 the channel-2 ones.  The measured
    gains are beam-splitter mixtures of these blocks.
    """
    rk1, rk2 = np.sqrt(params.kappa1), np.sqrt(params.kappa2)
    a1 = np.empty_like(rho)
    a2 = np.empty_like(rho)
    for label in COMPONENTS:
        jk, mn = label.split(";")
        i = IDX[label]
        tgt = rho[i]
        sandwich = tgt @ SIGMA_PLUS + SIGMA_MINUS @ tgt
        b1 = rk1 * sandwich
        if jk == "11":
            b1 = b1 + np.conj(x1) * component(rho, "10;" + mn)
            b1 = b1 + x1 * component(rho, "01;" + mn)
        elif jk == "10":
            b1 = b1 + x1 * component(rho, "00;" + mn)
        elif jk == "01":
            b1 = b1 + np.conj(x1) * component(rho, "00;" + mn)
        b2 = rk2 * sandwich
        if mn == "11":
            b2 = b2 + np.conj(x2) * component(rho, jk + ";10")
            b2 = b2 + x2 * component(rho, jk + ";01")
        elif mn == "10":
            b2 = b2 + x2 * component(rho, jk + ";00")
        elif mn == "01":
            b2 = b2 + np.conj(x2) * component(rho, jk + ";00")
        a1[i] = b1
        a2[i] = b2
    return a1, a2


def _gains_hh(state: FilterState, params: ModelParams, t: float):
    """Innovation gains (G1, G2) for the two-homodyne scheme."""
    rho = state.rho
    x1, x2 = _xis(params, t)
    r = params.r
    s = np.sqrt(1.0 - r * r)
    a1, a2 = _channel_blocks(rho, params, x1, x2)
    z11, z12 = z_signals(state, params, t)
    m1 = np.asarray(s * z11 + r * z12)[..., None, None]
    m2 = np.asarray(-r * z11 + s * z12)[..., None, None]
    g1 = s * a1 + r * a2 - rho * m1
    g2 = -r * a1 + s * a2 - rho * m2
    return g1, g2


def _gain_w1_hp(state: FilterState, params: ModelParams, t: float):
    """Homodyne-channel gain for the homodyne + counting scheme.

    Identical in form to the first homodyne gain of the hh scheme.
    """
    rho = state.rho
    x1, x2 = _xis(params, t)
    r = params.r
    s = np.sqrt(1.0 - r * r)
    a1, a2 = _channel_blocks(rho, params, x1, x2)
    k11, k12, _, _ = k_signals(state, params, t)
    m1 = np.asarray(s * k11 + r * k12)[..., None, None]
    return s * a1 + r * a2 - rho * m1


def jump_numerators(state: FilterState, params: ModelParams, t: float) -> np.ndarray:
    """Unnormalized post-click components, transcribed verbatim.

    The click replaces each component by numerator / Kp.  The coefficient
    asymmetries (2 vs 1 on adjoint-paired terms) are intentional; see the
    module docstring.
    """
    x1, x2 = _xis(params, t)
    return _jump_numerators_raw(state.rho, params, x1, x2)


def _jump_numerators_raw(
    rho: np.ndarray, params: ModelParams, x1: complex, x2: complex
) -> np.ndarray:
    x1c, x2c = np.conj(x1), np.conj(x2)
    rk1, rk2 = np.sqrt(params.kappa1), np.sqrt(params.kappa2)
    k1, k2 = params.kappa1, params.kappa2
    r = params.r
    s = np.sqrt(1.0 - r * r)
    rr, rs, ss = r * r, r * s, 1.0 - r * r
    sm, sp = SIGMA_MINUS, SIGMA_PLUS

    def C(label):
        return component(rho, label)

    out = np.empty_like(rho)

    out[IDX["11;11"]] = (
        rr
        * (
            2 * (x1 * x1c) * C("00;11")
            + 2 * rk1 * x1 * C("01;11") @ sp
            + rk1 * x1c * sm @ C("10;11")
            + k1 * sm @ C("11;11") @ sp
        )
        - rs
        * (
            2 * x1c * x2 * C("10;01")
            + rk2 * x1c * sm @ C("10;11")
            + 2 * rk1 * x2 * C("11;01") @ sp
            + 2 * x1 * x2c * C("01;10")
            + rk1 * x2c * sm @ C("11;10")
            + 2 * rk2 * x1 * C("01;11") @ sp
        )
        + ss
        * (
            2 * (x2 * x2c) * C("11;00")
            + rk2 * x2c * sm @ C("11;10")
            + 2 * rk2 * x2 * C("11;01") @ sp
            + k2 * sm @ C("11;11") @ sp
        )
    )

    out[IDX["10;11"]] = (
        rr * (2 * rk1 * x1 * C("00;11") @ sp + k1 * sm @ C("10;11") @ sp)
        - rs
        * (
            2 * rk1 * x2 * C("10;01") @ sp
            + 2 * x1 * x2c * C("00;10")
            + rk1 * x2c * sp @ C("10;10")  # sigma_+ on the left, as written
            + 2 * rk2 * x1 * C("00;11") @ sp
        )
        + ss
        * (
            2 * (x2 * x2c) * C("10;00")
            + rk2 * x2c * sm @ C("10;10")
            + 2 * rk2 * x2 * C("10;01") @ sp
            + k2 * sm @ C("10;11") @ sp
        )
    )

    out[IDX["00;11"]] = (
        rr * (k1 * sm @ C("00;11") @ sp)
        - rs * (2 * rk1 * x2 * C("00;01") @ sp + rk1 * x2c * sm @ C("00;10"))
        + ss
        * (
            2 * (x2 * x2c) * C("00;00")
            + rk2 * x2c * sm @ C("00;10")
            + 2 * rk2 * x2 * C("00;01") @ sp
            + k2 * sm @ C("00;11") @ sp
        )
    )

    out[IDX["11;10"]] = (
        rr
        * (
            2 * (x1 * x1c) * C("00;10")
            + rk1 * x1c * sm @ C("10;10")
            + 2 * rk1 * x1 * C("01;10") @ sp
            + k1 * sm @ C("11;10") @ sp
        )
        - rs
        * (
            2 * x1c * x2 * C("10;00")
            + rk2 * x1c * sm @ C("10;10")
            + 2 * rk1 * x2 * C("11;00") @ sp
            + 2 * rk2 * x1 * C("01;10") @ sp
        )
        + ss * (2 * rk2 * x2 * C("11;00") @ sp + k2 * sm @ C("11;10") @ sp)
    )

    out[IDX["10;10"]] = (
        rr * (2 * rk1 * x1 * C("00;10") @ sp + k1 * sm @ C("10;10") @ sp)
        - rs * (2 * rk1 * x2 * C("10;00") @ sp + 2 * rk2 * x1 * C("00;10") @ sp)
        + ss * (2 * rk2 * x2 * C("10;00") @ sp + k2 * sm @ C("10;10") @ sp)
    )

    out[IDX["01;10"]] = (
        rr * (rk1 * x1c * sm @ C("00;10") + k1 * sm @ C("01;10") @ sp)
        - rs
        * (
            2 * x1c * x2 * C("00;00")
            + rk2 * x1c * sm @ C("00;10")
            + 2 * rk1 * x2 * C("01;00") @ sp
        )
        + ss * (2 * rk2 * x2 * C("01;00") @ sp + k2 * sm @ C("01;10") @ sp)
    )

    out[IDX["00;10"]] = (
        rr * (k1 * sm @ C("00;10") @ sp)
        - rs * (2 * rk1 * x2 * C("00;00") @ sp)
        + ss * (2 * rk2 * x2 * C("00;00") @ sp + k2 * sm @ C("00;10") @ sp)
    )

    out[IDX["11;00"]] = (
        rr
        * (
            2 * (x1 * x1c) * C("00;00")
            + rk1 * x1c * sm @ C("10;00")
            + 2 * rk1 * x1 * C("01;00") @ sp
            + k1 * sm @ C("11;00") @ sp
        )
        - rs * (rk2 * x1c * sm @ C("10;00") + 2 * rk2 * x1 * C("01;00") @ sp)
        + ss * (k2 * sm @ C("11;00") @ sp)
    )

    out[IDX["10;00"]] = (
        rr * (2 * rk1 * x1 * C("00;00") @ sp + k1 * sm @ C("10;00") @ sp)
        - rs * (2 * rk2 * x1 * C("00;00") @ sp)
        + ss * (k2 * sm @ C("10;00") @ sp)
    )

    out[IDX["00;00"]] = rr * (k1 * sm @ C("00;00") @ sp) + ss * (
        k2 * sm @ C("00;00") @ sp
    )

    return out


def _as_noise(x):
    return np.asarray(x, dtype=float)[..., None, None]


def hh_step(
    state: FilterState,
    params: ModelParams,
    t: float,
    dt: float,
    dW1,
    dW2,
    renormalize: bool = False,
    check_finite: bool = True,
) -> FilterState:
    """One Euler-Maruyama step of the two-homodyne filter."""
    g1, g2 = _gains_hh(state, params, t)
    rho = (
        state.rho
        + drift_increment(state, params, t) * dt
        + g1 * _as_noise(dW1)
        + g2 * _as_noise(dW2)
    )
    new = FilterState(rho, t + dt)
    if renormalize:
        new = renormalized(new)
    if check_finite and not np.all(np.isfinite(np.ascontiguousarray(new.rho).view(float))):
        raise IntegrationBlowupError(
            f"non-finite filter state after hh step at t={t}; reduce dt"
        )
    return new


def hp_step(
    state: FilterState,
    params: ModelParams,
    t: float,
    dt: float,
    dW1,
    dN,
    renormalize: bool = False,
    check_finite: bool = True,
) -> FilterState:
    """One Euler-Maruyama step of the homodyne + counting filter.

    dN is the raw click indicator (0 or 1 per trajectory).  The click term
    enters compensated, so with the innovation set to zero the update
    reduces to pure drift: the dt part carries -(J - Kp rho), and a click
    adds the Kp^-1-normalized replacement J/Kp - rho.
    """
    rho0 = state.rho
    _, _, kp, kp_raw = k_signals(state, params, t)
    jnum = jump_numerators(state, params, t)
    kp_b = np.asarray(kp)[..., None, None]
    rho = (
        rho0
        + (drift_increment(state, params, t) - (jnum - kp_b * rho0)) * dt
        + _gain_w1_hp(state, params, t) * _as_noise(dW1)
    )
    dN = np.asarray(dN)
    if np.any(dN == 1):
        bad = (dN == 1) & (np.asarray(kp) <= EPS_K)
        if np.any(bad):
            raise DegenerateJumpError(
                f"click at t={t} with click rate <= {EPS_K}; "
                "the supplied record is inconsistent with the state"
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            repl = jnum / np.where(kp_b > EPS_K, kp_b, 1.0) - rho0
        rho = rho + repl * _as_noise(dN)
    new = FilterState(rho, t + dt)
    if renormalize:
        new = renormalized(new)
    if check_finite and not np.all(np.isfinite(np.ascontiguousarray(new.rho).view(float))):
        raise IntegrationBlowupError(
            f"non-finite filter state after hp step at t={t}; reduce dt"
        )
    return new


def master_step(
    state: FilterState,
    params: ModelParams,
    t: float,
    dt: float,
    method: str = "rk4",
) -> FilterState:
    """Deterministic step of the unconditional master equation.

    'rk4' is the default; 'euler' exists so noise-free stochastic steps can
    be compared against it exactly.
    """
    if method == "euler":
        rho = state.rho + drift_increment(state, params, t) * dt
        return FilterState(rho, t + dt)
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")

    def f(rho, tt):
        return drift_increment(FilterState(rho, tt), params, tt)

    r0 = state.rho
    k1 = f(r0, t)
    k2 = f(r0 + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(r0 + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(r0 + dt * k3, t + dt)
    return FilterState(r0 + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), t + dt)


def renormalized(state: FilterState) -> FilterState:
    """Divide every component by Tr rho^{11;11}, preserving their ratios."""
    tr = trace(state.rho[IDX["11;11"]]).real
    scale = np.asarray(tr)[..., None, None]
    return FilterState(state.rho / scale, state.t)
