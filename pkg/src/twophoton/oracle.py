"""Independent cross-check: conditioned dynamics of the augmented network.

Instead of the ten coupled atom components, this module propagates the full
8x8 conditioned density matrix of emitter1 (x) emitter2 (x) atom driven by
vacuum, with the emitters initialized excited so that each releases a
single photon with the configured pulse shape.  Standard vacuum-input
conditioning applies:

    two-homodyne: for each output channel i,
        drho = -i[H, rho] dt + sum_i D[L_i] rho dt
               + sum_i (L_i rho + rho L_i+ - Tr[(L_i + L_i+) rho] rho) dW_i

    homodyne + counting: homodyne gain on output 1; output 2 clicks arrive
        at rate Tr[L_2+ L_2 rho] and replace rho by L_2 rho L_2+ / Tr[...];
        between clicks the count channel contributes the compensated no-jump
        drift -(L_2 rho L_2+ - Tr[L_2+ L_2 rho] rho) dt.

Because the network's scattering matrix is real orthogonal, the gain for
each measured quadrature involves only the corresponding total coupling
operator; this instantiation is cross-validated against the component
filter, the unconditional master equation, and a vacuum-channel degenerate
case in the test suite.

The weighted partial traces of the 8x8 state, divided by the per-grade
remaining pulse masses, reproduce the component matrices of
``filters.FilterState``; ``extract_components`` realizes that map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filters import (
    COMPONENTS,
    EPS_K,
    FilterState,
    IDX,
    DegenerateJumpError,
    IntegrationBlowupError,
    ModelParams,
)
from .operators import (
    EXCITED_PROJECTOR,
    I2,
    SIGMA_MINUS,
    SIGMA_PLUS,
    dag,
    kron,
    partial_trace_ancillas,
    projector,
    trace,
)
from .pulses import EPS_W, PulseShape, eval_w
from .slh import SLHTriple, build_augmented

__all__ = [
    "OracleState",
    "MeasurementMatrices",
    "check_compatibility",
    "build_oracle",
    "oracle_hh_step",
    "oracle_hp_step",
    "extract_components",
    "GRADE_OPS",
    "grade_weight",
]

# Per-channel grade operators on one emitter qubit: Q^00 = sigma_+ sigma_-,
# Q^01 = sigma_+, Q^10 = sigma_-, Q^11 = I.
GRADE_OPS = {
    "00": EXCITED_PROJECTOR,
    "01": SIGMA_PLUS,
    "10": SIGMA_MINUS,
    "11": I2,
}


def grade_weight(pulse: PulseShape, grade: str, t: float) -> float:
    """Grade-dependent pulse-mass divisor: w, sqrt(w), sqrt(w), or 1."""
    if grade == "11":
        return 1.0
    w = float(eval_w(pulse, t))
    return w if grade == "00" else np.sqrt(w)


@dataclass(frozen=True)
class MeasurementMatrices:
    """Selection matrices defining a pair of measured output records."""

    F1: np.ndarray
    F2: np.ndarray


def check_compatibility(F1, F2, tol: float = 1e-12) -> bool:
    """True iff the records built from (F1, F2) commute with themselves.

    The three conditions are F1 F1+ = F1# F1^T, F2 F1+ = F1# F2^T and
    F2 F1^T = F1 F2^T (each bracket expression must vanish).
    """
    F1 = np.asarray(F1, dtype=complex)
    F2 = np.asarray(F2, dtype=complex)
    c1 = F1 @ F1.conj().T - F1.conj() @ F1.T
    c2 = F2 @ F1.conj().T - F1.conj() @ F2.T
    c3 = F2 @ F1.T - F1 @ F2.T
    return all(np.max(np.abs(c)) <= tol for c in (c1, c2, c3))


@dataclass
class OracleState:
    """Conditioned 8x8 density matrix of emitter1 (x) emitter2 (x) atom."""

    rho: np.ndarray
    t: float

    def copy(self) -> "OracleState":
        return OracleState(self.rho.copy(), self.t)


_KET_UP = np.array([1.0, 0.0], dtype=complex)


def build_oracle(params: ModelParams, t0: float) -> OracleState:
    """Initial state |up, up> for the emitters, |eta> for the atom."""
    up = projector(_KET_UP)
    rho = kron(kron(up, up), projector(params.eta))
    return OracleState(rho, float(t0))


def _couplings(ge: SLHTriple, t: float):
    return ge.L[0](t), ge.L[1](t)


def _liouvillian(rho, H, L1, L2):
    out = -1j * (H @ rho - rho @ H)
    for L in (L1, L2):
        Ld = dag(L)
        LdL = Ld @ L
        out = out + L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def _homodyne_gain(rho, L):
    mean = trace((L + dag(L)) @ rho).real
    return L @ rho + rho @ dag(L) - mean * rho, mean


def _check_finite(rho, t, what):
    if not np.all(np.isfinite(rho.view(float))):
        raise IntegrationBlowupError(
            f"non-finite oracle state after {what} step at t={t}; reduce dt"
        )


def oracle_hh_step(
    state: OracleState, ge: SLHTriple, t: float, dt: float, dW1: float, dW2: float
) -> OracleState:
    """Euler-Maruyama step under two homodyne detections."""
    H = ge.H(t)
    L1, L2 = _couplings(ge, t)
    rho0 = state.rho
    g1, _ = _homodyne_gain(rho0, L1)
    g2, _ = _homodyne_gain(rho0, L2)
    rho = rho0 + _liouvillian(rho0, H, L1, L2) * dt + g1 * dW1 + g2 * dW2
    _check_finite(rho, t, "hh")
    return OracleState(rho, t + dt)


def oracle_hp_step(
    state: OracleState, ge: SLHTriple, t: float, dt: float, dW1: float, dN: int
) -> OracleState:
    """Euler-Maruyama step under homodyne detection plus photon counting.

    A click (dN = 1) replaces the state by the normalized jump state
    exactly; no-click steps carry the compensated counting drift.
    """
    H = ge.H(t)
    L1, L2 = _couplings(ge, t)
    rho0 = state.rho
    jump = L2 @ rho0 @ dag(L2)
    intensity = trace(jump).real
    if dN:
        if intensity <= EPS_K:
            raise DegenerateJumpError(
                f"oracle click at t={t} with intensity {intensity:.3e} <= {EPS_K}"
            )
        rho = jump / intensity
    else:
        g1, _ = _homodyne_gain(rho0, L1)
        rho = (
            rho0
            + (_liouvillian(rho0, H, L1, L2) - (jump - intensity * rho0)) * dt
            + g1 * dW1
        )
    _check_finite(rho, t, "hp")
    return OracleState(rho, t + dt)


def predicted_quadrature_means(state: OracleState, ge: SLHTriple, t: float):
    """Conditional means of the two homodyne records, Tr[(L_i + L_i+) rho]."""
    L1, L2 = _couplings(ge, t)
    m1 = trace((L1 + dag(L1)) @ state.rho).real
    m2 = trace((L2 + dag(L2)) @ state.rho).real
    return m1, m2


def click_intensity(state: OracleState, ge: SLHTriple, t: float) -> float:
    """Conditional click rate of the counted output, Tr[L_2+ L_2 rho]."""
    _, L2 = _couplings(ge, t)
    return trace(dag(L2) @ L2 @ state.rho).real


# Stacked (10, 4, 4) grade weights, one per stored component, reshaped for
# the batched weighted partial trace.
_WEIGHT_STACK = np.stack(
    [
        kron(GRADE_OPS[label.split(";")[0]], GRADE_OPS[label.split(";")[1]])
        for label in COMPONENTS
    ]
).reshape(10, 2, 2, 2, 2)


def extract_components(
    state: OracleState,
    pulse1: PulseShape,
    pulse2: PulseShape,
    return_mask: bool = False,
):
    """Map the 8x8 conditioned state onto the ten filter components.

    Each component is the adjoint of the grade-weighted ancilla partial
    trace, divided by the per-grade remaining pulse masses.  Components
    whose divisor has decayed below EPS_W are flagged unavailable (NaN) and
    reported through the mask rather than fabricated.
    """
    t = state.t
    # all ten weighted partial traces in one contraction; same index
    # convention as operators.partial_trace_ancillas
    traced = np.einsum(
        "nabcd,cdxaby->nxy",
        _WEIGHT_STACK,
        state.rho.reshape(2, 2, 2, 2, 2, 2),
    )
    rho = np.full((10, 2, 2), np.nan, dtype=complex)
    mask = np.zeros(10, dtype=bool)
    for label in COMPONENTS:
        jk, mn = label.split(";")
        w1 = grade_weight(pulse1, jk, t)
        w2 = grade_weight(pulse2, mn, t)
        if w1 < EPS_W or w2 < EPS_W:
            continue
        i = IDX[label]
        rho[i] = dag(traced[i]) / (w1 * w2)
        mask[i] = True
    fs = FilterState(rho, t)
    if return_mask:
        return fs, mask
    return fs


def build_network(params: ModelParams) -> SLHTriple:
    """The augmented network for these parameters (convenience wrapper)."""
    return build_augmented(
        params.kappa1, params.kappa2, params.r, params.pulse1, params.pulse2
    )
