"""Open-network building blocks: scattering/coupling/Hamiltonian triples.

A node is a triple (S, L, H): a constant unitary scattering matrix S of
complex scalars, a vector of coupling operators L and a Hamiltonian H.  The
two composition rules implemented here are

    concatenate(G1, G2): side-by-side stacking,
        (blockdiag(S1, S2), [L1; L2], H1 + H2)

    series(G2, G1): output of G1 feeds G2 (equal channel counts),
        (S2 S1, L2 + S2 L1, H1 + H2 + Im{L2^+ S2 L1})

where Im{M} of an operator expression means (M - M^+) / (2i).

Couplings and Hamiltonians may depend on time, so they are represented as
callables t -> matrix (`OperatorFn`).  All operators are embedded into the
full Hilbert space at construction time; the products never reason about
tensor-factor placement.  The driven-atom network built by
``build_augmented`` lives on emitter1 (x) emitter2 (x) atom (dim 8): two
source qubits that generate the photons, the atom they drive, and a final
beam splitter mixing the two outputs before detection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .operators import I2, SIGMA_MINUS, SIGMA_PLUS, dag, kron
from .pulses import PulseShape, eval_lambda

__all__ = [
    "OperatorFn",
    "SLHTriple",
    "concatenate",
    "series",
    "beam_splitter",
    "build_augmented",
    "embed",
    "ATOM_MINUS_8",
    "EMITTER1_MINUS_8",
    "EMITTER2_MINUS_8",
]


class OperatorFn:
    """Deterministic time-indexed operator on a fixed Hilbert space."""

    def __init__(self, fn: Callable[[float], np.ndarray], dim: int):
        self._fn = fn
        self.dim = dim

    def __call__(self, t: float) -> np.ndarray:
        return self._fn(t)

    @classmethod
    def constant(cls, matrix) -> "OperatorFn":
        m = np.asarray(matrix, dtype=complex)
        return cls(lambda t: m, m.shape[0])

    @classmethod
    def zero(cls, dim: int) -> "OperatorFn":
        return cls.constant(np.zeros((dim, dim), dtype=complex))


def embed(op, slot: int) -> np.ndarray:
    """Embed a 2x2 operator into factor `slot` of emitter1/emitter2/atom."""
    ops = [I2, I2, I2]
    ops[slot] = np.asarray(op, dtype=complex)
    return kron(kron(ops[0], ops[1]), ops[2])


EMITTER1_MINUS_8 = embed(SIGMA_MINUS, 0)
EMITTER2_MINUS_8 = embed(SIGMA_MINUS, 1)
ATOM_MINUS_8 = embed(SIGMA_MINUS, 2)
_ATOM_PLUS_8 = embed(SIGMA_PLUS, 2)


@dataclass
class SLHTriple:
    """One network node: S (n x n scalars), L (n OperatorFn), H (OperatorFn)."""

    S: np.ndarray
    L: tuple
    H: OperatorFn

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=complex)
        self.L = tuple(self.L)
        if self.S.shape != (self.n_channels, self.n_channels):
            raise ValueError("scattering matrix shape does not match channel count")

    @property
    def n_channels(self) -> int:
        return len(self.L)

    @property
    def dim(self) -> int:
        return self.H.dim


def concatenate(g1: SLHTriple, g2: SLHTriple) -> SLHTriple:
    """Side-by-side composition: channels stack, Hamiltonians add."""
    n1, n2 = g1.n_channels, g2.n_channels
    S = np.zeros((n1 + n2, n1 + n2), dtype=complex)
    S[:n1, :n1] = g1.S
    S[n1:, n1:] = g2.S
    h1, h2 = g1.H, g2.H
    H = OperatorFn(lambda t: h1(t) + h2(t), h1.dim)
    return SLHTriple(S, g1.L + g2.L, H)


def series(g2: SLHTriple, g1: SLHTriple) -> SLHTriple:
    """Cascade: the output of g1 drives g2.  Channel counts must match."""
    if g1.n_channels != g2.n_channels:
        raise ValueError(
            f"series product needs equal channel counts, got "
            f"{g2.n_channels} and {g1.n_channels}"
        )
    S = g2.S @ g1.S
    S2 = g2.S
    L1s, L2s = g1.L, g2.L
    n = g1.n_channels

    def make_coupling(i):
        row = S2[i]

        def fn(t):
            out = L2s[i](t).astype(complex, copy=True)
            for j in range(n):
                if row[j] != 0:
                    out += row[j] * L1s[j](t)
            return out

        return OperatorFn(fn, g1.dim)

    L = tuple(make_coupling(i) for i in range(n))

    h1, h2 = g1.H, g2.H

    def hamiltonian(t):
        # Im{L2^+ S2 L1} with Im{M} = (M - M^+) / (2i), per channel pair.
        m = np.zeros((g1.dim, g1.dim), dtype=complex)
        for i in range(n):
            l2i = L2s[i](t)
            for j in range(n):
                if S2[i, j] != 0:
                    m += dag(l2i) @ (S2[i, j] * L1s[j](t))
        return h1(t) + h2(t) + (m - dag(m)) / 2j

    return SLHTriple(S, L, OperatorFn(hamiltonian, g1.dim))


def beam_splitter(r: float, dim: int = 8) -> SLHTriple:
    """Two-port mixer with reflectivity r in [0, 1]; no coupling, no energy."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"beam splitter parameter r={r} outside [0, 1]")
    s = np.sqrt(1.0 - r * r)
    S = np.array([[s, r], [-r, s]], dtype=complex)
    zero = OperatorFn.zero(dim)
    return SLHTriple(S, (zero, zero), zero)


def _emitter_node(pulse: PulseShape, slot: int) -> SLHTriple:
    sig = EMITTER1_MINUS_8 if slot == 0 else EMITTER2_MINUS_8

    def coupling(t):
        return complex(eval_lambda(pulse, t)) * sig

    return SLHTriple(
        np.eye(1, dtype=complex),
        (OperatorFn(coupling, 8),),
        OperatorFn.zero(8),
    )


def _atom_node(kappa1: float, kappa2: float) -> SLHTriple:
    l1 = OperatorFn.constant(np.sqrt(kappa1) * ATOM_MINUS_8)
    l2 = OperatorFn.constant(np.sqrt(kappa2) * ATOM_MINUS_8)
    return SLHTriple(np.eye(2, dtype=complex), (l1, l2), OperatorFn.zero(8))


def build_augmented(
    kappa1: float,
    kappa2: float,
    r: float,
    pulse1: PulseShape,
    pulse2: PulseShape,
) -> SLHTriple:
    """Full vacuum-driven network: two photon sources, the atom, the mixer.

    Returns the closed-form triple on the 8-dimensional space.  It equals
    series(beam_splitter(r), series(atom, concatenate(source1, source2)))
    at every time; the equality is covered by tests.
    """
    if kappa1 < 0 or kappa2 < 0:
        raise ValueError("coupling rates must be nonnegative")
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"beam splitter parameter r={r} outside [0, 1]")
    s = np.sqrt(1.0 - r * r)
    S = np.array([[s, r], [-r, s]], dtype=complex)
    rk1, rk2 = np.sqrt(kappa1), np.sqrt(kappa2)

    def total1(t):
        return (
            complex(eval_lambda(pulse1, t)) * EMITTER1_MINUS_8 + rk1 * ATOM_MINUS_8
        )

    def total2(t):
        return (
            complex(eval_lambda(pulse2, t)) * EMITTER2_MINUS_8 + rk2 * ATOM_MINUS_8
        )

    def l_top(t):
        return s * total1(t) + r * total2(t)

    def l_bottom(t):
        return -r * total1(t) + s * total2(t)

    def hamiltonian(t):
        m = rk1 * _ATOM_PLUS_8 @ (
            complex(eval_lambda(pulse1, t)) * EMITTER1_MINUS_8
        ) + rk2 * _ATOM_PLUS_8 @ (
            complex(eval_lambda(pulse2, t)) * EMITTER2_MINUS_8
        )
        return (m - dag(m)) / 2j

    return SLHTriple(
        S,
        (OperatorFn(l_top, 8), OperatorFn(l_bottom, 8)),
        OperatorFn(hamiltonian, 8),
    )
