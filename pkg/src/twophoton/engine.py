"""Time grids, noise streams, trajectories, ensembles and master curves.

Trajectory determinism: every random draw of trajectory `i` under seed `s`
comes from an independent generator keyed by the pair (s, i), so the same
(seed, traj_index) always reproduces the same record regardless of ensemble
size, execution order or threading.  Ensembles step all trajectories in
lockstep through the same vectorized code path, and the mean is taken in
fixed trajectory-index order, so results are bit-reproducible.

The unconditional master curve is integrated with classical RK4 on the same
grid.  Because the drift is linear in the stacked components with
coefficients 1, xi1(t), xi2(t), it is materialized once into three sparse
real matrices (probed column by column from the reference implementation in
``filters``) and the RK4 loop runs over those; a numba kernel is used when
available, with a numpy fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import filters
from .filters import (
    COMPONENTS,
    IDX,
    FilterState,
    MeasurementScheme,
    ModelParams,
    init_state,
)
from .pulses import eval_xi
from .oracle import (
    OracleState,
    build_network,
    build_oracle,
    click_intensity,
    extract_components,
    oracle_hh_step,
    oracle_hp_step,
    predicted_quadrature_means,
)

__all__ = [
    "SimulationConfig",
    "TrajectoryResult",
    "EnsembleResult",
    "MasterResult",
    "OracleComparison",
    "default_window",
    "time_grid",
    "trajectory_rng",
    "simulate_trajectory",
    "run_ensemble",
    "integrate_master",
    "compare_with_oracle",
    "oracle_convergence",
    "peak_stats",
    "local_maxima",
]

MAX_JUMP_PROB = 0.1  # largest tolerated Kp * dt, asserted at runtime


def default_window(params: ModelParams) -> tuple[float, float]:
    """Default simulation window.

    Starts early enough that every photon still has > 1 - 1e-8 of its mass
    ahead; runs to 8 atomic lifetimes of the slowest coupled decay channel.
    """
    starts = [
        p.default_start()
        for p in (params.pulse1, params.pulse2)
        if not p.is_vacuum
    ]
    t0 = min(starts) if starts else 0.0
    rates = [k for k in (params.kappa1, params.kappa2) if k > 0]
    t1 = t0 + 8.0 if not rates else 8.0 / min(rates)
    return t0, t1


@dataclass
class SimulationConfig:
    """Complete description of one run."""

    params: ModelParams
    scheme: MeasurementScheme
    dt: float = 1e-3
    t0: Optional[float] = None
    t1: Optional[float] = None
    n_traj: int = 0
    seed: int = 0
    renormalize: bool = False
    oracle_compare: bool = False

    def __post_init__(self):
        if self.t0 is None or self.t1 is None:
            d0, d1 = default_window(self.params)
            if self.t0 is None:
                self.t0 = d0
            if self.t1 is None:
                self.t1 = d1
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t0 < self.t1:
            raise ValueError(f"empty window: t0={self.t0} >= t1={self.t1}")
        if (self.t1 - self.t0) / self.dt > 1e8:
            raise ValueError("window/dt implies more than 1e8 steps")
        if self.n_traj < 0:
            raise ValueError("n_traj must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    def with_overrides(self, **kw) -> "SimulationConfig":
        return replace(self, **kw)


def time_grid(cfg: SimulationConfig) -> np.ndarray:
    """Uniform grid of integer multiples of dt covering the window.

    Anchoring the grid at integer multiples of dt puts t = 0 exactly on the
    grid, so the cutoff of a rising-exponential pulse coincides with a grid
    point; a delayed cutoff at -T lands on the grid whenever T is a
    multiple of dt (true for all shipped presets).
    """
    dt = cfg.dt
    k0 = math.floor(cfg.t0 / dt + 1e-6)
    k1 = math.ceil(cfg.t1 / dt - 1e-6)
    return np.arange(k0, k1 + 1, dtype=float) * dt


def trajectory_rng(seed: int, traj_index: int) -> np.random.Generator:
    """Independent stream for one trajectory, keyed by (seed, index)."""
    return np.random.default_rng([seed, traj_index])


def _draw_noise(cfg: SimulationConfig, traj_index: int, n_steps: int):
    """Per-trajectory noise arrays, in a fixed documented draw order.

    hh: normals of variance dt, shape (n, 2).
    hp: normals of variance dt, shape (n,), then uniforms, shape (n,).
    """
    rng = trajectory_rng(cfg.seed, traj_index)
    sq = math.sqrt(cfg.dt)
    if cfg.scheme.kind == "hh":
        dw = rng.normal(0.0, sq, size=(n_steps, 2))
        return dw[:, 0], dw[:, 1]
    dw1 = rng.normal(0.0, sq, size=n_steps)
    uni = rng.random(n_steps)
    return dw1, uni


@dataclass
class TrajectoryResult:
    times: np.ndarray
    pe: np.ndarray
    record: dict
    diagnostics: dict


@dataclass
class EnsembleResult:
    times: np.ndarray
    pe_mean: np.ndarray
    pe_stderr: np.ndarray
    pe_master: np.ndarray
    pe_traj: np.ndarray  # (n_traj, n_points)
    peaks: list  # per-trajectory (t*, p*)
    sup_gap: float
    failed: list  # indices of trajectories that left the finite range
    diagnostics: dict


@dataclass
class MasterResult:
    times: np.ndarray
    pe: np.ndarray
    trace: np.ndarray
    final_state: FilterState


@dataclass
class OracleComparison:
    times: np.ndarray
    pe_filter: np.ndarray
    pe_oracle: np.ndarray
    sup_pe_gap: float
    component_sup: dict
    innovation_gap: float
    n_clicks: int


class _BatchRun:
    """Lockstep integration of a batch of trajectories (one code path).

    A single trajectory is a batch of one, so `simulate_trajectory` and
    `run_ensemble` produce bit-identical curves for the same stream key.
    """

    def __init__(self, cfg: SimulationConfig, traj_indices, keep_records: bool):
        self.cfg = cfg
        self.indices = list(traj_indices)
        self.keep_records = keep_records
        self.times = time_grid(cfg)
        self.n_steps = len(self.times) - 1

    def run(self):
        cfg = self.cfg
        B = len(self.indices)
        n = self.n_steps
        dt = cfg.dt
        hp = cfg.scheme.kind == "hp"
        cols = [_draw_noise(cfg, i, n) for i in self.indices]
        noise_a = np.stack([c[0] for c in cols], axis=1)  # (n, B)
        noise_b = np.stack([c[1] for c in cols], axis=1)
        params = cfg.params
        lin = LinearizedFilter(params, cfg.scheme.kind)
        S = _to_real(init_state(params, self.times[0], batch_shape=(B,)).rho)
        pe = np.empty((B, n + 1))
        pe[:, 0] = lin.pe(S)
        alive = np.ones(B, dtype=bool)
        fail_step = np.full(B, -1, dtype=int)
        trace_drift = np.zeros(B)
        herm_drift = np.zeros(B)
        kp_min = np.full(B, np.inf)
        rec_dn = np.zeros((n, B), dtype=np.int8) if hp else None
        rec_kp = np.empty((n, B)) if (hp and self.keep_records) else None

        for k in range(n):
            t = self.times[k]
            if hp:
                x1, x2 = lin._amp(t)
                kp_raw = lin.kp_raw(S, x1, x2)
                kp = np.maximum(kp_raw, 0.0)
                if np.nanmax(kp * dt) >= MAX_JUMP_PROB:
                    raise filters.IntegrationBlowupError(
                        f"click probability Kp*dt >= {MAX_JUMP_PROB} at t={t}; "
                        "reduce dt"
                    )
                dn = (noise_b[k] < np.clip(kp * dt, 0.0, 1.0)).astype(np.int8)
                rec_dn[k] = dn
                if rec_kp is not None:
                    rec_kp[k] = kp
                kp_min = np.minimum(kp_min, kp_raw)
                S = lin.hp_step(S, t, dt, noise_a[k], dn, cfg.renormalize)
            else:
                S = lin.hh_step(S, t, dt, noise_a[k], noise_b[k], cfg.renormalize)
            trace_drift = np.maximum(trace_drift, np.abs(lin.trace_top(S) - 1.0))
            herm_drift = np.maximum(herm_drift, lin.herm_dev_top(S))
            pe[:, k + 1] = lin.pe(S)
            finite = np.isfinite(pe[:, k + 1])
            newly_dead = alive & ~finite
            if np.any(newly_dead):
                fail_step[newly_dead] = k
                alive &= finite

        diagnostics = {
            "trace_drift": trace_drift,
            "herm_drift": herm_drift,
            "kp_raw_min": kp_min if hp else None,
        }
        records = None
        if self.keep_records:
            if hp:
                records = {"dW1": noise_a, "dN": rec_dn, "kp": rec_kp}
            else:
                records = {"dW1": noise_a, "dW2": noise_b}
        return pe, records, diagnostics, fail_step


def simulate_trajectory(cfg: SimulationConfig, traj_index: int) -> TrajectoryResult:
    """Run one conditioned trajectory; deterministic in (seed, traj_index)."""
    run = _BatchRun(cfg, [traj_index], keep_records=True)
    pe, records, diags, fail_step = run.run()
    if fail_step[0] >= 0:
        raise filters.IntegrationBlowupError(
            f"trajectory {traj_index} left the finite range at step "
            f"{fail_step[0]} (t={run.times[fail_step[0]]:.6g})"
        )
    record = {k: (v[:, 0] if v is not None else None) for k, v in records.items()}
    diagnostics = {
        "trace_drift": float(diags["trace_drift"][0]),
        "herm_drift": float(diags["herm_drift"][0]),
        "kp_raw_min": (
            float(diags["kp_raw_min"][0]) if diags["kp_raw_min"] is not None else None
        ),
    }
    return TrajectoryResult(run.times, pe[0], record, diagnostics)


def run_ensemble(cfg: SimulationConfig) -> EnsembleResult:
    """Ensemble of conditioned trajectories plus the master curve.

    Fails if more than 1% of trajectories blow up; otherwise failed
    trajectories are excluded from the statistics and reported.
    """
    if cfg.n_traj < 1:
        raise ValueError("run_ensemble needs n_traj >= 1")
    run = _BatchRun(cfg, range(cfg.n_traj), keep_records=False)
    pe, _, diags, fail_step = run.run()
    failed = [i for i in range(cfg.n_traj) if fail_step[i] >= 0]
    if len(failed) > max(0.01 * cfg.n_traj, 0):
        raise filters.IntegrationBlowupError(
            f"{len(failed)} of {cfg.n_traj} trajectories failed: {failed[:10]}"
        )
    good = np.array([i for i in range(cfg.n_traj) if i not in set(failed)])
    pe_good = pe[good]
    pe_mean = pe_good.mean(axis=0)
    if len(good) > 1:
        pe_stderr = pe_good.std(axis=0, ddof=1) / math.sqrt(len(good))
    else:
        pe_stderr = np.zeros_like(pe_mean)
    master = integrate_master(cfg)
    peaks = [peak_stats(run.times, pe[i]) for i in range(cfg.n_traj)]
    sup_gap = float(np.max(np.abs(pe_mean - master.pe)))
    return EnsembleResult(
        times=run.times,
        pe_mean=pe_mean,
        pe_stderr=pe_stderr,
        pe_master=master.pe,
        pe_traj=pe,
        peaks=peaks,
        sup_gap=sup_gap,
        failed=failed,
        diagnostics={
            "trace_drift_max": float(np.max(diags["trace_drift"])),
            "herm_drift_max": float(np.max(diags["herm_drift"])),
        },
    )


# --------------------------------------------------------------------------
# Materialized linear algebra.
#
# Every piece of the stepping equations is linear in the stacked real state
# vector with coefficients polynomial in the (real) pulse amplitudes:
# the drift and the gain blocks are affine in each amplitude, the click
# numerators and click rate are quadratic.  Probing the reference
# implementation in `filters` column by column turns each piece into a few
# dense real matrices, so a time step becomes a handful of matrix-vector
# products; ensembles step through the same matrices as (80, B) blocks.
# Exact agreement with the reference implementation is covered by tests.

_N_REAL = 80  # 10 components x 4 complex entries, split into re/im


def _to_real(rho: np.ndarray) -> np.ndarray:
    """(10, 2, 2) -> (80,); batched (10, B, 2, 2) -> (80, B)."""
    if rho.ndim == 3:
        flat = rho.reshape(40)
        return np.concatenate([flat.real, flat.imag])
    b = rho.shape[1]
    flat = np.moveaxis(rho, 1, 0).reshape(b, 40).T
    return np.concatenate([flat.real, flat.imag], axis=0)


def _from_real(v: np.ndarray) -> np.ndarray:
    if v.ndim == 1:
        return (v[:40] + 1j * v[40:]).reshape(10, 2, 2)
    flat = (v[:40] + 1j * v[40:]).T
    return np.moveaxis(flat.reshape(-1, 10, 2, 2), 0, 1)


def materialize_drift(params: ModelParams):
    """Probe the reference drift into (A0, A1, A2): drift = A0 + x1 A1 + x2 A2.

    Exact because the drift is linear in the stacked real state and affine
    in each (real) pulse amplitude.
    """
    mats = []
    for x1, x2 in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0)):
        m = np.empty((_N_REAL, _N_REAL))
        basis = np.zeros(_N_REAL)
        for j in range(_N_REAL):
            basis[j] = 1.0
            m[:, j] = _to_real(filters.drift_raw(_from_real(basis), params, x1, x2))
            basis[j] = 0.0
        mats.append(m)
    a0 = mats[0]
    return a0, mats[1] - a0, mats[2] - a0


def _probe_matrix(fn) -> np.ndarray:
    """Materialize a real-linear map R^80 -> R^80 by probing basis vectors."""
    m = np.empty((_N_REAL, _N_REAL))
    basis = np.zeros(_N_REAL)
    for j in range(_N_REAL):
        basis[j] = 1.0
        m[:, j] = fn(basis)
        basis[j] = 0.0
    return m


def _probe_row(fn) -> np.ndarray:
    """Materialize a real-linear functional R^80 -> R by probing."""
    row = np.empty(_N_REAL)
    basis = np.zeros(_N_REAL)
    for j in range(_N_REAL):
        basis[j] = 1.0
        row[j] = fn(basis)
        basis[j] = 0.0
    return row


def _quad_coeffs(probe):
    """Decompose F(x1, x2) = c00 + x1 c10 + x2 c01 + x1^2 c20 + x2^2 c02
    + x1 x2 c11 from probes at six amplitude points."""
    f00 = probe(0.0, 0.0)
    f10 = probe(1.0, 0.0)
    f20 = probe(2.0, 0.0)
    f01 = probe(0.0, 1.0)
    f02 = probe(0.0, 2.0)
    f11 = probe(1.0, 1.0)
    c00 = f00
    c20 = (f20 - 2.0 * f10 + f00) / 2.0
    c10 = f10 - f00 - c20
    c02 = (f02 - 2.0 * f01 + f00) / 2.0
    c01 = f01 - f00 - c02
    c11 = f11 - f00 - c10 - c01 - c20 - c02
    return c00, c10, c01, c20, c02, c11


class LinearizedFilter:
    """Fast stepping through matrices probed from the reference filter.

    Holds the drift (affine in each pulse amplitude), the per-channel gain
    blocks, the signal functionals z11/z12/Kp and, for the counting scheme,
    the click numerator map (quadratic in the amplitudes).  States are real
    vectors of length 80, or (80, B) blocks for ensembles.
    """

    # flat real indices of Pe, the rho^{11;11} trace pair, and its
    # hermiticity-deviation entries (re eg/ge, im ee/gg/eg/ge)
    PE = 0
    TRACE = (0, 3)

    def __init__(self, params: ModelParams, scheme_kind: str):
        self.params = params
        self.kind = scheme_kind
        self.r = params.r
        self.s = math.sqrt(1.0 - params.r**2)
        self.a0, self.a1, self.a2 = materialize_drift(params)

        def block_probe(which, x):
            x1, x2 = (x, 0.0) if which == 1 else (0.0, x)

            def fn(v):
                rho = _from_real(v)
                b1, b2 = filters._channel_blocks(rho, params, x1, x2)
                return _to_real(b1 if which == 1 else b2)

            return _probe_matrix(fn)

        b1_0 = block_probe(1, 0.0)
        self.b1 = (b1_0, block_probe(1, 1.0) - b1_0)
        b2_0 = block_probe(2, 0.0)
        self.b2 = (b2_0, block_probe(2, 1.0) - b2_0)

        def z_probe(which, x):
            x1, x2 = (x, 0.0) if which == 1 else (0.0, x)

            def fn(v):
                st = FilterState(_from_real(v), 0.0)
                z = filters._z_signals_raw(st.rho, params, x1, x2)
                return z[0] if which == 1 else z[1]

            return _probe_row(fn)

        z1_0 = z_probe(1, 0.0)
        self.z1 = (z1_0, z_probe(1, 1.0) - z1_0)
        z2_0 = z_probe(2, 0.0)
        self.z2 = (z2_0, z_probe(2, 1.0) - z2_0)

        if scheme_kind == "hp":
            def kp_probe(x1, x2):
                def fn(v):
                    return filters._kp_raw(_from_real(v), params, x1, x2)

                return _probe_row(fn)

            self.kp = _quad_coeffs(kp_probe)

            def jump_probe(x1, x2):
                def fn(v):
                    rho = _from_real(v)
                    st = FilterState(rho, 0.0)
                    return _to_real(filters._jump_numerators_raw(rho, params, x1, x2))

                return _probe_matrix(fn)

            self.jump = _quad_coeffs(jump_probe)

    # -- evaluation helpers -------------------------------------------------

    def _amp(self, t):
        return (
            float(eval_xi(self.params.pulse1, t)),
            float(eval_xi(self.params.pulse2, t)),
        )

    def drift(self, S, x1, x2):
        out = self.a0 @ S
        if x1 != 0.0:
            out += x1 * (self.a1 @ S)
        if x2 != 0.0:
            out += x2 * (self.a2 @ S)
        return out

    def gains(self, S, x1, x2):
        blk1 = self.b1[0] @ S
        if x1 != 0.0:
            blk1 += x1 * (self.b1[1] @ S)
        blk2 = self.b2[0] @ S
        if x2 != 0.0:
            blk2 += x2 * (self.b2[1] @ S)
        z11 = (self.z1[0] + x1 * self.z1[1]) @ S
        z12 = (self.z2[0] + x2 * self.z2[1]) @ S
        return blk1, blk2, z11, z12

    def kp_raw(self, S, x1, x2):
        c00, c10, c01, c20, c02, c11 = self.kp
        row = c00 + x1 * c10 + x2 * c01 + x1 * x1 * c20 + x2 * x2 * c02 + x1 * x2 * c11
        return row @ S

    def jump_numerator(self, S, x1, x2):
        c00, c10, c01, c20, c02, c11 = self.jump
        out = c00 @ S
        if x1 != 0.0:
            out += x1 * (c10 @ S) + (x1 * x1) * (c20 @ S)
        if x2 != 0.0:
            out += x2 * (c01 @ S) + (x2 * x2) * (c02 @ S)
        if x1 != 0.0 and x2 != 0.0:
            out += (x1 * x2) * (c11 @ S)
        return out

    # -- steps ---------------------------------------------------------------

    def hh_step(self, S, t, dt, dW1, dW2, renormalize=False):
        x1, x2 = self._amp(t)
        blk1, blk2, z11, z12 = self.gains(S, x1, x2)
        r, s = self.r, self.s
        g1 = s * blk1 + r * blk2 - S * (s * z11 + r * z12)
        g2 = -r * blk1 + s * blk2 - S * (-r * z11 + s * z12)
        out = S + self.drift(S, x1, x2) * dt + g1 * dW1 + g2 * dW2
        if renormalize:
            out = out / (out[self.TRACE[0]] + out[self.TRACE[1]])
        return out

    def hp_step(self, S, t, dt, dW1, dN, renormalize=False):
        """Mirror of filters.hp_step; dN may be a 0/1 scalar or (B,) array."""
        x1, x2 = self._amp(t)
        blk1, blk2, k11, k12 = self.gains(S, x1, x2)
        r, s = self.r, self.s
        g1 = s * blk1 + r * blk2 - S * (s * k11 + r * k12)
        kp_raw = self.kp_raw(S, x1, x2)
        kp = np.maximum(kp_raw, 0.0)
        jnum = self.jump_numerator(S, x1, x2)
        out = S + (self.drift(S, x1, x2) - (jnum - kp * S)) * dt + g1 * dW1
        dN = np.asarray(dN)
        if np.any(dN == 1):
            repl = jnum / np.where(kp > filters.EPS_K, kp, 1.0) - S
            out = out + repl * dN
        if renormalize:
            out = out / (out[self.TRACE[0]] + out[self.TRACE[1]])
        return out

    def pe(self, S):
        return S[self.PE]

    def trace_top(self, S):
        return S[self.TRACE[0]] + S[self.TRACE[1]]

    def herm_dev_top(self, S):
        # component 0 entries: flat complex 0..3 -> re 0..3, im 40..43
        return np.maximum.reduce(
            [
                np.abs(S[1] - S[2]),
                np.abs(S[41] + S[42]),
                np.abs(S[40]),
                np.abs(S[43]),
            ]
        )


def _csr(m: np.ndarray):
    data, idx, ptr = [], [], [0]
    for i in range(m.shape[0]):
        cols = np.nonzero(m[i])[0]
        idx.extend(cols.tolist())
        data.extend(m[i, cols].tolist())
        ptr.append(len(idx))
    return (
        np.asarray(data, dtype=np.float64),
        np.asarray(idx, dtype=np.int64),
        np.asarray(ptr, dtype=np.int64),
    )


def _rk4_chunk_python(S, n, dt, x1s, x2s, a0, a1, a2, pe_ix, tr_ix):
    pe = np.empty(n + 1)
    tr = np.empty(n + 1)
    pe[0] = S[pe_ix]
    tr[0] = S[tr_ix[0]] + S[tr_ix[1]]

    def apply(v, x1, x2):
        out = a0 @ v
        if x1 != 0.0:
            out += x1 * (a1 @ v)
        if x2 != 0.0:
            out += x2 * (a2 @ v)
        return out

    for k in range(n):
        j = 2 * k
        k1 = apply(S, x1s[j], x2s[j])
        k2 = apply(S + 0.5 * dt * k1, x1s[j + 1], x2s[j + 1])
        k3 = apply(S + 0.5 * dt * k2, x1s[j + 1], x2s[j + 1])
        k4 = apply(S + dt * k3, x1s[j + 2], x2s[j + 2])
        S = S + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        pe[k + 1] = S[pe_ix]
        tr[k + 1] = S[tr_ix[0]] + S[tr_ix[1]]
    return pe, tr, S


try:  # pragma: no cover - exercised indirectly
    from numba import njit

    @njit(cache=True)
    def _matvec3(d0, i0, p0, d1, i1, p1, d2, i2, p2, x1, x2, v, out):
        for row in range(out.shape[0]):
            acc = 0.0
            for q in range(p0[row], p0[row + 1]):
                acc += d0[q] * v[i0[q]]
            if x1 != 0.0:
                for q in range(p1[row], p1[row + 1]):
                    acc += x1 * d1[q] * v[i1[q]]
            if x2 != 0.0:
                for q in range(p2[row], p2[row + 1]):
                    acc += x2 * d2[q] * v[i2[q]]
            out[row] = acc

    @njit(cache=True)
    def _rk4_chunk_numba(
        S0, n, dt, x1s, x2s, d0, i0, p0, d1, i1, p1, d2, i2, p2, pe_ix, tr0, tr1
    ):
        dim = S0.shape[0]
        S = S0.copy()
        pe = np.empty(n + 1)
        tr = np.empty(n + 1)
        k1 = np.empty(dim)
        k2 = np.empty(dim)
        k3 = np.empty(dim)
        k4 = np.empty(dim)
        y = np.empty(dim)
        pe[0] = S[pe_ix]
        tr[0] = S[tr0] + S[tr1]
        for k in range(n):
            j = 2 * k
            _matvec3(d0, i0, p0, d1, i1, p1, d2, i2, p2, x1s[j], x2s[j], S, k1)
            for m in range(dim):
                y[m] = S[m] + 0.5 * dt * k1[m]
            _matvec3(
                d0, i0, p0, d1, i1, p1, d2, i2, p2, x1s[j + 1], x2s[j + 1], y, k2
            )
            for m in range(dim):
                y[m] = S[m] + 0.5 * dt * k2[m]
            _matvec3(
                d0, i0, p0, d1, i1, p1, d2, i2, p2, x1s[j + 1], x2s[j + 1], y, k3
            )
            for m in range(dim):
                y[m] = S[m] + dt * k3[m]
            _matvec3(
                d0, i0, p0, d1, i1, p1, d2, i2, p2, x1s[j + 2], x2s[j + 2], y, k4
            )
            for m in range(dim):
                S[m] = S[m] + (dt / 6.0) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
            pe[k + 1] = S[pe_ix]
            tr[k + 1] = S[tr0] + S[tr1]
        return pe, tr, S

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

_CHUNK = 500_000  # steps per kernel call; bounds the stage-amplitude arrays


def integrate_master(cfg: SimulationConfig, method: str = "rk4") -> MasterResult:
    """Deterministic integration of the master equation on the grid.

    Independent of measurement scheme, seed and beam-splitter setting (the
    drift contains none of them).  `method` is 'rk4' (default) or 'euler';
    the Euler curve is the exact expectation of the Euler-discretized
    filter trajectories (the drift is linear and the gains are unbiased),
    which is what ensemble means at finite dt should be compared against.
    """
    params = cfg.params
    times = time_grid(cfg)
    n = len(times) - 1
    dt = cfg.dt
    a0, a1, a2 = materialize_drift(params)
    state = init_state(params, times[0])
    S = _to_real(state.rho)
    # Pe = Re rho^{11;11}[0, 0]; flat real indices of the trace entries.
    pe_ix = 0
    tr_ix = (0, 3)
    pe = np.empty(n + 1)
    tr = np.empty(n + 1)
    if method == "euler":
        pe[0] = S[pe_ix]
        tr[0] = S[tr_ix[0]] + S[tr_ix[1]]
        x1s = np.asarray(eval_xi(params.pulse1, times[:-1]), dtype=float)
        x2s = np.asarray(eval_xi(params.pulse2, times[:-1]), dtype=float)
        for k in range(n):
            S = S + dt * (a0 @ S + x1s[k] * (a1 @ S) + x2s[k] * (a2 @ S))
            pe[k + 1] = S[pe_ix]
            tr[k + 1] = S[tr_ix[0]] + S[tr_ix[1]]
        return MasterResult(times, pe, tr, FilterState(_from_real(S), times[-1]))
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    if _HAVE_NUMBA:
        csr = _csr(a0) + _csr(a1) + _csr(a2)
    half = 0.5 * dt
    k_base = int(round(times[0] / dt))
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        stage_idx = 2 * (k_base + done) + np.arange(2 * m + 1)
        stages = stage_idx * half
        x1s = np.asarray(eval_xi(params.pulse1, stages), dtype=float)
        x2s = np.asarray(eval_xi(params.pulse2, stages), dtype=float)
        if _HAVE_NUMBA:
            pe_c, tr_c, S = _rk4_chunk_numba(
                S, m, dt, x1s, x2s, *csr, pe_ix, tr_ix[0], tr_ix[1]
            )
        else:
            pe_c, tr_c, S = _rk4_chunk_python(
                S, m, dt, x1s, x2s, a0, a1, a2, pe_ix, tr_ix
            )
        pe[done : done + m + 1] = pe_c
        tr[done : done + m + 1] = tr_c
        done += m
    return MasterResult(times, pe, tr, FilterState(_from_real(S), times[-1]))


# --------------------------------------------------------------------------
# Synchronized-record comparison against the augmented-model propagator.


def _oracle_pe(state: OracleState) -> float:
    r = state.rho.reshape(4, 2, 4, 2)
    return float(np.einsum("aa->", r[:, 0, :, 0]).real)


def compare_with_oracle(
    cfg: SimulationConfig,
    traj_index: int = 0,
    track_components: bool = True,
) -> OracleComparison:
    """Drive the augmented model with fresh noise and replay its record
    through the component filter; report the pathwise deviations."""
    times = time_grid(cfg)
    noise_a, noise_b = _draw_noise(cfg, traj_index, len(times) - 1)
    return _replay(cfg, times, noise_a, noise_b, track_components)


def _replay(cfg, times, noise_a, noise_b, track_components):
    params = cfg.params
    hp = cfg.scheme.kind == "hp"
    dt = cfg.dt
    n = len(times) - 1
    r = params.r
    s = math.sqrt(1.0 - r * r)
    ge = build_network(params)
    orc = build_oracle(params, times[0])
    lin = LinearizedFilter(params, cfg.scheme.kind)
    S = _to_real(init_state(params, times[0]).rho)
    pe_f = np.empty(n + 1)
    pe_o = np.empty(n + 1)
    pe_f[0] = lin.pe(S)
    pe_o[0] = _oracle_pe(orc)
    comp_sup = {label: 0.0 for label in COMPONENTS} if track_components else None
    innov_gap = 0.0
    n_clicks = 0
    for k in range(n):
        t = times[k]
        x1, x2 = lin._amp(t)
        if hp:
            m1, _ = predicted_quadrature_means(orc, ge, t)
            lam = click_intensity(orc, ge, t)
            dn = int(noise_b[k] < min(max(lam * dt, 0.0), 1.0))
            n_clicks += dn
            dy1 = m1 * dt + noise_a[k]
            _, _, k11, k12 = lin.gains(S, x1, x2)
            dw1_f = dy1 - (s * k11 + r * k12) * dt
            innov_gap = max(innov_gap, abs(dw1_f - noise_a[k]))
            orc = oracle_hp_step(orc, ge, t, dt, noise_a[k], dn)
            S = lin.hp_step(S, t, dt, dw1_f, dn, cfg.renormalize)
        else:
            m1, m2 = predicted_quadrature_means(orc, ge, t)
            dy1 = m1 * dt + noise_a[k]
            dy2 = m2 * dt + noise_b[k]
            _, _, z11, z12 = lin.gains(S, x1, x2)
            dw1_f = dy1 - (s * z11 + r * z12) * dt
            dw2_f = dy2 - (-r * z11 + s * z12) * dt
            innov_gap = max(
                innov_gap, abs(dw1_f - noise_a[k]), abs(dw2_f - noise_b[k])
            )
            orc = oracle_hh_step(orc, ge, t, dt, noise_a[k], noise_b[k])
            S = lin.hh_step(S, t, dt, dw1_f, dw2_f, cfg.renormalize)
        if not np.isfinite(lin.pe(S)):
            raise filters.IntegrationBlowupError(
                f"non-finite filter state during record replay at t={t}; "
                "the filter diverged from the supplied record"
            )
        pe_f[k + 1] = lin.pe(S)
        pe_o[k + 1] = _oracle_pe(orc)
        if track_components:
            ext, mask = extract_components(
                orc, params.pulse1, params.pulse2, return_mask=True
            )
            diff = np.abs(ext.rho - _from_real(S))
            for label in COMPONENTS:
                i = IDX[label]
                if mask[i]:
                    gap = float(np.max(diff[i]))
                    if gap > comp_sup[label]:
                        comp_sup[label] = gap
    return OracleComparison(
        times=times,
        pe_filter=pe_f,
        pe_oracle=pe_o,
        sup_pe_gap=float(np.max(np.abs(pe_f - pe_o))),
        component_sup=comp_sup,
        innovation_gap=innov_gap,
        n_clicks=n_clicks,
    )


def oracle_convergence(cfg: SimulationConfig, traj_index: int = 0, levels: int = 2):
    """Pathwise filter-vs-augmented-model gaps at dt, dt/2, ... on one
    refined noise path (coarse increments are pairwise sums of fine ones).

    All levels share the coarse grid's endpoints so the refined grids nest
    exactly.
    """
    times_c = time_grid(cfg)
    n_c = len(times_c) - 1
    n_f = n_c * 2 ** (levels - 1)
    dt_f = cfg.dt / 2 ** (levels - 1)
    fine = cfg.with_overrides(dt=dt_f)
    noise_a, noise_b = _draw_noise(fine, traj_index, n_f)
    out = []
    for lvl in range(levels):
        step = 2 ** (levels - 1 - lvl)
        dt_l = dt_f * step
        cfg_l = cfg.with_overrides(dt=dt_l)
        times_l = times_c[0] + np.arange(n_f // step + 1) * dt_l
        a = noise_a.reshape(-1, step).sum(axis=1)
        if cfg.scheme.kind == "hp":
            # Coarse uniforms: keep the first fine draw of each block.
            b = noise_b.reshape(-1, step)[:, 0]
        else:
            b = noise_b.reshape(-1, step).sum(axis=1)
        comparison = _replay(cfg_l, times_l, a, b, track_components=False)
        out.append((dt_l, comparison))
    return out


# --------------------------------------------------------------------------
# Curve statistics.


def peak_stats(times, values) -> tuple[float, float]:
    """Global maximum of a curve; ties resolved to the earliest time."""
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("empty curve")
    i = int(np.argmax(values))
    return float(times[i]), float(values[i])


def local_maxima(times, values, min_prominence: float = 1e-4) -> list:
    """Interior local maxima (t, value) with a small prominence filter."""
    v = np.asarray(values)
    out = []
    n = len(v)
    i = 1
    while i < n - 1:
        if v[i] >= v[i - 1] and v[i] >= v[i + 1] and (v[i] > v[i - 1] or v[i] > v[i + 1]):
            # scan left/right to the bracketing minima
            j = i
            while j > 0 and v[j - 1] <= v[j]:
                j -= 1
            m = i
            while m < n - 1 and v[m + 1] <= v[m]:
                m += 1
            prom = v[i] - max(v[j], v[m])
            if prom >= min_prominence:
                out.append((float(times[i]), float(v[i])))
                i = m + 1
                continue
        i += 1
    return out
