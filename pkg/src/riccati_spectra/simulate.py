"""Monte Carlo oracle for the filtering loop.

Integrates the plant SDE by Euler-Maruyama and the filter alongside it,
with the continuous measurement process discretized the standard
consistent way: per-step measurement noise has covariance V/dt, so the
innovation intensity matches the continuous-time limit as dt -> 0.
Empirical output/state error covariances and innovation autocorrelations
are accumulated after a burn-in and compared against the steady Riccati
quantities.

Reproducibility: each trial draws from its own substream spawned from the
master seed, and partial sums are combined over a fixed batch structure,
so results are bit-identical for a given (model, config) regardless of
the RICCATI_SPECTRA_THREADS parallelism cap.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import matrix_core as mc
from .errors import ContractError, SimulationBlowUpError
from .model import SystemModel
from .riccati import CareSolution, integrate_riccati_ode

GAIN_STEADY = "steady"
GAIN_TRANSIENT = "transient"

N_LAGS = 20          # innovation autocorrelation lags dt .. 20 dt
_BATCH = 1024        # trials per batch; fixed so batching never shows in results
_BLOCK = 4096        # time steps per noise block


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo run description.

    burn_in None means the default 10/|min Re lambda(A - KC)|, capped at
    t_end/2; initial_state_cov None means the identity. The seed must be
    a 64-bit unsigned integer; every trial derives its own substream
    from it.
    """

    dt: float
    t_end: float
    trials: int
    seed: int
    burn_in: float | None = None
    initial_state_cov: np.ndarray | None = None
    gain_mode: str = GAIN_STEADY


@dataclass(frozen=True)
class SimulationSummary:
    """Empirical second moments and their gaps to the steady solution."""

    empirical_output_error_cov: np.ndarray
    empirical_state_error_cov: np.ndarray
    innovation_autocorr: list          # [(lag, l x l normalized matrix), ...]
    innovation_lag0: np.ndarray
    relative_gap_output: float
    relative_gap_state: float
    dt: float
    t_end: float
    burn_in: float
    trials: int
    seed: int
    gain_mode: str
    steps: int                         # post-burn-in steps per trial


def _thread_cap() -> int:
    raw = os.environ.get("RICCATI_SPECTRA_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _resolve_config(model: SystemModel, care: CareSolution,
                    cfg: SimulationConfig):
    if cfg.dt <= 0.0:
        raise ContractError("dt must be positive")
    if cfg.trials < 1:
        raise ContractError("trials must be a positive integer")
    if not (0 <= cfg.seed < 2 ** 64):
        raise ContractError("seed must be a 64-bit unsigned integer")
    if cfg.gain_mode not in (GAIN_STEADY, GAIN_TRANSIENT):
        raise ContractError(f"unknown gain_mode {cfg.gain_mode!r}")

    if cfg.burn_in is None:
        # slowest closed-loop mode sets how long transients persist
        margin = abs(float(np.max(mc.eigenvalues(care.closed_loop).real)))
        burn = min(10.0 / max(margin, 1e-12), cfg.t_end / 2.0)
    else:
        burn = float(cfg.burn_in)
    if not burn < cfg.t_end:
        raise ContractError("burn_in must be smaller than t_end")
    if cfg.dt > (cfg.t_end - burn) / 100.0:
        raise ContractError(
            "dt too coarse: need dt <= (t_end - burn_in)/100 for meaningful "
            "steady-state statistics"
        )

    if cfg.initial_state_cov is None:
        sigma0 = np.eye(model.m)
    else:
        sigma0 = mc.symmetrize(
            mc.require_square(mc.as_real_matrix(cfg.initial_state_cov,
                                                "initial_state_cov"),
                              "initial_state_cov"))
        if sigma0.shape[0] != model.m:
            raise ContractError(f"initial_state_cov must be {model.m}x{model.m}")
        if mc.min_eig_sym(sigma0) <= 0.0:
            raise ContractError(
                "initial_state_cov must be positive definite (0 < det < inf)")
    return burn, sigma0


def _run_batch(model, gains, cfg, burn_steps, n_steps, sigma0_chol,
               seed_seqs, batch_start, batch_stop):
    """Simulate one batch of trials; returns partial sums.

    gains is either a single (m, l) array (steady mode) or an
    (n_steps, m, l) schedule (transient mode).
    """
    m, l = model.m, model.l
    dt = cfg.dt
    n_trials = batch_stop - batch_start
    rngs = [np.random.default_rng(seed_seqs[i])
            for i in range(batch_start, batch_stop)]

    A_T = model.A.T
    C_T = model.C.T
    # one block-diagonal shaping matrix turns a flat standard-normal draw
    # into [state increment | measurement noise] with covariances W dt
    # and V/dt
    shaping = np.zeros((m + l, m + l))
    shaping[:m, :m] = mc.psd_sqrt(model.W) * math.sqrt(dt)
    shaping[m:, m:] = sla.cholesky(model.V, lower=True).T / math.sqrt(dt)

    x = np.empty((n_trials, m))
    for i, rng in enumerate(rngs):
        x[i] = rng.standard_normal(m)
    x = x @ sigma0_chol.T
    xb = np.zeros((n_trials, m))

    # one-step transition I + dt A and dt-scaled injection gain, so each
    # step is two matmuls per system instead of scale-and-add chains
    Ad_T = np.eye(m) + dt * A_T
    steady = gains.ndim == 2
    if steady:
        Kd_T = np.ascontiguousarray(dt * gains.T)
        Kd_T_sched = None
    else:
        Kd_T_sched = np.ascontiguousarray(np.transpose(dt * gains, (0, 2, 1)))

    sum_state = np.zeros((m, m))
    sum_out = np.zeros((l, l))
    sum_lag = np.zeros((N_LAGS + 1, l, l))
    # innovation history: 20-sample tail carried across blocks so lag
    # pairs spanning a block boundary are exact
    e_hist = np.zeros((N_LAGS + _BLOCK, n_trials, l))
    diff_hist = np.empty((_BLOCK, n_trials, m))
    x_new = np.empty((n_trials, m))
    xb_new = np.empty((n_trials, m))
    feedback = np.empty((n_trials, m))

    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while k < n_steps:
            block = min(_BLOCK, n_steps - k)
            g_start = k
            noise = np.empty((n_trials, block, m + l))
            for i, rng in enumerate(rngs):
                noise[i] = rng.standard_normal((block, m + l))
            shaped = noise.reshape(n_trials * block, m + l) @ shaping
            # step-major layout for the inner loop
            shaped = np.ascontiguousarray(
                shaped.reshape(n_trials, block, m + l).transpose(1, 0, 2))
            state_noise = shaped[:, :, :m]
            meas_noise = shaped[:, :, m:]

            for b in range(block):
                diff = diff_hist[b]
                np.subtract(x, xb, out=diff)
                e = e_hist[N_LAGS + b]
                np.matmul(diff, C_T, out=e)
                e += meas_noise[b]
                np.matmul(x, Ad_T, out=x_new)
                x_new += state_noise[b]
                np.matmul(xb, Ad_T, out=xb_new)
                np.matmul(e, Kd_T if steady else Kd_T_sched[k], out=feedback)
                xb_new += feedback
                x, x_new = x_new, x
                xb, xb_new = xb_new, xb
                k += 1

            # locate any blow-up before touching the accumulators
            if not np.all(np.isfinite(diff_hist[:block])):
                bad = ~np.all(np.isfinite(diff_hist[:block]), axis=2)
                step_idx, trial_idx = np.argwhere(bad)[0]
                raise SimulationBlowUpError(
                    time=(g_start + int(step_idx)) * dt,
                    trial=batch_start + int(trial_idx))
            if not np.all(np.isfinite(x)) or not np.all(np.isfinite(xb)):
                finite = np.all(np.isfinite(x), axis=1) \
                    & np.all(np.isfinite(xb), axis=1)
                raise SimulationBlowUpError(
                    time=k * dt, trial=batch_start + int(np.argmin(finite)))

            # covariance sums over steps past burn-in
            lo = max(burn_steps - g_start, 0)
            if lo < block:
                D = diff_hist[lo:block].reshape(-1, m)
                sum_state += D.T @ D
                O = D @ C_T
                sum_out += O.T @ O

            # lag-j sums pair e_g with e_{g-j} once the earlier sample is
            # past burn-in; e_hist[N_LAGS + b] holds e at global g_start+b
            for j in range(N_LAGS + 1):
                g_lo = max(g_start, burn_steps + j)
                if g_lo >= g_start + block:
                    continue
                a0 = N_LAGS + (g_lo - g_start)
                later = e_hist[a0:N_LAGS + block].reshape(-1, l)
                earlier = e_hist[a0 - j:N_LAGS + block - j].reshape(-1, l)
                sum_lag[j] += later.T @ earlier

            e_hist[:N_LAGS] = e_hist[block:N_LAGS + block]

    return sum_state, sum_out, sum_lag


def run_monte_carlo(model: SystemModel, care: CareSolution,
                    cfg: SimulationConfig, gain=None) -> SimulationSummary:
    """Simulate the plant and filter, returning empirical steady statistics.

    gain overrides the filter gain in steady mode (used e.g. for
    deliberately mis-tuned negative controls); the default is the steady
    Riccati gain. In transient mode the gain follows K(t) = P(t) C^T V^-1
    with P(t) integrated from the initial state covariance.
    """
    burn, sigma0 = _resolve_config(model, care, cfg)
    n_steps = int(round(cfg.t_end / cfg.dt))
    burn_steps = min(int(math.ceil(burn / cfg.dt - 1e-12)), n_steps - 1)

    if cfg.gain_mode == GAIN_STEADY:
        gains = mc.as_real_matrix(gain, "gain") if gain is not None else care.K
        if gains.shape != (model.m, model.l):
            raise ContractError(f"gain must be {model.m}x{model.l}")
        cl = model.A - gains @ model.C
        if np.max(mc.eigenvalues(cl).real) >= 0.0:
            raise ContractError(
                "closed loop A - KC is not Hurwitz; steady-mode simulation "
                "would not reach a stationary regime")
    else:
        if gain is not None:
            raise ContractError("gain override applies to steady mode only")
        traj = integrate_riccati_ode(model, sigma0, cfg.t_end, cfg.dt,
                                     sample_stride=1)
        vinv_ct = mc.solve_linear(model.V, model.C).T
        gains = traj.covariances[:-1] @ vinv_ct    # K at each step time

    sigma0_chol = sla.cholesky(sigma0, lower=True)
    seed_seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)

    batches = [(s, min(s + _BATCH, cfg.trials))
               for s in range(0, cfg.trials, _BATCH)]

    def work(bounds):
        return _run_batch(model, gains, cfg, burn_steps, n_steps,
                          sigma0_chol, seed_seqs, bounds[0], bounds[1])

    cap = _thread_cap()
    if cap > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            partials = list(pool.map(work, batches))
    else:
        partials = [work(b) for b in batches]

    m, l = model.m, model.l
    sum_state = np.zeros((m, m))
    sum_out = np.zeros((l, l))
    sum_lag = np.zeros((N_LAGS + 1, l, l))
    for ps, po, pl in partials:
        sum_state += ps
        sum_out += po
        sum_lag += pl

    steps_eff = n_steps - burn_steps
    n_cov = steps_eff * cfg.trials
    emp_state = mc.symmetrize(sum_state / n_cov)
    emp_out = mc.symmetrize(sum_out / n_cov)

    lag0 = sum_lag[0] / n_cov
    diag = np.sqrt(np.clip(np.diag(lag0), 0.0, None))
    denom = np.outer(diag, diag)
    safe = denom > 1e-300
    autocorr = []
    for j in range(1, N_LAGS + 1):
        count_j = (steps_eff - j) * cfg.trials
        rj = sum_lag[j] / max(count_j, 1)
        normalized = np.zeros((l, l))
        np.divide(rj, denom, out=normalized, where=safe)
        autocorr.append((j * cfg.dt, normalized))

    ref_out = care.output_error_cov
    ref_state = care.P
    gap_out = mc.fro(emp_out - ref_out) / max(mc.fro(ref_out), mc.ABS_FLOOR)
    gap_state = mc.fro(emp_state - ref_state) / max(mc.fro(ref_state),
                                                    mc.ABS_FLOOR)

    for arr in (emp_out, emp_state, lag0):
        arr.setflags(write=False)
    return SimulationSummary(
        empirical_output_error_cov=emp_out,
        empirical_state_error_cov=emp_state,
        innovation_autocorr=autocorr,
        innovation_lag0=lag0,
        relative_gap_output=gap_out,
        relative_gap_state=gap_state,
        dt=cfg.dt,
        t_end=cfg.t_end,
        burn_in=burn,
        trials=cfg.trials,
        seed=cfg.seed,
        gain_mode=cfg.gain_mode,
        steps=steps_eff,
    )


def whiteness_check(summary: SimulationSummary, trials: int, steps: int):
    """Innovation whiteness verdict.

    Passes when every entry of every normalized autocorrelation at lags
    >= dt stays within 4/sqrt(trials*steps) plus a discretization
    allowance of 0.02*dt. Returns (passed, diagnostics) with the worst
    lag and entry.
    """
    threshold = 4.0 / math.sqrt(max(trials * steps, 1)) + 0.02 * summary.dt
    worst_val = 0.0
    worst_lag = None
    worst_entry = (0, 0)
    for lag, mat in summary.innovation_autocorr:
        idx = np.unravel_index(np.argmax(np.abs(mat)), mat.shape)
        val = abs(float(mat[idx]))
        if val > worst_val:
            worst_val = val
            worst_lag = lag
            worst_entry = (int(idx[0]), int(idx[1]))
    passed = worst_val <= threshold
    diagnostics = {
        "threshold": threshold,
        "worst_value": worst_val,
        "worst_lag": worst_lag,
        "worst_entry": worst_entry,
    }
    return passed, diagnostics
