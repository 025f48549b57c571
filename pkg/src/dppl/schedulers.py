"""Baseline link schedulers: successive GP approximation, brute force, independent thinning."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .network import NetworkInstance, dbm_to_watts, sinr_powers, sum_rate

log = logging.getLogger(__name__)

_posv = sla.get_lapack_funcs("posv", dtype=np.float64)

BRUTE_MAX_M = 20


class GpSolverError(RuntimeError):
    def __init__(self, msg, **diagnostics):
        super().__init__(msg)
        self.diagnostics = diagnostics


@dataclass
class GpConfig:
    tol: float = 1e-3  # absolute part of the outer stopping rule on |gamma change|
    rel_tol: float = 1e-2  # relative part; 0 gives the purely absolute rule
    max_outer: int = 100
    p_threshold_dbm: float = 3.0
    p_floor_rel: float = 1e-6  # power floor as a fraction of p_high
    t0: float = 1.0
    mu: float = 10.0
    inner_tol: float = 1e-8  # duality-gap target of the barrier method
    newton_tol: float = 1e-6  # Newton decrement / 2 per centering step
    max_newton: int = 200

    def validate(self, p_high: float):
        if self.tol <= 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be positive")
        p_th = dbm_to_watts(self.p_threshold_dbm)
        if not 0 < self.p_floor_rel * p_high < p_th < p_high:
            raise ValueError("need 0 < p_floor < p_threshold < p_high")

    @classmethod
    def for_scenario(cls, scenario: str, **kw) -> "GpConfig":
        p_th = {"adhoc": 3.0, "dronecell": 15.0}[scenario]
        return cls(p_threshold_dbm=kw.pop("p_threshold_dbm", p_th), **kw)


@dataclass
class ScheduleResult:
    active: tuple
    continuous_powers: np.ndarray
    sum_rate: float
    outer_iters: int = 0
    wall_time: float = 0.0
    solver: str = "gp"
    converged: bool = True
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "active": list(self.active),
            "continuousPowersWatts": [float(p) for p in self.continuous_powers],
            "achievedSumRate": self.sum_rate,
            "outerIters": self.outer_iters,
            "wallTimeMicros": int(round(self.wall_time * 1e6)),
            "solverTag": self.solver,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleResult":
        return cls(
            active=tuple(d["active"]),
            continuous_powers=np.asarray(d["continuousPowersWatts"], dtype=float),
            sum_rate=float(d["achievedSumRate"]),
            outer_iters=int(d["outerIters"]),
            wall_time=d["wallTimeMicros"] * 1e-6,
            solver=d["solverTag"],
            converged=bool(d.get("converged", True)),
        )


# -- monomial surrogate -----------------------------------------------------

def monomial_params(gamma_prev) -> tuple[np.ndarray, np.ndarray]:
    """Tangent monomial k * gamma**alpha of 1 + gamma at gamma_prev."""
    g = np.asarray(gamma_prev, dtype=float)
    if np.any(g <= 0):
        raise ValueError("previous SINR values must be positive")
    alpha = g / (1.0 + g)
    k = np.exp(np.log1p(g) - alpha * np.log(g))
    return k, alpha


def monomial_validity(gamma, gamma_prev) -> bool:
    """prod(1 + gamma) >= prod(k * gamma**alpha), checked in log space."""
    gamma = np.asarray(gamma, dtype=float)
    k, alpha = monomial_params(gamma_prev)
    lhs = np.sum(np.log1p(gamma))
    rhs = np.sum(np.log(k) + alpha * np.log(gamma))
    return bool(lhs >= rhs - 1e-9 * max(1.0, abs(rhs)))


# -- GP subproblem ----------------------------------------------------------

class _Subproblem:
    """max sum_i alpha_i v_i  s.t. SINR constraints, log pfloor <= u <= 0.

    Variables are u = log(P / p_high) and v = log(gamma). Gains are
    pre-scaled by p_high / noise so every coefficient is dimensionless.
    """

    def __init__(self, a: np.ndarray, lower: float):
        self.m = a.shape[0]
        self.log_self = np.log(np.diag(a))
        self.cross = a.copy()
        np.fill_diagonal(self.cross, 0.0)
        self.lower = lower

    def constraints(self, u, v):
        e = np.exp(u)
        denom = 1.0 + e @ self.cross
        return v - u - self.log_self + np.log(denom), e, denom

    def feasible(self, z) -> bool:
        return math.isfinite(self.barrier(z, 0.0, np.zeros(self.m)))

    def barrier(self, z, t, alpha) -> float:
        m = self.m
        u, v = z[:m], z[m:]
        if u.max() >= 0.0 or u.min() <= self.lower:
            return math.inf
        h = self.constraints(u, v)[0]
        if h.max() >= 0.0:
            return math.inf
        return float(-t * (alpha @ v) - np.log(-h).sum() - np.log(-u).sum()
                     - np.log(u - self.lower).sum())

    def newton_step(self, z, t, alpha):
        """Newton direction and decrement for the centering problem at ``t``.

        The v-block of the Hessian is diagonal, so v is eliminated and only
        an m x m positive definite system in u is solved.
        """
        m = self.m
        u, v = z[:m], z[m:]
        h, e, denom = self.constraints(u, v)
        inv_s = -1.0 / h
        # pi[i, j]: share of interferer j in the SINR constraint of link i
        pi = self.cross.T * e[None, :] / denom[:, None]
        ul = u - self.lower
        g_v = inv_s - t * alpha
        pw = pi.T * inv_s
        schur = -(pw @ pi)
        schur[np.diag_indices(m)] += pw.sum(axis=1) + 1.0 / u**2 + 1.0 / ul**2
        g_u = pw.sum(axis=1) - inv_s - 1.0 / u - 1.0 / ul
        rhs = -g_u + (pi.T @ g_v - g_v)
        _, du, info = _posv(schur, rhs, lower=False, overwrite_a=True, overwrite_b=False)
        if info != 0:
            raise np.linalg.LinAlgError(f"Newton system not positive definite (info={info})")
        dv = -g_v / inv_s**2 - (pi @ du - du)
        dec = -(g_u @ du + g_v @ dv)
        return np.concatenate([du, dv]), dec

    def solve(self, z, alpha, cfg: GpConfig):
        t = cfg.t0
        n_constraints = 3 * self.m
        steps = 0
        while True:
            for _ in range(cfg.max_newton):
                try:
                    step, dec = self.newton_step(z, t, alpha)
                except np.linalg.LinAlgError as exc:
                    raise GpSolverError("singular Newton system", t=t, z=z.copy()) from exc
                if dec / 2.0 <= cfg.newton_tol:
                    break
                f0 = self.barrier(z, t, alpha)
                s = 1.0
                while True:
                    cand = z + s * step
                    fc = self.barrier(cand, t, alpha)
                    if fc <= f0 - 0.01 * s * dec:
                        break
                    if fc >= f0 and s * dec <= 1e-12 * max(1.0, abs(f0)):
                        s = 0.0  # below rounding level of the barrier value
                        break
                    s *= 0.5
                    if s < 1e-14:
                        s = 0.0
                        break
                if s == 0.0:
                    break  # no further progress possible at this t
                z = cand
                steps += 1
            else:
                raise GpSolverError("Newton iterations did not converge", t=t, z=z.copy(),
                                    decrement=float(dec))
            if n_constraints / t <= cfg.inner_tol:
                return z, steps
            t *= cfg.mu


def _interior_point(sub: _Subproblem, u: np.ndarray) -> np.ndarray:
    lo = sub.lower
    u = np.clip(u, lo + 1e-3 * abs(lo), -1e-4)
    h = sub.constraints(u, np.zeros_like(u))[0]
    v = -h - 0.05  # puts every SINR constraint 0.05 inside the boundary
    return np.concatenate([u, v])


def gp_schedule(inst: NetworkInstance, cfg: GpConfig | None = None) -> ScheduleResult:
    """Successive monomial (GP) approximation of binary-power sum-rate maximization."""
    cfg = cfg or GpConfig.for_scenario(inst.scenario)
    cfg.validate(inst.p_high)
    start = time.perf_counter()
    m = inst.m
    a = inst.gain * (inst.p_high / inst.noise)
    sub = _Subproblem(a, math.log(cfg.p_floor_rel))
    p_th = dbm_to_watts(cfg.p_threshold_dbm)

    powers = np.full(m, inst.p_high)
    gamma_prev = sinr_powers(inst, powers)
    z = _interior_point(sub, np.zeros(m))
    history = [float(np.sum(np.log1p(gamma_prev)))]
    converged = False
    outer = 0

    while outer < cfg.max_outer:
        outer += 1
        _, alpha = monomial_params(gamma_prev)
        z, _ = sub.solve(z, alpha, cfg)
        powers = inst.p_high * np.exp(z[:m])
        gamma = sinr_powers(inst, powers)
        if not monomial_validity(gamma, gamma_prev):
            raise GpSolverError("tangent monomial exceeds 1 + gamma", outer=outer,
                                gamma=gamma, gamma_prev=gamma_prev)
        history.append(float(np.sum(np.log1p(gamma))))
        if np.all(np.abs(gamma - gamma_prev) <= cfg.tol + cfg.rel_tol * gamma_prev):
            converged = True
            gamma_prev = gamma
            break
        gamma_prev = gamma
        z = _interior_point(sub, z[:m])
    if not converged:
        log.warning("GP did not converge within %d outer iterations", cfg.max_outer)
    active = tuple(int(i) for i in np.flatnonzero(powers >= p_th))
    rate = sum_rate(inst, active)
    return ScheduleResult(active, powers, rate, outer, time.perf_counter() - start,
                          "gp", converged, history)


# -- exact and random baselines ---------------------------------------------

def _all_rates(inst: NetworkInstance, masks: np.ndarray) -> np.ndarray:
    rx = inst.p_high * inst.gain
    f = masks.astype(float)
    total = f @ rx
    signal = f * np.diag(rx)
    gamma = signal / (total - signal + inst.noise)
    return np.sum(np.log2(1.0 + gamma), axis=1)


def brute_force_schedule(inst: NetworkInstance) -> ScheduleResult:
    """Exhaustive search over all binary activations; ties -> smaller, then lexicographic."""
    m = inst.m
    if m > BRUTE_MAX_M:
        raise ValueError(f"brute force guard: m={m} > {BRUTE_MAX_M}")
    start = time.perf_counter()
    bits = 1 << np.arange(m)
    rates = np.empty(1 << m)
    chunk = 1 << 16
    for lo in range(0, 1 << m, chunk):
        codes = np.arange(lo, min(lo + chunk, 1 << m))
        rates[lo: lo + len(codes)] = _all_rates(inst, (codes[:, None] & bits) != 0)
    best = rates.max()
    cands = np.flatnonzero(rates >= best - 1e-12 * max(1.0, best))
    subsets = [tuple(int(i) for i in range(m) if (c >> i) & 1) for c in cands]
    active = min(subsets, key=lambda y: (len(y), y))
    powers = np.zeros(m)
    powers[list(active)] = inst.p_high
    return ScheduleResult(active, powers, sum_rate(inst, active), 0,
                          time.perf_counter() - start, "brute")


def independent_thinning(inst: NetworkInstance, p_active: float, rng) -> tuple:
    if not 0.0 <= p_active <= 1.0:
        raise ValueError("activation probability must lie in [0, 1]")
    return tuple(int(i) for i in np.flatnonzero(rng.random(inst.m) < p_active))


def estimate_pa(train) -> float:
    """Mean fraction of links active in the training schedules."""
    train = list(train)
    if not train:
        raise ValueError("cannot estimate activation probability from an empty training set")
    return float(np.mean([len(s.optimal) / s.instance.m for s in train]))
