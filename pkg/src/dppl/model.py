"""Conditional DPP models for link scheduling.

Two families share one interface:

* ``adhoc``: quality ``exp(theta . [P_h z_ii, I_1, I_2])`` and a Gaussian
  similarity of the cross Tx/Rx distances; the kernel is symmetric.
* ``dronecell``: quality ``sqrt(theta * sinr)`` and an interference similarity
  whose diagonal is lifted to the largest absolute row sum, which makes it
  row diagonally dominant and hence P0 even though it is not symmetric.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import dpp
from .dpp import KernelEnsemble
from .network import NetworkInstance, interference_matrix, pairwise_distance, sinr
from .numerics import logdet_lu, solve

log = logging.getLogger(__name__)

FAMILIES = ("adhoc", "dronecell")
ADHOC_SIGMA0 = 0.05


@dataclass
class ModelParams:
    family: str
    theta: np.ndarray
    sigma: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        self.theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        want = 3 if self.family == "adhoc" else 1
        if self.theta.shape != (want,):
            raise ValueError(f"{self.family} expects {want} theta values, got {self.theta.size}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.family == "dronecell" and not self.theta[0] > 0:
            raise ValueError("dronecell theta must be positive")

    @classmethod
    def default(cls, family: str) -> "ModelParams":
        if family == "adhoc":
            # sigma at the Tx-Rx pair distance scale, where the similarity is PSD
            return cls("adhoc", np.full(3, 1e-2), ADHOC_SIGMA0)
        return cls("dronecell", np.ones(1), 1.0)

    @property
    def scale(self) -> float:
        """theta * sigma, the only combination the dronecell likelihood depends on."""
        return float(self.theta[0] * self.sigma)

    def to_dict(self) -> dict:
        return {"family": self.family, "theta": self.theta.tolist(), "sigma": self.sigma,
                "trainMeta": self.meta}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(d["family"], d["theta"], float(d["sigma"]), dict(d.get("trainMeta", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class TrainingSample:
    instance: NetworkInstance
    optimal: tuple

    def __post_init__(self):
        object.__setattr__(self, "optimal", dpp.as_subset(self.optimal, self.instance.m))


# -- quality and similarity -------------------------------------------------

def adhoc_features(inst: NetworkInstance) -> np.ndarray:
    """Per link: received power and the two strongest interference powers at its Rx."""
    interf = interference_matrix(inst)  # [j, i]: Tx j at Rx i
    top = -np.sort(-interf, axis=0)
    feats = np.zeros((inst.m, 3))
    feats[:, 0] = inst.p_high * np.diag(inst.gain)
    if inst.m > 1:
        feats[:, 1] = top[0]
    if inst.m > 2:
        feats[:, 2] = top[1]
    return feats


def quality_adhoc(inst: NetworkInstance, theta) -> np.ndarray:
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(adhoc_features(inst) @ np.asarray(theta, dtype=float))


def _cross_sq_dist(inst: NetworkInstance) -> np.ndarray:
    """q[i, j] = d_ij^2 + d_ji^2 with d_ij the distance from Tx i to Rx j."""
    d2 = pairwise_distance(inst.tx_pos, inst.rx_pos) ** 2
    return d2 + d2.T


def similarity_adhoc(inst: NetworkInstance, sigma: float, unit_diagonal: bool = True) -> np.ndarray:
    """exp(-(d_ij^2 + d_ji^2) / sigma^2); the diagonal is 1 unless ``unit_diagonal`` is off."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    s = np.exp(-_cross_sq_dist(inst) / sigma**2)
    if unit_diagonal:
        np.fill_diagonal(s, 1.0)
    return s


def gershgorin_lift(offdiag: np.ndarray, per_row: bool = False) -> np.ndarray:
    """Set the diagonal to the largest absolute off-diagonal row sum (or each row's own)."""
    s = np.array(offdiag, dtype=float)
    np.fill_diagonal(s, 0.0)
    radii = np.abs(s).sum(axis=1)
    np.fill_diagonal(s, radii if per_row else radii.max(initial=0.0))
    return s


def dronecell_base_similarity(inst: NetworkInstance, per_row: bool = False) -> np.ndarray:
    # S_ij: interference from BS i onto drone j, in units of the noise power
    return gershgorin_lift(interference_matrix(inst) / inst.noise, per_row)


def similarity_dronecell(inst: NetworkInstance, sigma: float, per_row: bool = False) -> np.ndarray:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return sigma * dronecell_base_similarity(inst, per_row)


def quality_dronecell(inst: NetworkInstance, theta: float) -> np.ndarray:
    """sqrt(theta * SINR) with every ground-set link transmitting."""
    theta = float(np.asarray(theta).reshape(-1)[0])
    if not theta > 0:
        raise ValueError("theta must be positive")
    return np.sqrt(theta * sinr(inst, range(inst.m)))


def kernel(inst: NetworkInstance, params: ModelParams) -> KernelEnsemble:
    if params.family == "adhoc":
        g = quality_adhoc(inst, params.theta)
        s = similarity_adhoc(inst, params.sigma)
    else:
        g = quality_dronecell(inst, params.theta[0])
        s = similarity_dronecell(inst, params.sigma)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("quality overflow; parameters are far outside the data scale")
    if np.any(g == 0.0):
        # a zero-quality link is never selected; keep it in the ground set
        return KernelEnsemble(g[:, None] * s * g[None, :], g=g, S=s)
    return dpp.build_kernel(g, s)


# -- likelihood -------------------------------------------------------------

class _Prepared:
    """Parameter-free per-sample quantities reused across likelihood evaluations."""

    def __init__(self, sample: TrainingSample, family: str):
        inst = sample.instance
        self.y = np.asarray(sample.optimal, dtype=int)
        self.m = inst.m
        if family == "adhoc":
            self.feats = adhoc_features(inst)
            self.q = _cross_sq_dist(inst)
        else:
            gamma = sinr(inst, range(inst.m))
            root = np.sqrt(gamma)
            self.base = root[:, None] * dronecell_base_similarity(inst) * root[None, :]
            self.base_logdet_y = _logdet_pos(self.base[np.ix_(self.y, self.y)])


def _logdet_pos(a) -> float:
    if a.shape[0] == 0:
        return 0.0
    sign, val = logdet_lu(a)
    return val if sign > 0 else -math.inf


def _symmetric_psd(a) -> bool:
    if a.shape[0] == 0:
        return True
    vals = np.linalg.eigvalsh(a)
    return vals[0] >= -dpp.EIG_CLAMP * max(1.0, float(np.max(np.abs(a))))


def _adhoc_terms(p: _Prepared, theta, sigma, want_grad: bool):
    # Interference features are heavy tailed, so g = exp(f . theta) spans many
    # decades. With c = max(g, 1) and h = min(g, 1):
    #   L + I = C (H S H + C^-2) C,
    # where every factor inside the bracket is bounded by one.
    log_g = p.feats @ theta
    if not np.all(np.isfinite(log_g)):
        return -math.inf, None
    s = np.exp(-p.q / sigma**2)
    np.fill_diagonal(s, 1.0)
    if not _symmetric_psd(s):
        return -math.inf, None
    y = p.y
    num = 2.0 * log_g[y].sum() + _logdet_pos(s[np.ix_(y, y)])
    if not math.isfinite(num):
        return -math.inf, None
    log_c = np.maximum(log_g, 0.0)
    h = np.exp(log_g - log_c)
    b = h[:, None] * s * h[None, :]
    b[np.diag_indices(p.m)] += np.exp(-2.0 * log_c)
    sign, den = logdet_lu(b)
    if sign <= 0:
        return -math.inf, None
    value = num - (2.0 * log_c.sum() + den)
    if not want_grad:
        return value, None
    binv = solve(b, np.eye(p.m))
    # (L + I)^-1 = C^-1 B^-1 C^-1
    ainv_diag = np.diag(binv) * np.exp(-2.0 * log_c)
    gtheta = 2.0 * p.feats[y].sum(axis=0) - 2.0 * p.feats.T @ (1.0 - ainv_diag)
    ds = s * (2.0 * p.q / sigma**3)
    np.fill_diagonal(ds, 0.0)
    gsig = -np.sum(binv.T * (h[:, None] * ds * h[None, :]))
    if y.size:
        gsig += np.trace(solve(s[np.ix_(y, y)], ds[np.ix_(y, y)]))
    return value, np.concatenate([gtheta, [gsig]])


def _dronecell_terms(p: _Prepared, theta, sigma, want_grad: bool):
    c = float(theta[0] * sigma)
    if not (math.isfinite(p.base_logdet_y) and 0.0 < c < math.inf):
        return -math.inf, None
    num = len(p.y) * math.log(c) + p.base_logdet_y
    a = c * p.base
    if not np.all(np.isfinite(a)):
        return -math.inf, None
    a[np.diag_indices(p.m)] += 1.0
    sign, den = logdet_lu(a)
    if sign <= 0:
        return -math.inf, None
    value = num - den
    if not want_grad:
        return value, None
    ainv = solve(a, np.eye(p.m))
    # everything goes through c = theta * sigma
    dc = len(p.y) / c - np.sum(ainv.T * p.base)
    return value, np.array([sigma * dc, theta[0] * dc])


def _sample_terms(p: _Prepared, family: str, theta, sigma, want_grad: bool):
    """(log-likelihood, gradient wrt the raw parameters) for one sample."""
    if family == "adhoc":
        return _adhoc_terms(p, theta, sigma, want_grad)
    return _dronecell_terms(p, theta, sigma, want_grad)


def _prepare(train, family: str) -> list[_Prepared]:
    return [_Prepared(s, family) for s in train]


def _total(prepared, family, theta, sigma, want_grad):
    total = 0.0
    grad = np.zeros(len(theta) + 1)
    for i, p in enumerate(prepared):
        v, g = _sample_terms(p, family, theta, sigma, want_grad)
        if not math.isfinite(v):
            return -math.inf, None, i
        total += v
        if want_grad:
            grad += g
    return total, (grad if want_grad else None), None


def log_likelihood(train, params: ModelParams) -> float:
    """Sum over samples of log det(L_Y) - log det(L + I); -inf if any sample is infeasible."""
    total, _, bad = _total(_prepare(train, params.family), params.family,
                           params.theta, params.sigma, False)
    if bad is not None:
        log.debug("sample %d has zero probability under %s", bad, params)
    return total


def grad_log_likelihood(train, params: ModelParams) -> np.ndarray:
    """Gradient with respect to (theta..., sigma)."""
    total, grad, bad = _total(_prepare(train, params.family), params.family,
                              params.theta, params.sigma, True)
    if bad is not None:
        raise ValueError(f"log-likelihood is -inf at sample {bad}; gradient undefined")
    return grad


# -- training ---------------------------------------------------------------

@dataclass
class TrainConfig:
    max_iter: int = 2000
    grad_tol: float = 1e-6
    armijo: float = 1e-4
    step0: float = 1.0
    max_halvings: int = 60
    max_move: float = 10.0  # cap on a trial step's largest free-coordinate change
    seed: int | None = None


class _Coords:
    """Free coordinates for the optimizer.

    Positive parameters enter through their logarithms. Ad-hoc theta
    components are multiplied by the median magnitude of their feature over
    the training links, so typical links see O(1) changes per unit step.
    """

    def __init__(self, family, prepared):
        self.family = family
        if family == "adhoc":
            feats = np.concatenate([p.feats for p in prepared])
            typical = np.median(np.abs(feats), axis=0)
            self.scale = np.where(typical > 0, typical, 1.0)

    def to_free(self, theta, sigma):
        if self.family == "adhoc":
            return np.concatenate([theta * self.scale, [math.log(sigma)]])
        return np.array([math.log(theta[0]), math.log(sigma)])

    def from_free(self, x):
        with np.errstate(over="ignore", under="ignore"):
            if self.family == "adhoc":
                return x[:3] / self.scale, float(np.exp(x[3]))
            return np.exp(x[:1]), float(np.exp(x[1]))

    def grad(self, theta, sigma, grad):
        g = grad.copy()
        g[-1] *= sigma
        if self.family == "adhoc":
            g[:3] /= self.scale
        else:
            g[0] *= theta[0]
        return g


def adhoc_sigma_max(instances, lo: float = 1e-3, hi: float = 1e3, rtol: float = 1e-6) -> float:
    """Largest sigma (by bisection in log sigma) keeping every similarity matrix PSD.

    Returns ``hi`` when the similarity is PSD across the whole bracket.
    """
    q = [_cross_sq_dist(i) for i in instances]

    def ok(sigma):
        for qi in q:
            s = np.exp(-qi / sigma**2)
            np.fill_diagonal(s, 1.0)
            if not _symmetric_psd(s):
                return False
        return True

    if ok(hi):
        return hi
    if not ok(lo):
        raise ValueError(f"similarity is not PSD even at sigma={lo}")
    a, b = math.log(lo), math.log(hi)
    while b - a > rtol:
        mid = 0.5 * (a + b)
        a, b = (mid, b) if ok(math.exp(mid)) else (a, mid)
    return math.exp(a)


def train(train_set, init: ModelParams | None = None, cfg: TrainConfig | None = None,
          trace: list | None = None) -> ModelParams:
    """Maximum likelihood by projected gradient ascent with Armijo backtracking.

    The ascent runs in the free coordinates of ``_Coords``. For the ad-hoc
    family, log sigma is capped where some training similarity matrix stops
    being PSD; the stopping rule uses the projected gradient. The ascent also
    stops when no step improves the objective beyond its rounding level.
    ``trace`` receives the accepted log-likelihood values, starting with the
    initial one.
    """
    train_set = list(train_set)
    if not train_set:
        raise ValueError("training set is empty")
    cfg = cfg or TrainConfig()
    if init is None:
        init = ModelParams.default(train_set[0].instance.scenario)
    family = init.family
    prepared = _prepare(train_set, family)
    coords = _Coords(family, prepared)
    upper = np.full(len(init.theta) + 1, np.inf)
    if family == "adhoc":
        upper[-1] = math.log(adhoc_sigma_max([t.instance for t in train_set]))

    def evaluate(x, want_grad=True):
        th, sg = coords.from_free(x)
        if not (np.all(np.isfinite(th)) and 0.0 < sg < math.inf):
            return -math.inf, None
        val, grad, _ = _total(prepared, family, th, sg, want_grad)
        if grad is not None:
            grad = coords.grad(th, sg, grad)
        return val, grad

    def projected(x, g):
        return np.where((x >= upper) & (g > 0), 0.0, g)

    x = np.minimum(coords.to_free(init.theta, init.sigma), upper)
    fx, gx = evaluate(x)
    if not math.isfinite(fx):
        raise ValueError("log-likelihood is -inf at the initial parameters")
    trace = trace if trace is not None else []
    trace.append(fx)
    step = cfg.step0
    it = 0
    pg = projected(x, gx)
    stop = "max_iter"
    while it < cfg.max_iter:
        if np.max(np.abs(pg)) <= cfg.grad_tol:
            stop = "gradient"
            break
        # increases below this are indistinguishable from rounding in the sum
        noise = 64.0 * np.finfo(float).eps * (abs(fx) + 1.0)
        step = min(step, cfg.max_move / np.max(np.abs(gx)))
        for _ in range(cfg.max_halvings):
            cand = np.minimum(x + step * gx, upper)
            fc, _ = evaluate(cand, want_grad=False)
            if (math.isfinite(fc) and fc > fx + noise
                    and fc >= fx + cfg.armijo * float(gx @ (cand - x))):
                break
            step *= 0.5
        else:
            stop = "precision"
            break
        g_old = gx
        dx = cand - x
        x = cand
        fx, gx = evaluate(x)
        pg = projected(x, gx)
        trace.append(fx)
        it += 1
        # Barzilai-Borwein trial step for the next line search
        curv = -float(dx @ (gx - g_old))
        step = float(dx @ dx) / curv if curv > 0 else 2.0 * step
    theta, sigma = coords.from_free(x)
    meta = {"iterations": it, "finalLogLik": float(fx),
            "gradInfNorm": float(np.max(np.abs(pg))), "stopReason": stop, "seed": cfg.seed}
    return ModelParams(family, theta, sigma, meta)


# -- inference --------------------------------------------------------------

def _psd_projection(k: KernelEnsemble) -> KernelEnsemble:
    vals, vecs = np.linalg.eigh(0.5 * (k.L + k.L.T))
    return KernelEnsemble((vecs * np.clip(vals, 0.0, None)) @ vecs.T)


def infer(inst: NetworkInstance, params: ModelParams, mode: str = "map", rng=None,
          delta: float = 0.5) -> tuple:
    """Schedule for ``inst``: a DPP draw (``mode='sample'``) or the approximate MAP set."""
    k = kernel(inst, params)
    if mode == "map":
        return dpp.map_infer(k, delta)
    if mode != "sample":
        raise ValueError(f"unknown inference mode {mode!r}")
    if rng is None:
        raise ValueError("sampling requires a random generator")
    if not k.symmetric:
        return dpp.sample_sequential(k, rng)
    try:
        return dpp.sample_spectral(k, rng)
    except dpp.NumericFailure:
        log.warning("kernel is not PSD for this instance; sampling from its PSD projection")
        return dpp.sample_spectral(_psd_projection(k), rng)


def sampler_route(inst: NetworkInstance, params: ModelParams) -> str:
    return "spectral" if kernel(inst, params).symmetric else "sequential"
