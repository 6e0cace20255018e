"""Seeded Monte-Carlo engines: small-ball probability estimation,
phase-transition sweeps over the sample count, and stability sweeps over
the measurement perturbation budget.

Every trial derives its own 64-bit seed from the plan's master seed via a
documented splitmix64 mix of (master_seed, row_index, trial_index), so
results are reproducible trial-by-trial and independent of the worker
count used to execute them.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from . import bounds, spectral
from .ensembles import (COMPLEX_UNIFORM_BALL, REAL_GENERIC, REAL_UNIFORM_BALL,
                        ConstraintScenario, Ensemble, ScenarioError,
                        build_ensemble, mix_seed,
                        sample_uniform_complex_ball_batch)
from .lifting import LiftedMatrix, apply_A, apply_G, mean_isometry_radius
from .recovery import (align_and_distance, is_recovered, solve_fixed_support,
                       solve_sparse_enumerate)

__all__ = [
    "TrialPlan",
    "SweepRow",
    "estimate_small_ball_prob",
    "mean_isometry_relative_error",
    "max_feasible_deviation",
    "run_phase_transition",
    "run_stability_sweep",
    "transition_csv",
    "stability_csv",
    "run_manifest",
]

TRANSITION_HEADER = "n,trials,successes,rate,d,two_d,mean_lifted_error"
STABILITY_HEADER = ("delta,trials,violations,violation_rate,epsilon,"
                    "bound_raw,bound_clamped,max_deviation,mean_lifted_error")


@dataclass(frozen=True)
class TrialPlan:
    """Configuration of one seeded sweep.

    noise_level is the l2 budget of the time-domain perturbation e, so the
    measurement proximity parameter is delta = 2 * noise_level. sweep holds
    the n grid (phase transition) or the delta grid (stability).
    """

    sc: ConstraintScenario
    ensemble_tag: str
    trials: int
    sweep: Tuple[float, ...]
    master_seed: int = 0
    restarts: int = 20
    noise_level: float = 0.0
    R: Optional[float] = None
    mode: str = "single_point"
    starts: int = 3
    cap: int = 100_000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.noise_level < 0:
            raise ValueError("noise_level must be nonnegative")
        object.__setattr__(self, "sweep", tuple(self.sweep))

    def to_dict(self) -> dict:
        d = {
            "sc": self.sc.to_dict(),
            "ensemble_tag": self.ensemble_tag,
            "trials": self.trials,
            "sweep": list(self.sweep),
            "master_seed": self.master_seed,
            "restarts": self.restarts,
            "noise_level": self.noise_level,
            "R": self.R,
            "mode": self.mode,
            "starts": self.starts,
            "cap": self.cap,
        }
        return d


@dataclass(frozen=True)
class SweepRow:
    value: float
    trials: int
    successes: int
    rate: float
    mean_lifted_error: float
    annotations: dict = field(default_factory=dict)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def estimate_small_ball_prob(M, R: float, rho: float, trials: int,
                             rng: np.random.Generator,
                             batch: int = 20_000) -> Tuple[float, float]:
    """Empirical frequency of |a^* M conj(b)| <= rho for a, b uniform on
    radius-R complex balls, with its binomial standard error."""
    M = np.asarray(M.M if isinstance(M, LiftedMatrix) else M, dtype=np.complex128)
    if np.linalg.norm(M) == 0.0:
        raise ValueError("M must be nonzero")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m1, m2 = M.shape
    hits = 0
    done = 0
    while done < trials:
        size = min(batch, trials - done)
        a = sample_uniform_complex_ball_batch(m1, R, rng, size)
        b = sample_uniform_complex_ball_batch(m2, R, rng, size)
        vals = np.einsum("tm,mk,tk->t", a.conj(), M, b.conj(), optimize=True)
        hits += int(np.count_nonzero(np.abs(vals) <= rho))
        done += size
    p_hat = hits / trials
    std_err = math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / trials) / trials)
    return p_hat, std_err


def mean_isometry_relative_error(m1: int, m2: int, n: int, R: float,
                                 trials: int, seed: int,
                                 batch: int = 2_000) -> float:
    """Relative Frobenius error of the trial average of the normal operator
    applied to a fixed random test matrix, against the matrix itself."""
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((m1, m2)) + 1j * rng.standard_normal((m1, m2))
    M /= np.linalg.norm(M)
    acc = np.zeros((m1, m2), dtype=np.complex128)
    done = 0
    while done < trials:
        size = min(batch, trials - done)
        a = sample_uniform_complex_ball_batch(m1, R, rng, size * n).reshape(size, n, m1)
        b = sample_uniform_complex_ball_batch(m2, R, rng, size * n).reshape(size, n, m2)
        s = np.einsum("tjm,mk,tjk->tj", a.conj(), M, b.conj(), optimize=True)
        acc += n * np.einsum("tj,tjm,tjk->mk", s, a, b, optimize=True)
        done += size
    avg = acc / trials
    return float(np.linalg.norm(avg - M) / np.linalg.norm(M))


def ensemble_radius(tag: str, sc: ConstraintScenario,
                    R: Optional[float]) -> Optional[float]:
    """R for build_ensemble: user value if given, the mean-isometry default
    for ball tags, None for generic tags (which take no radius)."""
    if R is not None:
        return R
    if tag in (COMPLEX_UNIFORM_BALL, REAL_UNIFORM_BALL):
        return mean_isometry_radius(sc.n, sc.m1, sc.m2)
    return None


def _noise_on_sphere(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return radius * g / np.linalg.norm(g)


def _plant_factors(sc: ConstraintScenario, real: bool,
                   rng: np.random.Generator) -> LiftedMatrix:
    """Random admissible rank-1 matrix, normalized to unit Frobenius norm."""
    def draw(m, s):
        if real:
            v = rng.standard_normal(m).astype(np.complex128)
        else:
            v = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
        if s is not None and s < m:
            keep = np.sort(rng.choice(m, size=s, replace=False))
            mask = np.zeros(m, dtype=bool)
            mask[keep] = True
            v = np.where(mask, v, 0.0)
        return v

    x = draw(sc.m1, sc.s1)
    y = draw(sc.m2, None if sc.kind == "mixed" else sc.s2)
    nrm = np.linalg.norm(x) * np.linalg.norm(y)
    return LiftedMatrix.from_factors(x / nrm, y)


def _run_trials(trials: int, worker, workers: int) -> list:
    if workers <= 1:
        return [worker(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(trials)))


def run_phase_transition(plan: TrialPlan, workers: int = 1) -> list[SweepRow]:
    """Recovery success rate versus the sample count n.

    Each trial plants a unit-norm admissible rank-1 matrix, measures it
    (optionally with spherical noise of radius noise_level), solves with
    the scenario-appropriate solver, and scores success by the recovery
    threshold. Rows carry the thresholds d and 2d for annotation.
    """
    rows = []
    real = plan.ensemble_tag in (REAL_GENERIC, REAL_UNIFORM_BALL)

    for row_idx, value in enumerate(plan.sweep):
        n = int(value)
        try:
            sc_n = plan.sc.with_n(n)
        except ScenarioError:
            # sub-threshold sweep points are outside the validated domain
            # but still well-defined as experiments
            d = plan.sc.to_dict()
            d["n"] = n
            sc_n = ConstraintScenario.unchecked(**d)
        d = bounds.sample_complexity_d(sc_n)

        def trial(i, sc_n=sc_n, row_idx=row_idx):
            seed = mix_seed(plan.master_seed, row_idx, i)
            ens = build_ensemble(sc_n, plan.ensemble_tag, mix_seed(seed, 0),
                                 R=ensemble_radius(plan.ensemble_tag, sc_n, plan.R))
            plant_rng = np.random.default_rng(mix_seed(seed, 1))
            solver_rng = np.random.default_rng(mix_seed(seed, 2))
            M0 = _plant_factors(sc_n, real, plant_rng)
            z = apply_G(ens, M0)
            if plan.noise_level > 0:
                z = z + _noise_on_sphere(sc_n.n, plan.noise_level, plant_rng)
            z_tilde = spectral.dft(z) / np.sqrt(sc_n.n)
            if sc_n.kind == "subspace":
                res = solve_fixed_support(ens, z_tilde, range(sc_n.m1), range(sc_n.m2),
                                          restarts=plan.restarts, rng=solver_rng,
                                          truth=M0)
            else:
                res = solve_sparse_enumerate(ens, z_tilde, sc_n,
                                             restarts=plan.restarts, rng=solver_rng,
                                             cap=plan.cap, truth=M0)
            return is_recovered(res.M_hat, M0), res.lifted_error

        results = _run_trials(plan.trials, trial, workers)
        successes = sum(1 for ok, _ in results if ok)
        mean_err = float(np.mean([err for _, err in results]))
        rows.append(SweepRow(value=n, trials=plan.trials, successes=successes,
                             rate=successes / plan.trials,
                             mean_lifted_error=mean_err,
                             annotations={"d": d, "two_d": 2 * d}))
    return rows


def _pack(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.concatenate([x.real, x.imag, y.real, y.imag])


def _unpack(p: np.ndarray, m1: int, m2: int) -> Tuple[np.ndarray, np.ndarray]:
    x = p[:m1] + 1j * p[m1:2 * m1]
    y = p[2 * m1:2 * m1 + m2] + 1j * p[2 * m1 + m2:]
    return x, y


def _deviation_objective(p, ens, M0, t0, delta, mu):
    """Penalized objective (value, gradient) for maximizing the Frobenius
    deviation from M0 subject to measurement proximity <= delta and the unit
    Frobenius ball. Gradients are exact (Wirtinger calculus on the factors)."""
    m1, m2 = M0.shape
    x, y = _unpack(p, m1, m2)
    M = np.outer(x, y)
    diff = M - M0
    u = ens.a.conj() @ x
    v = ens.b.conj() @ y
    r = u * v - t0

    dev2 = float(np.linalg.norm(diff))**2
    s = float(np.linalg.norm(r))
    h = max(s - delta, 0.0)
    t = float(np.linalg.norm(M))
    h2 = max(t - 1.0, 0.0)
    val = -dev2 + mu * h * h + mu * h2 * h2

    gx = -(diff @ y.conj())
    gy = -(diff.T @ x.conj())
    if h > 0.0 and s > 0.0:
        w = v.conj() * r
        gx += mu * h / s * (ens.a.T @ w)
        w = u.conj() * r
        gy += mu * h / s * (ens.b.T @ w)
    if h2 > 0.0 and t > 0.0:
        gx += mu * h2 / t * (M @ y.conj())
        gy += mu * h2 / t * (M.T @ x.conj())
    grad = np.concatenate([2 * gx.real, 2 * gx.imag, 2 * gy.real, 2 * gy.imag])
    return val, grad


def _feasible_deviation(ens, M0, x0, y0, x, y, delta) -> float:
    """Largest feasible deviation along the factor segment from (x0, y0) to
    (x, y): proximity <= delta and Frobenius norm <= 1, with tiny slack."""
    t0 = apply_A(ens, M0)
    best = 0.0
    for t in np.linspace(0.0, 1.0, 65):
        xt = x0 + t * (x - x0)
        yt = y0 + t * (y - y0)
        Mt = np.outer(xt, yt)
        if np.linalg.norm(Mt) > 1.0 + 1e-9:
            continue
        prox = np.linalg.norm((ens.a.conj() @ xt) * (ens.b.conj() @ yt) - t0)
        if prox <= delta * (1.0 + 1e-9):
            best = max(best, float(np.linalg.norm(Mt - M0)))
    return best


def max_feasible_deviation(ens: Ensemble, M0: LiftedMatrix, delta: float,
                           starts: int, rng: np.random.Generator,
                           mu: float = 1e4, maxiter: int = 200) -> float:
    """Heuristic multi-start maximization of the deviation from M0 within
    the delta measurement ball. Lower-bound evidence on the worst case; the
    true guarantee is universal and cannot be certified by search."""
    t0 = apply_A(ens, M0)
    x0, y0 = M0.x, M0.y
    m1, m2 = M0.shape
    best = 0.0
    for k in range(max(1, starts)):
        if k == 0:
            scale = 0.1 + 0.5 * delta
            xs = x0 + scale * (rng.standard_normal(m1) + 1j * rng.standard_normal(m1))
            ys = y0 + scale * (rng.standard_normal(m2) + 1j * rng.standard_normal(m2))
        else:
            xs = (rng.standard_normal(m1) + 1j * rng.standard_normal(m1)) / np.sqrt(2)
            ys = (rng.standard_normal(m2) + 1j * rng.standard_normal(m2)) / np.sqrt(2)
            nrm = np.linalg.norm(xs) * np.linalg.norm(ys)
            xs, ys = xs / nrm, ys
        res = minimize(_deviation_objective, _pack(xs, ys),
                       args=(ens, M0.M, t0, delta, mu),
                       jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter})
        xf, yf = _unpack(res.x, m1, m2)
        best = max(best, _feasible_deviation(ens, M0.M, x0, y0, xf, yf, delta))
    return best


def run_stability_sweep(plan: TrialPlan, workers: int = 1) -> list[SweepRow]:
    """Observed worst-case deviation versus the measurement budget delta.

    Per delta and trial: draw a uniform-ball ensemble, plant a unit-norm
    matrix, search for the largest feasible deviation, and record whether
    it violates the predicted reconstruction level. delta = 0 degenerates
    to a noiseless uniqueness check.
    """
    if plan.ensemble_tag != COMPLEX_UNIFORM_BALL:
        raise ValueError("stability sweeps require the complex uniform-ball ensemble")
    sc = plan.sc
    R = plan.R if plan.R is not None else mean_isometry_radius(sc.n, sc.m1, sc.m2)
    rows = []
    for row_idx, delta in enumerate(plan.sweep):
        delta = float(delta)
        if delta > 0:
            eps = bounds.epsilon_of_delta(sc, plan.mode, R, delta)
            raw, clamped = bounds.failure_prob_bound(sc, plan.mode, R, delta, eps)
        else:
            eps, raw, clamped = 0.0, 0.0, 0.0

        def trial(i, row_idx=row_idx, delta=delta, eps=eps):
            seed = mix_seed(plan.master_seed, row_idx, i)
            ens = build_ensemble(sc, COMPLEX_UNIFORM_BALL, mix_seed(seed, 0), R=R)
            plant_rng = np.random.default_rng(mix_seed(seed, 1))
            search_rng = np.random.default_rng(mix_seed(seed, 2))
            M0 = _plant_factors(sc, False, plant_rng)
            if delta == 0.0:
                z_tilde = apply_A(ens, M0)
                if sc.kind == "subspace":
                    res = solve_fixed_support(ens, z_tilde, range(sc.m1), range(sc.m2),
                                              restarts=plan.restarts, rng=search_rng)
                else:
                    res = solve_sparse_enumerate(ens, z_tilde, sc,
                                                 restarts=plan.restarts,
                                                 rng=search_rng, cap=plan.cap)
                dev = align_and_distance(res.M_hat, M0)
                return (not is_recovered(res.M_hat, M0)), dev
            dev = max_feasible_deviation(ens, M0, delta, plan.starts, search_rng)
            return dev > eps, dev

        results = _run_trials(plan.trials, trial, workers)
        violations = sum(1 for bad, _ in results if bad)
        devs = [dev for _, dev in results]
        rows.append(SweepRow(
            value=delta, trials=plan.trials,
            successes=plan.trials - violations,
            rate=violations / plan.trials,
            mean_lifted_error=float(np.mean(devs)),
            annotations={"epsilon": eps, "bound_raw": raw,
                         "bound_clamped": clamped,
                         "max_deviation": float(np.max(devs))},
        ))
    return rows


def transition_csv(rows: Sequence[SweepRow]) -> str:
    lines = [TRANSITION_HEADER]
    for r in rows:
        lines.append(",".join([
            _fmt(int(r.value)), _fmt(r.trials), _fmt(r.successes), _fmt(r.rate),
            _fmt(r.annotations["d"]), _fmt(r.annotations["two_d"]),
            _fmt(r.mean_lifted_error),
        ]))
    return "\n".join(lines) + "\n"


def stability_csv(rows: Sequence[SweepRow]) -> str:
    lines = [STABILITY_HEADER]
    for r in rows:
        lines.append(",".join([
            _fmt(r.value), _fmt(r.trials), _fmt(r.trials - r.successes),
            _fmt(r.rate), _fmt(r.annotations["epsilon"]),
            _fmt(r.annotations["bound_raw"]), _fmt(r.annotations["bound_clamped"]),
            _fmt(r.annotations["max_deviation"]), _fmt(r.mean_lifted_error),
        ]))
    return "\n".join(lines) + "\n"


def run_manifest(plan: TrialPlan) -> dict:
    """Plan echo with a content hash of its canonical JSON form."""
    plan_dict = plan.to_dict()
    canon = json.dumps(plan_dict, sort_keys=True, separators=(",", ":"))
    return {"plan": plan_dict,
            "config_sha256": hashlib.sha256(canon.encode()).hexdigest()}
