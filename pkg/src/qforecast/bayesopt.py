"""Gaussian-process Bayesian optimization and K-best ensemble enumeration.

The surrogate is a Matern-5/2 kernel with per-dimension length scales over
inputs normalized to the unit cube; its hyperparameters maximize the log
marginal likelihood by multi-start Nelder-Mead (gradient-free).  Candidates
are proposed by maximizing Expected Improvement over a quasi-random grid
with local refinement.

``bo_tune`` runs the loop per base model and keeps the K lowest-scoring
distinct configurations; ``enumerate_ensembles`` scores every K^m tuple of
those sets with the adaptive-weight combiner and returns the argmin.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import erf
from scipy.stats import qmc

from .ensemble import combine_predictions, finalize_weights, weights_from_predictions
from .errors import ConfigurationError, NumericDivergenceError, ShapeError
from .hyperspace import SearchSpace
from .metaheuristics import ObjectiveTracker, _ensure_tracker
from .metrics import mse
from .qlstm import HyperConfig

NOISE_FLOOR = 1e-6


def _matern52(xa: np.ndarray, xb: np.ndarray, length_scales, signal_var: float) -> np.ndarray:
    d = (xa[:, None, :] - xb[None, :, :]) / np.asarray(length_scales)
    r = np.sqrt(np.maximum(np.sum(d * d, axis=-1), 0.0))
    sq5r = math.sqrt(5.0) * r
    return signal_var * (1.0 + sq5r + 5.0 / 3.0 * r * r) * np.exp(-sq5r)


@dataclass
class GPSurrogate:
    """A fitted Gaussian-process posterior over the unit cube."""

    x: np.ndarray  # (n, d) observed points in [0, 1]^d
    y: np.ndarray  # (n,) observed scores
    length_scales: np.ndarray
    signal_var: float
    noise_var: float
    mean: float
    chol: np.ndarray
    alpha: np.ndarray

    @property
    def best_observed(self) -> float:
        return float(np.min(self.y))


def _chol_with_jitter(k: np.ndarray) -> tuple[np.ndarray, float]:
    jitter = 0.0
    for attempt in range(8):
        try:
            return np.linalg.cholesky(k + jitter * np.eye(len(k))), jitter
        except np.linalg.LinAlgError:
            jitter = 10.0 ** (attempt - 10)
    raise ConfigurationError("kernel matrix is not positive definite even with jitter")


def _lml(x, y_centered, length_scales, signal_var, noise_var) -> float:
    k = _matern52(x, x, length_scales, signal_var) + noise_var * np.eye(len(x))
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return -np.inf
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y_centered))
    return float(
        -0.5 * y_centered @ alpha
        - np.sum(np.log(np.diag(chol)))
        - 0.5 * len(x) * math.log(2.0 * math.pi)
    )


def gp_fit(observations_x, observations_y, *, seed=0, n_restarts: int = 6,
           hyperparams: tuple | None = None) -> GPSurrogate:
    """Fit the surrogate to observed (point, score) pairs.

    ``hyperparams`` pins (length_scales, signal_var, noise_var) directly,
    skipping the likelihood search (used by tests and tight loops).
    Duplicate points never break the fit: the noise floor keeps the kernel
    matrix positive definite.
    """
    x = np.atleast_2d(np.asarray(observations_x, dtype=float))
    y = np.asarray(observations_y, dtype=float).reshape(-1)
    if len(x) != len(y):
        raise ShapeError("one score per observed point required")
    if len(x) < 2:
        raise ConfigurationError("need at least two observations to fit")
    if np.any(x < -1e-9) or np.any(x > 1 + 1e-9):
        raise ConfigurationError("observed points must lie in the unit cube")
    d = x.shape[1]
    mean = float(np.mean(y))
    y_centered = y - mean
    y_var = max(float(np.var(y_centered)), 1e-12)

    if hyperparams is not None:
        length_scales, signal_var, noise_var = hyperparams
        length_scales = np.asarray(length_scales, dtype=float) * np.ones(d)
        return _finalize_fit(x, y, length_scales, float(signal_var),
                             max(float(noise_var), NOISE_FLOOR), mean)

    # bounded likelihood search in log10 coordinates
    lo = np.concatenate([np.full(d, -2.0), [math.log10(max(y_var * 1e-3, 1e-12))], [-6.0]])
    hi = np.concatenate([np.full(d, 1.0), [math.log10(y_var * 10.0 + 1e-12)], [-1.0]])

    def neg_lml(log_params):
        p = np.clip(log_params, lo, hi)
        ls = 10.0 ** p[:d]
        sf2 = 10.0 ** p[d]
        sn2 = max(10.0 ** p[d + 1], NOISE_FLOOR)
        return -_lml(x, y_centered, ls, sf2, sn2)

    rng = np.random.default_rng(seed)
    starts = [np.concatenate([np.full(d, math.log10(0.3)),
                              [math.log10(y_var)], [-4.0]])]
    starts += [rng.uniform(lo, hi) for _ in range(max(0, n_restarts - 1))]
    best_params, best_val = None, np.inf
    for start in starts:
        res = optimize.minimize(neg_lml, start, method="Nelder-Mead",
                                options={"maxiter": 120 * (d + 2), "xatol": 1e-3,
                                         "fatol": 1e-6})
        if res.fun < best_val:
            best_val, best_params = res.fun, np.clip(res.x, lo, hi)
    length_scales = 10.0 ** best_params[:d]
    signal_var = float(10.0 ** best_params[d])
    noise_var = max(float(10.0 ** best_params[d + 1]), NOISE_FLOOR)
    return _finalize_fit(x, y, length_scales, signal_var, noise_var, mean)


def _finalize_fit(x, y, length_scales, signal_var, noise_var, mean) -> GPSurrogate:
    k = _matern52(x, x, length_scales, signal_var) + noise_var * np.eye(len(x))
    chol, _ = _chol_with_jitter(k)
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y - mean))
    return GPSurrogate(x=x, y=y, length_scales=np.asarray(length_scales, float),
                       signal_var=float(signal_var), noise_var=float(noise_var),
                       mean=mean, chol=chol, alpha=alpha)


def gp_posterior(gp: GPSurrogate, query) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and (latent) variance at query points in the unit cube."""
    query = np.atleast_2d(np.asarray(query, dtype=float))
    k_star = _matern52(query, gp.x, gp.length_scales, gp.signal_var)
    mean = gp.mean + k_star @ gp.alpha
    v = np.linalg.solve(gp.chol, k_star.T)
    var = gp.signal_var - np.sum(v * v, axis=0)
    return mean, np.maximum(var, 0.0)


def _normal_cdf(z):
    return 0.5 * (1.0 + erf(z / math.sqrt(2.0)))


def _normal_pdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def ei_from_moments(mean, var, best_so_far: float) -> np.ndarray:
    """Closed-form EI for minimization given posterior moments.

    With zero variance the improvement is deterministic:
    ``max(best - mean, 0)``.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.maximum(np.asarray(var, dtype=float), 0.0))
    improve = best_so_far - mean
    pos = sd > 0.0
    z = np.where(pos, improve / np.where(pos, sd, 1.0), 0.0)
    ei = np.where(pos, improve * _normal_cdf(z) + sd * _normal_pdf(z),
                  np.maximum(improve, 0.0))
    return np.maximum(ei, 0.0)


def expected_improvement(gp: GPSurrogate, query, best_so_far: float) -> np.ndarray:
    """EI(x) = E[max(best - f(x), 0)] under the posterior (minimization)."""
    mean, var = gp_posterior(gp, query)
    return ei_from_moments(mean, var, best_so_far)


def acquire_next(gp: GPSurrogate, best_so_far: float, *, n_candidates: int = 1024,
                 seed=0, refine: bool = True) -> np.ndarray:
    """Argmax of EI over a quasi-random grid plus local refinement."""
    d = gp.x.shape[1]
    m = max(3, int(round(math.log2(max(n_candidates, 8)))))
    sobol = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(seed))
    candidates = sobol.random_base2(m)
    ei = expected_improvement(gp, candidates, best_so_far)
    best_idx = int(np.argmax(ei))
    best_point, best_ei = candidates[best_idx], ei[best_idx]
    if refine:
        res = optimize.minimize(
            lambda u: -float(expected_improvement(gp, np.clip(u, 0, 1)[None, :], best_so_far)[0]),
            best_point, method="Nelder-Mead",
            options={"maxiter": 60 * d, "xatol": 1e-4, "fatol": 1e-12},
        )
        refined = np.clip(res.x, 0.0, 1.0)
        if -res.fun > best_ei:
            best_point = refined
    return np.asarray(best_point, dtype=float)


def bo_minimize_unit(objective, d: int, *, n_init: int = 5, n_iterations: int = 15,
                     seed=0, n_candidates: int = 1024, trace: list | None = None,
                     phase: str = "bo") -> tuple[np.ndarray, np.ndarray]:
    """BO loop on the unit cube; returns all evaluated (points, scores).

    Starts from a Latin-hypercube design of ``n_init`` points, then runs
    ``n_iterations`` acquire-evaluate-refit rounds.
    """
    if n_init < 2:
        raise ConfigurationError("n_init must be >= 2")
    tracker = _ensure_tracker(objective, None, trace)
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    lhs_seed, fit_seed, acq_seed = seed_seq.spawn(3)
    lhs = qmc.LatinHypercube(d, seed=np.random.default_rng(lhs_seed))
    xs = list(lhs.random(n_init))
    ys = [tracker(x, phase, 0) for x in xs]
    fit_rng = np.random.default_rng(fit_seed)
    acq_rng = np.random.default_rng(acq_seed)
    for it in range(1, n_iterations + 1):
        finite = [i for i, v in enumerate(ys) if np.isfinite(v)]
        if len(finite) >= 2:
            gp = gp_fit(np.array([xs[i] for i in finite]), np.array([ys[i] for i in finite]),
                        seed=fit_rng.integers(2**31))
            nxt = acquire_next(gp, gp.best_observed, n_candidates=n_candidates,
                               seed=acq_rng.integers(2**31))
        else:
            nxt = np.random.default_rng(acq_rng.integers(2**31)).random(d)
        xs.append(nxt)
        ys.append(tracker(nxt, phase, it))
    return np.array(xs), np.array(ys)


@dataclass
class KBestSet:
    """The K lowest-scoring distinct configurations one optimizer retained."""

    model_index: int
    configs: list
    scores: list

    def __post_init__(self):
        if len(self.configs) != len(self.scores):
            raise ShapeError("configs and scores must pair up")
        if any(b < a for a, b in zip(self.scores, self.scores[1:])):
            raise ConfigurationError("scores must be sorted ascending")
        if len(set(self.configs)) != len(self.configs):
            raise ConfigurationError("configs must be distinct")

    @property
    def k(self) -> int:
        return len(self.configs)

    def to_dict(self) -> dict:
        return {
            "model_index": self.model_index,
            "configs": [c.to_dict() for c in self.configs],
            "scores": list(map(float, self.scores)),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KBestSet":
        return cls(
            model_index=int(d["model_index"]),
            configs=[HyperConfig.from_dict(c) for c in d["configs"]],
            scores=[float(s) for s in d["scores"]],
        )


def bo_tune(objective, space: SearchSpace, *, n_init: int = 5, n_iterations: int = 15,
            k: int = 2, seed=0, model_index: int = 0,
            trace: list | None = None) -> KBestSet:
    """Tune one base model's configuration by Bayesian optimization.

    ``objective`` consumes a :class:`HyperConfig` and returns the score to
    minimize.  Distinct unit-cube points can round to the same
    configuration; each configuration keeps its best observed score, and
    the K lowest-scoring distinct configurations are returned.
    """

    def unit_objective(u):
        return objective(space.decode_vector(space.from_unit(u)))

    tracker = ObjectiveTracker(
        unit_objective, trace=trace,
        describe=lambda u: space.decode_vector(space.from_unit(u)).to_dict(),
    )
    xs, ys = bo_minimize_unit(tracker, space.n_dims, n_init=n_init,
                              n_iterations=n_iterations, seed=seed)
    by_config: dict[HyperConfig, float] = {}
    for u, score in zip(xs, ys):
        config = space.decode_vector(space.from_unit(u))
        if np.isfinite(score) and score < by_config.get(config, np.inf):
            by_config[config] = float(score)
    if k > len(by_config):
        raise ConfigurationError(
            f"asked for {k} best configs but only {len(by_config)} distinct ones were evaluated"
        )
    ranked = sorted(by_config.items(), key=lambda item: item[1])[:k]
    return KBestSet(model_index=model_index,
                    configs=[c for c, _ in ranked],
                    scores=[s for _, s in ranked])


# ---------------------------------------------------------------------------
# K^m ensemble enumeration
# ---------------------------------------------------------------------------


@dataclass
class EnsembleCandidate:
    """One tuple of per-model configurations with its combined-forecast score."""

    configs: tuple
    objective: float
    weights: np.ndarray
    predictions: np.ndarray


@dataclass
class EnumerationResult:
    best: EnsembleCandidate
    n_tuples: int
    objectives: list


def enumerate_ensembles(ksets: list, predict_fn, targets, *, lam: float = 0.85,
                        gamma: float = 0.85, nu: int | None = None) -> EnumerationResult:
    """Evaluate every K^m tuple of per-model configurations.

    ``predict_fn(model_index, config)`` returns that model's predictions on
    the held-out segment whose truth is ``targets``; training failures mark
    the tuple's objective +inf and enumeration continues.  For each tuple
    the adaptive weights are evolved on the prediction errors, and the
    weighted forecast's MSE is the tuple objective.
    """
    if not ksets:
        raise ConfigurationError("need at least one K-best set")
    k = ksets[0].k
    if any(ks.k != k for ks in ksets):
        raise ConfigurationError("all K-best sets must have equal K")
    targets = np.asarray(targets, dtype=float)

    best: EnsembleCandidate | None = None
    objectives = []
    n_tuples = 0
    for combo in itertools.product(*[ks.configs for ks in ksets]):
        n_tuples += 1
        try:
            preds = np.vstack([predict_fn(m, config) for m, config in enumerate(combo)])
            state = weights_from_predictions(targets, preds, lam=lam, gamma=gamma, nu=nu)
            weights = finalize_weights(state)
            combined = combine_predictions(weights, preds)
            objective = mse(targets, combined)
        except NumericDivergenceError:
            objectives.append(float("inf"))
            continue
        objectives.append(objective)
        if best is None or objective < best.objective:
            best = EnsembleCandidate(combo, objective, weights, combined)
    if best is None:
        raise ConfigurationError("every candidate tuple failed to train")
    assert n_tuples == k ** len(ksets)
    return EnumerationResult(best=best, n_tuples=n_tuples, objectives=objectives)
