"""Hard-sample scoring from prediction entropies.

Entropies of classifier predictions are modeled with a two-component
mixture: a half-Gaussian centered at zero for easy samples and a uniform
component on [0, Omega] for hard ones. The mixture is fitted per batch by
expectation-maximization on sign-mirrored entropies (each value enters as
+E and -E with weight 1/2, which realizes the symmetric-sign augmentation
deterministically). The fitted posterior of being hard combines with the
ground-truth probability into a per-sample structure damage score that
weights the classification loss.
"""

import math
from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-8
OMEGA_FLOOR = 1e-8


@dataclass(frozen=True)
class PredictionRecord:
    """A prediction distribution with its cached entropy and label probability."""

    probs: np.ndarray
    label: int
    entropy: float
    gt_prob: float

    @classmethod
    def from_probs(cls, probs, label: int) -> "PredictionRecord":
        probs = np.asarray(probs, dtype=np.float64)
        if not (0 <= label < probs.shape[0]):
            raise ValueError(f"label {label} out of range for K={probs.shape[0]}")
        ent = entropy(probs)
        p = probs.copy()
        p.setflags(write=False)
        return cls(p, int(label), ent, float(probs[label]))


@dataclass(frozen=True)
class GumParams:
    """Fitted mixture parameters with per-iteration diagnostics.

    ``history`` holds one (pi, sigma, omega, log_likelihood) tuple per
    completed iteration.
    """

    pi: float
    sigma: float
    omega: float
    log_likelihood: float
    iterations: int
    degenerate: bool = False
    history: tuple = ()

    def __post_init__(self):
        if not (0.0 <= self.pi <= 1.0):
            raise ValueError(f"pi must be in [0, 1], got {self.pi}")
        if self.sigma < SIGMA_FLOOR:
            raise ValueError(f"sigma below floor: {self.sigma}")
        if self.omega < OMEGA_FLOOR:
            raise ValueError(f"omega below floor: {self.omega}")


@dataclass(frozen=True)
class SampleScore:
    """Structure damage score ``sds = (1 + h)^lambda * (1 - gt_prob)``."""

    h: float
    w1: float
    w2: float
    sds: float


def entropy(probs) -> float:
    """Shannon entropy in nats of a probability vector (0 log 0 := 0)."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] == 0:
        raise ValueError("probs must be a non-empty 1-D vector")
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ValueError("probability components must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()}, not 1")
    return float(_entropy_rows(p[None, :])[0])


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    safe = np.where(p > 0, p, 1.0)
    return -np.sum(p * np.log(safe), axis=1)


def _gauss_pdf(x: np.ndarray, variance: float) -> np.ndarray:
    return np.exp(-(x * x) / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)


def gum_posterior(e, params: GumParams):
    """Posterior probability that an entropy value comes from the uniform component.

    Accepts a scalar or an array; the uniform density vanishes outside
    [0, omega], so the posterior is zero beyond omega.
    """
    arr = np.asarray(e, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError("entropy values must be >= 0")
    gauss = 2.0 * _gauss_pdf(arr, params.sigma)
    unif = np.where(arr <= params.omega, 1.0 / params.omega, 0.0)
    num = (1.0 - params.pi) * unif
    den = params.pi * gauss + num
    h = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    if np.isscalar(e) or arr.ndim == 0:
        return float(h)
    return h


def _mirrored_log_likelihood(e_mirror, weights, pi, sigma, omega):
    dens = pi * _gauss_pdf(e_mirror, sigma) + (1.0 - pi) * np.where(
        np.abs(e_mirror) <= omega, 1.0 / (2.0 * omega), 0.0
    )
    with np.errstate(divide="ignore"):
        return float(np.sum(weights * np.log(dens)))


def gum_fit(entropies, max_iter: int = 100, tol: float = 1e-6) -> GumParams:
    """Fit the mixture by EM over deterministically sign-mirrored entropies.

    Iterates posterior and moment updates until the log-likelihood change
    falls below ``tol`` or ``max_iter`` is reached; the variance and the
    uniform half-width are clamped at their floors. An all-zero input is
    degenerate and returns (pi=1, floors) with the degenerate flag set.

    The prior and variance updates are exact maximizers of the expected
    complete-data log-likelihood, but the moment-based half-width update is
    not, so the half-width move is kept only when it does not lower the
    likelihood; this makes the per-iteration log-likelihood sequence
    non-decreasing.
    """
    e = np.asarray(entropies, dtype=np.float64)
    if e.ndim != 1 or e.shape[0] < 2:
        raise ValueError("need at least 2 entropy values")
    if np.any(e < 0) or not np.all(np.isfinite(e)):
        raise ValueError("entropies must be finite and >= 0")

    if np.max(e) == 0.0:
        ll = _mirrored_log_likelihood(
            np.concatenate([e, -e]), np.full(2 * e.shape[0], 0.5),
            1.0, SIGMA_FLOOR, OMEGA_FLOOR,
        )
        return GumParams(1.0, SIGMA_FLOOR, OMEGA_FLOOR, ll, 0, degenerate=True)

    mirror = np.concatenate([e, -e])
    weights = np.full(mirror.shape[0], 0.5)
    total_w = float(np.sum(weights))

    pi = 0.5
    sigma = max(float(np.sum(weights * mirror * mirror) / total_w), SIGMA_FLOOR)
    omega = max(float(np.max(np.abs(mirror))), OMEGA_FLOOR)

    prev_ll = _mirrored_log_likelihood(mirror, weights, pi, sigma, omega)
    history = []
    iterations = 0
    for _ in range(max_iter):
        unif = np.where(np.abs(mirror) <= omega, 1.0 / (2.0 * omega), 0.0)
        num = (1.0 - pi) * unif
        den = pi * _gauss_pdf(mirror, sigma) + num
        h = np.divide(num, den, out=np.zeros_like(num), where=den > 0)

        w_easy = weights * (1.0 - h)
        sum_easy = float(np.sum(w_easy))
        pi = sum_easy / total_w
        if sum_easy > 0:
            sigma = max(float(np.sum(w_easy * mirror * mirror) / sum_easy), SIGMA_FLOOR)

        ll = _mirrored_log_likelihood(mirror, weights, pi, sigma, omega)
        if 1.0 - pi > 1e-12 and sum_easy > 0:
            coef = weights * h / (1.0 - pi)
            eta1 = float(np.sum(coef * mirror)) / sum_easy
            eta2 = float(np.sum(coef * mirror * mirror)) / sum_easy
            cand = max(math.sqrt(max(3.0 * (eta2 - eta1 * eta1), 0.0)), OMEGA_FLOOR)
            ll_cand = _mirrored_log_likelihood(mirror, weights, pi, sigma, cand)
            if ll_cand >= ll:
                omega = cand
                ll = ll_cand

        iterations += 1
        history.append((pi, sigma, omega, ll))
        if abs(ll - prev_ll) < tol:
            prev_ll = ll
            break
        prev_ll = ll

    return GumParams(
        pi, sigma, omega, prev_ll, iterations, degenerate=False, history=tuple(history)
    )


def structure_damage_score(h: float, gt_prob: float, lam: float = 1.0) -> SampleScore:
    """Combine hardness posterior and label probability into a damage score."""
    if not (0.0 <= h <= 1.0):
        raise ValueError(f"h must be in [0, 1], got {h}")
    if not (0.0 <= gt_prob <= 1.0):
        raise ValueError(f"gt_prob must be in [0, 1], got {gt_prob}")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    w1 = (1.0 + h) ** lam
    w2 = 1.0 - gt_prob
    return SampleScore(h=float(h), w1=float(w1), w2=float(w2), sds=float(w1 * w2))


def weighted_classification_loss(score: SampleScore, arc_loss: float) -> float:
    """Classification loss scaled by the sample's damage score."""
    if arc_loss < 0:
        raise ValueError(f"arc_loss must be >= 0, got {arc_loss}")
    return score.sds * arc_loss


def score_samples(prob_rows, labels, lam: float = 1.0, max_iter: int = 100, tol: float = 1e-6):
    """Score a batch of prediction rows: fit the mixture, then score each sample.

    Returns ``(GumParams, list[PredictionRecord], list[SampleScore])``.
    """
    probs = np.asarray(prob_rows, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ValueError("prob_rows and labels must align on the sample axis")
    records = [PredictionRecord.from_probs(probs[i], int(labels[i])) for i in range(probs.shape[0])]
    params = gum_fit([r.entropy for r in records], max_iter=max_iter, tol=tol)
    scores = [
        structure_damage_score(gum_posterior(r.entropy, params), r.gt_prob, lam)
        for r in records
    ]
    return params, records, scores
