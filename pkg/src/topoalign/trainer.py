"""Desk-scale training harness with structure-preserving regularization.

The model is a one-hidden-layer tanh encoder followed by an additive
angular margin head over unit-norm class centers. Each training step:

1. perturbs the batch (with probability ``xi`` per sample, one randomly
   chosen vector perturbation),
2. encodes the perturbed batch and evaluates per-sample margin losses and
   prediction probabilities,
3. fits the entropy mixture and turns posteriors into damage scores,
4. computes the alignment loss between the ORIGINAL batch's distances and
   the perturbed latents' distances over their dimension-0 pairings,
5. backpropagates the combined objective exactly (scores and pairings are
   constants within a step) and applies SGD with momentum, renormalizing
   the class centers.

Everything is deterministic given the seed; gradient accumulation uses a
fixed summation order.
"""

import math
from dataclasses import dataclass

import numpy as np

from .alignment import IsaContext, isa_loss, isa_loss_grad, structure_discrepancy
from .persistence import h0_persistence
from .pointcloud import PointCloud, pairwise_distances
from .sde import gum_fit, gum_posterior, _entropy_rows

_COS_EPS = 1e-12
_SIN_EPS = 1e-12

CONFIG_KEYS = (
    "s", "m", "alpha", "xi", "lambda", "batch_size", "learning_rate",
    "momentum", "epochs", "rng_seed", "hidden_dim", "latent_dim",
    "holdout_fraction",
)


class ConfigError(ValueError):
    """Invalid or incomplete training configuration."""


@dataclass(frozen=True)
class TrainConfig:
    s: float = 64.0
    m: float = 0.5
    alpha: float = 0.1
    xi: float = 0.2
    lam: float = 1.0
    batch_size: int = 128
    learning_rate: float = 0.02
    momentum: float = 0.9
    epochs: int = 30
    rng_seed: int = 1
    hidden_dim: int = 32
    latent_dim: int = 8
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if self.s <= 0:
            raise ConfigError(f"s must be > 0, got {self.s}")
        if not (0.0 <= self.m < math.pi / 2):
            raise ConfigError(f"m must be in [0, pi/2), got {self.m}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not (0.0 <= self.xi <= 1.0):
            raise ConfigError(f"xi must be in [0, 1], got {self.xi}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.hidden_dim < 1 or self.latent_dim < 1:
            raise ConfigError("hidden_dim and latent_dim must be >= 1")
        if not (0.0 < self.holdout_fraction < 1.0):
            raise ConfigError(
                f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}"
            )


_KEY_TO_FIELD = {k: ("lam" if k == "lambda" else k) for k in CONFIG_KEYS}
_INT_FIELDS = {"batch_size", "epochs", "rng_seed", "hidden_dim", "latent_dim"}


def load_config(path) -> TrainConfig:
    """Parse a flat key=value config file; every key must be present."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}: line {lineno}: expected key=value, got {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _KEY_TO_FIELD:
                raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
            field_name = _KEY_TO_FIELD[key]
            try:
                values[field_name] = int(raw) if field_name in _INT_FIELDS else float(raw)
            except ValueError:
                raise ConfigError(
                    f"{path}: line {lineno}: invalid value {raw!r} for key {key!r}"
                ) from None
    for key, field_name in _KEY_TO_FIELD.items():
        if field_name not in values:
            raise ConfigError(f"{path}: missing config key {key!r}")
    return TrainConfig(**values)


def write_config(cfg: TrainConfig, fh) -> None:
    for key, field_name in _KEY_TO_FIELD.items():
        fh.write(f"{key}={getattr(cfg, field_name)}\n")


@dataclass(frozen=True)
class Mode:
    """Which pieces of the full objective are active."""

    perturb: bool = True
    align: bool = True
    uncertainty_weight: bool = True
    focal_weight: bool = True

    @classmethod
    def baseline(cls) -> "Mode":
        return cls(False, False, False, False)

    @classmethod
    def full(cls) -> "Mode":
        return cls(True, True, True, True)


# ---------------------------------------------------------------------------
# Perturbation operations (vector analogues of common image augmentations)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationOp:
    """One vector perturbation; ``kind`` selects the transform.

    mask     zero a random contiguous block of round(fraction * d) coordinates
    smooth   convolve coordinates with a [1/4, 1/2, 1/4] kernel (reflect edges)
    collapse replace each of ``groups`` contiguous coordinate blocks by its mean
    jitter   affine a*x + b with a in [1-scale, 1+scale], b in [-shift, shift]
    """

    kind: str
    fraction: float = 0.25
    groups: int = 4
    scale: float = 0.1
    shift: float = 0.1

    def __post_init__(self):
        if self.kind not in ("mask", "smooth", "collapse", "jitter"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.groups < 1:
            raise ValueError(f"groups must be >= 1, got {self.groups}")
        if not (0.0 <= self.scale < 1.0) or self.shift < 0:
            raise ValueError("jitter ranges out of bounds")

    def apply(self, x: np.ndarray, rng) -> np.ndarray:
        d = x.shape[0]
        out = x.copy()
        if self.kind == "mask":
            width = max(1, round(self.fraction * d))
            start = int(rng.integers(0, d - width + 1)) if width < d else 0
            out[start : start + width] = 0.0
        elif self.kind == "smooth":
            padded = np.concatenate([x[:1], x, x[-1:]])
            out = 0.25 * padded[:-2] + 0.5 * padded[1:-1] + 0.25 * padded[2:]
        elif self.kind == "collapse":
            for block in np.array_split(np.arange(d), min(self.groups, d)):
                out[block] = x[block].mean()
        else:  # jitter
            a = 1.0 + rng.uniform(-self.scale, self.scale)
            b = rng.uniform(-self.shift, self.shift)
            out = a * x + b
        return out


DEFAULT_OPS = (
    PerturbationOp("mask", fraction=0.15),
    PerturbationOp("smooth"),
    PerturbationOp("collapse", groups=8),
    PerturbationOp("jitter", scale=0.1, shift=0.05),
)


def rsp_perturb(x: np.ndarray, ops, xi: float, rng) -> np.ndarray:
    """With probability ``xi``, apply one uniformly chosen op; else return x unchanged.

    ``xi == 0`` short-circuits without consuming random state.
    """
    if not ops:
        raise ValueError("ops must be non-empty")
    if not (0.0 <= xi <= 1.0):
        raise ValueError(f"xi must be in [0, 1], got {xi}")
    x = np.asarray(x, dtype=np.float64)
    if xi == 0.0:
        return x.copy()
    if rng.uniform() >= xi:
        return x.copy()
    op = ops[int(rng.integers(0, len(ops)))]
    return op.apply(x, rng)


# ---------------------------------------------------------------------------
# Encoder and margin head
# ---------------------------------------------------------------------------

@dataclass
class EncoderParams:
    """Weights of the d -> hidden -> latent encoder plus unit-norm class centers."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    centers: np.ndarray

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(),
            self.centers.copy(),
        )

    def arrays(self) -> dict:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2,
                "centers": self.centers}


def init_encoder_params(rng, input_dim: int, hidden_dim: int, latent_dim: int,
                        num_classes: int) -> EncoderParams:
    w1 = rng.normal(0.0, 1.0 / math.sqrt(input_dim), (hidden_dim, input_dim))
    b1 = np.zeros(hidden_dim)
    w2 = rng.normal(0.0, 1.0 / math.sqrt(hidden_dim), (latent_dim, hidden_dim))
    b2 = np.zeros(latent_dim)
    centers = rng.normal(0.0, 1.0, (num_classes, latent_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    return EncoderParams(w1, b1, w2, b2, centers)


def encode(params: EncoderParams, x: np.ndarray) -> np.ndarray:
    """Latent features for a batch of input rows."""
    hidden = np.tanh(x @ params.w1.T + params.b1)
    return hidden @ params.w2.T + params.b2


def _margin_forward(features: np.ndarray, labels: np.ndarray, centers: np.ndarray,
                    s: float, m: float):
    """Margin-head forward pass; returns losses, probabilities and caches."""
    norms = np.linalg.norm(features, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero-norm feature")
    unit = features / norms[:, None]
    cnorms = np.linalg.norm(centers, axis=1)
    cunit = centers / cnorms[:, None]
    cos = unit @ cunit.T

    rows = np.arange(features.shape[0])
    cos_y = np.clip(cos[rows, labels], -1.0 + _COS_EPS, 1.0 - _COS_EPS)
    theta = np.arccos(cos_y)
    sin_y = np.sqrt(1.0 - cos_y * cos_y)

    logits = s * cos
    logits[rows, labels] = s * np.cos(theta + m)

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1)
    probs = exp / denom[:, None]
    losses = np.log(denom) - shifted[rows, labels]

    # d(margined logit)/d(cos): sin(theta+m)/sin(theta), guarded at theta -> 0
    kappa = np.where(sin_y > _SIN_EPS, np.sin(theta + m) / np.maximum(sin_y, _SIN_EPS),
                     math.cos(m))
    cache = {"norms": norms, "unit": unit, "cnorms": cnorms, "cunit": cunit,
             "kappa": kappa}
    return losses, probs, cache


def arcface_loss(feature: np.ndarray, label: int, params: EncoderParams,
                 s: float, m: float):
    """Additive angular margin loss and prediction probabilities for one sample."""
    feature = np.asarray(feature, dtype=np.float64)
    k = params.centers.shape[0]
    if not (0 <= label < k):
        raise ValueError(f"label {label} out of range for K={k}")
    losses, probs, _ = _margin_forward(
        feature[None, :], np.array([label]), params.centers, s, m
    )
    return float(losses[0]), probs[0]


def _margin_backward(g_logits: np.ndarray, labels: np.ndarray, cache: dict,
                     features: np.ndarray, centers: np.ndarray, s: float):
    """Backprop through the margin head given dLoss/dLogits."""
    rows = np.arange(features.shape[0])
    g_cos = g_logits * s
    g_cos[rows, labels] *= cache["kappa"]

    unit, cunit = cache["unit"], cache["cunit"]
    g_unit = g_cos @ cunit
    g_cunit = g_cos.T @ unit

    norms = cache["norms"]
    g_feat = (g_unit - np.sum(g_unit * unit, axis=1, keepdims=True) * unit) / norms[:, None]
    cnorms = cache["cnorms"]
    g_centers = (g_cunit - np.sum(g_cunit * cunit, axis=1, keepdims=True) * cunit) \
        / cnorms[:, None]
    return g_feat, g_centers


# ---------------------------------------------------------------------------
# Training step and experiment loop
# ---------------------------------------------------------------------------

@dataclass
class TrainState:
    """Mutable training state: parameters, momentum buffers, configuration."""

    params: EncoderParams
    velocity: dict
    cfg: TrainConfig
    mode: Mode

    @classmethod
    def initialize(cls, cfg: TrainConfig, input_dim: int, num_classes: int,
                   rng, mode: Mode = None) -> "TrainState":
        params = init_encoder_params(rng, input_dim, cfg.hidden_dim, cfg.latent_dim,
                                     num_classes)
        velocity = {k: np.zeros_like(v) for k, v in params.arrays().items()}
        return cls(params, velocity, cfg, mode if mode is not None else Mode.full())


def _frozen_objective(params: EncoderParams, x_pert: np.ndarray, labels: np.ndarray,
                      omegas: np.ndarray, m_x, gamma_x, gamma_z,
                      s: float, m: float, alpha: float):
    """Total objective with scores, pairings, and perturbed inputs held fixed."""
    hidden = np.tanh(x_pert @ params.w1.T + params.b1)
    features = hidden @ params.w2.T + params.b2
    losses, _, _ = _margin_forward(features, labels, params.centers, s, m)
    l_cls = float(np.mean(omegas * losses))
    m_z = pairwise_distances(PointCloud(features))
    l_sa = isa_loss(IsaContext(m_x, m_z, gamma_x, gamma_z))
    return l_cls + alpha * l_sa, l_cls, l_sa


def _objective_grads(params: EncoderParams, x_pert: np.ndarray, labels: np.ndarray,
                     omegas: np.ndarray, m_x, gamma_x, gamma_z,
                     s: float, m: float, alpha: float):
    """Analytic gradients of :func:`_frozen_objective` for every parameter."""
    n = x_pert.shape[0]
    hidden = np.tanh(x_pert @ params.w1.T + params.b1)
    features = hidden @ params.w2.T + params.b2
    losses, probs, cache = _margin_forward(features, labels, params.centers, s, m)
    l_cls = float(np.mean(omegas * losses))

    latents = PointCloud(features)
    m_z = pairwise_distances(latents)
    ctx = IsaContext(m_x, m_z, gamma_x, gamma_z)
    l_sa = isa_loss(ctx)

    rows = np.arange(n)
    g_logits = probs.copy()
    g_logits[rows, labels] -= 1.0
    g_logits *= (omegas / n)[:, None]
    g_feat, g_centers = _margin_backward(g_logits, labels, cache, features,
                                         params.centers, s)
    if alpha != 0.0:
        g_feat = g_feat + alpha * isa_loss_grad(ctx, latents)

    g_w2 = g_feat.T @ hidden
    g_b2 = g_feat.sum(axis=0)
    g_hidden = g_feat @ params.w2
    g_pre = g_hidden * (1.0 - hidden * hidden)
    g_w1 = g_pre.T @ x_pert
    g_b1 = g_pre.sum(axis=0)

    grads = {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2, "centers": g_centers}
    aux = {"losses": losses, "probs": probs, "l_cls": l_cls, "l_sa": l_sa}
    return grads, aux


def train_step(batch_x: np.ndarray, labels: np.ndarray, state: TrainState, rng,
               ops=DEFAULT_OPS) -> dict:
    """One optimization step on a batch; updates ``state`` in place.

    Returns a metrics dict with the component losses, score statistics,
    and the fitted mixture parameters.
    """
    cfg = state.cfg
    mode = state.mode
    batch_x = np.asarray(batch_x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    n = batch_x.shape[0]
    if n < 2:
        raise ValueError(f"batch size must be >= 2, got {n}")

    degenerate_batch = bool(np.all(batch_x == batch_x[0]))

    xi = cfg.xi if mode.perturb else 0.0
    x_pert = np.stack([rsp_perturb(batch_x[i], ops, xi, rng) for i in range(n)])

    # Forward once to obtain probabilities, entropies, and latent pairings.
    hidden = np.tanh(x_pert @ state.params.w1.T + state.params.b1)
    features = hidden @ state.params.w2.T + state.params.b2
    losses, probs, _ = _margin_forward(features, labels, state.params.centers,
                                       cfg.s, cfg.m)
    entropies = _entropy_rows(probs)
    gum = gum_fit(entropies)
    posteriors = gum_posterior(entropies, gum)
    gt_probs = probs[np.arange(n), labels]

    w_unc = (1.0 + posteriors) ** cfg.lam if mode.uncertainty_weight else np.ones(n)
    w_foc = (1.0 - gt_probs) if mode.focal_weight else np.ones(n)
    omegas = w_unc * w_foc

    m_x = pairwise_distances(PointCloud(batch_x))
    m_z = pairwise_distances(PointCloud(features))
    _, gamma_x = h0_persistence(m_x)
    _, gamma_z = h0_persistence(m_z)

    alpha = cfg.alpha if mode.align else 0.0
    grads, aux = _objective_grads(
        state.params, x_pert, labels, omegas, m_x, gamma_x, gamma_z,
        cfg.s, cfg.m, alpha,
    )

    arrays = state.params.arrays()
    for key, grad in grads.items():
        vel = state.velocity[key]
        vel *= cfg.momentum
        vel += grad
        arrays[key] -= cfg.learning_rate * vel
    state.params.centers /= np.linalg.norm(state.params.centers, axis=1, keepdims=True)

    return {
        "total": aux["l_cls"] + alpha * aux["l_sa"],
        "l_cls": aux["l_cls"],
        "l_sa": aux["l_sa"],
        "omega_mean": float(np.mean(omegas)),
        "omega_min": float(np.min(omegas)),
        "omega_max": float(np.max(omegas)),
        "pi": gum.pi,
        "sigma": gum.sigma,
        "omega": gum.omega,
        "degenerate_batch": degenerate_batch,
    }


def predict(params: EncoderParams, x: np.ndarray) -> np.ndarray:
    """Predicted class indices by largest cosine to the class centers."""
    features = encode(params, x)
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    unit = features / np.maximum(norms, 1e-30)
    cunit = params.centers / np.linalg.norm(params.centers, axis=1, keepdims=True)
    return np.argmax(unit @ cunit.T, axis=1)


REPORT_COLUMNS = (
    "epoch", "L_cls", "L_sa", "discrepancy_heldout", "accuracy",
    "pi", "sigma", "omega",
)


def run_experiment(points: np.ndarray, labels: np.ndarray, cfg: TrainConfig,
                   mode: Mode, progress=None) -> list:
    """Train on a labeled cloud and report per-epoch metrics.

    The data is split into train and held-out parts using the configured
    fraction; after every epoch, the alignment discrepancy on one held-out
    batch and the held-out accuracy are recorded. Returns one dict per
    epoch with the REPORT_COLUMNS keys.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if points.ndim != 2 or points.shape[0] != labels.shape[0]:
        raise ValueError("points and labels must align on the sample axis")
    num_classes = int(labels.max()) + 1
    if labels.min() < 0:
        raise ValueError("labels must be >= 0")

    rng = np.random.default_rng(cfg.rng_seed)
    n = points.shape[0]
    perm = rng.permutation(n)
    n_hold = int(round(cfg.holdout_fraction * n))
    if n_hold < 2 or n - n_hold < cfg.batch_size:
        raise ValueError("dataset too small for the configured split")
    hold_idx, train_idx = perm[:n_hold], perm[n_hold:]
    x_train, y_train = points[train_idx], labels[train_idx]
    x_hold, y_hold = points[hold_idx], labels[hold_idx]
    hold_batch = x_hold[: min(cfg.batch_size, n_hold)]

    state = TrainState.initialize(cfg, points.shape[1], num_classes, rng, mode)

    rows = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(x_train.shape[0])
        sums = {"l_cls": 0.0, "l_sa": 0.0, "pi": 0.0, "sigma": 0.0, "omega": 0.0}
        steps = 0
        for start in range(0, x_train.shape[0], cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if idx.shape[0] < 2:
                continue
            metrics = train_step(x_train[idx], y_train[idx], state, rng)
            for key in sums:
                sums[key] += metrics[key]
            steps += 1
        disc = structure_discrepancy(
            PointCloud(hold_batch), PointCloud(encode(state.params, hold_batch))
        )
        acc = float(np.mean(predict(state.params, x_hold) == y_hold))
        row = {
            "epoch": epoch,
            "L_cls": sums["l_cls"] / steps,
            "L_sa": sums["l_sa"] / steps,
            "discrepancy_heldout": disc,
            "accuracy": acc,
            "pi": sums["pi"] / steps,
            "sigma": sums["sigma"] / steps,
            "omega": sums["omega"] / steps,
        }
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


def write_report(rows, fh) -> None:
    """Write per-epoch metrics as CSV with the standard column order."""
    fh.write(",".join(REPORT_COLUMNS) + "\n")
    for row in rows:
        fields = [str(row["epoch"])] + [
            format(float(row[c]), ".12g") for c in REPORT_COLUMNS[1:]
        ]
        fh.write(",".join(fields) + "\n")


def read_report(path) -> list:
    """Parse a report CSV back into per-epoch dicts."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.split(",") != list(REPORT_COLUMNS):
            raise ValueError(f"{path}: unexpected report header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split(",")
            if len(parts) != len(REPORT_COLUMNS):
                raise ValueError(f"{path}: line {lineno}: wrong field count")
            row = {"epoch": int(parts[0])}
            for name, value in zip(REPORT_COLUMNS[1:], parts[1:]):
                row[name] = float(value)
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: report has no rows")
    return rows


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

def make_blob_dataset(n_samples: int, n_classes: int, dim: int, rng_seed: int,
                      center_spread: float = 1.0, cluster_std: float = 0.8,
                      hard_fraction: float = 0.15, hard_std_multiplier: float = 3.0,
                      hard_dim_fraction: float = 1.0):
    """Gaussian blobs with a seeded fraction of high-variance hard samples.

    Each hard sample's noise variance is inflated by ``hard_std_multiplier``
    on a random contiguous block of ``round(hard_dim_fraction * dim)``
    coordinates (the whole vector when the fraction is 1), so hardness can
    be either isotropic or concentrated in a per-sample coordinate range.
    Returns ``(points, labels)`` with balanced classes.
    """
    if n_classes < 2 or n_samples < n_classes:
        raise ValueError("need n_classes >= 2 and n_samples >= n_classes")
    if not (0.0 < hard_dim_fraction <= 1.0):
        raise ValueError("hard_dim_fraction must be in (0, 1]")
    rng = np.random.default_rng(rng_seed)
    centers = rng.normal(0.0, center_spread, (n_classes, dim))
    labels = rng.permutation(np.arange(n_samples) % n_classes)
    stds = np.full((n_samples, dim), cluster_std)
    width = max(1, round(hard_dim_fraction * dim))
    for i in np.nonzero(rng.random(n_samples) < hard_fraction)[0]:
        start = int(rng.integers(0, dim - width + 1)) if width < dim else 0
        stds[i, start : start + width] = cluster_std * hard_std_multiplier
    points = centers[labels] + rng.normal(size=(n_samples, dim)) * stds
    return points, labels.astype(np.intp)


def save_labeled_dataset(points: np.ndarray, labels: np.ndarray, fh) -> None:
    """Write ``label, x_1, ..., x_d`` rows."""
    for lab, row in zip(labels, points):
        fh.write(",".join([str(int(lab))] + [repr(float(v)) for v in row]) + "\n")


def load_labeled_dataset(path):
    """Read ``label, x_1, ..., x_d`` rows; returns (points, labels)."""
    labels = []
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = [f.strip() for f in stripped.split(",")]
            if width is None:
                width = len(fields)
                if width < 2:
                    raise ValueError(f"{path}: line {lineno}: need a label and coordinates")
            elif len(fields) != width:
                raise ValueError(
                    f"{path}: ragged row at line {lineno} "
                    f"(expected {width} fields, got {len(fields)})"
                )
            try:
                labels.append(int(fields[0]))
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}, column 1: invalid label {fields[0]!r}"
                ) from None
            try:
                rows.append([float(f) for f in fields[1:]])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric coordinate") from None
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    return np.array(rows, dtype=np.float64), np.array(labels, dtype=np.intp)
