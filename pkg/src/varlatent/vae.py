"""Dense beta-VAE written directly in numpy.

Encoder ``K -> 256 -> 32 -> (mu, log_var)`` and decoder ``2 -> 32 -> 512 -> K``
with ReLU hidden layers and a sigmoid output. The loss is binary
cross-entropy summed over features plus ``beta`` times the Gaussian KL term,
both averaged over the batch; gradients are hand-derived and optimized with
Adam.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from ._random import derive_seed, make_rng
from .ingest import DataTable, duplicate_rows, shuffle_rows
from .latent import LatentTable, dedupe

log = logging.getLogger(__name__)

CLAMP_EPS = 1e-7
ENCODER_WIDTHS = (256, 32)
DECODER_WIDTHS = (32, 512)
LATENT_DIM = 2


class TrainingError(RuntimeError):
    """Loss or weights became non-finite."""


@dataclass
class TrainConfig:
    beta: float = 0.3
    epochs: int = 75
    batch_size: int = 128
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    runs: int = 3
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")


@dataclass
class VaeModel:
    input_dim: int
    enc_widths: tuple[int, ...]
    dec_widths: tuple[int, ...]
    params: dict[str, np.ndarray]
    latent_dim: int = LATENT_DIM
    config: dict = field(default_factory=dict)
    history: dict = field(default_factory=dict)

    @property
    def enc_layers(self) -> list[str]:
        return [f"enc{i}" for i in range(len(self.enc_widths))]

    @property
    def dec_layers(self) -> list[str]:
        return [f"dec{i}" for i in range(len(self.dec_widths))]

    def layer_shapes(self) -> dict[str, tuple[int, int]]:
        return {k[:-2]: v.shape for k, v in self.params.items() if k.endswith(".W")}

    def astype(self, dtype) -> "VaeModel":
        params = {k: v.astype(dtype) for k, v in self.params.items()}
        return VaeModel(self.input_dim, self.enc_widths, self.dec_widths, params,
                        self.latent_dim, dict(self.config), dict(self.history))

    def save(self, path: str | Path) -> None:
        meta = {
            "input_dim": self.input_dim,
            "enc_widths": list(self.enc_widths),
            "dec_widths": list(self.dec_widths),
            "latent_dim": self.latent_dim,
            "config": self.config,
            "history": self.history,
        }
        with Path(path).open("wb") as fh:
            np.savez(fh, __meta__=np.array(json.dumps(meta)), **self.params)

    @classmethod
    def load(cls, path: str | Path) -> "VaeModel":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            params = {k: z[k] for k in z.files if k != "__meta__"}
        return cls(meta["input_dim"], tuple(meta["enc_widths"]), tuple(meta["dec_widths"]),
                   params, meta["latent_dim"], meta["config"], meta.get("history", {}))


def init_model(
    input_dim: int,
    seed: int = 0,
    enc_widths: tuple[int, ...] = ENCODER_WIDTHS,
    dec_widths: tuple[int, ...] = DECODER_WIDTHS,
    latent_dim: int = LATENT_DIM,
) -> VaeModel:
    """Glorot-uniform weights and zero biases, deterministic in ``seed``."""
    if input_dim < 2:
        raise ValueError(f"input_dim must be >= 2, got {input_dim}")
    rng = make_rng(seed)
    params: dict[str, np.ndarray] = {}

    def dense(name: str, fan_in: int, fan_out: int) -> None:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"{name}.W"] = rng.uniform(-limit, limit, (fan_in, fan_out))
        params[f"{name}.b"] = np.zeros(fan_out)

    width = input_dim
    for i, w in enumerate(enc_widths):
        dense(f"enc{i}", width, w)
        width = w
    dense("mu", width, latent_dim)
    dense("logvar", width, latent_dim)
    width = latent_dim
    for i, w in enumerate(dec_widths):
        dense(f"dec{i}", width, w)
        width = w
    dense("out", width, input_dim)
    return VaeModel(input_dim, tuple(enc_widths), tuple(dec_widths), params, latent_dim)


def _relu(a):
    return np.maximum(a, 0)


def _check_input(model: VaeModel, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[-1] != model.input_dim:
        raise ValueError(f"input has {x.shape[-1]} features, model expects {model.input_dim}")
    return x


def encode(model: VaeModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and log-variance for each row of ``x`` (no sampling).

    Each distinct row goes through its own matrix-vector chain, so the
    result never depends on a row's position in the batch (blocked matmul
    kernels do not guarantee that) and identical rows agree bitwise.
    """
    p = model.params
    dtype = p["mu.W"].dtype
    x = _check_input(model, x).astype(dtype, copy=False)
    uniq, inverse = np.unique(x, axis=0, return_inverse=True)
    mu = np.empty((uniq.shape[0], model.latent_dim))
    log_var = np.empty_like(mu)
    layers = [(p[f"{n}.W"].T.copy(), p[f"{n}.b"]) for n in model.enc_layers]
    w_mu, w_lv = p["mu.W"].T.copy(), p["logvar.W"].T.copy()
    for r, row in enumerate(uniq):
        h = row
        for w, b in layers:
            h = _relu(w @ h + b)
        mu[r] = w_mu @ h + p["mu.b"]
        log_var[r] = w_lv @ h + p["logvar.b"]
    inverse = inverse.ravel()
    return mu[inverse], log_var[inverse]


def decode(model: VaeModel, z) -> np.ndarray:
    p = model.params
    g = np.atleast_2d(np.asarray(z)).astype(p["out.W"].dtype)
    for name in model.dec_layers:
        g = _relu(g @ p[f"{name}.W"] + p[f"{name}.b"])
    return expit(g @ p["out.W"] + p["out.b"]).astype(np.float64)


def reparameterize(mu, log_var, noise):
    return mu + np.exp(0.5 * log_var) * noise


def loss(x, x_hat, mu, log_var, beta: float) -> tuple[float, float, float]:
    """(total, bce, kl) for a batch; bce sums features, both terms average rows."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    xc = np.clip(np.atleast_2d(np.asarray(x_hat, dtype=np.float64)), CLAMP_EPS, 1.0 - CLAMP_EPS)
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    log_var = np.atleast_2d(np.asarray(log_var, dtype=np.float64))
    bce = -np.sum(x * np.log(xc) + (1.0 - x) * np.log(1.0 - xc)) / x.shape[0]
    kl = -0.5 * np.sum(1.0 + log_var - mu**2 - np.exp(log_var)) / x.shape[0]
    return float(bce + beta * kl), float(bce), float(kl)


def loss_and_grads(model: VaeModel, x: np.ndarray, noise: np.ndarray, beta: float):
    """Forward pass with fixed reparameterization noise, then backprop.

    Returns ``(total, bce, kl, grads)`` with ``grads`` keyed like ``model.params``.
    """
    p = model.params
    dtype = p["mu.W"].dtype
    x = x.astype(dtype, copy=False)
    n = x.shape[0]

    enc_in, enc_pre = [], []
    h = x
    for name in model.enc_layers:
        enc_in.append(h)
        a = h @ p[f"{name}.W"] + p[f"{name}.b"]
        enc_pre.append(a)
        h = _relu(a)
    mu = h @ p["mu.W"] + p["mu.b"]
    lv = h @ p["logvar.W"] + p["logvar.b"]
    std = np.exp(0.5 * lv)
    z = mu + std * noise

    dec_in, dec_pre = [], []
    g = z
    for name in model.dec_layers:
        dec_in.append(g)
        a = g @ p[f"{name}.W"] + p[f"{name}.b"]
        dec_pre.append(a)
        g = _relu(a)
    x_hat = expit(g @ p["out.W"] + p["out.b"])

    total, bce, kl = loss(x, x_hat, mu, lv, beta)

    grads: dict[str, np.ndarray] = {}
    inside = (x_hat > CLAMP_EPS) & (x_hat < 1.0 - CLAMP_EPS)
    d = np.where(inside, x_hat - x, 0).astype(dtype) / dtype.type(n)
    grads["out.W"] = g.T @ d
    grads["out.b"] = d.sum(axis=0)
    d = d @ p["out.W"].T
    for i in reversed(range(len(model.dec_layers))):
        name = model.dec_layers[i]
        d = d * (dec_pre[i] > 0)
        grads[f"{name}.W"] = dec_in[i].T @ d
        grads[f"{name}.b"] = d.sum(axis=0)
        d = d @ p[f"{name}.W"].T
    dz = d
    kl_scale = dtype.type(beta / n)
    dmu = dz + kl_scale * mu
    dlv = dz * dtype.type(0.5) * std * noise + kl_scale * dtype.type(0.5) * (np.exp(lv) - 1)
    grads["mu.W"] = h.T @ dmu
    grads["mu.b"] = dmu.sum(axis=0)
    grads["logvar.W"] = h.T @ dlv
    grads["logvar.b"] = dlv.sum(axis=0)
    d = dmu @ p["mu.W"].T + dlv @ p["logvar.W"].T
    for i in reversed(range(len(model.enc_layers))):
        name = model.enc_layers[i]
        d = d * (enc_pre[i] > 0)
        grads[f"{name}.W"] = enc_in[i].T @ d
        grads[f"{name}.b"] = d.sum(axis=0)
        if i:
            d = d @ p[f"{name}.W"].T
    return total, bce, kl, grads


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.lr, self.b1, self.b2, self.eps = cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.buf = {k: np.empty_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        # in place: the allocations otherwise cost about a third of an epoch
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            m, v, buf = self.m[k], self.v[k], self.buf[k]
            m *= self.b1
            np.multiply(g, 1.0 - self.b1, out=buf)
            m += buf
            v *= self.b2
            np.multiply(g, g, out=buf)
            buf *= 1.0 - self.b2
            v += buf
            np.divide(v, c2, out=buf)
            np.sqrt(buf, out=buf)
            buf += self.eps
            np.divide(m, buf, out=buf)
            buf *= self.lr / c1
            params[k] -= buf


def _batch_loss(model: VaeModel, x: np.ndarray, rng, beta: float, batch_size: int) -> float:
    total = 0.0
    for start in range(0, x.shape[0], batch_size):
        xb = x[start:start + batch_size]
        mu, lv = encode(model, xb)
        z = reparameterize(mu, lv, rng.standard_normal(mu.shape))
        total += loss(xb, decode(model, z), mu, lv, beta)[0] * xb.shape[0]
    return total / x.shape[0]


def train(t: DataTable, cfg: TrainConfig, monitor: DataTable | None = None,
          model: VaeModel | None = None) -> VaeModel:
    """Mini-batch Adam training on the rows of ``t`` (values in [0, 1]).

    Batches are reshuffled every epoch and fresh noise is drawn per example
    and step. Per-epoch mean losses land in ``model.history``; ``monitor``
    (if given) is scored once after the last epoch and never steers training.
    """
    x = t.values
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("training values must lie in [0, 1]")
    dtype = np.dtype(cfg.dtype)
    if model is None:
        model = init_model(t.n_cols, derive_seed(cfg.seed, 0))
    model = model.astype(dtype)
    model.config = asdict(cfg)
    x = x.astype(dtype)
    rng = make_rng(cfg.seed, 1)
    opt = Adam(model.params, cfg)
    n = x.shape[0]
    history = {"loss": [], "bce": [], "kl": []}
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        sums = np.zeros(3)
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start:start + cfg.batch_size]
            noise = rng.standard_normal((idx.size, model.latent_dim)).astype(dtype)
            total, bce, kl, grads = loss_and_grads(model, x[idx], noise, cfg.beta)
            if not np.isfinite(total):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            sums += np.array([total, bce, kl]) * idx.size
            opt.step(model.params, grads)
        if not all(np.all(np.isfinite(v)) for v in model.params.values()):
            raise TrainingError(f"non-finite weights after epoch {epoch}")
        for key, val in zip(("loss", "bce", "kl"), sums / n):
            history[key].append(float(val))
        log.debug("epoch %d loss %.5f", epoch, history["loss"][-1])
    if monitor is not None:
        history["monitor_loss"] = _batch_loss(model, monitor.values, make_rng(cfg.seed, 2), cfg.beta, cfg.batch_size)
    model.history = history
    return model


def encode_table(model: VaeModel, t: DataTable) -> LatentTable:
    mu, lv = encode(model, t.values)
    return LatentTable(list(t.row_ids), mu, lv)


def latent_correlation(mu: np.ndarray) -> float:
    """|Pearson r| between the two latent means; 1.0 when an axis is flat."""
    a, b = mu[:, 0] - mu[:, 0].mean(), mu[:, 1] - mu[:, 1].mean()
    den = np.sqrt((a * a).sum() * (b * b).sum())
    if den == 0 or not np.isfinite(den):
        return 1.0
    return float(abs((a * b).sum() / den))


def select_run(abs_corrs) -> int:
    """Index of the smallest |corr| (first one on ties)."""
    return int(np.argmin(np.asarray(abs_corrs, dtype=np.float64)))


def fit_select(t: DataTable, cfg: TrainConfig, train_copies: int = 50,
               monitor_copies: int = 30) -> tuple[VaeModel, LatentTable, dict]:
    """Train ``cfg.runs`` independently seeded models, keep the least correlated.

    Each run duplicates ``t`` ``train_copies`` times (and ``monitor_copies``
    times for loss monitoring), shuffles, trains, encodes the duplicated rows,
    and dedupes them back to one point per row of ``t``. The run whose latent
    means have the smallest |Pearson r| wins.
    """
    runs = []
    for r in range(cfg.runs):
        run_seed = derive_seed(cfg.seed, 100 + r)
        run_cfg = TrainConfig(**{**asdict(cfg), "seed": run_seed, "runs": 1})
        train_t = shuffle_rows(duplicate_rows(t, train_copies), derive_seed(run_seed, 1))
        mon_t = shuffle_rows(duplicate_rows(t, monitor_copies), derive_seed(run_seed, 3)) if monitor_copies else None
        model = train(train_t, run_cfg, monitor=mon_t)
        lt = dedupe(encode_table(model, train_t))
        order = [lt.index(k) for k in t.row_ids]
        lt = LatentTable(list(t.row_ids), lt.mu[order], lt.log_var[order])
        corr = latent_correlation(lt.mu)
        log.info("run %d seed %d |corr| %.4f loss %.4f", r, run_seed, corr, model.history["loss"][-1])
        runs.append((model, lt, corr))
    best = select_run([c for _, _, c in runs])
    report = {
        "selected_run": best,
        "runs": [
            {
                "run": i,
                "seed": m.config["seed"],
                "abs_corr": c,
                "final_loss": m.history["loss"][-1],
                "first_loss": m.history["loss"][0],
                "monitor_loss": m.history.get("monitor_loss"),
                "loss_history": m.history["loss"],
            }
            for i, (m, _, c) in enumerate(runs)
        ],
        "train_copies": train_copies,
        "monitor_copies": monitor_copies,
        "config": asdict(cfg),
    }
    model, lt, _ = runs[best]
    return model, lt, report
