"""Training protocol: Adam, softmax cross-entropy, early stopping, history.

A run makes a seeded stratified validation split, iterates shuffled
mini-batches, and stops once validation loss has failed to improve for
`patience` consecutive epochs, returning the parameters from the epoch with
the lowest validation loss (earliest epoch on ties). Everything downstream
of the seed is deterministic; the eigenvalue stability invariant
(all |A_bar| < 1) is asserted after every epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import data as data_mod
from . import model as model_mod
from .errors import NumericError


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 20
    val_fraction: float = 0.10
    seed: int = 0
    ref_accuracy: float | None = None

    def validate(self):
        # lr = 0 is allowed so early-stopping mechanics can be exercised in
        # isolation; negative rates are rejected.
        if self.lr < 0.0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")


@dataclass
class TrainHistory:
    """Per-epoch metrics (1-based epochs) plus checkpoint bookkeeping."""

    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    best_epoch: int = 0
    crossing_epoch: int | None = None

    @property
    def n_epochs(self):
        return len(self.val_loss)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy -log softmax(z)[label], max-shifted."""
    logits = np.asarray(logits, dtype=float)
    single = logits.ndim == 1
    if single:
        logits = logits[None]
        labels = np.asarray([labels])
    labels = np.asarray(labels)
    n_c = logits.shape[-1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_c):
        raise ValueError(f"labels must lie in [0, {n_c})")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1))
    picked = shifted[np.arange(logits.shape[0]), labels]
    return float((lse - picked).mean())


def softmax(logits):
    logits = np.asarray(logits, dtype=float)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_t(logits, labels):
    """Differentiable batch-mean cross-entropy on a (B, n_c) logits Tensor."""
    n_batch, n_c = logits.shape
    onehot = np.zeros((n_batch, n_c))
    onehot[np.arange(n_batch), np.asarray(labels)] = 1.0
    shifted = logits - logits.data.max(axis=-1, keepdims=True)
    lse = ad.log(ad.exp(shifted).sum(axis=-1))
    return (lse - (shifted * onehot).sum(axis=-1)).mean()


def adam_step(params, grads, moment1, moment2, t, config):
    """Bias-corrected Adam update; returns new (params, moment1, moment2)."""
    if t < 1:
        raise ValueError(f"Adam step index must be >= 1, got {t}")
    b1, b2 = config.beta1, config.beta2
    new_p, new_m, new_v = {}, {}, {}
    for key, p in params.items():
        g = grads[key]
        m = b1 * moment1[key] + (1.0 - b1) * g
        v = b2 * moment2[key] + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_p[key] = p - config.lr * m_hat / (np.sqrt(v_hat) + config.eps_adam)
        new_m[key] = m
        new_v[key] = v
    return new_p, new_m, new_v


def evaluate(mdl, dataset, batch_size=256):
    """(mean loss, misclassification error) of a model on a dataset, eval mode."""
    losses = []
    wrong = 0
    for start in range(0, dataset.n_samples, batch_size):
        stop = min(start + batch_size, dataset.n_samples)
        logits = model_mod.forward(dataset.x[start:stop], mdl)
        labels = dataset.y[start:stop]
        losses.append(cross_entropy(logits, labels) * (stop - start))
        wrong += int((np.argmax(logits, axis=-1) != labels).sum())
    loss = float(np.sum(losses) / dataset.n_samples)
    return loss, wrong / dataset.n_samples


def _spectral_radii(leaves, n_layers):
    radii = []
    for i in range(n_layers):
        p = {name: leaves[f"block{i}.ssm.{name}"] for name in ("log_a_real", "a_imag", "log_delta")}
        lam = -np.exp(p["log_a_real"]) + 1j * p["a_imag"]
        radii.append(np.abs(np.exp(np.exp(p["log_delta"])[:, None] * lam)))
    return np.concatenate([r.ravel() for r in radii])


def train(mdl, dataset, config):
    """Fit a model; returns (model at best validation loss, TrainHistory)."""
    config.validate()
    if dataset.n_classes < 2 or np.unique(dataset.y).size < 2:
        raise ValueError("training requires at least two classes present in the data")
    train_set, val_set = data_mod.split(dataset, config.val_fraction, config.seed)

    leaves = {k: v.copy() for k, v in mdl.leaves().items()}
    moment1 = {k: np.zeros_like(v) for k, v in leaves.items()}
    moment2 = {k: np.zeros_like(v) for k, v in leaves.items()}
    rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    best_loss = np.inf
    best_leaves = {k: v.copy() for k, v in leaves.items()}
    since_improve = 0
    step = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(train_set.n_samples)
        loss_sum = 0.0
        correct = 0
        for start in range(0, train_set.n_samples, config.batch_size):
            batch = order[start : start + config.batch_size]
            xb, yb = train_set.x[batch], train_set.y[batch]
            tensors = {k: ad.Tensor(v, requires_grad=True) for k, v in leaves.items()}
            logits = model_mod.forward_t(
                ad.Tensor(xb), tensors, mdl.n_layers, mdl.normalized,
                mdl.dropout_rate, True, rng,
            )
            loss = cross_entropy_t(logits, yb)
            if not np.isfinite(loss.data):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            grads = ad.gradients(loss, tensors)
            step += 1
            leaves, moment1, moment2 = adam_step(leaves, grads, moment1, moment2, step, config)
            loss_sum += float(loss.data) * len(batch)
            correct += int((np.argmax(logits.data, axis=-1) == yb).sum())

        radii = _spectral_radii(leaves, mdl.n_layers)
        if not (radii < 1.0).all():
            raise NumericError(f"|A_bar| >= 1 after epoch {epoch}: max {radii.max()}")

        val_loss, val_err = evaluate(mdl.with_leaves(leaves), val_set)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        history.train_loss.append(loss_sum / train_set.n_samples)
        history.train_acc.append(correct / train_set.n_samples)
        history.val_loss.append(val_loss)
        history.val_acc.append(1.0 - val_err)
        if (
            history.crossing_epoch is None
            and config.ref_accuracy is not None
            and history.val_acc[-1] >= config.ref_accuracy
        ):
            history.crossing_epoch = epoch

        if val_loss < best_loss:
            best_loss = val_loss
            best_leaves = {k: v.copy() for k, v in leaves.items()}
            history.best_epoch = epoch
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= config.patience:
                break

    return mdl.with_leaves(best_leaves), history


def write_history_csv(history, path):
    """history.csv with columns epoch, train_loss, train_acc, val_loss, val_acc."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
        for i in range(history.n_epochs):
            fh.write(
                f"{i + 1},{history.train_loss[i]!r},{history.train_acc[i]!r},"
                f"{history.val_loss[i]!r},{history.val_acc[i]!r}\n"
            )


def compare_convergence(dataset, config, seeds, n_hidden, n_state, threshold, dropout_rate=0.1):
    """Threshold-crossing comparison between the plain and normalized variants.

    Trains both variants from matched seeds and reports, per (seed, variant),
    the first epoch whose validation accuracy reaches `threshold`. The
    ordering is reported, never asserted: which variant converges faster is
    an empirical, per-dataset question.
    """
    rows = []
    for seed in seeds:
        for normalized in (False, True):
            cfg = replace(config, seed=seed, ref_accuracy=threshold)
            mdl = model_mod.init_model(
                dataset.n_features,
                n_hidden,
                n_state,
                dataset.n_classes,
                normalized=normalized,
                dropout_rate=dropout_rate,
                seed=seed,
            )
            _, history = train(mdl, dataset, cfg)
            rows.append(
                {
                    "seed": seed,
                    "model": "MS4N" if normalized else "MS4",
                    "crossing_epoch": history.crossing_epoch,
                    "epochs_run": history.n_epochs,
                    "best_epoch": history.best_epoch,
                    "best_val_loss": min(history.val_loss),
                }
            )
    return rows


def write_convergence_csv(rows, path):
    """Report CSV: seed,model,crossing_epoch,epochs_run,best_epoch,best_val_loss."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("seed,model,crossing_epoch,epochs_run,best_epoch,best_val_loss\n")
        for row in rows:
            crossing = "" if row["crossing_epoch"] is None else str(row["crossing_epoch"])
            fh.write(
                f"{row['seed']},{row['model']},{crossing},{row['epochs_run']},"
                f"{row['best_epoch']},{row['best_val_loss']!r}\n"
            )
