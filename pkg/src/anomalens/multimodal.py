"""Five-layer multimodal autoencoder over K heterogeneous input types.

Each type gets its own encoder (layer 2) and decoder (layers 4 and 5);
a single shared third layer fuses all types:

    x2_k = act2(W2_k @ x_k + b2_k)                 per type
    x3   = act3(sum_k (W3_k @ x2_k + b3_k))        shared
    x4_k = act4(W4_k @ x3 + b4_k)                  per type
    x5_k = act5(W5_k @ x4_k + b5_k)                per type

Training is staged: per-type shallow autoencoders first, then the fusion
autoencoder on the frozen codes, then joint fine-tuning of everything.
Scoring weights each type's reconstruction MSE by the inverse of its mean
training MSE (its learnability), so easy-to-reconstruct types are not
drowned out by inherently noisy ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contribution import ContributionConfig, ContributionResult, sweep_lambdas
from .detector import Normalizer, fit_normalizer
from .errors import DataError, NumericalError
from .neuralnet import (
    ACTIVATIONS,
    DenseNetwork,
    Layer,
    TrainConfig,
    activation_derivative,
    apply_activation,
    init_network,
    sgd_train,
)
from .rng import PortableRng, derive_seed

NU_FLOOR = 1e-12


@dataclass
class ModalityType:
    name: str
    input_size: int
    code_size: int
    encode_activation: str = "relu"  # layer 2
    defuse_activation: str = "relu"  # layer 4
    decode_activation: str = "identity"  # layer 5

    def __post_init__(self):
        if self.input_size < 1 or self.code_size < 1:
            raise DataError(f"type {self.name!r}: sizes must be positive")
        if self.code_size >= self.input_size:
            raise DataError(
                f"type {self.name!r}: code size must be smaller than the input"
            )
        for act in (self.encode_activation, self.defuse_activation, self.decode_activation):
            if act not in ACTIVATIONS:
                raise DataError(f"type {self.name!r}: unknown activation {act!r}")


@dataclass
class ModalitySchema:
    types: list[ModalityType]
    shared_size: int
    shared_activation: str = "identity"  # layer 3

    def __post_init__(self):
        if not self.types:
            raise DataError("schema needs at least one type")
        names = [t.name for t in self.types]
        if len(set(names)) != len(names):
            raise DataError("type names must be unique")
        total_code = sum(t.code_size for t in self.types)
        if not 1 <= self.shared_size < total_code:
            raise DataError("shared layer must be smaller than the combined codes")
        if self.shared_activation not in ACTIVATIONS:
            raise DataError(f"unknown activation {self.shared_activation!r}")

    @property
    def K(self) -> int:
        return len(self.types)


@dataclass
class MAETrainConfig:
    epochs_pretrain: int = 100
    epochs_finetune: int = 100
    batch_size: int = 50
    learning_rate: float = 0.01
    weight_decay: float = 1e-6
    seed: int = 0
    pretrain: bool = True
    # the staged losses divide by different widths (input size, code size),
    # so the stages may need their own step sizes; None reuses learning_rate
    pretrain_outer_rate: float | None = None
    pretrain_inner_rate: float | None = None

    def __post_init__(self):
        if self.epochs_pretrain < 0 or self.epochs_finetune < 0:
            raise DataError("epoch counts must be non-negative")
        if self.batch_size < 1 or self.learning_rate <= 0 or self.weight_decay < 0:
            raise DataError("invalid optimizer settings")
        for rate in (self.pretrain_outer_rate, self.pretrain_inner_rate):
            if rate is not None and rate <= 0:
                raise DataError("invalid optimizer settings")

    def outer_rate(self) -> float:
        return self.learning_rate if self.pretrain_outer_rate is None else self.pretrain_outer_rate

    def inner_rate(self) -> float:
        return self.learning_rate if self.pretrain_inner_rate is None else self.pretrain_inner_rate


@dataclass
class MAEModel:
    schema: ModalitySchema
    enc_w: list[np.ndarray]
    enc_b: list[np.ndarray]
    fus_w: list[np.ndarray]
    fus_b: list[np.ndarray]  # per-type biases summed inside the shared layer
    defus_w: list[np.ndarray]
    defus_b: list[np.ndarray]
    dec_w: list[np.ndarray]
    dec_b: list[np.ndarray]
    normalizers: list[Normalizer]
    nu: np.ndarray = field(default_factory=lambda: np.array([]))
    weights: np.ndarray = field(default_factory=lambda: np.array([]))
    threshold: float = 0.0
    wmse_mean: float = 0.0
    wmse_std: float = 0.0

    def copy_params(self) -> dict:
        return {
            name: [a.copy() for a in getattr(self, name)]
            for name in ("enc_w", "enc_b", "fus_w", "fus_b", "defus_w", "defus_b", "dec_w", "dec_b")
        }


def init_mae(schema: ModalitySchema, seed: int, normalizers=None) -> MAEModel:
    """Glorot-uniform weights, zero biases, unit normalizers by default."""
    rng = PortableRng(derive_seed(seed, 0x3AE))
    S = schema.shared_size

    def glorot(fan_out, fan_in):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, fan_in * fan_out).reshape(fan_out, fan_in)

    enc_w, enc_b, fus_w, fus_b = [], [], [], []
    defus_w, defus_b, dec_w, dec_b = [], [], [], []
    for t in schema.types:
        enc_w.append(glorot(t.code_size, t.input_size))
        enc_b.append(np.zeros(t.code_size))
        fus_w.append(glorot(S, t.code_size))
        fus_b.append(np.zeros(S))
        defus_w.append(glorot(t.code_size, S))
        defus_b.append(np.zeros(t.code_size))
        dec_w.append(glorot(t.input_size, t.code_size))
        dec_b.append(np.zeros(t.input_size))
    if normalizers is None:
        normalizers = [
            Normalizer(np.zeros(t.input_size), np.ones(t.input_size)) for t in schema.types
        ]
    K = schema.K
    return MAEModel(
        schema, enc_w, enc_b, fus_w, fus_b, defus_w, defus_b, dec_w, dec_b,
        normalizers, np.ones(K), np.full(K, 1.0 / K), 0.0, 0.0, 0.0,
    )


def _as_batches(model: MAEModel, inputs) -> tuple[list[np.ndarray], bool]:
    if len(inputs) != model.schema.K:
        raise DataError(
            f"expected {model.schema.K} input types, got {len(inputs)}"
        )
    out = []
    single = None
    for t, x in zip(model.schema.types, inputs):
        x = np.asarray(x, dtype=np.float64)
        was_single = x.ndim == 1
        if was_single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != t.input_size:
            raise DataError(
                f"type {t.name!r} expects {t.input_size} dimensions, got shape {x.shape}"
            )
        if single is None:
            single = was_single
        elif single != was_single:
            raise DataError("mix of single records and batches across types")
        out.append(x)
    rows = {x.shape[0] for x in out}
    if len(rows) != 1:
        raise DataError("all types must supply the same number of records")
    return out, bool(single)


def _forward_full(model: MAEModel, xs: list[np.ndarray]):
    """(x2 list, x3, x4 list, x5 list) for aligned batches."""
    sch = model.schema
    x2 = [
        apply_activation(t.encode_activation, x @ w.T + b)
        for t, x, w, b in zip(sch.types, xs, model.enc_w, model.enc_b)
    ]
    pre3 = x2[0] @ model.fus_w[0].T + model.fus_b[0]
    for k in range(1, sch.K):
        pre3 = pre3 + (x2[k] @ model.fus_w[k].T + model.fus_b[k])
    x3 = apply_activation(sch.shared_activation, pre3)
    x4 = [
        apply_activation(t.defuse_activation, x3 @ w.T + b)
        for t, w, b in zip(sch.types, model.defus_w, model.defus_b)
    ]
    x5 = [
        apply_activation(t.decode_activation, h @ w.T + b)
        for t, h, w, b in zip(sch.types, x4, model.dec_w, model.dec_b)
    ]
    return x2, x3, x4, x5


def mae_forward(model: MAEModel, inputs) -> tuple[list[np.ndarray], np.ndarray]:
    """Per-type reconstructions and the shared code, for records as given.

    Accepts one vector or one aligned batch per type; no normalization is
    applied here.
    """
    xs, single = _as_batches(model, inputs)
    _, x3, _, x5 = _forward_full(model, xs)
    if single:
        return [r[0] for r in x5], x3[0]
    return x5, x3


def mae_mse_batch(model: MAEModel, normalized: list[np.ndarray]) -> list[np.ndarray]:
    """Per-type, per-record reconstruction MSE on already-normalized data."""
    _, _, _, x5 = _forward_full(model, normalized)
    return [np.mean((r - x) ** 2, axis=1) for r, x in zip(x5, normalized)]


def wmse_score(model: MAEModel, inputs) -> tuple[float, list[float]]:
    """Weighted anomaly score of one raw record plus its per-type parts."""
    wmse, per_type = wmse_score_batch(model, inputs)
    return float(wmse[0]), [float(m[0]) for m in per_type]


def wmse_score_batch(model: MAEModel, inputs) -> tuple[np.ndarray, list[np.ndarray]]:
    xs, _ = _as_batches(model, inputs)
    normalized = [n.normalize(x) for n, x in zip(model.normalizers, xs)]
    per_type = mae_mse_batch(model, normalized)
    total = model.weights[0] * per_type[0]
    for k in range(1, model.schema.K):
        total = total + model.weights[k] * per_type[k]
    return total, per_type


def _backward_full(model: MAEModel, xs, acts, cot5):
    """Reverse sweep from per-type output cotangents.

    Returns (param grads dict, per-type input cotangents). Mirrors the
    dense-network backward pass so the K=1 case is bit-identical to it.
    """
    sch = model.schema
    x2, x3, x4, x5 = acts
    g = {name: [] for name in ("enc_w", "enc_b", "fus_w", "fus_b", "defus_w", "defus_b", "dec_w", "dec_b")}

    delta4 = []
    for k, t in enumerate(sch.types):
        d5 = cot5[k] * activation_derivative(t.decode_activation, x5[k])
        g["dec_w"].append(d5.T @ x4[k])
        g["dec_b"].append(d5.sum(axis=0))
        cot4 = d5 @ model.dec_w[k]
        d4 = cot4 * activation_derivative(t.defuse_activation, x4[k])
        g["defus_w"].append(d4.T @ x3)
        g["defus_b"].append(d4.sum(axis=0))
        delta4.append(d4)

    cot3 = delta4[0] @ model.defus_w[0]
    for k in range(1, sch.K):
        cot3 = cot3 + delta4[k] @ model.defus_w[k]
    d3 = cot3 * activation_derivative(sch.shared_activation, x3)
    d3_bias = d3.sum(axis=0)

    cot_in = []
    for k, t in enumerate(sch.types):
        g["fus_w"].append(d3.T @ x2[k])
        # every per-type bias inside the shared sum sees the same gradient
        g["fus_b"].append(d3_bias if k == 0 else d3_bias.copy())
        cot2 = d3 @ model.fus_w[k]
        d2 = cot2 * activation_derivative(t.encode_activation, x2[k])
        g["enc_w"].append(d2.T @ xs[k])
        g["enc_b"].append(d2.sum(axis=0))
        cot_in.append(d2 @ model.enc_w[k])
    return g, cot_in


def mae_grad_params(model: MAEModel, xs: list[np.ndarray]) -> dict:
    """Parameter gradients of the joint objective on one aligned batch.

    The objective is the batch mean of sum_k ||x5_k - x_k||^2 / N_k, the
    same per-type scaling the joint training stage minimizes.
    """
    b = xs[0].shape[0]
    acts = _forward_full(model, xs)
    cot5 = [
        (2.0 / (b * t.input_size)) * (acts[3][k] - xs[k])
        for k, t in enumerate(model.schema.types)
    ]
    grads, _ = _backward_full(model, xs, acts, cot5)
    return grads


def mae_grad_input(model: MAEModel, vs: list[np.ndarray]) -> list[np.ndarray]:
    """Gradient of the weighted score with respect to each type's input.

    wMSE(v) depends on v both through the network and directly as the
    reconstruction target, so each type contributes
    w_k * (2/N_k) * (J_k^T r_k - r_k).
    """
    xs = [np.asarray(v, dtype=np.float64)[None, :] for v in vs]
    acts = _forward_full(model, xs)
    cot5 = [
        (2.0 * model.weights[k] / t.input_size) * (acts[3][k] - xs[k])
        for k, t in enumerate(model.schema.types)
    ]
    _, cot_in = _backward_full(model, xs, acts, cot5)
    return [(ci - c5)[0] for ci, c5 in zip(cot_in, cot5)]


def pretrain_outer(
    normalized: list[np.ndarray], schema: ModalitySchema, cfg: MAETrainConfig
) -> tuple[list, list, list, list]:
    """Stage one: independent shallow autoencoders, one per type.

    Each is input -> code -> input with that type's encode/decode
    activations; the trained halves become the layer-2 and layer-5
    parameters. Returns (enc_w, enc_b, dec_w, dec_b).
    """
    enc_w, enc_b, dec_w, dec_b = [], [], [], []
    for k, (t, data) in enumerate(zip(schema.types, normalized)):
        if data.shape[0] == 0:
            raise DataError(f"type {t.name!r}: empty training data")
        tc = TrainConfig(
            epochs=cfg.epochs_pretrain,
            batch_size=cfg.batch_size,
            learning_rate=cfg.outer_rate(),
            weight_decay=cfg.weight_decay,
            seed=derive_seed(cfg.seed, 0xA0 + k),
        )
        net = init_network(
            [t.input_size, t.code_size, t.input_size],
            [t.encode_activation, t.decode_activation],
            derive_seed(cfg.seed, 0xB0 + k),
        )
        net = sgd_train(net, data, tc)
        enc_w.append(net.layers[0].weights)
        enc_b.append(net.layers[0].biases)
        dec_w.append(net.layers[1].weights)
        dec_b.append(net.layers[1].biases)
    return enc_w, enc_b, dec_w, dec_b


def pretrain_inner(
    codes: list[np.ndarray], schema: ModalitySchema, cfg: MAETrainConfig
) -> tuple[list, list, list, list]:
    """Stage two: fusion autoencoder on the frozen per-type codes.

    Trains codes -> shared layer -> codes with the same per-type scaling
    as the joint objective (each type's squared error divided by its code
    size). Returns (fus_w, fus_b, defus_w, defus_b); the caller's encoder
    parameters are never touched.
    """
    sch = schema
    rows = {c.shape[0] for c in codes}
    if len(rows) != 1 or codes[0].shape[0] == 0:
        raise DataError("codes must be non-empty aligned batches")
    t_total = codes[0].shape[0]
    if cfg.batch_size > t_total:
        raise DataError("batch_size exceeds the training set")

    rng_init = PortableRng(derive_seed(cfg.seed, 0xC0))
    S = sch.shared_size

    def glorot(fan_out, fan_in):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng_init.uniform(-limit, limit, fan_in * fan_out).reshape(fan_out, fan_in)

    fus_w = [glorot(S, t.code_size) for t in sch.types]
    fus_b = [np.zeros(S) for _ in sch.types]
    defus_w = [glorot(t.code_size, S) for t in sch.types]
    defus_b = [np.zeros(t.code_size) for t in sch.types]

    rng = PortableRng(derive_seed(cfg.seed, 0xC1))
    lr = cfg.inner_rate()
    for epoch in range(cfg.epochs_pretrain):
        order = rng.permutation(t_total)
        for start in range(0, t_total, cfg.batch_size):
            rows_idx = order[start : start + cfg.batch_size]
            batch = [c[rows_idx] for c in codes]
            b = batch[0].shape[0]

            pre3 = batch[0] @ fus_w[0].T + fus_b[0]
            for k in range(1, sch.K):
                pre3 = pre3 + (batch[k] @ fus_w[k].T + fus_b[k])
            x3 = apply_activation(sch.shared_activation, pre3)
            x4 = [
                apply_activation(t.defuse_activation, x3 @ w.T + bb)
                for t, w, bb in zip(sch.types, defus_w, defus_b)
            ]

            loss = sum(
                float(np.sum((x4[k] - batch[k]) ** 2)) / t.code_size
                for k, t in enumerate(sch.types)
            ) / b
            if not np.isfinite(loss):
                raise NumericalError(f"fusion pre-training diverged at epoch {epoch}")

            delta4 = []
            for k, t in enumerate(sch.types):
                cot4 = (2.0 / (b * t.code_size)) * (x4[k] - batch[k])
                delta4.append(cot4 * activation_derivative(t.defuse_activation, x4[k]))
            cot3 = delta4[0] @ defus_w[0]
            for k in range(1, sch.K):
                cot3 = cot3 + delta4[k] @ defus_w[k]
            d3 = cot3 * activation_derivative(sch.shared_activation, x3)
            d3_bias = d3.sum(axis=0)

            for k, t in enumerate(sch.types):
                dw4 = delta4[k].T @ x3 + cfg.weight_decay * defus_w[k]
                defus_w[k] = defus_w[k] - lr * dw4
                defus_b[k] = defus_b[k] - lr * delta4[k].sum(axis=0)
                dw3 = d3.T @ batch[k] + cfg.weight_decay * fus_w[k]
                fus_w[k] = fus_w[k] - lr * dw3
                fus_b[k] = fus_b[k] - lr * d3_bias
    return fus_w, fus_b, defus_w, defus_b


def encode_types(model: MAEModel, normalized: list[np.ndarray]) -> list[np.ndarray]:
    """Layer-2 codes for aligned normalized batches."""
    return [
        apply_activation(t.encode_activation, x @ w.T + b)
        for t, x, w, b in zip(model.schema.types, normalized, model.enc_w, model.enc_b)
    ]


def finetune(model: MAEModel, train: list, cfg: MAETrainConfig) -> MAEModel:
    """Joint SGD over all parameters, then scoring statistics.

    Minimizes the batch mean of sum_k ||x5_k - x_k||^2 / N_k with weight
    decay on weight matrices. Afterwards each type's mean training MSE
    becomes its learnability nu_k (floored at 1e-12), the score weights
    are w_k proportional to 1/nu_k, and the anomaly threshold is
    mean + 3 std of the training records' weighted scores.
    """
    xs, _ = _as_batches(model, train)
    normalized = [n.normalize(x) for n, x in zip(model.normalizers, xs)]
    t_total = normalized[0].shape[0]
    if cfg.batch_size > t_total:
        raise DataError("batch_size exceeds the training set")

    params = model.copy_params()
    work = MAEModel(model.schema, **params, normalizers=model.normalizers)

    rng = PortableRng(derive_seed(cfg.seed, 0xF1))
    lr = cfg.learning_rate
    names_w = ("enc_w", "fus_w", "defus_w", "dec_w")
    names_b = ("enc_b", "fus_b", "defus_b", "dec_b")
    for epoch in range(cfg.epochs_finetune):
        order = rng.permutation(t_total)
        for start in range(0, t_total, cfg.batch_size):
            rows_idx = order[start : start + cfg.batch_size]
            batch = [z[rows_idx] for z in normalized]
            b = batch[0].shape[0]
            acts = _forward_full(work, batch)
            loss = 0.0
            cot5 = []
            for k, t in enumerate(work.schema.types):
                err = acts[3][k] - batch[k]
                loss += float(np.sum(err**2)) / t.input_size
                cot5.append((2.0 / (b * t.input_size)) * err)
            if not np.isfinite(loss / b):
                raise NumericalError(f"fine-tuning diverged at epoch {epoch}")
            grads, _ = _backward_full(work, batch, acts, cot5)
            for name in names_w:
                ws, gs = getattr(work, name), grads[name]
                for k in range(work.schema.K):
                    ws[k] = ws[k] - lr * (gs[k] + cfg.weight_decay * ws[k])
            for name in names_b:
                bs, gs = getattr(work, name), grads[name]
                for k in range(work.schema.K):
                    bs[k] = bs[k] - lr * gs[k]

    per_type = mae_mse_batch(work, normalized)
    nu = np.array([max(float(m.mean()), NU_FLOOR) for m in per_type])
    inv = 1.0 / nu
    weights = inv / inv.sum()
    work.nu = nu
    work.weights = weights
    wmse = weights[0] * per_type[0]
    for k in range(1, work.schema.K):
        wmse = wmse + weights[k] * per_type[k]
    work.wmse_mean = float(wmse.mean())
    work.wmse_std = float(wmse.std())
    work.threshold = work.wmse_mean + 3.0 * work.wmse_std
    return work


def train_mae(train: list, schema: ModalitySchema, cfg: MAETrainConfig) -> MAEModel:
    """Full pipeline: normalize, two pre-training stages, fine-tune.

    With cfg.pretrain False the staged initialization is skipped and the
    joint objective is trained from random parameters, which is the
    comparison arm for measuring the pre-training benefit.
    """
    if len(train) != schema.K:
        raise DataError(f"expected {schema.K} training arrays, got {len(train)}")
    arrays = [np.asarray(a, dtype=np.float64) for a in train]
    for t, a in zip(schema.types, arrays):
        if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] != t.input_size:
            raise DataError(f"type {t.name!r}: bad training shape {a.shape}")
    normalizers = [fit_normalizer(a) for a in arrays]
    normalized = [n.normalize(a) for n, a in zip(normalizers, arrays)]

    model = init_mae(schema, cfg.seed, normalizers)
    if cfg.pretrain:
        enc_w, enc_b, dec_w, dec_b = pretrain_outer(normalized, schema, cfg)
        model.enc_w, model.enc_b = enc_w, enc_b
        model.dec_w, model.dec_b = dec_w, dec_b
        codes = encode_types(model, normalized)
        fus_w, fus_b, defus_w, defus_b = pretrain_inner(codes, schema, cfg)
        model.fus_w, model.fus_b = fus_w, fus_b
        model.defus_w, model.defus_b = defus_w, defus_b
    return finetune(model, arrays, cfg)


def mae_estimate_contribution(
    model: MAEModel, inputs, cfg: ContributionConfig | None = None
) -> list[ContributionResult]:
    """Contribution degrees across all types of one raw record.

    eta spans the concatenation of the normalized per-type inputs and the
    smooth term is the weighted score, so the lambda sweep and stopping
    rule behave exactly as in the single-network case. The concatenated
    solution is split back per type; every piece carries the shared
    lambda/iteration/MSE metadata.
    """
    cfg = cfg or ContributionConfig()
    xs, single = _as_batches(model, inputs)
    if not single:
        raise DataError("contribution estimation takes a single record per type")
    normalized = [n.normalize(x)[0] for n, x in zip(model.normalizers, xs)]
    sizes = [t.input_size for t in model.schema.types]
    bounds = np.cumsum(sizes)[:-1]
    x_cat = np.concatenate(normalized)

    if cfg.mse_stop is None:
        cfg = ContributionConfig(cfg.lambdas, cfg.step_size, cfg.max_iters, model.threshold)

    def split(v):
        return np.split(v, bounds)

    def smooth_fn(v):
        parts = split(v)
        per_type = mae_mse_batch(model, [p[None, :] for p in parts])
        total = model.weights[0] * per_type[0]
        for k in range(1, model.schema.K):
            total = total + model.weights[k] * per_type[k]
        return float(total[0])

    def grad_fn(v):
        return np.concatenate(mae_grad_input(model, split(v)))

    res = sweep_lambdas(smooth_fn, grad_fn, x_cat, cfg, cfg.lambdas)
    pieces = split(res.eta)
    return [
        ContributionResult(p, res.lambda_used, res.iterations, res.final_mse, res.converged)
        for p in pieces
    ]


def as_dense_network(model: MAEModel) -> DenseNetwork:
    """The equivalent plain five-layer network; only defined for K=1."""
    if model.schema.K != 1:
        raise DataError("only a single-type model flattens to a plain network")
    t = model.schema.types[0]
    layers = [
        Layer(model.enc_w[0], model.enc_b[0], t.encode_activation),
        Layer(model.fus_w[0], model.fus_b[0], model.schema.shared_activation),
        Layer(model.defus_w[0], model.defus_b[0], t.defuse_activation),
        Layer(model.dec_w[0], model.dec_b[0], t.decode_activation),
    ]
    return DenseNetwork(layers, t.input_size)
