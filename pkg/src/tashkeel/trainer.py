"""Mini-batch training loop, checkpointing, and the chunk-size sweep.

Two optimizer profiles are provided. The `paper` profile reconstructs
the classic toolkit defaults this kind of model was historically
trained with (plain SGD at learning rate 1.0, halving from the middle
of the run); the exact toolkit version is unknown, so the profile is a
best-effort reconstruction. The `desk` default is Adam at 1e-3, which
converges reliably on small corpora.

Training is fully deterministic given (corpus, seed, config,
precision): batch order, dropout masks, and parameter updates all
derive from the configured seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from tashkeel import neuralcore as nc
from tashkeel.ambiguity import build_lexicon
from tashkeel.corpus import BuildStats, ChunkPair, CorpusSplit, chunk_corpus, detokenize
from tashkeel.errors import InputError, NonFiniteError, TrainingError
from tashkeel.evaluation import corpus_wer, lexicon_baseline, no_prediction
from tashkeel.model import CharVocab, ModelConfig, Seq2SeqModel

PROFILES = ("desk", "paper")


@dataclass
class TrainConfig:
    """Knobs of one training run.

    `steps` counts optimizer updates (the paper-scale profile runs
    100,000; the desk default is 2,000). Dropout lives in ModelConfig.
    """

    steps: int = 2000
    batch_size: int = 64
    profile: str = "desk"
    learning_rate: float | None = None  # None: profile default
    seed: int = 0
    validate_every: int = 200
    checkpoint_every: int = 500
    precision: str = "64"
    clip_norm: float = 5.0
    valid_decode_limit: int | None = 200

    def __post_init__(self):
        if self.steps <= 0:
            raise InputError("steps must be positive")
        if self.batch_size < 1:
            raise InputError("batch_size must be at least 1")
        if self.profile not in PROFILES:
            raise InputError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if self.precision not in ("32", "64"):
            raise InputError(f"precision must be '32' or '64', got {self.precision!r}")

    @property
    def dtype(self):
        return np.float32 if self.precision == "32" else np.float64

    def resolved_lr(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return 1.0 if self.profile == "paper" else 1e-3

    def profile_dropout(self) -> float:
        return 0.3 if self.profile == "paper" else 0.0


@dataclass
class TrainLog:
    """Append-only record of one run; step indices are monotone."""

    losses: list[tuple[int, float]] = field(default_factory=list)
    validations: list[tuple[int, float, float]] = field(default_factory=list)
    wall_clock: float = 0.0
    best_step: int | None = None
    best_valid_loss: float | None = None
    best_values: dict[str, np.ndarray] | None = None

    def add_loss(self, step: int, loss: float) -> None:
        if self.losses and step <= self.losses[-1][0]:
            raise TrainingError("loss log steps must be strictly increasing")
        self.losses.append((step, loss))

    def add_validation(self, step: int, loss: float, wer_value: float) -> None:
        if self.validations and step <= self.validations[-1][0]:
            raise TrainingError("validation log steps must be strictly increasing")
        self.validations.append((step, loss, wer_value))

    def write(self, path: Path) -> None:
        """Line-oriented loss log: `step<TAB>loss`."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for step, loss in self.losses:
                fh.write(f"{step}\t{loss:.6f}\n")

    def write_validations(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for step, loss, wer_value in self.validations:
                fh.write(f"{step}\t{loss:.6f}\t{wer_value:.6f}\n")


class Sgd:
    """Plain SGD with an optional halving schedule."""

    def __init__(self, params, lr: float, total_steps: int | None = None,
                 decay: float = 0.5):
        self.params = list(params)
        self.base_lr = lr
        self.decay = decay
        # halving starts at half the budget and repeats every tenth of it,
        # scaled from the historical 100k-step schedule
        self.start_decay = total_steps // 2 if total_steps else None
        self.interval = max(1, total_steps // 10) if total_steps else None

    def lr_at(self, step: int) -> float:
        if self.start_decay is None or step < self.start_decay:
            return self.base_lr
        halvings = 1 + (step - self.start_decay) // self.interval
        return self.base_lr * (self.decay ** halvings)

    def step(self, step_index: int) -> None:
        lr = self.lr_at(step_index)
        for p in self.params:
            p.data -= (lr * p.grad).astype(p.data.dtype, copy=False)


class Adam:
    """Adaptive-moment optimizer with bias correction."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, step_index: int) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (self.lr * (m / b1c)) / (np.sqrt(v / b2c) + self.eps)
            p.data -= update.astype(p.data.dtype, copy=False)


def make_optimizer(cfg: TrainConfig, params) -> Sgd | Adam:
    if cfg.profile == "paper":
        return Sgd(params, lr=cfg.resolved_lr(), total_steps=cfg.steps)
    return Adam(params, lr=cfg.resolved_lr())


def make_batches(
    chunks: Sequence[ChunkPair], batch_size: int, seed: int, pool_factor: int = 20
) -> Iterator[list[ChunkPair]]:
    """Endless deterministic batch stream.

    Each epoch reshuffles with the seeded generator, then sorts by
    source length inside pools of `pool_factor` batches so padding
    stays small without fixing the global order.
    """
    if not chunks:
        raise InputError("make_batches: empty dataset")
    rng = np.random.default_rng(seed)
    pool_size = batch_size * pool_factor
    while True:
        order = rng.permutation(len(chunks))
        for pool_start in range(0, len(order), pool_size):
            pool = [chunks[i] for i in order[pool_start : pool_start + pool_size]]
            pool.sort(key=lambda c: len(c.src_tokens))
            for i in range(0, len(pool), batch_size):
                yield pool[i : i + batch_size]


def validate(
    model: Seq2SeqModel,
    valid_chunks: Sequence[ChunkPair],
    batch_size: int = 64,
    decode_limit: int | None = None,
) -> tuple[float, float]:
    """Teacher-forced loss plus greedy-decode WER on the validation set.

    Returns (mean per-pair loss, micro WER). `decode_limit` caps how
    many chunks are decoded for the WER half.
    """
    if not valid_chunks:
        raise InputError("validate: empty validation set")
    ordered = sorted(valid_chunks, key=lambda c: len(c.src_tokens))
    total, n = 0.0, 0
    with nc.no_grad():
        for i in range(0, len(ordered), batch_size):
            batch = ordered[i : i + batch_size]
            total += model.batch_loss(batch).item() * len(batch)
            n += len(batch)
    loss = total / n
    to_decode = ordered[:decode_limit] if decode_limit else ordered
    refs, hyps = [], []
    for i in range(0, len(to_decode), batch_size):
        batch = to_decode[i : i + batch_size]
        outs = model.greedy_decode_batch(
            [model.vocab.encode(c.src_tokens) for c in batch])
        for chunk, out in zip(batch, outs):
            refs.append(detokenize(chunk.tgt_tokens))
            hyps.append(detokenize(model.vocab.decode(out)))
    return loss, corpus_wer(refs, hyps).micro


def _params_finite(model: Seq2SeqModel) -> bool:
    return all(np.isfinite(p.data).all() for p in model.parameters())


def _snapshot(model: Seq2SeqModel) -> dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in model.params.named().items()}


def restore(model: Seq2SeqModel, values: dict[str, np.ndarray]) -> None:
    for name, data in values.items():
        model.params[name].data[...] = data


def train(
    model: Seq2SeqModel,
    train_chunks: Sequence[ChunkPair],
    valid_chunks: Sequence[ChunkPair] | None,
    cfg: TrainConfig,
    ckpt_dir: Path | None = None,
    manifest_sha256: str = "",
) -> TrainLog:
    """Run exactly cfg.steps optimizer updates on `model` in place.

    Gradients are clipped to a global norm of cfg.clip_norm before each
    update. Periodic checkpoints and the best-validation-loss snapshot
    are written under `ckpt_dir` when given; a non-finite loss aborts
    the run with the last good checkpoint retained.
    """
    if not train_chunks:
        raise InputError("train: empty training set")
    if model.dtype != cfg.dtype:
        raise InputError(
            f"model precision {model.dtype} does not match config {cfg.precision}"
        )
    if ckpt_dir is not None:
        ckpt_dir = Path(ckpt_dir)
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    optimizer = make_optimizer(cfg, model.parameters())
    batches = make_batches(train_chunks, cfg.batch_size, cfg.seed)
    dropout_rng = np.random.default_rng((cfg.seed, 1))
    log = TrainLog()
    started = time.perf_counter()

    def save(name: str, step: int) -> None:
        if ckpt_dir is not None:
            model.save(ckpt_dir / name, manifest_sha256=manifest_sha256,
                       step=step, extra={"profile": cfg.profile})

    for step in range(1, cfg.steps + 1):
        batch = next(batches)
        model.params.zero_grads()
        try:
            loss = model.batch_loss(batch, training=True, rng=dropout_rng)
            loss_value = loss.item()
            loss.backward()
        except NonFiniteError as exc:
            log.wall_clock = time.perf_counter() - started
            if _params_finite(model):
                save("aborted.ckpt", step)
            raise TrainingError(
                f"non-finite loss at step {step}; last good checkpoint retained"
            ) from exc
        nc.clip_grad_norm(model.parameters(), cfg.clip_norm)
        optimizer.step(step)
        log.add_loss(step, loss_value)

        if (valid_chunks and cfg.validate_every
                and step % cfg.validate_every == 0):
            vloss, vwer = validate(model, valid_chunks, cfg.batch_size,
                                   cfg.valid_decode_limit)
            log.add_validation(step, vloss, vwer)
            if log.best_valid_loss is None or vloss < log.best_valid_loss:
                log.best_valid_loss = vloss
                log.best_step = step
                log.best_values = _snapshot(model)
        if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            save(f"step_{step}.ckpt", step)

    log.wall_clock = time.perf_counter() - started
    save("last.ckpt", cfg.steps)
    if log.best_values is not None and ckpt_dir is not None:
        final = _snapshot(model)
        restore(model, log.best_values)
        model.save(ckpt_dir / "best.ckpt", manifest_sha256=manifest_sha256,
                   step=log.best_step, extra={"profile": cfg.profile})
        restore(model, final)
    return log


@dataclass
class SweepCell:
    """One trained model of the chunk-size experiment."""

    size: int | str
    wer_pct: float | None
    final_loss: float | None = None
    error: str | None = None


@dataclass
class SweepReport:
    """Table-shaped sweep result: baselines plus one cell per size."""

    no_prediction_pct: float
    baseline_pct: float | None
    cells: list[SweepCell]
    test_sentences: int


def sweep(
    split: CorpusSplit,
    sizes: Sequence[int | str],
    train_cfg: TrainConfig,
    model_cfg: ModelConfig,
    out_dir: Path | None = None,
    include_baseline: bool = True,
) -> SweepReport:
    """Train one model per chunk size on identical seed and split.

    Each cell is evaluated on the test sentences with the best
    validation checkpoint (final parameters when no validation ran).
    Failures are recorded per cell and do not stop the sweep.
    """
    if not split.test:
        raise InputError("sweep: empty test split")
    refs = [p.tgt for p in split.test]
    srcs = [p.src for p in split.test]
    no_pred = no_prediction(refs, srcs).micro_pct

    baseline_pct = None
    if include_baseline:
        lexicon = build_lexicon(split.train)
        hyps = [lexicon_baseline(lexicon, s) for s in srcs]
        baseline_pct = corpus_wer(refs, hyps).micro_pct

    cells = []
    for size in sizes:
        try:
            stats = BuildStats()
            train_chunks = chunk_corpus(split.train, size, stats)
            valid_chunks = chunk_corpus(split.valid, size, stats)
            vocab = CharVocab.build(train_chunks)
            config = replace(model_cfg, chunk_size=size)
            model = Seq2SeqModel(config, vocab, seed=train_cfg.seed,
                                 dtype=train_cfg.dtype)
            cell_dir = Path(out_dir) / f"chunk_{size}" if out_dir else None
            log = train(model, train_chunks, valid_chunks, train_cfg,
                        ckpt_dir=cell_dir)
            if log.best_values is not None:
                restore(model, log.best_values)
            hyps = [model.predict_sentence(p.src)[0] for p in split.test]
            wer_pct = corpus_wer(refs, hyps).micro_pct
            cells.append(SweepCell(size=size, wer_pct=wer_pct,
                                   final_loss=log.losses[-1][1]))
        except TrainingError as exc:
            cells.append(SweepCell(size=size, wer_pct=None, error=str(exc)))
    return SweepReport(
        no_prediction_pct=no_pred,
        baseline_pct=baseline_pct,
        cells=cells,
        test_sentences=len(split.test),
    )
