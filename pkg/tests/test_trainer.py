"""Training loop: batching, determinism, optimizers, abort handling, sweep."""

import math

import numpy as np
import pytest

from tashkeel import neuralcore as nc
from tashkeel.corpus import CorpusSplit, build_pairs, chunk_corpus
from tashkeel.errors import InputError, TrainingError
from tashkeel.evaluation import no_prediction
from tashkeel.model import CharVocab, ModelConfig, Seq2SeqModel
from tashkeel.synthetic import make_sentences
from tashkeel.trainer import (
    Adam,
    Sgd,
    TrainConfig,
    TrainLog,
    make_batches,
    sweep,
    train,
    validate,
)

from conftest import tiny_model


def micro_corpus(n=12, seed=3):
    pairs = build_pairs(make_sentences(n, seed=seed))
    chunks = chunk_corpus(pairs, 1)
    return pairs, chunks, CharVocab.build(chunks)


class TestTrainConfig:
    def test_zero_steps_forbidden(self):
        with pytest.raises(InputError):
            TrainConfig(steps=0)

    def test_bad_profile_and_precision_rejected(self):
        with pytest.raises(InputError):
            TrainConfig(profile="gpu")
        with pytest.raises(InputError):
            TrainConfig(precision="16")

    def test_profile_defaults(self):
        assert TrainConfig(profile="desk").resolved_lr() == pytest.approx(1e-3)
        assert TrainConfig(profile="paper").resolved_lr() == pytest.approx(1.0)
        assert TrainConfig(profile="paper").profile_dropout() == pytest.approx(0.3)
        assert TrainConfig(profile="desk").profile_dropout() == 0.0


class TestMakeBatches:
    def test_ten_chunks_batch_four_split_4_4_2(self):
        _, chunks, _ = micro_corpus()
        stream = make_batches(chunks[:10], 4, seed=0)
        sizes = [len(next(stream)) for _ in range(3)]
        assert sizes == [4, 4, 2]

    def test_same_seed_same_stream(self):
        _, chunks, _ = micro_corpus()
        a = make_batches(chunks, 4, seed=5)
        b = make_batches(chunks, 4, seed=5)
        for _ in range(10):
            batch_a, batch_b = next(a), next(b)
            assert [c.origin for c in batch_a] == [c.origin for c in batch_b]

    def test_epoch_covers_every_chunk(self):
        _, chunks, _ = micro_corpus()
        stream = make_batches(chunks, 4, seed=1)
        seen = []
        while len(seen) < len(chunks):
            seen.extend(c.origin for c in next(stream))
        assert sorted(seen[: len(chunks)]) == sorted(c.origin for c in chunks)

    def test_empty_dataset_rejected(self):
        with pytest.raises(InputError):
            next(make_batches([], 4, seed=0))

    def test_padded_batch_loss_matches_unbatched_mean(self):
        # mixed lengths force real padding; masking must keep the loss
        # identical to the unbatched mean
        _, chunks, vocab = micro_corpus()
        lengths = sorted({len(c.src_tokens) for c in chunks})
        assert len(lengths) > 1, "need mixed lengths for a padding test"
        model = tiny_model(vocab, hidden=8, embed=6, seed=2)
        batch = sorted(chunks, key=lambda c: len(c.src_tokens))[:: max(1, len(chunks) // 6)]
        batched = model.batch_loss(batch).item()
        singles = [model.forward_loss(c).item() for c in batch]
        assert batched == pytest.approx(sum(singles) / len(singles), abs=1e-9)


class TestOptimizers:
    def test_sgd_halving_schedule(self):
        opt = Sgd([], lr=1.0, total_steps=1000)
        assert opt.lr_at(1) == 1.0
        assert opt.lr_at(499) == 1.0
        assert opt.lr_at(500) == 0.5
        assert opt.lr_at(599) == 0.5
        assert opt.lr_at(600) == 0.25
        assert opt.lr_at(999) == pytest.approx(1.0 * 0.5 ** 5)

    def test_adam_moves_parameters_against_gradient(self):
        p = nc.Parameter("p", np.array([[1.0, -1.0]]))
        opt = Adam([p], lr=0.1)
        p.grad[...] = np.array([[1.0, -2.0]])
        before = p.data.copy()
        opt.step(1)
        assert p.data[0, 0] < before[0, 0]
        assert p.data[0, 1] > before[0, 1]


class TestTrain:
    def test_one_step_changes_parameters(self):
        _, chunks, vocab = micro_corpus()
        model = tiny_model(vocab, hidden=8, embed=6)
        before = {n: p.data.copy() for n, p in model.params.named().items()}
        cfg = TrainConfig(steps=1, batch_size=4, validate_every=0,
                          checkpoint_every=0, seed=0)
        log = train(model, chunks, None, cfg)
        assert len(log.losses) == 1
        deltas = [np.abs(p.data - before[n]).max()
                  for n, p in model.params.named().items()]
        assert max(deltas) > 0.0

    def test_initial_loss_near_log_vocab(self):
        _, chunks, vocab = micro_corpus()
        model = tiny_model(vocab, hidden=8, embed=6, seed=1)
        loss = model.batch_loss(chunks[:8]).item()
        assert abs(loss - math.log(len(vocab))) / math.log(len(vocab)) < 0.15

    def test_identical_runs_give_identical_checkpoints(self, tmp_path):
        _, chunks, vocab = micro_corpus()
        blobs = []
        for run in ("a", "b"):
            model = tiny_model(vocab, hidden=8, embed=6, seed=4)
            cfg = TrainConfig(steps=12, batch_size=4, validate_every=0,
                              checkpoint_every=0, seed=9)
            train(model, chunks, None, cfg, ckpt_dir=tmp_path / run)
            blobs.append((tmp_path / run / "last.ckpt").read_bytes())
        assert blobs[0] == blobs[1]

    def test_gradient_clipping_bounds_global_norm(self):
        _, chunks, vocab = micro_corpus()
        model = tiny_model(vocab, hidden=8, embed=6)
        loss = model.batch_loss(chunks[:6])
        loss.backward()
        nc.clip_grad_norm(model.parameters(), 0.01)
        assert nc.global_grad_norm(model.parameters()) <= 0.01 + 1e-12

    def test_non_finite_loss_aborts_and_keeps_checkpoint(self, tmp_path):
        _, chunks, vocab = micro_corpus()
        model = tiny_model(vocab, hidden=8, embed=6)
        model.params["out_W"].data[...] = 1e308  # overflow on first matmul
        cfg = TrainConfig(steps=5, batch_size=4, validate_every=0,
                          checkpoint_every=0, seed=0)
        with pytest.raises(TrainingError, match="non-finite"):
            train(model, chunks, None, cfg, ckpt_dir=tmp_path)
        assert (tmp_path / "aborted.ckpt").exists()

    def test_precision_mismatch_rejected(self):
        _, chunks, vocab = micro_corpus()
        model = tiny_model(vocab, hidden=8, embed=6)  # float64
        with pytest.raises(InputError, match="precision"):
            train(model, chunks, None, TrainConfig(steps=1, precision="32"))


class TestValidate:
    def test_empty_validation_set_rejected(self):
        _, chunks, vocab = micro_corpus()
        model = tiny_model(vocab, hidden=8, embed=6)
        with pytest.raises(InputError):
            validate(model, [])

    def test_untrained_wer_not_better_than_no_prediction(self):
        pairs, chunks, vocab = micro_corpus()
        model = tiny_model(vocab, hidden=8, embed=6, seed=5)
        _, wer_value = validate(model, chunks)
        base = no_prediction([p.tgt for p in pairs], [p.src for p in pairs]).micro
        assert wer_value >= base - 1e-9

    def test_memorized_chunk_scores_zero_wer(self):
        # overfit two one-word chunks, then validate on them
        pairs, chunks, vocab = micro_corpus(n=2, seed=8)
        subset = chunks[:2]
        model = tiny_model(vocab, hidden=24, embed=12, seed=0)
        cfg = TrainConfig(steps=600, batch_size=2, learning_rate=1e-2,
                          validate_every=0, checkpoint_every=0, seed=0)
        log = train(model, subset, None, cfg)
        assert log.losses[-1][1] < 0.01
        loss, wer_value = validate(model, subset)
        assert wer_value == 0.0
        out = model.greedy_decode(model.vocab.encode(subset[0].src_tokens))
        assert tuple(model.vocab.decode(out)) == subset[0].tgt_tokens


class TestTrainLog:
    def test_steps_must_increase(self):
        log = TrainLog()
        log.add_loss(1, 2.0)
        with pytest.raises(TrainingError):
            log.add_loss(1, 1.9)

    def test_tsv_format(self, tmp_path):
        log = TrainLog()
        log.add_loss(1, 2.5)
        log.add_loss(2, 1.25)
        log.write(tmp_path / "log.tsv")
        lines = (tmp_path / "log.tsv").read_text().splitlines()
        assert lines == ["1\t2.500000", "2\t1.250000"]


class TestSweep:
    def test_toy_sweep_completes_with_all_columns(self, tmp_path):
        pairs = build_pairs(make_sentences(24, seed=12))
        split = CorpusSplit(train=pairs[:16], valid=pairs[16:20],
                            test=pairs[20:], seed=0)
        model_cfg = ModelConfig(embed_dim=6, hidden_dim=8, chunk_size=1,
                                dropout=0.0)
        train_cfg = TrainConfig(steps=8, batch_size=8, validate_every=4,
                                checkpoint_every=0, seed=0)
        report = sweep(split, [1, "sentence"], train_cfg, model_cfg,
                       out_dir=tmp_path)
        assert report.no_prediction_pct == pytest.approx(100.0)
        assert report.baseline_pct is not None
        assert [c.size for c in report.cells] == [1, "sentence"]
        for cell in report.cells:
            assert cell.error is None and cell.wer_pct is not None
        assert (tmp_path / "chunk_1" / "last.ckpt").exists()

    def test_failed_cell_recorded_not_fatal(self, tmp_path):
        pairs = build_pairs(make_sentences(24, seed=12))
        split = CorpusSplit(train=pairs[:16], valid=pairs[16:20],
                            test=pairs[20:], seed=0)
        model_cfg = ModelConfig(embed_dim=6, hidden_dim=8, chunk_size=1,
                                dropout=0.0)
        # paper profile at an absurd learning rate diverges to non-finite
        train_cfg = TrainConfig(steps=40, batch_size=8, profile="paper",
                                learning_rate=1e200, validate_every=0,
                                checkpoint_every=0, seed=0)
        report = sweep(split, [1], train_cfg, model_cfg)
        assert report.cells[0].error is not None
        assert report.cells[0].wer_pct is None
