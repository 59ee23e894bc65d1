from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from app.core.errors import NonFiniteLossError, SkipSample
from app.core.schemas import (
    ARG0_ID,
    PRED_ID,
    SPECIAL_TOKENS,
    GradCheckReport,
    Sample,
    StageSpec,
    SummarizerConfig,
    TrainingConfig,
    TrainingReport,
    TrainingRow,
)
from app.corpus.corpus_io import Vocabulary
from app.model.neural_core import adagrad_step, finite_difference_check
from app.model.summarizer import (
    Example,
    Summarizer,
    combined_loss,
    prepare_example,
    teacher_forced_accuracy,
)

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("seed", "epoch", "stage", "train_loss", "validation_loss", "accuracy")


def _prepare(samples: Sequence[Sample], vocab: Vocabulary, stage: StageSpec, strict_order: str) -> Tuple[List[Example], int]:
    out: List[Example] = []
    skipped = 0
    for s in samples:
        try:
            out.append(prepare_example(s, vocab, stage, strict_order))
        except SkipSample:
            skipped += 1
    return out, skipped


def evaluation_loss(examples: Sequence[Example], model: Summarizer, alpha: float) -> float:
    if not examples:
        return 0.0
    total = 0.0
    for ex in examples:
        sem, summ, _, _ = model.forward_teacher_forced(ex)
        total += combined_loss(sem, summ, alpha)
    return total / len(examples)


def train(
    corpus: Sequence[Sample],
    model: Summarizer,
    vocab: Vocabulary,
    cfg: TrainingConfig,
    seed: int,
    validation: Optional[Sequence[Sample]] = None,
    stages: Optional[Sequence[StageSpec]] = None,
    show_progress: bool = False,
) -> TrainingReport:
    """
    Treino em estágios (comprimentos de entrada/saída crescentes) com Adagrad.
    - cada época embaralha o corpus com a semente e atualiza a cada minibatch (gradiente médio)
    - o estágio avança quando a perda de validação não melhora por cfg.patience épocas
    - cfg.stop_at_accuracy encerra tudo quando a acurácia com teacher forcing atinge o limiar
    """
    if not corpus:
        raise ValueError("train: corpus vazio")
    stages = list(stages or model.cfg.stage_schedule)
    rng = np.random.default_rng(seed)
    report = TrainingReport(seed=seed)
    store = model.store
    store.zero_grad()
    epoch_global = 0
    done = False

    for stage_idx, stage in enumerate(stages, start=1):
        train_ex, skipped = _prepare(corpus, vocab, stage, cfg.strict_order)
        val_ex, _ = _prepare(validation or [], vocab, stage, cfg.strict_order)
        report.skipped_samples += skipped
        if skipped:
            report.warnings.append(f"estágio {stage_idx}: {skipped} amostra(s) sem resumo após truncamento")
        if not train_ex:
            report.warnings.append(f"estágio {stage_idx}: nenhuma amostra treinável")
            continue
        alpha = stage.alpha if stage.alpha is not None else model.cfg.alpha
        best = math.inf
        stale = 0
        for _ in range(cfg.max_epochs_per_stage):
            epoch_global += 1
            order = rng.permutation(len(train_ex))
            total_loss = 0.0
            correct = total = 0
            batches = [order[k:k + cfg.batch_size] for k in range(0, len(order), cfg.batch_size)]
            for batch in tqdm(batches, desc=f"estágio {stage_idx} época {epoch_global}", disable=not show_progress):
                for idx in batch:
                    ex = train_ex[int(idx)]
                    sem, summ, trace, cache = model.forward_teacher_forced(ex)
                    loss = combined_loss(sem, summ, alpha)
                    if not math.isfinite(loss):
                        raise NonFiniteLossError(loss, stage_idx, epoch_global, ex.id)
                    scale = 1.0 / len(batch)
                    model.backward(cache, (1.0 - alpha) * scale, alpha * scale)
                    total_loss += loss
                    correct += trace.correct
                    total += trace.total
                adagrad_step(store)
                report.updates += 1

            train_loss = total_loss / len(train_ex)
            val_loss = evaluation_loss(val_ex, model, alpha) if val_ex else train_loss
            running_acc = correct / total if total else 0.0
            accuracy = running_acc
            if cfg.stop_at_accuracy is not None and running_acc >= cfg.stop_at_accuracy:
                accuracy = teacher_forced_accuracy(train_ex, model)
            report.rows.append(
                TrainingRow(epoch=epoch_global, stage=stage_idx, train_loss=train_loss, validation_loss=val_loss, accuracy=accuracy)
            )
            logger.info(
                "estágio %d época %d: treino=%.4f validação=%.4f acurácia=%.4f",
                stage_idx, epoch_global, train_loss, val_loss, accuracy,
            )
            if cfg.stop_at_accuracy is not None and accuracy >= cfg.stop_at_accuracy:
                done = True
                break
            if val_loss < best - 1e-9:
                best = val_loss
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    logger.info("estágio %d convergiu após %d épocas sem melhora", stage_idx, stale)
                    break
        if done:
            break

    last_stage = stages[min(len(stages), max(r.stage for r in report.rows) if report.rows else 1) - 1]
    final_ex, _ = _prepare(corpus, vocab, last_stage, cfg.strict_order)
    report.final_accuracy = teacher_forced_accuracy(final_ex, model)
    return report


def write_training_csv(path: Path, report: TrainingReport) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([report.seed, r.epoch, r.stage, f"{r.train_loss:.6f}", f"{r.validation_loss:.6f}", f"{r.accuracy:.6f}"])


def gradient_check(
    cfg: SummarizerConfig,
    seed: int,
    vocab_size: int = 20,
    input_len: int = 5,
    alpha: float = 0.5,
    epsilon: float = 1e-5,
    max_entries_per_tensor: Optional[int] = None,
) -> GradCheckReport:
    """Diferenças finitas num modelo reduzido (vocabulário, dimensões e entrada pequenos) com a variante de cfg."""
    tiny = cfg.model_copy(update={
        "embed_dim": 6,
        "hidden_dim": 8,
        "attention_dim": 8,
        "head_size": 8 // cfg.heads if cfg.heads > 1 else cfg.head_size,
    })
    tiny = SummarizerConfig.model_validate(tiny.model_dump())
    model = Summarizer(tiny, vocab_size, seed=seed)
    rng = np.random.default_rng(seed)
    words = np.arange(len(SPECIAL_TOKENS), vocab_size)
    ex = Example(
        id="gradcheck",
        article_ids=[int(i) for i in rng.choice(words, size=input_len)],
        semantic_ids=[PRED_ID] + [int(i) for i in rng.choice(words, size=2)] + [ARG0_ID, int(rng.choice(words))],
        summary_ids=[int(i) for i in rng.choice(words, size=4)],
    )

    def loss_fn(store, compute_grad: bool) -> float:
        sem, summ, _, cache = model.forward_teacher_forced(ex)
        if compute_grad:
            store.zero_grad()
            model.backward(cache, 1.0 - alpha, alpha)
        return combined_loss(sem, summ, alpha)

    report = finite_difference_check(loss_fn, model.store, epsilon, max_entries_per_tensor, seed)
    logger.info(
        "gradcheck %s heads=%d dual=%s: erro máximo %.3e",
        tiny.decoder_mode, tiny.heads, tiny.dual_attention, report.max_error,
    )
    return report
