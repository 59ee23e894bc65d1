from __future__ import annotations

import argparse
import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from app.core.config_loader import ROOT
from app.core.errors import ConfigError
from app.core.schemas import RunConfig, Sample, Span
from app.corpus.adversarial import adversarial_sweep, build_distractor_pool, perturb, write_sweep_csv
from app.corpus.corpus_io import (
    Vocabulary,
    build_vocabulary,
    ids_of,
    load_vocabulary,
    preprocess_corpus,
    read_corpus,
    save_vocabulary,
    write_corpus,
)
from app.corpus.srl_targets import delinearize, linearize, restrict_to_input, select_targets, to_frames
from app.corpus.toy_corpus import toy_corpus, toy_distractors
from app.eval.metrics import evaluate_corpus, semantic_usage, srl_stats, write_metric_csv
from app.model.rerank_decoder import decode_summary, write_rerank_reports
from app.model.summarizer import Summarizer, SummarizerDecoder, load_summarizer, save_summarizer, warm_start
from app.model.trainer import gradient_check, train, write_training_csv

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-4


def lead_n(article: Sequence[str], sentence_bounds: Sequence[Span], n: int) -> List[str]:
    """Primeiras min(n, total) frases do artigo."""
    if n < 1:
        raise ValueError(f"lead_n: n deve ser >= 1 (recebido {n})")
    out: List[str] = []
    for s, e in list(sentence_bounds)[:n]:
        out.extend(article[s:e])
    return out


# -------------------------------
# utilitários de E/S
# -------------------------------
def _require(path: Optional[str], flag: str) -> Path:
    if not path:
        raise ConfigError(f"{flag} é obrigatório para este comando")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{flag}: arquivo não encontrado: {p}")
    return p


def _out_dir(args: argparse.Namespace, default: str) -> Path:
    out = Path(args.out or (ROOT / "runs" / default))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_jsonl(path: Path, records: Sequence[dict]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> List[dict]:
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(json.loads(line))
    return out


# -------------------------------
# decodificação (reaproveitada por decode e adversarial)
# -------------------------------
def _gold_ids(sample: Sample, vocab: Vocabulary, cfg: RunConfig) -> List[int]:
    stage = cfg.summarizer.stage_schedule[-1]
    structs = sample.targets if sample.targets is not None else select_targets(sample, strict_order=cfg.training.strict_order)
    structs = restrict_to_input(structs, stage.max_input_len)
    return ids_of(linearize(to_frames(structs, sample.article)).tokens, vocab)


def _decode_one(job: Tuple[Summarizer, Vocabulary, Sample, RunConfig]):
    model, vocab, sample, cfg = job
    article = sample.article[: model.cfg.stage_schedule[-1].max_input_len]
    adapter = SummarizerDecoder(model, vocab, ids_of(article, vocab))
    gold = _gold_ids(sample, vocab, cfg) if cfg.beam.semantic_source == "gold" else None
    # o mínimo efetivo é o maior entre o do beam e o do modelo
    beam = cfg.beam.model_copy(update={"min_len": max(cfg.beam.min_len, model.cfg.min_output_tokens)})
    return decode_summary(adapter, beam, article_tokens=article, gold_semantic_ids=gold, sample_id=sample.id)


def decode_corpus(model: Summarizer, vocab: Vocabulary, samples: Sequence[Sample], cfg: RunConfig):
    jobs = [(model, vocab, s, cfg) for s in samples]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_decode_one, jobs))
    return [_decode_one(j) for j in jobs]


# -------------------------------
# comandos
# -------------------------------
def cmd_toy_corpus(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = _out_dir(args, "toy")
    n = write_corpus(out / "toy.jsonl", toy_corpus(seed=None))
    m = write_corpus(out / "distractors.jsonl", toy_distractors(seed=None))
    logger.info("corpus toy: %d amostras, %d de distratores em %s", n, m, out)
    return 0


def cmd_preprocess(args: argparse.Namespace, cfg: RunConfig) -> int:
    src = _require(args.corpus, "--corpus")
    out = _out_dir(args, "preprocess")
    kept, report = preprocess_corpus(read_corpus(src), cfg.preprocess)
    write_corpus(out / "corpus.jsonl", kept)
    if kept:
        save_vocabulary(out / "vocab.txt", build_vocabulary(kept, cfg.vocab_size))
    _write_json(out / "preprocess_report.json", {"seed": cfg.seed, **report.model_dump()})
    for w in report.warnings:
        logger.warning(w)
    return 0


def cmd_targets(args: argparse.Namespace, cfg: RunConfig) -> int:
    src = _require(args.corpus, "--corpus")
    out = _out_dir(args, "targets")
    samples = read_corpus(src)
    with_targets = [
        s.model_copy(update={"targets": select_targets(s, strict_order=cfg.training.strict_order)}) for s in samples
    ]
    write_corpus(out / "targets.jsonl", with_targets)
    stats = srl_stats(to_frames(s.targets or [], s.article) for s in with_targets)
    empty = sum(1 for s in with_targets if not s.targets)
    _write_json(out / "targets_report.json", {"seed": cfg.seed, "empty_targets": empty, **stats.model_dump()})
    logger.info("targets: %d amostras, %d sem estrutura selecionada", len(with_targets), empty)
    return 0


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = read_corpus(_require(args.corpus, "--corpus"))
    vocab = load_vocabulary(_require(args.vocab, "--vocab"))
    validation = read_corpus(_require(args.validation, "--validation")) if args.validation else None
    out = _out_dir(args, "train")
    model = Summarizer(
        cfg.summarizer,
        len(vocab),
        seed=cfg.seed,
        learning_rate=cfg.training.learning_rate,
        initial_accumulator=cfg.training.initial_accumulator,
    )
    if args.baseline_checkpoint:
        baseline, _ = load_summarizer(_require(args.baseline_checkpoint, "--baseline-checkpoint"))
        warm_start(model.store, baseline.store, cfg.summarizer.decoder_mode)
    report = train(samples, model, vocab, cfg.training, cfg.seed, validation=validation, show_progress=not args.quiet)
    save_summarizer(out / "model.ckpt", model, cfg.seed)
    write_training_csv(out / "training_report.csv", report)
    for w in report.warnings:
        logger.warning(w)
    logger.info("treino concluído: %d atualizações, acurácia final %.4f", report.updates, report.final_accuracy)
    return 0


def cmd_decode(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = read_corpus(_require(args.corpus, "--corpus"))
    vocab = load_vocabulary(_require(args.vocab, "--vocab"))
    model, _ = load_summarizer(_require(args.checkpoint, "--checkpoint"))
    out = _out_dir(args, "decode")
    results = decode_corpus(model, vocab, samples, cfg)
    records = [
        {"id": s.id, "seed": cfg.seed, "semantics": sem.tokens, "summary": summary}
        for s, (sem, summary, _) in zip(samples, results)
    ]
    _write_jsonl(out / "decoded.jsonl", records)
    write_rerank_reports(out / "rerank.jsonl", [rep for _, _, rep in results], cfg.seed)
    return 0


def cmd_baseline_lead(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = read_corpus(_require(args.corpus, "--corpus"))
    out = _out_dir(args, "lead")
    n = args.n or cfg.evaluation.lead_n
    records = [
        {"id": s.id, "seed": cfg.seed, "semantics": [], "summary": lead_n(s.article, s.sentence_bounds, n)}
        for s in samples
    ]
    _write_jsonl(out / "decoded.jsonl", records)
    return 0


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = {s.id: s for s in read_corpus(_require(args.corpus, "--corpus"))}
    decoded = _read_jsonl(_require(args.decoded, "--decoded"))
    out = _out_dir(args, "evaluate")
    missing = [d["id"] for d in decoded if d["id"] not in samples]
    if missing:
        raise ValueError(f"decodificações sem amostra no corpus: {', '.join(missing[:5])}")
    items = [(d["id"], samples[d["id"]].article, d["summary"], samples[d["id"]].summary) for d in decoded]
    rows, means = evaluate_corpus(
        items, cfg.evaluation.rouge_stem, cfg.evaluation.rouge_remove_stopwords, workers=cfg.workers
    )
    write_metric_csv(out / "metrics.csv", rows, cfg.seed, means)

    parsed = [delinearize(d.get("semantics", [])) for d in decoded]
    frames = [f for f, _ in parsed]
    stats = srl_stats(frames, warnings=sum(w for _, w in parsed))
    usage = semantic_usage(
        (f, d["summary"], samples[d["id"]].summary) for f, d in zip(frames, decoded)
    )
    _write_json(out / "semantics_report.json", {"seed": cfg.seed, "srl": stats.model_dump(), "usage": usage.model_dump()})
    logger.info("avaliação: %s", ", ".join(f"{k}={v:.4f}" for k, v in means.items()))
    return 0


def cmd_adversarial(args: argparse.Namespace, cfg: RunConfig) -> int:
    samples = read_corpus(_require(args.corpus, "--corpus"))
    distractors = read_corpus(_require(args.distractors, "--distractors"))
    pool = build_distractor_pool(distractors, cfg.adversarial.source_domain)
    out = _out_dir(args, "adversarial")

    for n in cfg.adversarial.n_values:
        if n == 0:
            continue
        write_corpus(out / f"adversarial_n{n}.jsonl", [perturb(s, pool, n, [cfg.seed, n, i]) for i, s in enumerate(samples)])
    if not args.checkpoint:
        logger.info("sem --checkpoint: sweep apenas com lead-%d", cfg.adversarial.lead_n)

    systems: Dict[str, Callable[[Sample], List[str]]] = {
        f"lead{cfg.adversarial.lead_n}": lambda s: lead_n(s.article, s.sentence_bounds, cfg.adversarial.lead_n),
    }
    if args.checkpoint:
        vocab = load_vocabulary(_require(args.vocab, "--vocab"))
        model, _ = load_summarizer(_require(args.checkpoint, "--checkpoint"))
        systems = {"model": lambda s: _decode_one((model, vocab, s, cfg))[1], **systems}
    rows = adversarial_sweep(systems, samples, pool, cfg.adversarial, cfg.seed, show_progress=not args.quiet)
    write_sweep_csv(out / "sweep.csv", rows, cfg.seed)
    return 0


def cmd_report(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Junta CSVs de métricas (médias por arquivo) e de sweeps (curva por sistema) num CSV pronto para gráfico."""
    inputs = [_require(p, "--inputs") for p in (args.inputs or [])]
    if not inputs:
        raise ConfigError("--inputs é obrigatório para o comando report")
    out = _out_dir(args, "report")
    metric_rows: List[List[str]] = []
    curve_rows: List[List[str]] = []
    for path in inputs:
        with path.open("r", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            continue
        if "mean_rouge_l" in rows[0]:
            curve_rows.extend([path.name, r["system"], r["n"], r["mean_rouge_l"], r["count"]] for r in rows)
            continue
        mean = next((r for r in rows if r.get("sample_id") == "__mean__"), None)
        if mean is None:
            raise ValueError(f"{path}: CSV de métricas sem linha de média")
        metric_rows.append([path.name] + [mean[k] for k in ("rouge1", "rouge2", "rougeL", "density", "redundancy")])

    with (out / "summary.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "source", "rouge1", "rouge2", "rougeL", "density", "redundancy"])
        for r in metric_rows:
            w.writerow([cfg.seed] + r)
    with (out / "curves.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "source", "system", "n", "mean_rouge_l", "count"])
        for r in curve_rows:
            w.writerow([cfg.seed] + r)
    return 0


def cmd_gradcheck(args: argparse.Namespace, cfg: RunConfig) -> int:
    report = gradient_check(cfg.summarizer, cfg.seed, max_entries_per_tensor=args.max_entries)
    out = _out_dir(args, "gradcheck")
    _write_json(out / "gradcheck.json", {"seed": cfg.seed, **report.model_dump()})
    if report.max_error >= GRADCHECK_TOLERANCE:
        logger.error("gradcheck: erro máximo %.3e acima de %.0e", report.max_error, GRADCHECK_TOLERANCE)
        return 1
    return 0


# Registro de comandos (nome do subcomando -> handler)
_COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "toy-corpus": cmd_toy_corpus,
    "preprocess": cmd_preprocess,
    "targets": cmd_targets,
    "train": cmd_train,
    "decode": cmd_decode,
    "evaluate": cmd_evaluate,
    "adversarial": cmd_adversarial,
    "baseline-lead": cmd_baseline_lead,
    "report": cmd_report,
    "gradcheck": cmd_gradcheck,
}


def command_names() -> List[str]:
    return list(_COMMANDS)


def dispatch(command: str, args: argparse.Namespace, cfg: RunConfig) -> int:
    handler = _COMMANDS.get(command)
    if handler is None:
        raise ValueError(f"Comando '{command}' não suportado.")
    return handler(args, cfg)
