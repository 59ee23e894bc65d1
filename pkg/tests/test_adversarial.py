import csv

import pytest

from app.core.lexicon import load_pronouns
from app.core.schemas import AdversarialConfig, DistractorPool, Sample
from app.corpus.adversarial import (
    adversarial_sweep,
    build_distractor_pool,
    insertion_points,
    perturb,
    strip_inserted,
    write_sweep_csv,
)
from app.corpus.toy_corpus import toy_distractors
from app.eval.metrics import rouge_l

PRONOUNS = load_pronouns()


@pytest.fixture(scope="module")
def pool():
    return build_distractor_pool(toy_distractors(), "sports")


def test_lacunas_sem_pronome():
    sents = [["a", "b"], ["c"], ["d"]]
    assert insertion_points(sents, PRONOUNS) == [0, 1, 2, 3]


def test_lacuna_antes_de_pronome_excluida():
    sents = [["the", "vote"], ["it", "passed"], ["he", "said", "yesterday"], ["news"]]
    assert insertion_points(sents, PRONOUNS) == [0, 3, 4]


def test_pronome_dentro_da_janela_de_cinco():
    sents = [["x"], ["a", "b", "c", "d", "they"], ["a", "b", "c", "d", "e", "they"]]
    assert insertion_points(sents, PRONOUNS) == [0, 2, 3]


def test_artigo_de_uma_frase_com_pronome():
    assert insertion_points([["they", "left"]], PRONOUNS) == [1]


def test_perturb_preserva_frases_originais(toy_samples, pool):
    sample = toy_samples[0]
    out = perturb(sample, pool, 2, seed=11)
    assert len(out.sentence_bounds) == len(sample.sentence_bounds) + 2
    originals = [s for k, s in enumerate(out.sentences()) if k not in set(out.inserted)]
    assert originals == sample.sentences()
    assert out.summary == sample.summary
    assert perturb(sample, pool, 2, seed=11) == out


def test_perturb_desloca_spans_srl(toy_samples, pool):
    sample = toy_samples[3]
    out = perturb(sample, pool, 3, seed=5)
    for before, after in zip(sample.srl, out.srl):
        assert sample.article[before.predicate[0]:before.predicate[1]] == out.article[after.predicate[0]:after.predicate[1]]
        assert sample.article[before.arg0[0]:before.arg0[1]] == out.article[after.arg0[0]:after.arg0[1]]


def test_perturb_erros(toy_samples, pool):
    with pytest.raises(ValueError):
        perturb(toy_samples[0], pool, 0, seed=1)
    with pytest.raises(ValueError):
        perturb(toy_samples[0], pool, 5, seed=1)
    tiny = DistractorPool(sentences=[["one", "."]], source_domain="sports")
    with pytest.raises(ValueError):
        perturb(toy_samples[0], tiny, 2, seed=1)


@pytest.mark.slow
def test_mil_perturbacoes(toy_samples, pool):
    for i in range(1000):
        sample = toy_samples[i % len(toy_samples)]
        n = 1 + i % 4
        out = perturb(sample, pool, n, seed=[3, n, i])
        sents = out.sentences()
        assert len(out.inserted) == n
        assert len(sents) == len(sample.sentences()) + n
        inserted = set(out.inserted)
        # nenhuma frase inserida logo antes de frase com pronome
        for k in inserted:
            if k + 1 < len(sents):
                assert not any(t in PRONOUNS for t in sents[k + 1][:5])
        # as inseridas são distintas e vêm do pool
        picked = [tuple(sents[k]) for k in sorted(inserted)]
        assert all(list(p) in pool.sentences for p in picked)
        restored = strip_inserted(out)
        assert restored.article == sample.article
        assert restored.sentence_bounds == sample.sentence_bounds
        assert restored.srl == sample.srl


def test_pool_exige_frases():
    with pytest.raises(ValueError):
        build_distractor_pool([Sample(id="x", article=["a"], summary=["a"])], "sports")


def test_sweep_lead(toy_samples, pool, tmp_path):
    corpus = toy_samples[:6]
    cfg = AdversarialConfig(n_values=[0, 1, 2])

    def first_sentence(s):
        return s.sentences()[0]

    rows = adversarial_sweep({"lead1": first_sentence}, corpus, pool, cfg, seed=9)
    assert [(r.system, r.n, r.count) for r in rows] == [("lead1", 0, 6), ("lead1", 1, 6), ("lead1", 2, 6)]
    plain = sum(rouge_l(first_sentence(s), s.summary)[2] for s in corpus) / len(corpus)
    assert rows[0].mean_rouge_l == pytest.approx(plain)

    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, rows, seed=9)
    with path.open(encoding="utf-8", newline="") as fh:
        table = list(csv.DictReader(fh))
    assert [t["n"] for t in table] == ["0", "1", "2"]
    assert rows == adversarial_sweep({"lead1": first_sentence}, corpus, pool, cfg, seed=9)
