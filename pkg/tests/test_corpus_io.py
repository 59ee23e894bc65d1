import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from app.core.errors import CorpusFormatError
from app.core.sanitizer import normalize_tokens
from app.core.schemas import SPECIAL_TOKENS, UNK_ID, PreprocessConfig, Sample
from app.corpus.corpus_io import (
    build_vocabulary,
    filter_sample,
    ids_of,
    load_vocabulary,
    preprocess_corpus,
    read_corpus,
    save_vocabulary,
    split_corpus,
    tokens_of,
    write_corpus,
)


def _sample(article, summary, sid="s"):
    return Sample(id=sid, article=article, summary=summary)


def test_normalize_numbers_e_minusculas():
    cfg = PreprocessConfig()
    assert normalize_tokens(["Troops", "in", "1993"], cfg) == ["troops", "in", "0"]
    assert normalize_tokens(["3.5", "-7", "a1b"], cfg) == ["0", "0", "a1b"]
    assert normalize_tokens(["1,000.25", ".5", "NYC"], cfg.model_copy(update={"lowercase_all": False})) == ["0", "0", "NYC"]


def test_normalize_vazio_falha():
    with pytest.raises(ValueError):
        normalize_tokens([], PreprocessConfig())


@given(st.lists(st.text(alphabet="ab19.,-+X", min_size=1, max_size=6), min_size=1, max_size=20))
def test_normalize_preserva_tamanho(tokens):
    out = normalize_tokens(tokens, PreprocessConfig())
    assert len(out) == len(tokens)


def test_filtro_prefixo_de_rejeicao():
    cfg = PreprocessConfig(min_article_words=3, min_summary_words=3)
    res = filter_sample(_sample(["x"] * 5, ["the", "movie", "review", "of", "it"]), cfg)
    assert not res.accepted
    assert res.reason == "prefix:review"


def test_filtro_artigo_curto():
    cfg = PreprocessConfig()
    res = filter_sample(_sample(["w"] * 99, ["s"] * 25), cfg)
    assert res.reason == "article_too_short"
    assert filter_sample(_sample(["w"] * 100, ["s"] * 25), cfg).accepted


def test_filtro_remove_sufixo_de_template():
    cfg = PreprocessConfig(min_article_words=1, min_summary_words=2)
    res = filter_sample(_sample(["a", "b"], ["senate", "passes", "bill", ".", "photo"]), cfg)
    assert res.accepted
    assert res.sample.summary == ["senate", "passes", "bill", "."]


def test_filtro_resumo_vazio():
    res = filter_sample(_sample(["a"], []), PreprocessConfig(min_article_words=1))
    assert res.reason == "summary_empty"


def test_preprocess_conta_rejeicoes():
    cfg = PreprocessConfig(min_article_words=3, min_summary_words=1)
    raw = [
        _sample(["A", "b", "1993"], ["ok"], "1"),
        _sample(["a"], ["ok"], "2"),
        _sample(["a", "b", "c"], ["news", "x"], "3"),
    ]
    kept, report = preprocess_corpus(raw, cfg)
    assert [s.id for s in kept] == ["1"]
    assert kept[0].article == ["a", "b", "0"]
    assert report.total == 3 and report.accepted == 1
    assert report.rejected == {"article_too_short": 1, "prefix:news": 1}


def test_vocabulario_por_frequencia():
    corpus = [_sample(["a", "a", "b", "b", "c"], ["a"])]
    vocab = build_vocabulary(corpus, len(SPECIAL_TOKENS) + 2)
    assert vocab.id_to_token[: len(SPECIAL_TOKENS)] == list(SPECIAL_TOKENS)
    assert vocab.id_to_token[len(SPECIAL_TOKENS):] == ["a", "b"]


def test_vocabulario_desempate_pela_primeira_ocorrencia():
    corpus = [_sample(["a", "a", "a", "b", "c", "b", "c"], ["z"])]
    vocab = build_vocabulary(corpus, len(SPECIAL_TOKENS) + 2)
    assert "b" in vocab and "c" not in vocab


def test_vocabulario_erros():
    with pytest.raises(ValueError):
        build_vocabulary([_sample(["a"], ["b"])], len(SPECIAL_TOKENS))
    with pytest.raises(ValueError):
        build_vocabulary([], 50)


def test_ids_e_tokens(tmp_path):
    vocab = build_vocabulary([_sample(["x", "y"], ["x"])], 20)
    assert ids_of(["x", "nunca-visto"], vocab) == [vocab.token_to_id["x"], UNK_ID]
    assert tokens_of([vocab.token_to_id["y"]], vocab) == ["y"]
    with pytest.raises(ValueError):
        tokens_of([len(vocab)], vocab)

    path = tmp_path / "vocab.txt"
    save_vocabulary(path, vocab)
    assert load_vocabulary(path).id_to_token == vocab.id_to_token


def test_vocabulario_sem_especiais_na_ordem(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("\n".join(["<unk>", "<pad>"] + list(SPECIAL_TOKENS[2:]) + ["a"]) + "\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError):
        load_vocabulary(path)


def test_corpus_jsonl_ida_e_volta(tmp_path, toy_samples):
    path = tmp_path / "toy.jsonl"
    assert write_corpus(path, toy_samples[:5]) == 5
    back = read_corpus(path)
    assert [s.id for s in back] == [s.id for s in toy_samples[:5]]
    assert back[2].srl == toy_samples[2].srl
    assert back[2].sentence_bounds == toy_samples[2].sentence_bounds
    first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert "sentences" in first and "pred" in first["srl"][0]


def test_corpus_malformado_informa_a_linha(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = json.dumps({"id": "a", "article": ["x"], "summary": ["y"]})
    path.write_text(good + "\n" + good + "\n{quebrado\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError) as exc:
        read_corpus(path)
    assert exc.value.line_number == 3
    assert ":3:" in str(exc.value)


def test_corpus_span_fora_do_artigo(tmp_path):
    path = tmp_path / "bad.jsonl"
    rec = {"id": "a", "article": ["x", "y"], "summary": ["y"], "srl": [{"pred": [1, 5]}]}
    path.write_text(json.dumps(rec) + "\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError) as exc:
        read_corpus(path)
    assert exc.value.line_number == 1


def test_split_na_ordem(toy_samples):
    train, val, test = split_corpus(toy_samples[:20])
    assert [s.id for s in train + val + test] == [s.id for s in toy_samples[:20]]
    assert (len(train), len(val), len(test)) == (18, 1, 1)
    with pytest.raises(ValueError):
        split_corpus(toy_samples, (0.5, 0.5, 0.5))
