import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from app.model.neural_core import (
    LstmState,
    ParameterStore,
    adagrad_step,
    bilstm_encode,
    finite_difference_check,
    load_checkpoint,
    log_softmax,
    lstm_cell,
    nll,
    nll_grad_logits,
    save_checkpoint,
    softmax,
)


# -------- softmax / nll --------
def test_softmax_casos():
    assert softmax(np.array([1.0, 1.0, 1.0])) == pytest.approx([1 / 3] * 3)
    assert softmax(np.array([math.log(2), 0.0])) == pytest.approx([2 / 3, 1 / 3])
    big = softmax(np.array([1000.0, 0.0]))
    assert np.all(np.isfinite(big))
    assert big == pytest.approx([1.0, 0.0])


@given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=12))
def test_softmax_soma_um(values):
    p = softmax(np.array(values))
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)


@given(st.lists(st.floats(min_value=-1e300, max_value=1e300), min_size=1, max_size=12))
def test_softmax_magnitudes_extremas(values):
    p = softmax(np.array(values))
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0)
    assert p[int(np.argmax(values))] == p.max()


def test_softmax_extremos_fixos():
    assert softmax(np.array([1e300, -1e300])) == pytest.approx([1.0, 0.0])
    assert softmax(np.array([-1e6, -1e6, -1e6])) == pytest.approx([1 / 3] * 3)
    assert np.all(np.isfinite(log_softmax(np.array([1e300, 0.0]))))


@pytest.mark.slow
def test_softmax_dez_mil_vetores():
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        size = int(rng.integers(1, 13))
        # magnitudes de 1e-3 a 1e300, com sinal
        v = rng.choice([-1.0, 1.0], size=size) * 10.0 ** rng.uniform(-3, 300, size=size)
        p = softmax(v)
        assert np.all(np.isfinite(p)) and np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-6


def test_nll():
    assert nll(np.array([0.5, 0.5]), 0) == pytest.approx(0.693147, abs=1e-6)
    assert nll(np.array([0.0, 1.0]), 1) == 0.0
    assert nll(np.array([0.0, 1.0]), 0) == pytest.approx(-math.log(1e-12))
    with pytest.raises(ValueError):
        nll(np.array([0.5, 0.5]), 2)
    assert np.all(nll_grad_logits(np.array([0.0, 1.0]), 0) == 0.0)
    assert nll_grad_logits(np.array([0.25, 0.75]), 1) == pytest.approx([0.25, -0.25])


# -------- adagrad --------
def _one_param(grad):
    store = ParameterStore(0.15, 0.1)
    store.add("w", np.zeros(1))
    store.grads["w"][:] = grad
    return store


def test_adagrad_passo():
    store = _one_param(1.0)
    adagrad_step(store)
    assert store.accumulators["w"][0] == pytest.approx(1.1)
    assert store["w"][0] == pytest.approx(-0.143019, abs=1e-6)
    assert store.grads["w"][0] == 0.0

    store.grads["w"][:] = 1.0
    before = store["w"][0]
    adagrad_step(store)
    assert store["w"][0] - before == pytest.approx(-0.15 / math.sqrt(2.1))


def test_adagrad_gradiente_zero_e_congelado():
    store = _one_param(0.0)
    adagrad_step(store)
    assert store["w"][0] == 0.0 and store.accumulators["w"][0] == pytest.approx(0.1)

    store.freeze(["w"])
    store.accumulate("w", np.ones(1))
    adagrad_step(store)
    assert store["w"][0] == 0.0


def test_store_rejeita_parametros_invalidos():
    with pytest.raises(ValueError):
        ParameterStore(0.0, 0.1)
    store = ParameterStore()
    store.add("w", np.zeros(2))
    with pytest.raises(ValueError):
        store.add("w", np.zeros(2))


# -------- LSTM --------
def _reference_cell(x, h, c, W, b):
    d = h.shape[0]
    z = W @ np.concatenate([x, h]) + b

    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    i, f, o, g = sig(z[:d]), sig(z[d:2 * d]), sig(z[2 * d:3 * d]), np.tanh(z[3 * d:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def test_lstm_zero():
    out = lstm_cell(np.zeros(3), LstmState.zeros(2), np.zeros((8, 5)), np.zeros(8))
    assert np.all(out.h == 0.0)


def test_lstm_contra_celula_de_referencia():
    rng = np.random.default_rng(1)
    d, n_in = 4, 4
    x, h, c = rng.normal(size=n_in), rng.normal(size=d), rng.normal(size=d)
    W, b = rng.normal(size=(4 * d, n_in + d)), rng.normal(size=4 * d)
    out = lstm_cell(x, LstmState(h, c), W, b)
    ref_h, ref_c = _reference_cell(x, h, c, W, b)
    assert out.h == pytest.approx(ref_h, abs=1e-12)
    assert out.c == pytest.approx(ref_c, abs=1e-12)


@pytest.mark.slow
def test_lstm_contra_celula_de_referencia_mil_casos():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        d, n_in = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        scale = float(rng.uniform(0.1, 3.0))
        x, h, c = rng.normal(size=n_in) * scale, rng.normal(size=d), rng.normal(size=d)
        W, b = rng.normal(size=(4 * d, n_in + d)) * scale, rng.normal(size=4 * d)
        out = lstm_cell(x, LstmState(h, c), W, b)
        ref_h, ref_c = _reference_cell(x, h, c, W, b)
        assert out.h == pytest.approx(ref_h, abs=1e-12)
        assert out.c == pytest.approx(ref_c, abs=1e-12)


def test_lstm_dimensao_errada():
    with pytest.raises(ValueError):
        lstm_cell(np.zeros(3), LstmState.zeros(2), np.zeros((8, 4)), np.zeros(8))


def _encoder_store(vocab=6, e=3, hd=2, seed=0):
    rng = np.random.default_rng(seed)
    store = ParameterStore()
    store.add_uniform("embedding", (vocab, e), rng, 0.5)
    for d in ("enc_fwd", "enc_bwd"):
        store.add_uniform(f"{d}.W", (4 * hd, e + hd), rng, 0.5)
        store.add_uniform(f"{d}.b", (4 * hd,), rng, 0.5)
    return store


def test_bilstm_um_token():
    store = _encoder_store()
    H, final, _ = bilstm_encode([3], store, 2)
    assert H.shape == (1, 4)
    assert final.h == pytest.approx(H[0])


def test_bilstm_estado_final():
    store = _encoder_store()
    H, final, _ = bilstm_encode([1, 2, 3], store, 2)
    assert final.h[:2] == pytest.approx(H[-1, :2])
    assert final.h[2:] == pytest.approx(H[0, 2:])
    with pytest.raises(ValueError):
        bilstm_encode([], store, 2)


# -------- diferenças finitas --------
def test_gradcheck_quadratica():
    store = ParameterStore()
    store.add("w", np.array([0.3, -1.2, 2.0]))
    store.add("z", np.array([[1.0, 2.0]]))
    A = np.array([1.0, 2.0, 3.0])

    def loss_fn(s, compute_grad):
        w, z = s["w"], s["z"]
        if compute_grad:
            s.zero_grad()
            s.accumulate("w", 2 * A * w)
            s.accumulate("z", 2 * z)
        return float(A @ (w ** 2) + (z ** 2).sum())

    report = finite_difference_check(loss_fn, store)
    assert report.max_error < 1e-8
    assert report.checked_entries == 5


def test_gradcheck_parametro_congelado():
    store = ParameterStore()
    store.add("w", np.array([1.0]))
    store.add("frozen", np.array([1.0]))
    store.freeze(["frozen"])

    def loss_fn(s, compute_grad):
        if compute_grad:
            s.zero_grad()
            s.accumulate("w", 2 * s["w"])
            s.accumulate("frozen", np.array([99.0]))
        return float((s["w"] ** 2).sum() + s["frozen"][0])

    report = finite_difference_check(loss_fn, store)
    assert report.per_parameter["frozen"] == 0.0
    assert report.frozen == ["frozen"]
    assert store.grads["frozen"][0] == 0.0


def test_gradcheck_loss_nao_finita():
    store = ParameterStore()
    store.add("w", np.array([1.0]))
    with pytest.raises(ValueError):
        finite_difference_check(lambda s, g: float("nan"), store)


def test_gradcheck_epsilon_fora_do_intervalo():
    store = ParameterStore()
    store.add("w", np.array([1.0]))

    def loss_fn(s, compute_grad):
        if compute_grad:
            s.accumulate("w", 2.0 * s["w"])
        return float(s["w"][0] ** 2)

    for eps in (1e-6, 2e-3):
        with pytest.raises(ValueError):
            finite_difference_check(loss_fn, store, eps)
    assert finite_difference_check(loss_fn, store, 1e-5).max_error < 1e-6
    assert finite_difference_check(loss_fn, store, 1e-3).max_error < 1e-6


# -------- checkpoint --------
def test_checkpoint_ida_e_volta(tmp_path):
    store = _encoder_store(seed=4)
    store.accumulators["embedding"] += 0.5
    store.freeze(["enc_bwd.b"])
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, store, seed=21, config={"k": 1})
    back, header = load_checkpoint(path)
    assert header["seed"] == 21 and header["config"] == {"k": 1}
    assert back.names() == store.names()
    for n in store.names():
        assert np.array_equal(back[n], store[n])
        assert np.array_equal(back.accumulators[n], store.accumulators[n])
    assert back.frozen == {"enc_bwd.b"}

    other = tmp_path / "n.ckpt"
    save_checkpoint(other, back, seed=21, config={"k": 1})
    assert other.read_bytes() == path.read_bytes()


def test_checkpoint_invalido(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"nada")
    with pytest.raises(ValueError):
        load_checkpoint(path)
    store = _encoder_store()
    save_checkpoint(path, store, seed=0)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError):
        load_checkpoint(path)
