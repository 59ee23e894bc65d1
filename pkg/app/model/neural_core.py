from __future__ import annotations

import json
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.schemas import GradCheckReport

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
CHECKPOINT_MAGIC = b"SRLSUMCK"
CHECKPOINT_VERSION = 1


# -------------------------------
# parâmetros
# -------------------------------
class ParameterStore:
    """
    Tensores nomeados com gradiente e acumulador Adagrad por nome.
    Nomes congelados não recebem gradiente nem atualização.
    """

    def __init__(self, learning_rate: float = 0.15, initial_accumulator: float = 0.1):
        if learning_rate <= 0 or initial_accumulator <= 0:
            raise ValueError("learning_rate e initial_accumulator devem ser > 0")
        self.learning_rate = learning_rate
        self.initial_accumulator = initial_accumulator
        self.values: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.accumulators: Dict[str, np.ndarray] = {}
        self.frozen: set = set()

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.values:
            raise ValueError(f"parâmetro duplicado: {name}")
        value = np.asarray(value, dtype=np.float64).copy()
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        self.accumulators[name] = np.full_like(value, self.initial_accumulator)
        return value

    def add_uniform(self, name: str, shape: Tuple[int, ...], rng: np.random.Generator, scale: float) -> np.ndarray:
        return self.add(name, rng.uniform(-scale, scale, size=shape))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def names(self) -> List[str]:
        return sorted(self.values)

    def size(self) -> int:
        return int(sum(v.size for v in self.values.values()))

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        if name in self.frozen:
            return
        self.grads[name] += grad

    def accumulate_rows(self, name: str, rows: Sequence[int], grad: np.ndarray) -> None:
        if name in self.frozen or len(rows) == 0:
            return
        np.add.at(self.grads[name], np.asarray(rows, dtype=np.int64), grad)

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def freeze(self, names: Iterable[str]) -> None:
        for n in names:
            if n not in self.values:
                raise KeyError(n)
            self.frozen.add(n)
            self.grads[n].fill(0.0)


def adagrad_step(store: ParameterStore) -> None:
    """acc += g²; θ -= lr·g/√acc; zera os gradientes."""
    lr = store.learning_rate
    for name, g in store.grads.items():
        if name in store.frozen:
            continue
        acc = store.accumulators[name]
        acc += g * g
        store.values[name] -= lr * g / np.sqrt(acc)
    store.zero_grad()


# -------------------------------
# LSTM
# -------------------------------
@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "LstmState":
        return cls(np.zeros(dim), np.zeros(dim))


@dataclass
class LstmCache:
    xh: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    tanh_c: np.ndarray


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_forward(x: np.ndarray, state: LstmState, W: np.ndarray, b: np.ndarray) -> Tuple[LstmState, LstmCache]:
    """Portas na ordem i, f, o, g; W tem forma (4D, |x| + D)."""
    d = state.h.shape[0]
    if state.c.shape[0] != d or W.shape != (4 * d, x.shape[0] + d) or b.shape != (4 * d,):
        raise ValueError(
            f"dimensões incompatíveis na célula LSTM: x={x.shape}, h={state.h.shape}, c={state.c.shape}, W={W.shape}, b={b.shape}"
        )
    xh = np.concatenate([x, state.h])
    z = W @ xh + b
    i = _sigmoid(z[:d])
    f = _sigmoid(z[d:2 * d])
    o = _sigmoid(z[2 * d:3 * d])
    g = np.tanh(z[3 * d:])
    c = f * state.c + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    return LstmState(h, c), LstmCache(xh, state.c, i, f, o, g, tanh_c)


def lstm_cell(x: np.ndarray, state: LstmState, W: np.ndarray, b: np.ndarray) -> LstmState:
    return lstm_forward(x, state, W, b)[0]


def lstm_backward(
    dh: np.ndarray, dc: np.ndarray, cache: LstmCache, W: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Devolve (dx, dh_prev, dc_prev, dW, db)."""
    i, f, o, g = cache.i, cache.f, cache.o, cache.g
    d = i.shape[0]
    do = dh * cache.tanh_c
    dct = dc + dh * o * (1.0 - cache.tanh_c ** 2)
    dz = np.concatenate([
        dct * g * i * (1.0 - i),
        dct * cache.c_prev * f * (1.0 - f),
        do * o * (1.0 - o),
        dct * i * (1.0 - g ** 2),
    ])
    dW = np.outer(dz, cache.xh)
    dxh = W.T @ dz
    nx = dxh.shape[0] - d
    return dxh[:nx], dxh[nx:], dct * f, dW, dz


@dataclass
class BiLstmCache:
    ids: List[int]
    fwd: List[LstmCache]
    bwd: List[LstmCache]


def bilstm_encode(
    ids: Sequence[int], store: ParameterStore, hidden_dim: int
) -> Tuple[np.ndarray, LstmState, BiLstmCache]:
    """
    H[i] = [forward_i ∥ backward_i]; estado final = [forward_n ∥ backward_1] (h e c), que inicia o decodificador.
    """
    if len(ids) == 0:
        raise ValueError("bilstm_encode: entrada vazia")
    E = store["embedding"]
    Wf, bf = store["enc_fwd.W"], store["enc_fwd.b"]
    Wb, bb = store["enc_bwd.W"], store["enc_bwd.b"]
    n = len(ids)
    H = np.zeros((n, 2 * hidden_dim))

    st = LstmState.zeros(hidden_dim)
    fwd: List[LstmCache] = []
    for t in range(n):
        st, cache = lstm_forward(E[ids[t]], st, Wf, bf)
        fwd.append(cache)
        H[t, :hidden_dim] = st.h
    fwd_final = st

    st = LstmState.zeros(hidden_dim)
    bwd: List[LstmCache] = [None] * n  # type: ignore[list-item]
    for t in reversed(range(n)):
        st, cache = lstm_forward(E[ids[t]], st, Wb, bb)
        bwd[t] = cache
        H[t, hidden_dim:] = st.h
    bwd_final = st

    final = LstmState(np.concatenate([fwd_final.h, bwd_final.h]), np.concatenate([fwd_final.c, bwd_final.c]))
    return H, final, BiLstmCache(list(ids), fwd, bwd)


def bilstm_backward(dH: np.ndarray, d_final: LstmState, cache: BiLstmCache, store: ParameterStore, hidden_dim: int) -> None:
    hd = hidden_dim
    Wf, Wb = store["enc_fwd.W"], store["enc_bwd.W"]
    n = len(cache.ids)
    dX = np.zeros((n, store["embedding"].shape[1]))
    dWf, dbf = np.zeros_like(Wf), np.zeros(Wf.shape[0])
    dWb, dbb = np.zeros_like(Wb), np.zeros(Wb.shape[0])

    dh, dc = d_final.h[:hd].copy(), d_final.c[:hd].copy()
    for t in reversed(range(n)):
        dx, dh, dc, dW, db = lstm_backward(dh + dH[t, :hd], dc, cache.fwd[t], Wf)
        dWf += dW
        dbf += db
        dX[t] += dx

    dh, dc = d_final.h[hd:].copy(), d_final.c[hd:].copy()
    for t in range(n):
        dx, dh, dc, dW, db = lstm_backward(dh + dH[t, hd:], dc, cache.bwd[t], Wb)
        dWb += dW
        dbb += db
        dX[t] += dx

    store.accumulate_rows("embedding", cache.ids, dX)
    store.accumulate("enc_fwd.W", dWf)
    store.accumulate("enc_fwd.b", dbf)
    store.accumulate("enc_bwd.W", dWb)
    store.accumulate("enc_bwd.b", dbb)


# -------------------------------
# softmax / perda
# -------------------------------
def softmax(v: np.ndarray) -> np.ndarray:
    z = np.asarray(v, dtype=np.float64)
    e = np.exp(z - np.max(z))
    return e / e.sum()


def log_softmax(v: np.ndarray) -> np.ndarray:
    z = np.asarray(v, dtype=np.float64)
    m = np.max(z)
    return z - m - np.log(np.exp(z - m).sum())


def nll(dist: np.ndarray, target: int) -> float:
    if not 0 <= target < dist.shape[0]:
        raise ValueError(f"alvo {target} fora da distribuição de tamanho {dist.shape[0]}")
    return -math.log(max(float(dist[target]), PROB_FLOOR))


def nll_grad_logits(dist: np.ndarray, target: int) -> np.ndarray:
    """d nll / d logits; zero quando a probabilidade está no piso."""
    if dist[target] < PROB_FLOOR:
        return np.zeros_like(dist)
    g = dist.copy()
    g[target] -= 1.0
    return g


# -------------------------------
# verificação por diferenças finitas
# -------------------------------
LossFn = Callable[[ParameterStore, bool], float]


def finite_difference_check(
    loss_fn: LossFn,
    store: ParameterStore,
    epsilon: float = 1e-5,
    max_entries_per_tensor: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """
    Diferenças centrais por entrada de parâmetro contra o gradiente analítico.
    - loss_fn(store, compute_grad): com compute_grad=True zera e preenche store.grads
    - erro = |g_a - g_n| / max(1, |g_a| + |g_n|); parâmetros congelados são reportados com gradiente 0
    - max_entries_per_tensor limita a amostra de entradas checadas por tensor
    """
    if not 1e-5 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon {epsilon} fora de [1e-5, 1e-3]")
    store.zero_grad()
    base = loss_fn(store, True)
    if not math.isfinite(base):
        raise ValueError(f"loss não finita na verificação de gradiente: {base}")
    analytic = {n: g.copy() for n, g in store.grads.items()}
    store.zero_grad()

    rng = np.random.default_rng(seed)
    report = GradCheckReport(max_error=0.0, frozen=sorted(store.frozen))
    for name in store.names():
        if name in store.frozen:
            report.per_parameter[name] = 0.0
            continue
        value = store.values[name]
        flat = value.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries_per_tensor is not None and flat.size > max_entries_per_tensor:
            idx = np.sort(rng.choice(flat.size, size=max_entries_per_tensor, replace=False))
        g_flat = analytic[name].reshape(-1)
        worst = 0.0
        for k in idx:
            orig = flat[k]
            flat[k] = orig + epsilon
            plus = loss_fn(store, False)
            flat[k] = orig - epsilon
            minus = loss_fn(store, False)
            flat[k] = orig
            if not (math.isfinite(plus) and math.isfinite(minus)):
                raise ValueError(f"loss não finita perturbando {name}[{k}]")
            numeric = (plus - minus) / (2 * epsilon)
            err = abs(g_flat[k] - numeric) / max(1.0, abs(g_flat[k]) + abs(numeric))
            worst = max(worst, err)
        report.per_parameter[name] = worst
        report.checked_entries += int(idx.size)
        report.max_error = max(report.max_error, worst)
    logger.debug("gradcheck: erro máximo %.3e em %d entradas", report.max_error, report.checked_entries)
    return report


# -------------------------------
# checkpoint
# -------------------------------
def save_checkpoint(path: Path, store: ParameterStore, seed: int, config: Optional[dict] = None) -> None:
    """
    Formato: MAGIC | versão (uint32 LE) | tamanho do cabeçalho (uint32 LE) | cabeçalho JSON |
    valores '<f8' de cada tensor na ordem do cabeçalho | acumuladores na mesma ordem.
    """
    names = store.names()
    header = {
        "seed": int(seed),
        "config": config or {},
        "learning_rate": store.learning_rate,
        "initial_accumulator": store.initial_accumulator,
        "frozen": sorted(store.frozen),
        "tensors": [{"name": n, "shape": list(store.values[n].shape)} for n in names],
    }
    raw_header = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(raw_header)))
        fh.write(raw_header)
        for n in names:
            fh.write(store.values[n].astype("<f8").tobytes())
        for n in names:
            fh.write(store.accumulators[n].astype("<f8").tobytes())


def load_checkpoint(path: Path) -> Tuple[ParameterStore, dict]:
    path = Path(path)
    data = path.read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: não é um checkpoint (assinatura ausente)")
    pos = len(CHECKPOINT_MAGIC)
    version, hlen = struct.unpack_from("<II", data, pos)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: versão de checkpoint {version} não suportada")
    pos += 8
    header = json.loads(data[pos:pos + hlen].decode("utf-8"))
    pos += hlen

    store = ParameterStore(header["learning_rate"], header["initial_accumulator"])
    specs = header["tensors"]
    for block in ("values", "accumulators"):
        for spec in specs:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            end = pos + 8 * count
            if end > len(data):
                raise ValueError(f"{path}: checkpoint truncado em '{spec['name']}'")
            arr = np.frombuffer(data[pos:end], dtype="<f8").astype(np.float64).reshape(shape)
            pos = end
            if block == "values":
                store.add(spec["name"], arr)
            else:
                store.accumulators[spec["name"]] = arr.copy()
    if pos != len(data):
        raise ValueError(f"{path}: bytes sobrando após o último tensor")
    store.frozen = set(header.get("frozen", []))
    return store, header
