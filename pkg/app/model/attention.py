from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.model.neural_core import ParameterStore, softmax


# -------------------------------
# funções puras (uma chamada, sem cache)
# -------------------------------
def attend(
    s: np.ndarray, H: np.ndarray, W_s: np.ndarray, W_h: np.ndarray, v: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """e_i = v·tanh(W_s s + W_h h_i); a = softmax(e); c = Σ a_i h_i."""
    if H.shape[0] == 0:
        raise ValueError("attend: memória vazia")
    if W_s.shape[1] != s.shape[0] or W_h.shape[1] != H.shape[1] or len({W_s.shape[0], W_h.shape[0], v.shape[0]}) != 1:
        raise ValueError(f"attend: dimensões incompatíveis s={s.shape} H={H.shape} W_s={W_s.shape} W_h={W_h.shape}")
    e = np.tanh(H @ W_h.T + W_s @ s) @ v
    a = softmax(e)
    return a @ H, a


def multi_head_attend(
    s: np.ndarray,
    H: np.ndarray,
    W_s: np.ndarray,
    W_hs: Sequence[np.ndarray],
    vs: Sequence[np.ndarray],
    W_o: np.ndarray,
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Cabeças com W_s compartilhado; contexto final = W_o [c_1 ∥ ... ∥ c_k]."""
    if len(W_hs) != len(vs) or not W_hs:
        raise ValueError("multi_head_attend: número de cabeças inconsistente")
    ctxs, rows = [], []
    for W_h, v in zip(W_hs, vs):
        c, a = attend(s, H, W_s, W_h, v)
        ctxs.append(c)
        rows.append(a)
    return W_o @ np.concatenate(ctxs), rows


def dual_attend(
    s: np.ndarray, S: np.ndarray, W_s: np.ndarray, W_h: np.ndarray, v: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Atenção sobre os estados do decodificador semântico; sem estados devolve contexto zero e flag False."""
    if S.shape[0] == 0:
        return np.zeros(W_h.shape[1]), np.zeros(0), False
    c, b = attend(s, S, W_s, W_h, v)
    return c, b, True


def project_vocab(
    s: np.ndarray, c_inp: np.ndarray, c_sem: Optional[np.ndarray], W: np.ndarray, b: np.ndarray
) -> np.ndarray:
    parts = [s, c_inp] if c_sem is None else [s, c_inp, c_sem]
    feat = np.concatenate(parts)
    if W.shape != (b.shape[0], feat.shape[0]):
        raise ValueError(f"project_vocab: W {W.shape} incompatível com entrada {feat.shape} e viés {b.shape}")
    return softmax(W @ feat + b)


# -------------------------------
# atenção ligada a uma memória, com backward
# -------------------------------
@dataclass
class _HeadCache:
    a: np.ndarray
    T: np.ndarray


@dataclass
class AttentionCache:
    s: np.ndarray
    heads: List[_HeadCache]
    concat: Optional[np.ndarray]


class BoundAttention:
    """
    Atenção aditiva (1 ou k cabeças) sobre uma memória fixa M (n × m).
    U_i = M W_h_iᵀ é calculado uma vez; backward acumula dU e dM até finish().
    """

    def __init__(self, store: ParameterStore, prefix: str, heads: int, M: np.ndarray):
        if M.shape[0] == 0:
            raise ValueError(f"{prefix}: memória de atenção vazia")
        self.store = store
        self.prefix = prefix
        self.heads = heads
        self.M = M
        self.U = [M @ store[self._wh(i)].T for i in range(heads)]
        self.dU = [np.zeros_like(u) for u in self.U]
        self.dM = np.zeros_like(M)

    def _wh(self, i: int) -> str:
        return f"{self.prefix}.W_h" if self.heads == 1 else f"{self.prefix}.W_h.{i}"

    def _v(self, i: int) -> str:
        return f"{self.prefix}.v" if self.heads == 1 else f"{self.prefix}.v.{i}"

    def forward(self, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, AttentionCache]:
        """Devolve (contexto, linha de atenção, cache); com k cabeças a linha é a soma das distribuições."""
        q = self.store[f"{self.prefix}.W_s"] @ s
        heads: List[_HeadCache] = []
        ctxs = []
        row = np.zeros(self.M.shape[0])
        for i in range(self.heads):
            T = np.tanh(self.U[i] + q)
            a = softmax(T @ self.store[self._v(i)])
            heads.append(_HeadCache(a, T))
            ctxs.append(a @ self.M)
            row += a
        if self.heads == 1:
            return ctxs[0], row, AttentionCache(s, heads, None)
        concat = np.concatenate(ctxs)
        return self.store[f"{self.prefix}.W_o"] @ concat, row, AttentionCache(s, heads, concat)

    def backward(self, dc: np.ndarray, cache: AttentionCache) -> np.ndarray:
        """Acumula gradientes dos parâmetros e devolve ds."""
        store = self.store
        m = self.M.shape[1]
        if self.heads == 1:
            dcs = [dc]
        else:
            W_o = store[f"{self.prefix}.W_o"]
            store.accumulate(f"{self.prefix}.W_o", np.outer(dc, cache.concat))
            dconcat = W_o.T @ dc
            dcs = [dconcat[i * m:(i + 1) * m] for i in range(self.heads)]

        dq = np.zeros(store[f"{self.prefix}.W_s"].shape[0])
        for i, (hc, dci) in enumerate(zip(cache.heads, dcs)):
            v = store[self._v(i)]
            self.dM += np.outer(hc.a, dci)
            da = self.M @ dci
            de = hc.a * (da - hc.a @ da)
            store.accumulate(self._v(i), hc.T.T @ de)
            dpre = np.outer(de, v) * (1.0 - hc.T ** 2)
            self.dU[i] += dpre
            dq += dpre.sum(axis=0)
        W_s = store[f"{self.prefix}.W_s"]
        store.accumulate(f"{self.prefix}.W_s", np.outer(dq, cache.s))
        return W_s.T @ dq

    def finish(self) -> np.ndarray:
        """Fecha o backward: gradiente de W_h e dM total."""
        dM = self.dM.copy()
        for i in range(self.heads):
            W_h = self.store[self._wh(i)]
            self.store.accumulate(self._wh(i), self.dU[i].T @ self.M)
            dM += self.dU[i] @ W_h
        return dM


def attention_parameter_shapes(prefix: str, heads: int, inner_dim: int, query_dim: int, memory_dim: int) -> dict:
    """Formas dos parâmetros de uma atenção; com k cabeças inner_dim é o tamanho de cada cabeça."""
    shapes = {f"{prefix}.W_s": (inner_dim, query_dim)}
    if heads == 1:
        shapes[f"{prefix}.W_h"] = (inner_dim, memory_dim)
        shapes[f"{prefix}.v"] = (inner_dim,)
        return shapes
    for i in range(heads):
        shapes[f"{prefix}.W_h.{i}"] = (inner_dim, memory_dim)
        shapes[f"{prefix}.v.{i}"] = (inner_dim,)
    shapes[f"{prefix}.W_o"] = (memory_dim, heads * memory_dim)
    return shapes
