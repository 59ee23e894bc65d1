from __future__ import annotations

from typing import Hashable, List, Optional, Sequence, Tuple

_END = object()


class _Node:
    __slots__ = ("children", "start", "end", "suffix", "depth", "count", "first")

    def __init__(self, start: int = 0, end: int = 0, suffix: int = -1):
        self.children: dict = {}
        # rótulo da aresta que chega ao nó: T[start:end]
        self.start = start
        self.end = end
        self.suffix = suffix
        self.depth = 0
        self.count = 0
        self.first = -1


class SuffixTree:
    """
    Árvore de sufixos compactada sobre uma sequência de tokens (terminador único no fim).
    Construída por inserção de sufixos: O(n^2) no pior caso, suficiente para resumos e hipóteses.
    Cada nó interno guarda profundidade (em tokens), nº de folhas e a primeira posição de início.
    """

    def __init__(self, tokens: Sequence[Hashable]):
        self.tokens = list(tokens)
        self._text = self.tokens + [_END]
        self.root = _Node()
        for i in range(len(self.tokens)):
            self._insert(i)
        self._annotate()

    def _insert(self, i: int) -> None:
        text = self._text
        node = self.root
        j = i
        while True:
            child = node.children.get(text[j])
            if child is None:
                node.children[text[j]] = _Node(j, len(text), i)
                return
            k = child.start
            while k < child.end and text[k] == text[j]:
                k += 1
                j += 1
            if k == child.end:
                node = child
                continue
            mid = _Node(child.start, k)
            node.children[text[child.start]] = mid
            child.start = k
            mid.children[text[k]] = child
            mid.children[text[j]] = _Node(j, len(text), i)
            return

    def _annotate(self) -> None:
        order: List[_Node] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            order.append(node)
            for child in node.children.values():
                child.depth = node.depth + (child.end - child.start)
                stack.append(child)
        for node in reversed(order):
            if not node.children:
                node.count = 1
                node.first = node.suffix
                continue
            node.count = sum(c.count for c in node.children.values())
            node.first = min(c.first for c in node.children.values())

    def internal_nodes(self):
        stack = list(self.root.children.values())
        while stack:
            node = stack.pop()
            if node.children:
                yield node
                stack.extend(node.children.values())

    def longest_repeat(self, min_len: int = 1) -> Tuple[List[Hashable], int]:
        """Nó interno mais profundo; empate pela primeira ocorrência mais cedo."""
        best: Optional[_Node] = None
        for node in self.internal_nodes():
            if node.depth < min_len:
                continue
            if best is None or node.depth > best.depth or (node.depth == best.depth and node.first < best.first):
                best = node
        if best is None:
            return [], 0
        return self.tokens[best.first: best.first + best.depth], best.count

    def repeated_substrings(self, min_len: int = 1) -> List[Tuple[Tuple[Hashable, ...], int, int]]:
        """Todas as substrings com >= 2 ocorrências: (tokens, ocorrências, primeira posição)."""
        out = []
        stack = [(self.root, 0)]
        while stack:
            node, parent_depth = stack.pop()
            for child in node.children.values():
                if not child.children:
                    continue
                for length in range(max(parent_depth + 1, min_len), child.depth + 1):
                    frag = tuple(self.tokens[child.first: child.first + length])
                    out.append((frag, child.count, child.first))
                stack.append((child, child.depth))
        return out


def longest_repeating_substring(tokens: Sequence[Hashable], min_len: int = 3) -> Tuple[List[Hashable], int]:
    """
    Maior substring (>= min_len tokens) que ocorre pelo menos duas vezes.
    Ocorrências sobrepostas contam por posição de início distinta. Sem repetição: ([], 0).
    """
    if len(tokens) < min_len + 1:
        return [], 0
    return SuffixTree(tokens).longest_repeat(min_len=min_len)
