"""log det(I - bG G - bH H) for the likelihood Jacobian.

Two routes:

``dense``
    LU-based ``slogdet`` of the assembled matrix. Exact, O(n^3), refused
    above ``dense_max_n`` firms.
``trace_series``
    ``log det(I - M) = -sum_k tr(M^k) / k``, truncated at ``terms``. Because
    ``M^k`` expands into words in G and H, ``tr(M^k)`` is a polynomial in
    (bG, bH)::

        tr(M^k) = sum_j c[k, j] bG^j bH^(k-j)

    where ``c[k, j]`` sums the traces of all words with j factors of G.
    The coefficients are estimated once per network with Rademacher
    (Hutchinson) probes, after which any (bG, bH) evaluates in microseconds.
    Orders ``k <= exact_orders`` (at most 4) use exact traces of every word
    instead, via ``tr(LR) = sum(L * R^T)`` with L and R products of at most two
    factors.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from ._rng import substream
from .exceptions import ConvergenceError
from .network import matrix_spectral_bound

DENSE_MAX_N = 2000


class LogdetEstimate(NamedTuple):
    value: float
    se: float


def dense_logdet(G, H, beta_G, beta_H, max_n=DENSE_MAX_N) -> float:
    n = G.shape[0]
    if n > max_n:
        raise ValueError(f"dense log-determinant refused for n={n} > {max_n}")
    a = np.eye(n) - beta_G * G.toarray() - beta_H * H.toarray()
    sign, ld = np.linalg.slogdet(a)
    if sign <= 0:
        raise ArithmeticError("I - M is not positive-determinant; outside the admissible region")
    return float(ld)


def _exact_word_traces(G, H, k):
    """Yield (number of G factors, trace) for every word of length k <= 4."""
    if k == 1:
        yield 1, float(G.diagonal().sum())
        yield 0, float(H.diagonal().sum())
        return
    base = {"G": G, "H": H}
    pairs = {a + b: (base[a] @ base[b]).tocsr() for a in "GH" for b in "GH"} if k > 2 else {}
    for bits in range(2 ** k):
        word = "".join("G" if bits >> i & 1 else "H" for i in range(k))
        half = (k + 1) // 2
        left, right = word[:half], word[half:]
        L = base[left] if len(left) == 1 else pairs[left]
        R = base[right] if len(right) == 1 else pairs[right]
        yield word.count("G"), float(L.multiply(R.T).sum())


class TraceSeriesLogdet:
    """Polynomial surrogate for log det(I - bG G - bH H).

    Parameters
    ----------
    G, H : sparse matrices
    terms : int
        Number of series terms K.
    probes : int
        Rademacher probe vectors.
    exact_orders : int
        Orders 1..exact_orders (0 to 4) computed exactly.
    rng : numpy Generator, optional
    """

    def __init__(self, G, H, terms=30, probes=64, exact_orders=4, rng=None):
        if terms < 1:
            raise ValueError("terms must be >= 1")
        if probes < 2:
            raise ValueError("need at least 2 probes for a standard error")
        if exact_orders not in range(5):
            raise ValueError("exact_orders must be between 0 and 4")
        rng = substream(0, "logdet") if rng is None else rng
        n = G.shape[0]
        K = terms
        self.terms = K
        self.probes = probes
        coef = np.zeros((K + 1, K + 1, probes))

        V = rng.integers(0, 2, size=(n, probes)).astype(float) * 2.0 - 1.0
        level = [V]
        G = sp.csr_matrix(G)
        H = sp.csr_matrix(H)
        for k in range(1, K + 1):
            nxt = []
            for j in range(k + 1):
                w = None
                if j >= 1:
                    w = G @ level[j - 1]
                if j <= k - 1:
                    w = H @ level[j] if w is None else w + H @ level[j]
                nxt.append(w)
                coef[k, j] = np.einsum("ij,ij->j", V, w)
            level = nxt
        for k in range(1, min(exact_orders, K) + 1):
            coef[k] = 0.0
            for j, tr in _exact_word_traces(G, H, k):
                coef[k, j] += tr
        self._per_probe = coef
        kk, jj = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
        mask = (jj <= kk) & (kk >= 1)
        self._k = kk[mask]
        self._j = jj[mask]
        self._flat = coef[mask]  # (n_terms, probes)
        self._mean = self._flat.mean(axis=1)

    @property
    def coefficients(self) -> np.ndarray:
        """Probe-averaged ``c[k, j]`` as a (K+1, K+1) array."""
        return self._per_probe.mean(axis=2)

    def _weights(self, beta_G, beta_H):
        pg = float(beta_G) ** np.arange(self.terms + 1)
        ph = float(beta_H) ** np.arange(self.terms + 1)
        return pg[self._j] * ph[self._k - self._j] / self._k

    def value(self, beta_G, beta_H) -> float:
        return float(-(self._weights(beta_G, beta_H) @ self._mean))

    def evaluate(self, beta_G, beta_H) -> LogdetEstimate:
        per = -(self._weights(beta_G, beta_H) @ self._flat)
        return LogdetEstimate(float(per.mean()), float(per.std(ddof=1) / np.sqrt(per.size)))

    def __add__(self, other: "TraceSeriesLogdet") -> "TraceSeriesLogdet":
        """Sum of two surrogates (e.g. over years); probes pair up by position."""
        if self.terms != other.terms or self.probes != other.probes:
            raise ValueError("surrogates differ in terms or probe count")
        out = object.__new__(TraceSeriesLogdet)
        out.__dict__.update(self.__dict__)
        out._per_probe = self._per_probe + other._per_probe
        out._flat = self._flat + other._flat
        out._mean = out._flat.mean(axis=1)
        return out


def logdet_I_minus_M(G, H, beta_G, beta_H, method="dense", *, dense_max_n=DENSE_MAX_N, terms=30, probes=64,
                     exact_orders=4, seed=0, rng=None) -> LogdetEstimate:
    """log det(I - beta_G G - beta_H H) by the chosen method.

    ``dense`` returns a zero standard error. ``trace_series`` refuses when the
    spectral guard fails.
    """
    if beta_G == 0 and beta_H == 0:
        return LogdetEstimate(0.0, 0.0)
    if method == "dense":
        return LogdetEstimate(dense_logdet(G, H, beta_G, beta_H, max_n=dense_max_n), 0.0)
    if method == "trace_series":
        bound = matrix_spectral_bound(G, H, beta_G, beta_H)
        if not bound.converges:
            raise ConvergenceError(bound.estimate)
        rng = substream(seed, "logdet") if rng is None else rng
        return TraceSeriesLogdet(G, H, terms=terms, probes=probes, exact_orders=exact_orders, rng=rng).evaluate(beta_G, beta_H)
    raise ValueError(f"unknown logdet method {method!r}")
