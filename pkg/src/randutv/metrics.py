"""Rank-revealing quality diagnostics and test-matrix generators."""
from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .blocked import UTVResult
from .errors import ConfigError
from .householder import explicit_q, form_compact_wy, hqr
from .matrix import RngState, as_matrix, frobenius_norm, generate_normal_random, matmul, spectral_norm_estimate
from .svd import svd_dense

NORMS = ("frobenius", "spectral")


def _norm(X, norm: str) -> float:
    if norm == "frobenius":
        return frobenius_norm(X)
    if norm == "spectral":
        return spectral_norm_estimate(X, tol=1e-12)
    raise ConfigError(f"unknown norm {norm!r}; expected one of {NORMS}")


def _check_k(A, k):
    p = min(np.shape(A))
    if not 1 <= k <= p:
        raise ConfigError(f"rank k must be in [1, {p}], got {k}")


def lowrank_error(A, result: UTVResult, k: int, norm: str = "frobenius") -> float:
    """Norm of A - U[:, :k] T[:k, :] V^T."""
    if result.U is None or result.V is None:
        raise ConfigError("low-rank error needs a result with both U and V")
    _check_k(A, k)
    A = np.asarray(A, dtype=np.float64)
    approx = matmul(matmul(result.U[:, :k], result.T[:k, :]), result.V, transb=True)
    return _norm(A - approx, norm)


def optimal_error(A, k: int, norm: str = "frobenius", sigma: np.ndarray | None = None) -> float:
    """Smallest rank-k approximation error (Eckart-Young). `sigma` may pass in
    precomputed singular values."""
    if norm not in NORMS:
        raise ConfigError(f"unknown norm {norm!r}; expected one of {NORMS}")
    p = min(np.shape(A))
    if not 0 <= k <= p:
        raise ConfigError(f"rank k must be in [0, {p}], got {k}")
    s = svd_dense(A).D if sigma is None else np.asarray(sigma)
    tail = s[k:]
    if tail.size == 0:
        return 0.0
    if norm == "spectral":
        return float(tail[0])
    return frobenius_norm(tail[None, :])


class DiagAccuracy(NamedTuple):
    """errors[i] is |T(i,i)| vs sigma_i; relative unless absolute[i] is set
    (sigma_i == 0)."""
    errors: np.ndarray
    absolute: np.ndarray

    def max(self) -> float:
        return float(np.max(self.errors)) if self.errors.size else 0.0


def diag_accuracy(A, result: UTVResult, sigma: np.ndarray | None = None) -> DiagAccuracy:
    s = svd_dense(A).D if sigma is None else np.asarray(sigma)
    d = np.abs(np.diag(result.T))[: s.size]
    absolute = s == 0.0
    err = np.abs(d - s)
    err[~absolute] /= s[~absolute]
    return DiagAccuracy(err, absolute)


# ---------------------------------------------------------------------------
# test matrices

_KIND = re.compile(r"^\s*(gaussian|identity|geometric|rank_r|rank)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


def parse_kind(kind: str) -> tuple[str, float | None]:
    """'geometric(0.8)' -> ('geometric', 0.8); 'rank_r(5)' -> ('rank_r', 5)."""
    mt = _KIND.match(kind)
    if not mt:
        raise ConfigError(f"unknown matrix kind {kind!r}")
    name, arg = mt.group(1), mt.group(2)
    if name == "rank":
        name = "rank_r"
    if name in ("geometric", "rank_r"):
        if not arg:
            raise ConfigError(f"{name} needs a parameter, e.g. {name}(3)")
        try:
            val = float(arg) if name == "geometric" else int(arg)
        except ValueError:
            raise ConfigError(f"bad parameter {arg!r} for {name}") from None
        if name == "geometric" and not 0.0 < val <= 1.0:
            raise ConfigError(f"geometric ratio must be in (0, 1], got {val}")
        if name == "rank_r" and val < 0:
            raise ConfigError(f"rank must be >= 0, got {val}")
        return name, val
    if arg:
        raise ConfigError(f"{name} takes no parameter")
    return name, None


def _random_orthogonal(rng: RngState, n: int) -> np.ndarray:
    return explicit_q(form_compact_wy(hqr(generate_normal_random(rng, n, n))))


def with_spectrum(sigma: Sequence[float], m: int, n: int, seed: int) -> np.ndarray:
    """U diag(sigma) V^T with Haar-like orthogonal U (m x m), V (n x n)."""
    rng = RngState(seed)
    U = _random_orthogonal(rng, m)
    V = _random_orthogonal(rng, n)
    p = min(m, n)
    s = np.zeros(p)
    s[: len(sigma)] = np.asarray(sigma, dtype=np.float64)[:p]
    return np.asfortranarray(matmul(U[:, :p] * s, V[:, :p], transb=True))


def make_test_matrix(kind: str, m: int, n: int, seed: int = 0) -> np.ndarray:
    """Kinds: gaussian, identity, geometric(beta) with sigma_i = beta^i
    (i from 0), rank_r(r) with sigma_i = 1/(i+1) for i < r and zero after."""
    if m < 1 or n < 1:
        raise ConfigError(f"matrix size must be positive, got {m}x{n}")
    name, arg = parse_kind(kind)
    p = min(m, n)
    if name == "gaussian":
        return generate_normal_random(RngState(seed), m, n)
    if name == "identity":
        return np.asfortranarray(np.eye(m, n))
    if name == "geometric":
        return with_spectrum(arg ** np.arange(p), m, n, seed)
    r = min(int(arg), p)
    return with_spectrum(1.0 / np.arange(1, r + 1), m, n, seed)


def scaled_time(seconds: float, n: int) -> float:
    """Wall time normalised by n^3, times 1e10."""
    return seconds / n**3 * 1e10


# ---------------------------------------------------------------------------

@dataclass
class QualityReport:
    ks: list[int]
    err_utv: list[float]
    err_opt: list[float]
    diag_relerr: list[float]
    norm: str
    norm_A: float
    config: dict = field(default_factory=dict)

    @property
    def ratios(self) -> list[float]:
        out = []
        for e, o in zip(self.err_utv, self.err_opt):
            if o > 0:
                out.append(e / o)
            else:
                out.append(1.0 if e == 0 else math.inf)
        return out

    def rows(self):
        for k, e, o, r, d in zip(self.ks, self.err_utv, self.err_opt, self.ratios, self.diag_relerr):
            yield {"k": k, "err_utv": e, "err_opt": o, "ratio": r, "diag_relerr": d}

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["k", "err_utv", "err_opt", "ratio", "diag_relerr"])
            w.writeheader()
            for row in self.rows():
                w.writerow({key: repr(v) if isinstance(v, float) else v for key, v in row.items()})


def quality_report(A, result: UTVResult, ks: Sequence[int] | None = None,
                   norm: str = "frobenius") -> QualityReport:
    """Errors at each k in `ks` (default: every block boundary b, 2b, ...
    below min(m, n)). diag_relerr[j] is the accuracy of T(k-1, k-1)."""
    A = as_matrix(A)
    sigma = svd_dense(A).D
    b = result.config.b
    p = min(A.shape)
    if ks is None:
        ks = list(range(b, p, b)) or [p]
    acc = diag_accuracy(A, result, sigma)
    return QualityReport(
        ks=list(ks),
        err_utv=[lowrank_error(A, result, k, norm) for k in ks],
        err_opt=[optimal_error(A, k, norm, sigma) for k in ks],
        diag_relerr=[float(acc.errors[k - 1]) for k in ks],
        norm=norm,
        norm_A=_norm(A, norm),
        config={"b": b, "q": result.config.q, "seed": result.config.seed},
    )
