"""Discrete potential energies W(v) and the quadratic dissipation G(v).

A model is a sum of terms.  Term densities (before the h-weighted quadrature):

=============  =====================================  ==============
kind           density                                differences
=============  =====================================  ==============
dirichlet      lam/2 |grad v|^2                       forward
biharmonic     lam/2 |lap v|^2                        3-point
p_laplacian    lam/p |grad v|^p                       forward
p_potential    lam/p |v|^p                            --
cosine         lam (1 - cos v)                        --
fractional     lam c/2 |(-lap)^(s/2) v|^2             Fourier symbol
=============  =====================================  ==============

Gradients are taken with respect to the h-weighted pairing, so that
``inner_product(eval_gradient(m, v, g), d, g)`` is the directional derivative
of ``eval_energy`` and the result approximates the continuum Gateaux
derivative independently of the mesh.

All evaluators broadcast over leading axes: ``v`` may be a single field of
shape ``(N,)`` or a stack ``(K, N)`` of time slices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .grid import SpatialGrid

__all__ = [
    "ModelError",
    "UnsupportedCombinationError",
    "EnergyTerm",
    "EnergyModel",
    "DissipationModel",
    "TERM_KINDS",
    "make_model",
    "conjecture_model",
    "sine_gordon_model",
    "beam_model",
    "p_laplacian_model",
    "fractional_model",
    "telegraph_model",
    "eval_energy",
    "eval_gradient",
    "eval_hvp",
    "hessian_blocks",
    "fractional_symbol",
    "forward_difference",
    "second_difference",
]

TERM_KINDS = ("dirichlet", "p_potential", "p_laplacian", "biharmonic", "cosine", "fractional")
_QUADRATIC = {"dirichlet", "biharmonic", "fractional"}
# differential order of each term, used to find the leading term
_ORDER = {"biharmonic": 2.0, "dirichlet": 1.0, "p_laplacian": 1.0, "p_potential": 0.0, "cosine": 0.0}

# relative size of the smoothing in the Hessian of |g|^p / p
HESSIAN_SMOOTHING = 1e-8


class ModelError(ValueError):
    pass


class UnsupportedCombinationError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyTerm:
    kind: str
    lam: float = 1.0
    p: float | None = None
    s: float | None = None
    c_ns: float = 1.0
    symbol: str = "spectral"

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ModelError(f"unknown term kind {self.kind!r}")
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ModelError(f"{self.kind}: coefficient lambda must be >= 0, got {self.lam}")
        if self.kind in ("p_potential", "p_laplacian"):
            if self.p is None or not (np.isfinite(self.p) and self.p > 1):
                raise ModelError(f"{self.kind}: exponent must satisfy p > 1, got {self.p}")
        if self.kind == "fractional":
            if self.s is None or not 0 < self.s < 1:
                raise ModelError(f"fractional: order must satisfy 0 < s < 1, got {self.s}")
            if not self.c_ns > 0:
                raise ModelError(f"fractional: c_ns must be > 0, got {self.c_ns}")
            if self.symbol not in ("spectral", "discrete"):
                raise ModelError(f"fractional: unknown symbol {self.symbol!r}")

    @property
    def order(self) -> float:
        if self.kind == "fractional":
            return float(self.s)
        return _ORDER[self.kind]

    @property
    def quadratic(self) -> bool:
        return self.kind in _QUADRATIC or (self.kind == "p_potential" and self.p == 2)

    @property
    def convex(self) -> bool:
        return self.kind != "cosine"


@dataclass(frozen=True)
class EnergyModel:
    terms: tuple[EnergyTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise ModelError("an energy model needs at least one term")

    @property
    def satisfies_eq9(self) -> bool:
        """True iff the highest-order part of W is a quadratic form.

        This is the structural condition under which the limit is known to
        solve the wave equation; p-Laplacian leading terms do not qualify.
        """
        top = max(t.order for t in self.terms)
        leading = [t for t in self.terms if t.order == top]
        return all(t.kind in _QUADRATIC for t in leading)

    @property
    def convex(self) -> bool:
        return all(t.convex for t in self.terms)

    @property
    def quadratic(self) -> bool:
        return all(t.quadratic for t in self.terms)

    def describe(self) -> str:
        parts = []
        for t in self.terms:
            extra = f",p={t.p:g}" if t.p is not None else ""
            extra += f",s={t.s:g}" if t.s is not None else ""
            parts.append(f"{t.kind}(lam={t.lam:g}{extra})")
        return "+".join(parts)


@dataclass(frozen=True)
class DissipationModel:
    """G(v) = gamma/2 ||v||^2."""

    gamma: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ModelError(f"dissipation gamma must be >= 0, got {self.gamma}")


def make_model(spec: Iterable[EnergyTerm | Mapping]) -> EnergyModel:
    """Build a model from term descriptors (``EnergyTerm`` or dicts of its fields)."""
    terms = []
    for item in spec:
        if isinstance(item, EnergyTerm):
            terms.append(item)
        else:
            terms.append(EnergyTerm(**dict(item)))
    return EnergyModel(tuple(terms))


def conjecture_model(p: float) -> EnergyModel:
    """W = 1/2 |grad v|^2 + 1/2 |v|^p, whose gradient is -lap v + (p/2)|v|^(p-2) v.

    This is the abstract form of the functional with |u|^p and unit
    coefficients; p = 2k recovers w'' = lap w - k w^(2k-1).
    """
    return make_model([EnergyTerm("dirichlet", 1.0), EnergyTerm("p_potential", p / 2.0, p=p)])


def sine_gordon_model() -> EnergyModel:
    return make_model([EnergyTerm("dirichlet", 1.0), EnergyTerm("cosine", 1.0)])


def beam_model(p: float, q: float) -> EnergyModel:
    return make_model([
        EnergyTerm("biharmonic", 1.0),
        EnergyTerm("p_laplacian", 1.0, p=p),
        EnergyTerm("p_potential", 1.0, p=q),
    ])


def p_laplacian_model(p: float) -> EnergyModel:
    return make_model([EnergyTerm("p_laplacian", 1.0, p=p)])


def fractional_model(s: float, c_ns: float = 1.0) -> EnergyModel:
    return make_model([EnergyTerm("fractional", 1.0, s=s, c_ns=c_ns)])


def telegraph_model(p: float) -> tuple[EnergyModel, DissipationModel]:
    """w'' = lap w - |w|^(p-2) w - w'."""
    model = make_model([EnergyTerm("dirichlet", 1.0), EnergyTerm("p_potential", 1.0, p=p)])
    return model, DissipationModel(1.0)


# -- discrete operators -------------------------------------------------------

def forward_difference(v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Edge differences; N edges on a torus, N+1 on a Dirichlet interval."""
    if grid.periodic:
        return (np.roll(v, -1, axis=-1) - v) / grid.h
    pad = [(0, 0)] * (v.ndim - 1) + [(1, 1)]
    return np.diff(np.pad(v, pad), axis=-1) / grid.h


def _forward_difference_T(e: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    if grid.periodic:
        return (np.roll(e, 1, axis=-1) - e) / grid.h
    return (e[..., :-1] - e[..., 1:]) / grid.h


def second_difference(v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    if grid.periodic:
        return (np.roll(v, -1, axis=-1) - 2 * v + np.roll(v, 1, axis=-1)) / grid.h**2
    pad = [(0, 0)] * (v.ndim - 1) + [(1, 1)]
    w = np.pad(v, pad)
    return (w[..., 2:] - 2 * w[..., 1:-1] + w[..., :-2]) / grid.h**2


def _difference_matrix(grid: SpatialGrid) -> sp.csr_matrix:
    n, h = grid.n_points, grid.h
    if grid.periodic:
        g = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], shape=(n, n), format="lil")
        g[n - 1, 0] = 1.0
        return g.tocsr() / h
    return sp.diags([-np.ones(n), np.ones(n)], [-1, 0], shape=(n + 1, n), format="csr") / h


def _laplacian_matrix(grid: SpatialGrid) -> sp.csr_matrix:
    g = _difference_matrix(grid)
    return -(g.T @ g).tocsr()


def fractional_symbol(grid: SpatialGrid, s: float, symbol: str = "spectral") -> np.ndarray:
    """Symbol of (-lap)^s on the torus, ordered like ``np.fft.fft`` output.

    ``spectral`` uses |k|^(2s); ``discrete`` uses the s-th power of the
    3-point Laplacian symbol, which at s = 1 reproduces the forward-difference
    Dirichlet energy exactly.
    """
    k = 2 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.h)
    if symbol == "spectral":
        return np.abs(k) ** (2 * s)
    return (2.0 / grid.h * np.abs(np.sin(0.5 * k * grid.h))) ** (2 * s)


def _require_periodic(term: EnergyTerm, grid: SpatialGrid) -> None:
    if not grid.periodic:
        raise UnsupportedCombinationError(
            f"{term.kind} term needs a periodic grid; got {grid.kind}"
        )


def _smoothed_power(g: np.ndarray, p: float) -> np.ndarray:
    """(p-1)(g^2 + eta^2)^((p-2)/2), the regularized second derivative of |g|^p/p."""
    if p == 2:
        return np.ones_like(g)
    scale = np.max(np.abs(g)) if g.size else 0.0
    eta = HESSIAN_SMOOTHING * (scale if scale > 0 else 1.0)
    return (p - 1) * (g * g + eta * eta) ** (0.5 * (p - 2))


def _signed_power(g: np.ndarray, q: float) -> np.ndarray:
    return np.sign(g) * np.abs(g) ** q


# -- per-term evaluators ------------------------------------------------------

def _term_energy(t: EnergyTerm, v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    h = grid.h
    if t.kind == "dirichlet":
        return 0.5 * t.lam * h * np.sum(forward_difference(v, grid) ** 2, axis=-1)
    if t.kind == "biharmonic":
        return 0.5 * t.lam * h * np.sum(second_difference(v, grid) ** 2, axis=-1)
    if t.kind == "p_laplacian":
        return t.lam / t.p * h * np.sum(np.abs(forward_difference(v, grid)) ** t.p, axis=-1)
    if t.kind == "p_potential":
        return t.lam / t.p * h * np.sum(np.abs(v) ** t.p, axis=-1)
    if t.kind == "cosine":
        # 2 sin^2(v/2) avoids cancellation near v = 0
        return t.lam * h * np.sum(2.0 * np.sin(0.5 * v) ** 2, axis=-1)
    _require_periodic(t, grid)
    sigma = fractional_symbol(grid, t.s, t.symbol)
    vh = np.fft.fft(v, axis=-1)
    return 0.5 * t.lam * t.c_ns * h / grid.n_points * np.sum(sigma * np.abs(vh) ** 2, axis=-1)


def _term_gradient(t: EnergyTerm, v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    if t.kind == "dirichlet":
        return t.lam * _forward_difference_T(forward_difference(v, grid), grid)
    if t.kind == "biharmonic":
        return t.lam * second_difference(second_difference(v, grid), grid)
    if t.kind == "p_laplacian":
        g = forward_difference(v, grid)
        return t.lam * _forward_difference_T(_signed_power(g, t.p - 1), grid)
    if t.kind == "p_potential":
        return t.lam * _signed_power(v, t.p - 1)
    if t.kind == "cosine":
        return t.lam * np.sin(v)
    _require_periodic(t, grid)
    sigma = fractional_symbol(grid, t.s, t.symbol)
    return t.lam * t.c_ns * np.fft.ifft(sigma * np.fft.fft(v, axis=-1), axis=-1).real


def _term_hvp(t: EnergyTerm, v: np.ndarray, d: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    if t.kind in ("dirichlet", "biharmonic", "fractional"):
        return _term_gradient(t, d, grid)
    if t.kind == "p_laplacian":
        c = _smoothed_power(forward_difference(v, grid), t.p)
        return t.lam * _forward_difference_T(c * forward_difference(d, grid), grid)
    if t.kind == "p_potential":
        return t.lam * _smoothed_power(v, t.p) * d
    return t.lam * np.cos(v) * d


def eval_energy(model: EnergyModel, v: np.ndarray, grid: SpatialGrid):
    v = np.asarray(v, dtype=float)
    grid.check(v)
    total = sum(_term_energy(t, v, grid) for t in model.terms)
    return float(total) if np.ndim(total) == 0 else total


def eval_gradient(model: EnergyModel, v: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    grid.check(v)
    return sum(_term_gradient(t, v, grid) for t in model.terms)


def eval_hvp(model: EnergyModel, v: np.ndarray, d: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    d = np.asarray(d, dtype=float)
    grid.check(v, d)
    return sum(_term_hvp(t, v, d, grid) for t in model.terms)


def hessian_blocks(model: EnergyModel, v: np.ndarray, grid: SpatialGrid) -> sp.csr_matrix:
    """Block-diagonal sparse Hessian, one N x N block per row of the stack ``v``.

    Uses the same smoothing as :func:`eval_hvp`, so ``H @ d.ravel()`` equals
    ``eval_hvp(model, v, d, grid).ravel()``.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    k, n = v.shape
    eye_k = sp.identity(k, format="csr")
    point = np.zeros((k, n))
    total = sp.csr_matrix((k * n, k * n))
    const = None
    for t in model.terms:
        if t.kind == "dirichlet":
            block = -t.lam * _laplacian_matrix(grid)
        elif t.kind == "biharmonic":
            lap = _laplacian_matrix(grid)
            block = t.lam * (lap @ lap)
        elif t.kind == "fractional":
            _require_periodic(t, grid)
            col = np.fft.ifft(fractional_symbol(grid, t.s, t.symbol)).real
            block = sp.csr_matrix(t.lam * t.c_ns * scipy.linalg.circulant(col))
        else:
            block = None
        if block is not None:
            const = block if const is None else const + block
            continue
        if t.kind == "p_potential":
            point += t.lam * _smoothed_power(v, t.p)
        elif t.kind == "cosine":
            point += t.lam * np.cos(v)
        else:
            g_mat = _difference_matrix(grid)
            coef = t.lam * _smoothed_power(forward_difference(v, grid), t.p)
            g_big = sp.kron(eye_k, g_mat, format="csr")
            total = total + g_big.T @ sp.diags(coef.ravel()) @ g_big
    if const is not None:
        total = total + sp.kron(eye_k, const, format="csr")
    total = total + sp.diags(point.ravel())
    return total.tocsr()
