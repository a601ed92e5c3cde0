"""Basis dictionaries for control parameterization.

A control channel is a linear combination of N bounded continuous functions on
[0, T].  The bundled dictionary is the sinusoidal family (1 constant plus an
equal number of sine and cosine harmonics), which requires N odd.  Arbitrary
dictionaries of callables are accepted as well, subject to a positive-definite
Gram admission check (numerical linear independence).
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import quadrature
from .errors import ConstructionError, DomainError, NumericalError

FOURIER = "fourier"
CUSTOM = "custom"

# Relative pivot tolerance of the Cholesky-based independence check.
INDEPENDENCE_TOL = 1e-10


@dataclass(frozen=True)
class BasisSet:
    """A fixed N-tuple of scalar basis functions on [0, horizon].

    ``scale_by_horizon`` controls the argument of the trigonometric terms:
    True uses t/T (harmonics complete full periods over any horizon), False
    uses t literally.  Both coincide for T = 1.
    """

    kind: str
    n_funcs: int
    horizon: float
    scale_by_horizon: bool = True
    functions: Optional[tuple] = None  # custom kind only
    _gram_cache: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.n_funcs < 1:
            raise ConstructionError("need at least one basis function")
        if self.horizon <= 0:
            raise ConstructionError("horizon must be positive")
        if self.kind == FOURIER:
            if self.n_funcs != 1 and self.n_funcs % 2 == 0:
                raise ConstructionError(
                    "sinusoidal dictionary needs odd N (one constant plus "
                    "matching sin/cos counts), got N=%d" % self.n_funcs
                )
        elif self.kind == CUSTOM:
            if self.functions is None or len(self.functions) != self.n_funcs:
                raise ConstructionError("custom basis needs exactly N callables")
        else:
            raise ConstructionError("unknown basis kind %r" % self.kind)

    # -- evaluation ---------------------------------------------------------

    def sample(self, ts) -> np.ndarray:
        """Evaluate all basis functions at an array of times; shape (N, len(ts))."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if np.any(ts < -1e-12) or np.any(ts > self.horizon + 1e-12):
            raise DomainError("time outside [0, %g]" % self.horizon)
        n = self.n_funcs
        if self.kind == CUSTOM:
            out = np.empty((n, ts.size))
            for i, f in enumerate(self.functions):
                out[i] = f(ts)
            return out
        s = ts / self.horizon if self.scale_by_horizon else ts
        out = np.empty((n, ts.size))
        out[0] = 1.0
        half = (n + 1) // 2
        for i in range(2, half + 1):
            out[i - 1] = np.sin(2.0 * np.pi * (i - 1) * s)
        for i in range(half + 1, n + 1):
            out[i - 1] = np.cos(2.0 * np.pi * (i - half) * s)
        return out

    def evaluate(self, t: float) -> np.ndarray:
        """The evaluation vector at a single time; shape (N,)."""
        return self.sample([float(t)])[:, 0]

    # -- Gram matrix --------------------------------------------------------

    def gram(self) -> np.ndarray:
        """L2 Gram matrix over [0, horizon] (symmetric positive definite)."""
        if not self._gram_cache:
            pts, wts = quadrature.composite_nodes(
                0.0, self.horizon, quadrature.panel_count(self.n_funcs)
            )
            psi = self.sample(pts)
            gram = (psi * wts) @ psi.T
            if not np.all(np.isfinite(gram)):
                raise NumericalError("Gram quadrature produced non-finite entries")
            gram = 0.5 * (gram + gram.T)
            _check_independence(gram)
            self._gram_cache.append(gram)
        return self._gram_cache[0]


def _check_independence(gram: np.ndarray) -> None:
    """Certify linear independence via Cholesky with a relative pivot tolerance."""
    scale = float(np.max(np.diag(gram)))
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise ConstructionError("basis functions are numerically linearly dependent")
    if np.min(np.diag(chol)) ** 2 < INDEPENDENCE_TOL * scale:
        raise ConstructionError("basis functions are numerically linearly dependent")


def fourier_basis(n_funcs: int, horizon: float, scale_by_horizon: bool = True) -> BasisSet:
    """The sinusoidal dictionary: constant, sin and cos harmonics (N odd)."""
    return BasisSet(FOURIER, n_funcs, horizon, scale_by_horizon)


def custom_basis(
    functions: Sequence[Callable], horizon: float, check: bool = True
) -> BasisSet:
    """Build a basis from arbitrary vectorized callables on [0, horizon].

    With ``check`` the Gram matrix is computed eagerly and the dictionary is
    rejected unless it is numerically linearly independent.
    """
    b = BasisSet(CUSTOM, len(functions), horizon, functions=tuple(functions))
    if check:
        b.gram()
    return b
