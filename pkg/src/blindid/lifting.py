"""Lifted measurement operators and the mean-isometry normalization.

The time-domain operator maps a lifted matrix M to the circular convolution
of D x and E y when M = x y^T, extended linearly to all M. Its frequency
counterpart has entries a_j^* M conj(b_j) and equals (1/sqrt(n)) F applied
to the time-domain measurements.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import spectral
from .ensembles import Ensemble

__all__ = [
    "LiftedMatrix",
    "MeasurementRecord",
    "apply_G",
    "apply_A",
    "apply_A_adjoint",
    "operator_matrix",
    "mean_isometry_radius",
    "calibrated_isometry_radius",
]


@dataclass(frozen=True)
class LiftedMatrix:
    """A complex m1 x m2 matrix, optionally with rank-1 factors M = x y^T."""

    M: np.ndarray
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None

    def __post_init__(self):
        M = np.asarray(self.M, dtype=np.complex128)
        object.__setattr__(self, "M", M)
        if M.ndim != 2:
            raise ValueError(f"expected a matrix, got shape {M.shape}")
        if not np.all(np.isfinite(M.view(float))):
            raise ValueError("lifted matrix has non-finite entries")
        if (self.x is None) != (self.y is None):
            raise ValueError("factors must be given as a pair")
        if self.x is not None:
            x = np.asarray(self.x, dtype=np.complex128)
            y = np.asarray(self.y, dtype=np.complex128)
            object.__setattr__(self, "x", x)
            object.__setattr__(self, "y", y)
            outer = np.outer(x, y)
            scale = max(np.linalg.norm(M), 1e-300)
            if np.linalg.norm(M - outer) > 1e-12 * max(scale, 1.0):
                raise ValueError("factors do not reproduce the matrix")

    @classmethod
    def from_factors(cls, x, y) -> "LiftedMatrix":
        x = np.asarray(x, dtype=np.complex128)
        y = np.asarray(y, dtype=np.complex128)
        return cls(M=np.outer(x, y), x=x, y=y)

    @classmethod
    def zero(cls, m1: int, m2: int) -> "LiftedMatrix":
        return cls.from_factors(np.zeros(m1), np.zeros(m2))

    @property
    def shape(self):
        return self.M.shape

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.M))


def as_matrix(M) -> np.ndarray:
    if isinstance(M, LiftedMatrix):
        return M.M
    return np.asarray(M, dtype=np.complex128)


@dataclass(frozen=True)
class MeasurementRecord:
    """Time-domain measurements z with their frequency form and optional noise."""

    z: np.ndarray
    z_tilde: np.ndarray
    e: Optional[np.ndarray] = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.complex128)
        zt = np.asarray(self.z_tilde, dtype=np.complex128)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "z_tilde", zt)
        n = z.size
        expected = spectral.dft(z) / np.sqrt(n)
        if np.linalg.norm(zt - expected) > 1e-12 * max(1.0, np.linalg.norm(z)):
            raise ValueError("z_tilde is not (1/sqrt(n)) * F z")

    @classmethod
    def from_time_domain(cls, z, e=None) -> "MeasurementRecord":
        z = np.asarray(z, dtype=np.complex128)
        zt = spectral.dft(z) / np.sqrt(z.size)
        return cls(z=z, z_tilde=zt, e=None if e is None else np.asarray(e, np.complex128))

    @property
    def e_tilde(self) -> Optional[np.ndarray]:
        if self.e is None:
            return None
        return spectral.dft(self.e) / np.sqrt(self.e.size)


def _check_shape(ens: Ensemble, M: np.ndarray):
    if M.shape != (ens.scenario.m1, ens.scenario.m2):
        raise ValueError(
            f"matrix shape {M.shape} does not match ensemble "
            f"({ens.scenario.m1}, {ens.scenario.m2})"
        )


def apply_A(ens: Ensemble, M) -> np.ndarray:
    """Frequency-domain measurements, entry j = a_j^* M conj(b_j)."""
    M = as_matrix(M)
    _check_shape(ens, M)
    return np.einsum("jm,mk,jk->j", ens.a.conj(), M, ens.b.conj(), optimize=True)


def apply_G(ens: Ensemble, M) -> np.ndarray:
    """Time-domain measurements of the lifted matrix M.

    Rank-1 inputs with factors go through the time domain directly as
    (D x) convolved with (E y); general matrices go through the frequency
    products, which agree by linearity.
    """
    if isinstance(M, LiftedMatrix) and M.x is not None:
        _check_shape(ens, M.M)
        return spectral.circular_convolve(ens.D @ M.x, ens.E @ M.y)
    vals = apply_A(ens, M)
    return np.sqrt(ens.n) * spectral.dft(vals, "inverse")


def apply_A_adjoint(ens: Ensemble, w) -> LiftedMatrix:
    """Adjoint of the frequency operator under <A, M> = trace(A^* M).

    Satisfies <apply_A(M), w> = <M, apply_A_adjoint(w)> for all M, with the
    vector inner product conjugate-linear in its first argument.
    """
    w = np.asarray(w, dtype=np.complex128)
    if w.shape != (ens.n,):
        raise ValueError(f"expected length-{ens.n} vector, got shape {w.shape}")
    M = np.einsum("j,jm,jk->mk", w, ens.a, ens.b, optimize=True)
    return LiftedMatrix(M=M)


def operator_matrix(ens: Ensemble, rows: Optional[Sequence[int]] = None,
                    cols: Optional[Sequence[int]] = None) -> np.ndarray:
    """Matrix of the frequency operator on column-major vectorized input.

    Row j holds the coefficients so that operator_matrix @ vec(M) equals
    apply_A(M), with vec(M) in column-major (Fortran) order. Optional row
    and column index sets restrict M to a support.
    """
    a = ens.a.conj()
    b = ens.b.conj()
    if rows is not None:
        a = a[:, list(rows)]
    if cols is not None:
        b = b[:, list(cols)]
    # column index k * |rows| + m matches column-major vectorization
    return (b[:, :, None] * a[:, None, :]).reshape(ens.n, -1)


def mean_isometry_radius(n: int, m1: int, m2: int) -> float:
    """Ball radius ((m1+2)(m2+2)/n^2)^(1/4) from the printed second-moment
    constant m*R^2/(m+2).

    Note: exact uniform sampling on the complex radius-R ball has second
    moment m*R^2/(m+1), so the radius that makes the measurement operator an
    empirical mean isometry is calibrated_isometry_radius instead.
    """
    if n < 1 or m1 < 1 or m2 < 1:
        raise ValueError("all dimensions must be positive")
    return float(((m1 + 2) * (m2 + 2) / n**2) ** 0.25)


def calibrated_isometry_radius(n: int, m1: int, m2: int) -> float:
    """Ball radius ((m1+1)(m2+1)/n^2)^(1/4) for which the average of the
    normal operator over uniform-on-ball row draws converges to the identity.

    Uniform sampling on the radius-R ball in C^m (real dimension 2m) has
    E[norm^2] = 2m*R^2/(2m+2) = m*R^2/(m+1), which fixes this constant.
    """
    if n < 1 or m1 < 1 or m2 < 1:
        raise ValueError("all dimensions must be positive")
    return float(((m1 + 1) * (m2 + 1) / n**2) ** 0.25)
