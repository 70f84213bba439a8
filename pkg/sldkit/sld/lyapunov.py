"""Integral and series forms of L = 2 int_0^inf e^{-rho s} drho e^{-rho s} ds.

Both routes avoid the eigenbasis of rho: quadrature works from matrix
exponentials, the series from repeated anticommutators.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.special
from numpy.typing import ArrayLike

from sldkit.errors import NoConvergence, NotFullRank, SolverError, bound_message
from sldkit.linalg.density import ComplexMatrix, DensityMatrix, anticommutator, max_abs
from sldkit.linalg.expm import matrix_exponential
from sldkit.linalg.spectrum import spectral_decompose
from sldkit.sld.operator import SLDOperator, check_derivative, sld_from_spectrum
from sldkit.sld.options import SolverOptions

EPS = float(np.finfo(np.float64).eps)
# Largest s * p_max the series accepts.
STABILITY_WINDOW = 25.0
# Past this s * p_max the largest series term exceeds 1/eps; the default s stays below it.
CANCELLATION_LIMIT = math.log(1 / EPS) / 2
# Rounding slack folded into the default s.
SERIES_SAFETY = 32.0
FIRST_SEGMENT = 1.0


class UnstableRegime(SolverError):
    pass


def _extreme_eigenvalues(rho: DensityMatrix) -> tuple[float, float]:
    values = np.linalg.eigvalsh(rho.mat)
    return float(values[0]), float(values[-1])


def _require_full_rank(rho: DensityMatrix, rank_tol: float, route: str) -> tuple[float, float]:
    p_min, p_max = _extreme_eigenvalues(rho)
    if p_min <= rank_tol:
        raise NotFullRank(
            f"{route} route needs a full-rank state; smallest eigenvalue {p_min:.3e} "
            f"is within rank_tol={rank_tol:.1e}"
        )
    return p_min, p_max


def _segment(
    rho: ComplexMatrix,
    drho: ComplexMatrix,
    start: ComplexMatrix,
    width: float,
    panels: int,
    nodes: np.ndarray,
    weights: np.ndarray,
) -> ComplexMatrix:
    """2 * int over [a, a + width] of e^{-rho s} drho e^{-rho s}; ``start`` is e^{-rho a}."""
    h = width / panels
    local = [matrix_exponential(-rho * (h * (x + 1) / 2)) for x in nodes]
    step = matrix_exponential(-rho * h)
    total = np.zeros_like(drho)
    offset = start
    for _ in range(panels):
        for w, e_local in zip(weights, local, strict=True):
            e = offset @ e_local
            total += (w * h / 2) * (e @ drho @ e)
        offset = offset @ step
    return 2 * total


def sld_quadrature(
    rho: DensityMatrix, drho: ArrayLike, opts: SolverOptions | None = None
) -> SLDOperator:
    """Composite Gauss-Legendre over geometric segments [0, 1], [1, 2], [2, 4], ...

    Each segment is split into 1, 2, 4, ... equal panels until two successive
    estimates agree; segments are added until the tail bound
    ||e^{-rho S}||_2^2 ||drho||_F / mu, with mu = -ln||e^{-rho S}||_2 / S the
    observed decay rate, drops below the tolerance.
    """
    options = opts or SolverOptions()
    q = options.quadrature
    d = check_derivative(drho, rho.dim)
    _require_full_rank(rho, options.rank_tol, "quadrature")

    nodes, weights = np.polynomial.legendre.leggauss(q.gl_points_per_panel)
    drho_norm = float(np.linalg.norm(d))
    total = np.zeros_like(d)
    start_s = 0.0
    start = np.eye(rho.dim, dtype=np.complex128)
    width = FIRST_SEGMENT
    panels_used = 0
    tail = math.inf

    for _segment_idx in range(q.tail_doublings_max + 1):
        panels = 1
        change = math.inf
        previous = _segment(rho.mat, d, start, width, panels, nodes, weights)
        for _ in range(q.panel_doublings_max):
            panels *= 2
            current = _segment(rho.mat, d, start, width, panels, nodes, weights)
            change = max_abs(current - previous)
            previous = current
            if change <= q.abs_tol * max(1.0, max_abs(total + current)):
                break
        else:
            raise NoConvergence(
                f"quadrature on [{start_s:g}, {start_s + width:g}] did not settle after "
                f"{q.panel_doublings_max} panel doublings; last change {change:.3e}, "
                f"last estimate norm {max_abs(previous):.3e}"
            )
        total += previous
        panels_used += panels

        start_s += width
        start = matrix_exponential(-rho.mat * start_s)
        decay_norm = float(np.linalg.norm(start, 2))
        decay_rate = -math.log(decay_norm) / start_s if 0.0 < decay_norm < 1.0 else 0.0
        if decay_norm == 0.0:
            tail = 0.0
        elif decay_rate > 0.0:
            tail = decay_norm**2 * drho_norm / decay_rate
        if tail <= q.abs_tol * max(1.0, max_abs(total)):
            break
        width = start_s
    else:
        raise NoConvergence(
            f"quadrature tail bound {tail:.3e} still above tolerance at s={start_s:g} after "
            f"{q.tail_doublings_max} segment doublings"
        )

    spectrum = spectral_decompose(rho, options.rank_tol)
    return sld_from_spectrum(
        total,
        spectrum,
        "quadrature",
        rho=rho,
        drho=d,
        diagnostics={"s_max": start_s, "panels": panels_used, "tail_bound": tail},
    )


def default_series_s(p_min: float, p_max: float) -> float:
    """Balance truncation e^{-2 s p_min}/p_min against rounding eps e^{2 s p_max}/p_max."""
    s = math.log(p_max / (EPS * SERIES_SAFETY * p_min)) / (2 * (p_min + p_max))
    return min(s, CANCELLATION_LIMIT / p_max)


def sld_series(
    rho: DensityMatrix, drho: ArrayLike, opts: SolverOptions | None = None
) -> SLDOperator:
    """Truncated expansion sum_n -2 (-s)^{n+1}/(n+1)! (rho o)^n drho with Kahan summation.

    Reports ``error_estimate`` = truncation in s + tail beyond the last term + rounding.
    An explicit s past CANCELLATION_LIMIT / p_max is accepted up to the window; the lost
    digits show up in the rounding part of the estimate.
    """
    options = opts or SolverOptions()
    d = check_derivative(drho, rho.dim)
    p_min, p_max = _require_full_rank(rho, options.rank_tol, "series")

    s = options.series.s if options.series.s is not None else default_series_s(p_min, p_max)
    if s * p_max > STABILITY_WINDOW:
        raise UnstableRegime(
            bound_message("s * p_max", s * p_max, STABILITY_WINDOW)
            + "; terms would cancel catastrophically"
        )

    drho_norm = float(np.linalg.norm(d))
    x = 2 * s * p_max
    coeff = 2 * s
    term_mat = d
    total = np.zeros_like(d)
    compensation = np.zeros_like(d)
    rounding_mass = 0.0
    n_terms = 0
    for n in range(options.series.n_max + 1):
        term = coeff * term_mat
        term_norm = float(np.linalg.norm(term))
        # Kahan step, elementwise.
        y = term - compensation
        t = total + y
        compensation = (t - total) - y
        total = t
        rounding_mass += (n + 1) * term_norm
        n_terms = n + 1
        if n + 1 > x and term_norm < options.abs_tol:
            break
        term_mat = anticommutator(rho.mat, term_mat)
        coeff *= -s / (n + 2)

    truncation = math.exp(-2 * s * p_min) * drho_norm / p_min
    tail = math.exp(x) * float(scipy.special.gammainc(n_terms + 1, x)) * drho_norm / p_max
    rounding = EPS * rounding_mass
    estimate = truncation + tail + rounding

    spectrum = spectral_decompose(rho, options.rank_tol)
    return sld_from_spectrum(
        total,
        spectrum,
        "series",
        rho=rho,
        drho=d,
        diagnostics={
            "s": s,
            "n_terms": n_terms,
            "error_estimate": estimate,
            "truncation": truncation,
            "tail": tail,
            "rounding": rounding,
        },
    )


def anticommutator_power(rho: ArrayLike, drho: ArrayLike, n: int) -> ComplexMatrix:
    """(rho o)^n drho by n repeated anticommutators."""
    a = np.asarray(rho, dtype=np.complex128)
    out = np.asarray(drho, dtype=np.complex128)
    for _ in range(n):
        out = anticommutator(a, out)
    return out


def binomial_expansion(rho: ArrayLike, drho: ArrayLike, n: int) -> ComplexMatrix:
    """sum_m C(n, m) rho^m drho rho^{n-m}."""
    a = np.asarray(rho, dtype=np.complex128)
    b = np.asarray(drho, dtype=np.complex128)
    powers = [np.eye(a.shape[0], dtype=np.complex128)]
    for _ in range(n):
        powers.append(powers[-1] @ a)
    total = np.zeros_like(b)
    for m in range(n + 1):
        total += scipy.special.comb(n, m, exact=True) * (powers[m] @ b @ powers[n - m])
    return total
