from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.signal import fftconvolve
from scipy.stats import norm

from rmperm.exceptions import ArgumentError

logger = logging.getLogger(__name__)

#: Default width of a grid cell, in LLR units.
DEFAULT_GRID_STEP = 0.005

#: Number of LLR standard deviations kept below the mean.
TAIL_WIDTH = 12.0


class ThresholdMethod(enum.Enum):
    PRECISE = "precise"
    CLT = "clt"


@dataclass(frozen=True)
class ChannelNoise:
    """
    BI-AWGN noise with variance ``sigma2``; the channel LLR of a transmitted
    zero is normal with mean ``2 / sigma2`` and variance ``4 / sigma2``.
    """

    sigma2: float

    def __post_init__(self) -> None:
        if not self.sigma2 > 0 or not math.isfinite(self.sigma2):
            raise ArgumentError(
                f"Noise variance must be positive and finite, got {self.sigma2=}"
            )

    @property
    def llr_mean(self) -> float:
        return 2.0 / self.sigma2

    @property
    def llr_var(self) -> float:
        return 4.0 / self.sigma2

    @property
    def llr_std(self) -> float:
        return math.sqrt(self.llr_var)


@dataclass(frozen=True)
class MixedDistribution:
    """
    Distribution on ``(-inf, 0]`` made of a density on a uniform grid and an
    exact point mass at 0.

    Cell ``k`` covers ``[grid_start + k*step, grid_start + (k+1)*step)`` and the
    last cell ends at 0. The density is constant within a cell.

    :ivar grid_start: Left edge of the first cell, ``-len(density) * step``.
    :ivar step: Cell width.
    :ivar density: Nonnegative density per cell, ascending.
    :ivar mass_at_zero: Probability of the value 0.
    """

    grid_start: float
    step: float
    density: np.ndarray
    mass_at_zero: float

    def __post_init__(self) -> None:
        if not self.step > 0:
            raise ArgumentError(f"Grid step must be positive, got {self.step=}")
        density = np.asarray(self.density, dtype=np.float64)
        if density.ndim != 1 or density.size == 0:
            raise ArgumentError("Density must be a non-empty one-dimensional array")
        if not math.isclose(self.grid_start, -density.size * self.step, rel_tol=1e-9):
            raise ArgumentError(
                f"Grid of {density.size} cells of width {self.step} "
                f"cannot start at {self.grid_start}"
            )
        if np.any(density < 0) or not 0.0 <= self.mass_at_zero <= 1.0 + 1e-9:
            raise ArgumentError("Masses must be nonnegative")
        density.flags.writeable = False
        object.__setattr__(self, "density", density)

    @classmethod
    def from_masses(
        cls, masses: np.ndarray, step: float, mass_at_zero: float
    ) -> MixedDistribution:
        return cls(-masses.size * step, step, masses / step, float(mass_at_zero))

    @property
    def cells(self) -> int:
        return self.density.size

    @property
    def masses(self) -> np.ndarray:
        return self.density * self.step

    @property
    def midpoints(self) -> np.ndarray:
        return self.grid_start + self.step * (np.arange(self.cells) + 0.5)

    def total_mass(self) -> float:
        return float(self.mass_at_zero + self.masses.sum())

    def _cdf_knots(self) -> tuple[np.ndarray, np.ndarray]:
        edges = self.grid_start + self.step * np.arange(self.cells + 1)
        return edges, np.concatenate([[0.0], np.cumsum(self.masses)])

    def cdf(self, z: float | np.ndarray) -> float | np.ndarray:
        """
        Evaluate the CDF; linear within cells, jumping to 1 at 0.

        **Examples:**

        .. code-block:: python

            >>> point_mass_at_zero(0.01).cdf(-1.0)
            0.0
        """
        edges, cumulative = self._cdf_knots()
        below = np.interp(z, edges, cumulative, left=0.0)
        values = np.where(np.asarray(z) >= 0, 1.0, below)
        return values if np.ndim(values) else float(values)

    def quantile(self, p: float) -> tuple[float, bool]:
        """
        Smallest ``z`` with ``F(z) >= p``, interpolated linearly inside its cell.

        :param p: Probability in ``(0, 1)``.
        :type p: float
        :return: The quantile and whether it falls on the point mass at 0.
        :rtype: tuple[float, bool]
        """
        if not 0.0 < p < 1.0:
            raise ArgumentError(f"Probability must lie in (0, 1), got {p=}")
        edges, cumulative = self._cdf_knots()
        if p > cumulative[-1]:
            return 0.0, True
        j = int(np.searchsorted(cumulative, p, side="left"))
        fraction = (p - cumulative[j - 1]) / (cumulative[j] - cumulative[j - 1])
        return float(edges[j - 1] + fraction * self.step), False

    def mean(self) -> float:
        return float(np.dot(self.midpoints, self.masses))

    def variance(self) -> float:
        second = float(np.dot(self.midpoints**2, self.masses))
        return second - self.mean() ** 2


def point_mass_at_zero(step: float = DEFAULT_GRID_STEP) -> MixedDistribution:
    """The distribution of the constant 0, neutral element of :func:`convolve`."""
    return MixedDistribution(-step, step, np.zeros(1), 1.0)


def truncated_base(
    noise: ChannelNoise,
    grid_step: float = DEFAULT_GRID_STEP,
    grid_span: float | None = None,
) -> MixedDistribution:
    """
    Distribution of ``min{0, Y}`` for the channel LLR ``Y`` of a transmitted zero.

    :param noise: Channel noise.
    :type noise: ChannelNoise
    :param grid_step: Cell width.
    :type grid_step: float
    :param grid_span: Length of the grid below 0; defaults to
        :data:`TAIL_WIDTH` LLR standard deviations.
    :type grid_span: float | None
    :return: The mixed distribution, renormalized to total mass 1.
    :rtype: MixedDistribution
    :raises ArgumentError: If the grid is too short or the step is not positive.

    **Examples:**

    .. code-block:: python

        >>> round(truncated_base(ChannelNoise(0.5)).mass_at_zero, 5)
        0.92135
    """
    if not grid_step > 0:
        raise ArgumentError(f"Grid step must be positive, got {grid_step=}")
    minimum_span = TAIL_WIDTH * noise.llr_std
    span = minimum_span if grid_span is None else grid_span
    if span < minimum_span:
        raise ArgumentError(
            f"Grid span {span} covers less than {TAIL_WIDTH} LLR deviations "
            f"({minimum_span:.4g})"
        )
    cells = math.ceil(span / grid_step)
    edges = grid_step * np.arange(-cells, 1)
    masses = np.diff(norm.cdf(edges, loc=noise.llr_mean, scale=noise.llr_std))
    mass_at_zero = norm.sf(0.0, loc=noise.llr_mean, scale=noise.llr_std)
    total = mass_at_zero + masses.sum()
    logger.debug(
        f"Truncated base with {cells=}, {mass_at_zero=}, lost tail {1 - total:.3g}"
    )
    return MixedDistribution.from_masses(
        masses / total, grid_step, mass_at_zero / total
    )


def truncated_moments(noise: ChannelNoise) -> tuple[float, float]:
    """
    Mean and variance of ``min{0, Y}``, ``Y ~ N(2/sigma2, 4/sigma2)``, in closed form.

    With ``a = -mu / sigma`` the partial moments below 0 are
    ``mu Phi(a) - sigma phi(a)`` and ``(mu^2 + sigma^2) Phi(a) - mu sigma phi(a)``.

    :param noise: Channel noise.
    :type noise: ChannelNoise
    :return: ``(mean, variance)``.
    :rtype: tuple[float, float]
    """
    mu, sigma = noise.llr_mean, noise.llr_std
    a = -mu / sigma
    cdf, pdf = norm.cdf(a), norm.pdf(a)
    first = mu * cdf - sigma * pdf
    second = (mu**2 + sigma**2) * cdf - mu * sigma * pdf
    return float(first), float(max(second - first**2, 0.0))


def truncated_moments_quadrature(noise: ChannelNoise) -> tuple[float, float]:
    """Same quantities as :func:`truncated_moments`, by adaptive quadrature."""
    mu, sigma = noise.llr_mean, noise.llr_std
    lower = min(mu - 40.0 * sigma, -sigma)

    def partial(weight: Callable[[float], float]) -> float:
        value, _ = quad(
            lambda y: weight(y) * norm.pdf(y, loc=mu, scale=sigma),
            lower,
            0.0,
            epsabs=1e-13,
            epsrel=1e-12,
            limit=200,
        )
        return value

    first = partial(lambda y: y)
    second = partial(lambda y: y * y)
    return first, second - first**2


def _check_probability(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ArgumentError(f"Probability must lie in (0, 1), got {p=}")


def _check_length(n: int) -> None:
    if n < 1:
        raise ArgumentError(f"Number of summands must be positive, got {n=}")


def clt_threshold(n: int, noise: ChannelNoise, p: float) -> float:
    """
    Normal approximation of the ``p``-quantile of ``sum_i min{0, Y_i}``.

    :param n: Number of summands (the code length).
    :type n: int
    :param noise: Channel noise.
    :type noise: ChannelNoise
    :param p: Target probability.
    :type p: float
    :return: ``Phi^-1(p)`` for mean ``n mu~`` and variance ``n sigma~^2``.
    :rtype: float
    :raises ArgumentError: If ``p`` is outside ``(0, 1)`` or ``n < 1``.
    """
    _check_length(n)
    _check_probability(p)
    mean, variance = truncated_moments(noise)
    return float(norm.ppf(p, loc=n * mean, scale=math.sqrt(n * variance)))


def convolve(
    a: MixedDistribution,
    b: MixedDistribution,
    lower_bound: float | None = None,
) -> MixedDistribution:
    """
    Distribution of the sum of independent variables distributed as ``a`` and ``b``.

    The continuous parts are convolved on the grid, each continuous part is
    weighted by the other's point mass, and the point masses multiply. Cells
    entirely below ``lower_bound`` are dropped and the result renormalized.

    :param a: First summand.
    :type a: MixedDistribution
    :param b: Second summand, on a grid of the same step.
    :type b: MixedDistribution
    :param lower_bound: Truncation point, or None to keep the full support.
    :type lower_bound: float | None
    :return: The distribution of the sum.
    :rtype: MixedDistribution
    :raises ArgumentError: If the grid steps differ.
    """
    if not math.isclose(a.step, b.step, rel_tol=1e-12):
        raise ArgumentError(f"Grid steps differ: {a.step} and {b.step}")
    mass_a, mass_b = a.masses, b.masses
    cells_a, cells_b = a.cells, b.cells
    masses = np.zeros(cells_a + cells_b)

    # Cells i and j sum to a triangle straddling the boundary of i+j and i+j+1
    paired = fftconvolve(mass_a, mass_b)
    masses[:-1] += 0.5 * paired
    masses[1:] += 0.5 * paired
    masses[cells_b:] += mass_a * b.mass_at_zero
    masses[cells_a:] += mass_b * a.mass_at_zero
    np.clip(masses, 0.0, None, out=masses)

    if lower_bound is not None:
        right_edges = a.step * np.arange(-masses.size + 1, 1)
        keep = int(np.argmax(right_edges > lower_bound))
        masses = masses[keep:]

    mass_at_zero = a.mass_at_zero * b.mass_at_zero
    total = mass_at_zero + masses.sum()
    return MixedDistribution.from_masses(masses / total, a.step, mass_at_zero / total)


def fold(
    base: MixedDistribution, n: int, spread: float | None = None
) -> MixedDistribution:
    """
    The ``n``-fold convolution of ``base`` by repeated doubling.

    :param base: Distribution of one summand.
    :type base: MixedDistribution
    :param n: Number of summands.
    :type n: int
    :param spread: Scale used to truncate the partial sums: an ``a``-fold sum keeps
        ``a * mean - 12 sqrt(a) * spread`` and above. None keeps everything.
    :type spread: float | None
    :return: Distribution of the sum of ``n`` independent copies.
    :rtype: MixedDistribution
    """
    _check_length(n)
    if n == 1:
        return base
    mean = base.mean()

    def bound(summands: int) -> float | None:
        if spread is None:
            return None
        return summands * mean - TAIL_WIDTH * math.sqrt(summands) * spread

    half = fold(base, n // 2, spread)
    result = convolve(half, half, bound(2 * (n // 2)))
    if n % 2:
        result = convolve(result, base, bound(n))
    logger.debug(f"Folded {n=} onto {result.cells} cells")
    return result


def precise_quantile(
    n: int,
    noise: ChannelNoise,
    p: float,
    grid_step: float = DEFAULT_GRID_STEP,
) -> tuple[float, bool]:
    """
    The ``p``-quantile of ``sum_i min{0, Y_i}`` over ``n`` independent channel LLRs.

    :param n: Number of summands (the code length).
    :type n: int
    :param noise: Channel noise.
    :type noise: ChannelNoise
    :param p: Target probability.
    :type p: float
    :param grid_step: Discretization step.
    :type grid_step: float
    :return: The quantile and whether it falls on the point mass at 0, in
        which case the quantile is 0.
    :rtype: tuple[float, bool]
    :raises ArgumentError: If ``p`` is outside ``(0, 1)`` or ``n < 1``.
    """
    _check_length(n)
    _check_probability(p)
    distribution = fold(truncated_base(noise, grid_step), n, spread=noise.llr_std)
    return distribution.quantile(p)


def precise_threshold(
    n: int,
    noise: ChannelNoise,
    p: float,
    grid_step: float = DEFAULT_GRID_STEP,
) -> float:
    """
    Metric threshold from :func:`precise_quantile`; warns when the quantile
    lies on the point mass at 0 and returns 0.

    **Examples:**

    .. code-block:: python

        >>> precise_threshold(512, ChannelNoise(0.5), 1e-4)  # doctest: +SKIP
        -96.6...
    """
    value, at_atom = precise_quantile(n, noise, p, grid_step)
    if at_atom:
        logger.warning(
            f"Quantile {p=} falls on the point mass at 0 for {n=}, {noise.sigma2=}"
        )
        return 0.0
    logger.debug(f"Precise threshold {value=} for {n=}, {noise.sigma2=}, {p=}")
    return value


def metric_threshold(
    n: int,
    noise: ChannelNoise,
    p: float,
    method: ThresholdMethod = ThresholdMethod.PRECISE,
    grid_step: float = DEFAULT_GRID_STEP,
) -> float:
    """
    Threshold by the requested method.

    See :func:`precise_threshold` and :func:`clt_threshold`.
    """
    if method is ThresholdMethod.CLT:
        return clt_threshold(n, noise, p)
    return precise_threshold(n, noise, p, grid_step)
