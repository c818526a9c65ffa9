from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import comb

from rmperm.exceptions import ArgumentError, CapacityError
from rmperm.types import BitVector

logger = logging.getLogger(__name__)

#: Largest exponent accepted by :func:`generator_matrix`.
MAX_GENERATOR_EXPONENT = 16

_KERNEL = np.array([[1, 0], [1, 1]], dtype=np.uint8)


def _popcount(values: np.ndarray) -> np.ndarray:
    counts = np.zeros_like(values)
    remaining = values.copy()
    while np.any(remaining):
        counts += remaining & 1
        remaining >>= 1
    return counts


@dataclass(frozen=True)
class CodeSpec:
    """
    Identity of a polar code instance: length exponent and frozen set.

    Bit index ``i`` is read as binary digits ``(b_{m-1} ... b_0)`` with ``b_0``
    least significant; layer ``l`` of the factor graph acts on digit ``b_l``.

    :param m: Code length exponent, ``n = 2**m``.
    :type m: int
    :param frozen: Strictly increasing frozen indices in ``{0..n-1}``.
    :type frozen: tuple[int, ...]
    :param r: RM order used at construction, if any.
    :type r: int | None
    :raises ArgumentError: If ``m`` is negative or the frozen set is malformed.
    """

    m: int
    frozen: tuple[int, ...] = field(default=())
    r: int | None = None

    def __post_init__(self) -> None:
        if self.m < 0:
            raise ArgumentError(
                f"Code length exponent must be nonnegative, got {self.m=}"
            )
        frozen = tuple(int(i) for i in self.frozen)
        if any(b <= a for a, b in zip(frozen, frozen[1:])):
            raise ArgumentError("Frozen indices must be strictly increasing")
        if frozen and (frozen[0] < 0 or frozen[-1] >= 1 << self.m):
            raise ArgumentError(f"Frozen indices must lie in [0, {1 << self.m})")
        object.__setattr__(self, "frozen", frozen)

    @property
    def n(self) -> int:
        return 1 << self.m

    @property
    def k(self) -> int:
        return self.n - len(self.frozen)

    @property
    def rate(self) -> float:
        return self.k / self.n

    @cached_property
    def frozen_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[list(self.frozen)] = True
        mask.flags.writeable = False
        return mask

    @cached_property
    def info_positions(self) -> np.ndarray:
        positions = np.flatnonzero(~self.frozen_mask)
        positions.flags.writeable = False
        return positions


def generator_matrix(m: int) -> np.ndarray:
    """
    Return ``A_m``, the m-fold Kronecker power of ``[[1, 0], [1, 1]]``.

    Only meant as a test oracle; encoding never multiplies by it.

    :param m: Kronecker exponent.
    :type m: int
    :return: Binary matrix of shape ``(2**m, 2**m)``.
    :rtype: numpy.ndarray
    :raises CapacityError: If ``m`` exceeds :data:`MAX_GENERATOR_EXPONENT`.
    """
    if m < 0:
        raise ArgumentError(f"Kronecker exponent must be nonnegative, got {m=}")
    if m > MAX_GENERATOR_EXPONENT:
        raise CapacityError(
            f"Generator matrix for {m=} has 4**{m} entries, "
            f"limit is m <= {MAX_GENERATOR_EXPONENT}"
        )
    matrix = np.ones((1, 1), dtype=np.uint8)
    for _ in range(m):
        matrix = np.kron(matrix, _KERNEL)
    return matrix


def rm_code(m: int, r: int) -> CodeSpec:
    """
    Construct RM(r, m) as a polar code.

    Row ``i`` of ``A_m`` has weight ``2**popcount(i)``, so keeping the rows of
    weight at least ``2**(m-r)`` freezes every index with ``popcount(i) < m - r``.

    :param m: Code length exponent.
    :type m: int
    :param r: Order, ``0 <= r <= m``.
    :type r: int
    :return: The code specification.
    :rtype: CodeSpec
    :raises ArgumentError: If ``r`` is out of range.

    **Examples:**

    .. code-block:: python

        >>> rm_code(8, 3).k
        93
        >>> rm_code(3, 1).frozen
        (0, 1, 2, 4)
    """
    if m < 1:
        raise ArgumentError(f"RM length exponent must be positive, got {m=}")
    if not 0 <= r <= m:
        raise ArgumentError(f"RM order must satisfy 0 <= r <= m, got {r=}, {m=}")
    indices = np.arange(1 << m)
    frozen = tuple(int(i) for i in indices[_popcount(indices) < m - r])
    spec = CodeSpec(m=m, frozen=frozen, r=r)
    logger.debug(f"Constructed RM({r},{m}) with n={spec.n}, k={spec.k}")
    return spec


def rm_dimension(m: int, r: int) -> int:
    """Dimension ``sum_{i<=r} C(m, i)`` of RM(r, m)."""
    return int(sum(comb(m, i, exact=True) for i in range(r + 1)))


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """
    Apply the layer passes of the factor graph along the last axis.

    Layer ``l`` replaces ``u_i`` by ``u_i XOR u_{i+2**l}`` for every ``i`` whose
    digit ``b_l`` is zero. The transform is its own inverse.

    :param bits: Array of bits; the last axis must have power-of-two length.
    :type bits: numpy.ndarray
    :return: Transformed copy with dtype ``uint8``.
    :rtype: numpy.ndarray
    """
    out = np.array(bits, dtype=np.uint8, copy=True)
    width = out.shape[-1]
    if width & (width - 1):
        raise ArgumentError(f"Length {width} is not a power of two")
    lead = out.shape[:-1]
    span = 1
    while span < width:
        blocks = out.reshape(*lead, width // (2 * span), 2, span)
        blocks[..., 0, :] ^= blocks[..., 1, :]
        span *= 2
    return out


def _as_bits(values: np.ndarray | list[int], name: str) -> BitVector:
    bits = np.asarray(values)
    if bits.ndim != 1:
        raise ArgumentError(f"{name} must be one-dimensional, got shape {bits.shape}")
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ArgumentError(f"{name} must contain only 0 and 1")
    return bits.astype(np.uint8)


def encode(spec: CodeSpec, u0: np.ndarray | list[int]) -> BitVector:
    """
    Encode a layer-0 vector into a codeword, ``u0 . A_m`` over GF(2).

    :param spec: The code.
    :type spec: CodeSpec
    :param u0: Layer-0 bits of length ``n`` with zeros on the frozen set.
    :type u0: numpy.ndarray
    :return: The codeword ``u^m``.
    :rtype: numpy.ndarray
    :raises ArgumentError: On a length mismatch or a nonzero frozen position.

    **Examples:**

    .. code-block:: python

        >>> encode(CodeSpec(m=1), [0, 1])
        array([1, 1], dtype=uint8)
    """
    bits = _as_bits(u0, "u0")
    if bits.size != spec.n:
        raise ArgumentError(f"u0 has length {bits.size}, code length is {spec.n}")
    if np.any(bits[spec.frozen_mask]):
        raise ArgumentError("u0 has a nonzero frozen position")
    return polar_transform(bits)


def scatter_info(spec: CodeSpec, info: np.ndarray | list[int]) -> BitVector:
    """
    Place information bits on the non-frozen positions in increasing index order.

    :param spec: The code.
    :type spec: CodeSpec
    :param info: ``k`` information bits.
    :type info: numpy.ndarray
    :return: Layer-0 vector of length ``n`` with zeros on the frozen set.
    :rtype: numpy.ndarray
    :raises ArgumentError: If ``info`` does not have length ``k``.
    """
    bits = _as_bits(info, "info")
    if bits.size != spec.k:
        raise ArgumentError(f"info has length {bits.size}, code dimension is {spec.k}")
    u0 = np.zeros(spec.n, dtype=np.uint8)
    u0[spec.info_positions] = bits
    return u0


def gather_info(spec: CodeSpec, u0: np.ndarray | list[int]) -> BitVector:
    """Read the information bits back out of a layer-0 vector."""
    bits = _as_bits(u0, "u0")
    if bits.size != spec.n:
        raise ArgumentError(f"u0 has length {bits.size}, code length is {spec.n}")
    return bits[spec.info_positions].copy()
