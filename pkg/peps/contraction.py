"""
Exact contraction of the kagome PEPS.

Each group (inner site s plus outer tip s + 1) is contracted with its bra copy into a transfer matrix whose rows
are the left interface (chord and ring legs entering s) and whose columns are the right interface (chord leg of s
and ring leg of s + 1 leaving the group). The scalar is the trace of the product of the six transfer matrices
around the ring. Transfer index order is (ket chord, bra chord, ket ring, bra ring) on both sides.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Mapping

import numpy as np
import opt_einsum as oe

from peps.layout import GROUPS, group_outer
from utils.errors import ContractionError

if TYPE_CHECKING:
    from peps.state import PepsState

Insertions = Mapping[int | tuple[int, int], np.ndarray | tuple[np.ndarray, np.ndarray]]


def outer_core(tensor: np.ndarray) -> np.ndarray:
    """Drop the two dangling chord legs of an outer tensor: (d, ring_prev, ring_next)."""
    return tensor[:, :, :, 0, 0]


def group_transfer(ket_inner: np.ndarray, ket_outer: np.ndarray, bra_inner: np.ndarray, bra_outer: np.ndarray,
                   op_inner: np.ndarray | None = None, op_outer: np.ndarray | None = None) -> np.ndarray:
    """
    Double-layer transfer matrix of one group with optional single-site operators on the ket side.

    Returns:
        np.ndarray: Matrix of shape (Dc_l^2 * Dr_l^2, Dc_r^2 * Dr_r^2).
    """
    if op_inner is not None:
        ket_inner = oe.contract('xi,iabcd->xabcd', op_inner, ket_inner)
    ket_tip = outer_core(ket_outer)
    if op_outer is not None:
        ket_tip = oe.contract('yj,jbe->ybe', op_outer, ket_tip)
    block = oe.contract('xabcd,ybe,xpqrs,yqt->crapdset', ket_inner, ket_tip, bra_inner.conj(),
                        outer_core(bra_outer).conj())
    left = block.shape[0] * block.shape[1] * block.shape[2] * block.shape[3]
    return block.reshape(left, -1)


def site_operators(insertions: Insertions | None) -> dict[int, np.ndarray]:
    """
    Flatten site and bond insertions into one operator per site; a bond (u, v) maps to a pair (op_u, op_v).
    """
    operators: dict[int, np.ndarray] = {}
    for key, value in (insertions or {}).items():
        pairs = zip(key, value) if isinstance(key, tuple) else [(key, value)]
        for site, matrix in pairs:
            matrix = np.asarray(matrix)
            operators[site] = matrix @ operators[site] if site in operators else matrix
    return operators


def check_compatible(bra: PepsState, ket: PepsState) -> None:
    """
    Raise ContractionError naming the bond where ket legs disagree or bra and ket shapes differ.
    """
    ket.check_bonds()
    for site, tensor in ket.tensors.items():
        other = bra.tensors[site].data.shape
        if other != tensor.data.shape:
            legs = [bond for bond, a, b in zip(tensor.legs, tensor.data.shape[1:], other[1:]) if a != b]
            raise ContractionError(f'Bra and ket differ at site {site} on bond {legs[0] if legs else "physical"}',
                                   bond=legs[0] if legs else None)


def group_transfers(bra: PepsState, ket: PepsState, operators: Mapping[int, np.ndarray] | None = None,
                    ) -> list[np.ndarray]:
    operators = operators or {}
    transfers = []
    for head in GROUPS:
        tip = group_outer(head)
        transfers.append(group_transfer(ket.array(head), ket.array(tip), bra.array(head), bra.array(tip),
                                        operators.get(head), operators.get(tip)))
    return transfers


def ring_trace(transfers: list[np.ndarray]) -> complex:
    """Tr(M_1 M_2 ... M_n) without forming the last product."""
    product = transfers[0]
    for matrix in transfers[1:-1]:
        product = product @ matrix
    return complex(np.einsum('ij,ji->', product, transfers[-1]))


def contract_scalar(bra: PepsState, ket: PepsState, insertions: Insertions | None = None) -> complex:
    """
    Exact value of <bra| O |ket> for a product of single-site operators O.

    Args:
        bra (PepsState): Bra state (conjugated internally).
        ket (PepsState): Ket state.
        insertions (Insertions | None): site -> d x d operator, or (u, v) -> (op_u, op_v) for hopping terms.

    Returns:
        complex: The contraction; <Psi|Psi> for bra = ket and no insertions.

    Raises:
        ContractionError: On any bond dimension mismatch.
    """
    check_compatible(bra, ket)
    operators = site_operators(insertions)
    for site, matrix in operators.items():
        if matrix.shape != (ket.phys_dim, ket.phys_dim):
            raise ContractionError(f'Operator at site {site} has shape {matrix.shape}, expected d x d')
    return ring_trace(group_transfers(bra, ket, operators))


def split_environment(env: np.ndarray, left_shape: tuple[int, int], right_shape: tuple[int, int]) -> np.ndarray:
    """
    View an environment (rest of the ring, rows = right interface, columns = left interface) as a rank-8 tensor
    indexed (d, s, e, t, c, r, a, p): ket/bra chord and ring legs of the right interface, then of the left one.
    """
    chord_right, ring_right = right_shape
    chord_left, ring_left = left_shape
    return env.reshape(chord_right, chord_right, ring_right, ring_right, chord_left, chord_left, ring_left, ring_left)


def _inner_partial(env: np.ndarray, inner_shape: tuple[int, ...], ket_outer: np.ndarray, bra_outer: np.ndarray,
                   op_outer: np.ndarray | None) -> np.ndarray:
    _, ring_prev, ring_next, chord_prev, chord_next = inner_shape
    tip_ket, tip_bra = outer_core(ket_outer), outer_core(bra_outer)
    env8 = split_environment(env, (chord_prev, ring_prev), (chord_next, tip_ket.shape[2]))
    if op_outer is None:
        tip = oe.contract('ybe,yqt->bqet', tip_ket, tip_bra.conj())
    else:
        tip = oe.contract('zy,ybe,zqt->bqet', op_outer, tip_ket, tip_bra.conj())
    return oe.contract('dsetcrap,bqet->dscrapbq', env8, tip)


def _outer_partial(env: np.ndarray, outer_shape: tuple[int, ...], ket_inner: np.ndarray, bra_inner: np.ndarray,
                   op_inner: np.ndarray | None) -> np.ndarray:
    _, _, ring_next, _, _ = outer_shape
    _, inner_ring_prev, _, chord_prev, chord_next = ket_inner.shape
    env8 = split_environment(env, (chord_prev, inner_ring_prev), (chord_next, ring_next))
    if op_inner is None:
        body = oe.contract('xabcd,xpqrs->bqcrapds', ket_inner, bra_inner.conj())
    else:
        body = oe.contract('zx,xabcd,zpqrs->bqcrapds', op_inner, ket_inner, bra_inner.conj())
    return oe.contract('dsetcrap,bqcrapds->bqet', env8, body)


def inner_environment(env: np.ndarray, inner_shape: tuple[int, ...], ket_outer: np.ndarray, bra_outer: np.ndarray,
                      op_inner: np.ndarray, op_outer: np.ndarray) -> np.ndarray:
    """
    Local matrix E with conj(B).ravel() @ E @ A.ravel() = Tr(M_group(A, B) env) for the inner site tensor A.
    """
    partial = _inner_partial(env, inner_shape, ket_outer, bra_outer, op_outer)
    local = oe.contract('zx,dscrapbq->zpqrsxabcd', op_inner, partial)
    size = int(np.prod(inner_shape))
    return local.reshape(size, size)


def outer_environment(env: np.ndarray, outer_shape: tuple[int, ...], ket_inner: np.ndarray, bra_inner: np.ndarray,
                      op_inner: np.ndarray, op_outer: np.ndarray) -> np.ndarray:
    """
    Local matrix E with conj(B).ravel() @ E @ A.ravel() = Tr(M_group(A, B) env) for the outer tip tensor A.
    """
    partial = _outer_partial(env, outer_shape, ket_inner, bra_inner, op_inner)
    local = oe.contract('zy,bqet->zqtybe', op_outer, partial)
    size = int(np.prod(outer_shape))
    return local.reshape(size, size)


def inner_norm_block(env: np.ndarray, inner_shape: tuple[int, ...], ket_outer: np.ndarray,
                     bra_outer: np.ndarray) -> np.ndarray:
    """
    Virtual block M of the inner site's norm matrix, which factorizes as I_d (x) M.
    """
    partial = _inner_partial(env, inner_shape, ket_outer, bra_outer, None)
    size = int(np.prod(inner_shape[1:]))
    return oe.contract('dscrapbq->pqrsabcd', partial).reshape(size, size)


def outer_norm_block(env: np.ndarray, outer_shape: tuple[int, ...], ket_inner: np.ndarray,
                     bra_inner: np.ndarray) -> np.ndarray:
    """Virtual block M of the outer tip's norm matrix, I_d (x) M."""
    partial = _outer_partial(env, outer_shape, ket_inner, bra_inner, None)
    size = int(np.prod(outer_shape[1:]))
    return oe.contract('bqet->qtbe', partial).reshape(size, size)
