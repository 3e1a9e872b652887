"""Independent textbook pairing used as an oracle for the optimized engine.

Works entirely in affine coordinates over generic Fq12 arithmetic: untwist the
G2 point into E(Fq12), run the plain double-and-add Miller loop with exact
(unscaled) line evaluations, then exponentiate by the full integer
3*(p^12-1)/r. Slow, but shares nothing with the production Miller loop or
final exponentiation beyond the field tower.
"""

from fieldshare.mmsig.curve import BLS_U, P, R
from fieldshare.mmsig.pairing import (
    FQ2_ONE,
    FQ2_ZERO,
    FQ6_ZERO,
    FQ12_ONE,
    fq12_conj,
    fq12_inv,
    fq12_mul,
    fq12_pow,
    fq12_sqr,
)

FULL_EXPONENT = 3 * (int(P) ** 12 - 1) // int(R)

W_ELEM = ((FQ2_ZERO, FQ2_ZERO, FQ2_ZERO), (FQ2_ONE, FQ2_ZERO, FQ2_ZERO))
W2 = fq12_sqr(W_ELEM)
W3 = fq12_mul(W2, W_ELEM)
W2_INV = fq12_inv(W2)
W3_INV = fq12_inv(W3)


def embed_fq(a):
    return (((a % P, 0), FQ2_ZERO, FQ2_ZERO), FQ6_ZERO)


def embed_fq2(z):
    return ((z, FQ2_ZERO, FQ2_ZERO), FQ6_ZERO)


def fq12_sub(a, b):
    neg = fq12_mul(b, embed_fq(P - 1))
    return fq12_add(a, neg)


def fq12_add(a, b):
    def add6(x, y):
        return tuple(((c[0] + d[0]) % P, (c[1] + d[1]) % P) for c, d in zip(x, y))

    return (add6(a[0], b[0]), add6(a[1], b[1]))


def untwist(q):
    """Map an affine twist point into E(Fq12)."""
    x, y = q
    return fq12_mul(embed_fq2(x), W2_INV), fq12_mul(embed_fq2(y), W3_INV)


def _line(t, slope, xp, yp):
    # (yP - y1) - slope * (xP - x1)
    x1, y1 = t
    return fq12_sub(fq12_sub(yp, y1), fq12_mul(slope, fq12_sub(xp, x1)))


def _double(t):
    x, y = t
    slope = fq12_mul(
        fq12_mul(embed_fq(3), fq12_sqr(x)),
        fq12_inv(fq12_mul(embed_fq(2), y)),
    )
    x3 = fq12_sub(fq12_sqr(slope), fq12_mul(embed_fq(2), x))
    y3 = fq12_sub(fq12_mul(slope, fq12_sub(x, x3)), y)
    return (x3, y3), slope


def _add(t, q):
    x1, y1 = t
    x2, y2 = q
    slope = fq12_mul(fq12_sub(y2, y1), fq12_inv(fq12_sub(x2, x1)))
    x3 = fq12_sub(fq12_sub(fq12_sqr(slope), x1), x2)
    y3 = fq12_sub(fq12_mul(slope, fq12_sub(x1, x3)), y1)
    return (x3, y3), slope


def naive_pairing(p1, q2):
    """e(P, Q)^3 by the textbook route (exact same normalization as production)."""
    if p1 is None or q2 is None:
        return FQ12_ONE
    xp, yp = embed_fq(int(p1[0])), embed_fq(int(p1[1]))
    qhat = untwist(q2)
    t = qhat
    f = FQ12_ONE
    for bit in bin(BLS_U)[3:]:
        f = fq12_sqr(f)
        new_t, slope = _double(t)
        f = fq12_mul(f, _line(t, slope, xp, yp))
        t = new_t
        if bit == "1":
            new_t, slope = _add(t, qhat)
            f = fq12_mul(f, _line(t, slope, xp, yp))
            t = new_t
    f = fq12_conj(f)  # curve parameter is negative
    return fq12_pow(f, FULL_EXPONENT)
