"""Optimal ate pairing over BLS12-381.

Tower: Fq2 = Fq[u]/(u^2+1), Fq6 = Fq2[v]/(v^3 - (1+u)), Fq12 = Fq6[w]/(w^2 - v).
Fq6 elements are triples of Fq2 pairs, Fq12 elements are pairs of Fq6 triples.

The Miller loop runs over precomputed line coefficients for the G2 argument
(`prepare_g2`), so repeated pairings against the same public key only pay for
line evaluation. Lines carry an arbitrary Fq2/Fq6 scaling factor; the final
exponentiation annihilates every proper-subfield factor, so the cleared-
denominator coefficients below are exact. The exponent used is
3*(p^12-1)/r - a fixed cube of the standard reduced pairing, computed with the
decomposition 3*(p^4-p^2+1)/r = (x-1)^2*(x+p)*(x^2+p^2-1) + 3 - which is still
bilinear and non-degenerate, and is applied consistently everywhere.
"""

from __future__ import annotations

from .curve import (
    BLS_U,
    FQ2_ONE,
    FQ2_ZERO,
    P,
    R,
    XI,
    fq2_add,
    fq2_conj,
    fq2_inv,
    fq2_is_zero,
    fq2_mul,
    fq2_mul_fq,
    fq2_neg,
    fq2_pow,
    fq2_sqr,
    fq2_sub,
    mpz,
)

# --- Fq6 ---------------------------------------------------------------------

FQ6_ZERO = (FQ2_ZERO, FQ2_ZERO, FQ2_ZERO)
FQ6_ONE = (FQ2_ONE, FQ2_ZERO, FQ2_ZERO)


def fq2_mul_xi(a):
    # (1+u)(a0 + a1 u) = (a0 - a1) + (a0 + a1) u
    return ((a[0] - a[1]) % P, (a[0] + a[1]) % P)


def fq6_add(a, b):
    return (fq2_add(a[0], b[0]), fq2_add(a[1], b[1]), fq2_add(a[2], b[2]))


def fq6_sub(a, b):
    return (fq2_sub(a[0], b[0]), fq2_sub(a[1], b[1]), fq2_sub(a[2], b[2]))


def fq6_neg(a):
    return (fq2_neg(a[0]), fq2_neg(a[1]), fq2_neg(a[2]))


def fq6_mul(a, b):
    a0, a1, a2 = a
    b0, b1, b2 = b
    t0 = fq2_mul(a0, b0)
    t1 = fq2_mul(a1, b1)
    t2 = fq2_mul(a2, b2)
    c0 = fq2_add(
        t0,
        fq2_mul_xi(
            fq2_sub(fq2_mul(fq2_add(a1, a2), fq2_add(b1, b2)), fq2_add(t1, t2))
        ),
    )
    c1 = fq2_add(
        fq2_sub(fq2_mul(fq2_add(a0, a1), fq2_add(b0, b1)), fq2_add(t0, t1)),
        fq2_mul_xi(t2),
    )
    c2 = fq2_add(
        fq2_sub(fq2_mul(fq2_add(a0, a2), fq2_add(b0, b2)), fq2_add(t0, t2)), t1
    )
    return (c0, c1, c2)


def fq6_sqr(a):
    return fq6_mul(a, a)


def fq6_mul_by_v(a):
    return (fq2_mul_xi(a[2]), a[0], a[1])


def fq6_mul_fq2(a, k):
    return (fq2_mul(a[0], k), fq2_mul(a[1], k), fq2_mul(a[2], k))


def fq6_inv(a):
    a0, a1, a2 = a
    c0 = fq2_sub(fq2_sqr(a0), fq2_mul_xi(fq2_mul(a1, a2)))
    c1 = fq2_sub(fq2_mul_xi(fq2_sqr(a2)), fq2_mul(a0, a1))
    c2 = fq2_sub(fq2_sqr(a1), fq2_mul(a0, a2))
    norm = fq2_add(
        fq2_mul(a0, c0), fq2_mul_xi(fq2_add(fq2_mul(a2, c1), fq2_mul(a1, c2)))
    )
    ni = fq2_inv(norm)
    return (fq2_mul(c0, ni), fq2_mul(c1, ni), fq2_mul(c2, ni))


# --- Fq12 ---------------------------------------------------------------------

FQ12_ONE = (FQ6_ONE, FQ6_ZERO)
FQ12_ZERO = (FQ6_ZERO, FQ6_ZERO)


def fq12_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    t0 = fq6_mul(a0, b0)
    t1 = fq6_mul(a1, b1)
    c0 = fq6_add(t0, fq6_mul_by_v(t1))
    c1 = fq6_sub(fq6_sub(fq6_mul(fq6_add(a0, a1), fq6_add(b0, b1)), t0), t1)
    return (c0, c1)


def fq12_sqr(a):
    a0, a1 = a
    t = fq6_mul(a0, a1)
    c0 = fq6_sub(
        fq6_sub(fq6_mul(fq6_add(a0, a1), fq6_add(a0, fq6_mul_by_v(a1))), t),
        fq6_mul_by_v(t),
    )
    c1 = fq6_add(t, t)
    return (c0, c1)


def fq12_conj(a):
    return (a[0], fq6_neg(a[1]))


def fq12_inv(a):
    a0, a1 = a
    t = fq6_inv(fq6_sub(fq6_sqr(a0), fq6_mul_by_v(fq6_sqr(a1))))
    return (fq6_mul(a0, t), fq6_neg(fq6_mul(a1, t)))


def fq12_pow(a, e):
    result = FQ12_ONE
    base = a
    e = int(e)
    while e:
        if e & 1:
            result = fq12_mul(result, base)
        base = fq12_sqr(base)
        e >>= 1
    return result


# Frobenius constants: v^p = FROB_V * v, w^p = FROB_W * w (after conjugation).
FROB_V = fq2_pow(XI, (P - 1) // 3)
FROB_V2 = fq2_sqr(FROB_V)
FROB_W = fq2_pow(XI, (P - 1) // 6)
FROB_VW = fq2_mul(FROB_V, FROB_W)
FROB_V2W = fq2_mul(FROB_V2, FROB_W)


def fq12_frob1(a):
    (a0, a1, a2), (b0, b1, b2) = a
    return (
        (
            fq2_conj(a0),
            fq2_mul(fq2_conj(a1), FROB_V),
            fq2_mul(fq2_conj(a2), FROB_V2),
        ),
        (
            fq2_mul(fq2_conj(b0), FROB_W),
            fq2_mul(fq2_conj(b1), FROB_VW),
            fq2_mul(fq2_conj(b2), FROB_V2W),
        ),
    )


def fq12_frob2(a):
    return fq12_frob1(fq12_frob1(a))


# --- sparse line multiplication ------------------------------------------------
# A line evaluates to  a0*1 + b1*(v*w) + b2*(v^2*w)  in the tower basis.


def fq12_mul_line(f, a0, b1, b2):
    g, h = f
    g0, g1, g2 = g
    h0, h1, h2 = h
    # g * s  with s = (a0, 0, 0)
    gs = (fq2_mul(g0, a0), fq2_mul(g1, a0), fq2_mul(g2, a0))
    # h * t  with t = (0, b1, b2)
    ht = (
        fq2_mul_xi(fq2_add(fq2_mul(h1, b2), fq2_mul(h2, b1))),
        fq2_add(fq2_mul(h0, b1), fq2_mul_xi(fq2_mul(h2, b2))),
        fq2_add(fq2_mul(h0, b2), fq2_mul(h1, b1)),
    )
    # g * t
    gt = (
        fq2_mul_xi(fq2_add(fq2_mul(g1, b2), fq2_mul(g2, b1))),
        fq2_add(fq2_mul(g0, b1), fq2_mul_xi(fq2_mul(g2, b2))),
        fq2_add(fq2_mul(g0, b2), fq2_mul(g1, b1)),
    )
    # h * s
    hs = (fq2_mul(h0, a0), fq2_mul(h1, a0), fq2_mul(h2, a0))
    c0 = fq6_add(gs, fq6_mul_by_v(ht))
    c1 = fq6_add(gt, hs)
    return (c0, c1)


# --- cyclotomic arithmetic ------------------------------------------------------


def _fp4_sqr(a, b):
    t0 = fq2_sqr(a)
    t1 = fq2_sqr(b)
    c0 = fq2_add(fq2_mul_xi(t1), t0)
    c1 = fq2_sub(fq2_sub(fq2_sqr(fq2_add(a, b)), t0), t1)
    return c0, c1


def fq12_cyc_sqr(f):
    """Granger-Scott squaring, valid in the cyclotomic subgroup."""
    (z0, z4, z3), (z2, z1, z5) = f
    t0, t1 = _fp4_sqr(z0, z1)
    z0 = fq2_add(fq2_add(fq2_sub(t0, z0), fq2_sub(t0, z0)), t0)
    z1 = fq2_add(fq2_add(fq2_add(t1, z1), fq2_add(t1, z1)), t1)
    t0, t1 = _fp4_sqr(z2, z3)
    t2, t3 = _fp4_sqr(z4, z5)
    z4 = fq2_add(fq2_add(fq2_sub(t0, z4), fq2_sub(t0, z4)), t0)
    z5 = fq2_add(fq2_add(fq2_add(t1, z5), fq2_add(t1, z5)), t1)
    t0 = fq2_mul_xi(t3)
    z2 = fq2_add(fq2_add(fq2_add(t0, z2), fq2_add(t0, z2)), t0)
    z3 = fq2_add(fq2_add(fq2_sub(t2, z3), fq2_sub(t2, z3)), t2)
    return ((z0, z4, z3), (z2, z1, z5))


def fq12_cyc_pow_u(f):
    """f ** BLS_U using cyclotomic squarings (positive exponent)."""
    result = f
    for bit in bin(BLS_U)[3:]:
        result = fq12_cyc_sqr(result)
        if bit == "1":
            result = fq12_mul(result, f)
    return result


# --- Miller loop ----------------------------------------------------------------


def _dbl_step(T):
    X, Y, Z = T
    XX = fq2_sqr(X)
    YY = fq2_sqr(Y)
    ZZ = fq2_sqr(Z)
    XXX = fq2_mul(XX, X)
    # line coefficients (scaled by 2*Y*Z^3)
    c0 = fq2_mul_xi(fq2_mul(fq2_mul(fq2_add(Y, Y), Z), ZZ))
    c1 = fq2_sub(fq2_add(fq2_add(XXX, XXX), XXX), fq2_add(YY, YY))
    three_xx = fq2_add(fq2_add(XX, XX), XX)
    c2 = fq2_neg(fq2_mul(three_xx, ZZ))
    # point doubling (dbl-2009-l with a = 0)
    C = fq2_sqr(YY)
    t = fq2_sqr(fq2_add(X, YY))
    D = fq2_add(*[fq2_sub(fq2_sub(t, XX), C)] * 2)
    F = fq2_sqr(three_xx)
    X3 = fq2_sub(F, fq2_add(D, D))
    eight_c = fq2_add(*[fq2_add(*[fq2_add(C, C)] * 2)] * 2)
    Y3 = fq2_sub(fq2_mul(three_xx, fq2_sub(D, X3)), eight_c)
    Z3 = fq2_mul(fq2_add(Y, Y), Z)
    return (X3, Y3, Z3), (c0, c1, c2)


def _add_step(T, Q):
    X, Y, Z = T
    x2, y2 = Q
    ZZ = fq2_sqr(Z)
    N = fq2_sub(Y, fq2_mul(y2, fq2_mul(ZZ, Z)))
    D = fq2_mul(Z, fq2_sub(X, fq2_mul(x2, ZZ)))
    c0 = fq2_mul_xi(D)
    c1 = fq2_sub(fq2_mul(N, x2), fq2_mul(y2, D))
    c2 = fq2_neg(N)
    # point update (mixed addition)
    U2 = fq2_mul(x2, ZZ)
    S2 = fq2_mul(fq2_mul(y2, Z), ZZ)
    H = fq2_sub(U2, X)
    HH = fq2_sqr(H)
    I = fq2_add(*[fq2_add(HH, HH)] * 2)
    J = fq2_mul(H, I)
    rr = fq2_add(*[fq2_sub(S2, Y)] * 2)
    V = fq2_mul(X, I)
    X3 = fq2_sub(fq2_sub(fq2_sqr(rr), J), fq2_add(V, V))
    Y3 = fq2_sub(fq2_mul(rr, fq2_sub(V, X3)), fq2_mul(fq2_add(Y, Y), J))
    Z3 = fq2_sub(fq2_sub(fq2_sqr(fq2_add(Z, H)), ZZ), HH)
    return (X3, Y3, Z3), (c0, c1, c2)


_U_BITS = bin(BLS_U)[3:]


def prepare_g2(Q):
    """Precompute Miller-loop line coefficients for an affine G2 point."""
    T = (Q[0], Q[1], FQ2_ONE)
    coeffs = []
    for bit in _U_BITS:
        T, c = _dbl_step(T)
        coeffs.append(c)
        if bit == "1":
            T, c = _add_step(T, Q)
            coeffs.append(c)
    return coeffs


def miller_loop(prepared):
    """Product of Miller functions for [(coeffs, affine G1 point), ...]."""
    terms = []
    for coeffs, pt in prepared:
        xp, yp = pt
        terms.append((coeffs, xp, yp))
    f = FQ12_ONE
    idx = 0
    for bit in _U_BITS:
        f = fq12_sqr(f)
        for coeffs, xp, yp in terms:
            c0, c1, c2 = coeffs[idx]
            f = fq12_mul_line(f, fq2_mul_fq(c0, yp), c1, fq2_mul_fq(c2, xp))
        idx += 1
        if bit == "1":
            for coeffs, xp, yp in terms:
                c0, c1, c2 = coeffs[idx]
                f = fq12_mul_line(f, fq2_mul_fq(c0, yp), c1, fq2_mul_fq(c2, xp))
            idx += 1
    # the curve parameter x is negative: f_{x} = conj(f_{|x|}) up to final exp
    return fq12_conj(f)


def final_exponentiation(f):
    """f ** (3*(p^12-1)/r) via the easy part and the (x-1)^2(x+p)(x^2+p^2-1)+3 chain."""
    t = fq12_mul(fq12_conj(f), fq12_inv(f))  # f^(p^6 - 1)
    g = fq12_mul(fq12_frob2(t), t)  # ^(p^2 + 1); now cyclotomic
    # a = g^(x-1): g^x = conj(g^u) since x = -u, and g^-1 = conj(g)
    a = fq12_conj(fq12_mul(fq12_cyc_pow_u(g), g))
    b = fq12_conj(fq12_mul(fq12_cyc_pow_u(a), a))  # g^((x-1)^2)
    c = fq12_mul(fq12_conj(fq12_cyc_pow_u(b)), fq12_frob1(b))  # b^(x+p)
    cx2 = fq12_cyc_pow_u(fq12_cyc_pow_u(c))  # c^(x^2)
    d = fq12_mul(fq12_mul(cx2, fq12_frob2(c)), fq12_conj(c))  # c^(x^2+p^2-1)
    g3 = fq12_mul(fq12_cyc_sqr(g), g)
    return fq12_mul(d, g3)


def pairing_check(pairs) -> bool:
    """True iff the product of pairings e(P_i, Q_i) (with prepared Q_i) is one.

    ``pairs`` is a list of (affine G1 point, prepared G2 coefficients).
    Infinity on the G1 side contributes the neutral factor.
    """
    prepared = [(coeffs, pt) for pt, coeffs in pairs if pt is not None]
    if not prepared:
        return True
    f = miller_loop(prepared)
    return final_exponentiation(f) == FQ12_ONE


def pairing(p1, q2):
    """Full pairing value e(P, Q)^3 for an affine G1/G2 pair (diagnostics)."""
    if p1 is None or q2 is None:
        return FQ12_ONE
    return final_exponentiation(miller_loop([(prepare_g2(q2), p1)]))
