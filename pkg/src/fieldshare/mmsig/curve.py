"""BLS12-381 group arithmetic.

Everything here is value-level: field elements are plain integers (gmpy2 mpz
when available), affine points are ``(x, y)`` tuples or ``None`` for the point
at infinity, Jacobian points are ``(X, Y, Z)`` with ``Z == 0`` for infinity.
The hot paths (fixed-base multi-scalar multiplication for the signature and
proof engines) use per-base tables of 255 odd-and-even multiples so scalars
can be consumed one byte at a time straight out of ``int.to_bytes``.

Not constant-time: scalar-dependent branching is accepted here because signing
and proving run on the data owner's own infrastructure, not on shared hosts
handling attacker-timed requests.
"""

from __future__ import annotations

try:
    from gmpy2 import invert as _invert
    from gmpy2 import mpz
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    mpz = int

    def _invert(a, m):
        return pow(a, -1, m)


# Base field modulus, scalar field order, and the (negated) curve parameter.
P = mpz(
    0x1A0111EA397FE69A4B1BA7B6434BACD764774B84F38512BF6730D2A0F6B0F624
    << 128
    | 0x1EABFFFEB153FFFFB9FEFFFFFFFFAAAB
)
R = mpz(0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001)
BLS_U = 0xD201000000010000  # |x|; the curve parameter x is -BLS_U
G1_H_EFF = mpz(0xD201000000010001)  # 1 - x, clears the G1 cofactor

B_G1 = mpz(4)
B_G2 = (mpz(4), mpz(4))  # 4 * (1 + u) on the twist

G1_GEN = (
    mpz(
        0x17F1D3A73197D7942695638C4FA9AC0FC3688C4F9774B905A14E3A3F171BAC58
        << 128
        | 0x6C55E83FF97A1AEFFB3AF00ADB22C6BB
    ),
    mpz(
        0x08B3F481E3AAA0F1A09E30ED741D8AE4FCF5E095D5D00AF600DB18CB2C04B3ED
        << 128
        | 0xD03CC744A2888AE40CAA232946C5E7E1
    ),
)

G2_GEN = (
    (
        mpz(
            0x024AA2B2F08F0A91260805272DC51051C6E47AD4FA403B02B4510B647AE3D177
            << 128
            | 0x0BAC0326A805BBEFD48056C8C121BDB8
        ),
        mpz(
            0x13E02B6052719F607DACD3A088274F65596BD0D09920B61AB5DA61BBDC7F5049
            << 128
            | 0x334CF11213945D57E5AC7D055D042B7E
        ),
    ),
    (
        mpz(
            0x0CE5D527727D6E118CC9CDC6DA2E351AADFD9BAA8CBDD3A76D429A695160D12C
            << 128
            | 0x923AC9CC3BACA289E193548608B82801
        ),
        mpz(
            0x0606C4A02EA734CC32ACD2B02BC28B99CB3E287E85A763AF267492AB572E99AB
            << 128
            | 0x3F370D275CEC1DA1AAA9075FF05F79BE
        ),
    ),
)

INF = None  # affine infinity
JAC_INF = (mpz(1), mpz(1), mpz(0))


# --- base field -------------------------------------------------------------


def fq_inv(a):
    return _invert(a, P)


def fq_sqrt(a):
    """Square root in Fq (p = 3 mod 4), or None if a is not a square."""
    s = pow(a, (P + 1) >> 2, P)
    return s if s * s % P == a else None


def fq_batch_inv(values):
    """Montgomery batch inversion; every value must be nonzero."""
    n = len(values)
    prefix = [mpz(0)] * n
    acc = mpz(1)
    for i, v in enumerate(values):
        prefix[i] = acc
        acc = acc * v % P
    inv = _invert(acc, P)
    out = [mpz(0)] * n
    for i in range(n - 1, -1, -1):
        out[i] = inv * prefix[i] % P
        inv = inv * values[i] % P
    return out


# --- G1 Jacobian core -------------------------------------------------------


def g1_dbl(pt):
    X, Y, Z = pt
    if not Z or not Y:
        return JAC_INF
    A = X * X % P
    Bv = Y * Y % P
    C = Bv * Bv % P
    t = X + Bv
    D = (t * t - A - C) * 2 % P
    E = 3 * A
    F = E * E % P
    X3 = (F - 2 * D) % P
    Y3 = (E * (D - X3) - 8 * C) % P
    Z3 = 2 * Y * Z % P
    return (X3, Y3, Z3)


def g1_add_mixed(pt, q):
    """Jacobian + affine addition."""
    X1, Y1, Z1 = pt
    if not Z1:
        return (q[0], q[1], mpz(1))
    x2, y2 = q
    Z1Z1 = Z1 * Z1 % P
    U2 = x2 * Z1Z1 % P
    S2 = y2 * Z1 % P * Z1Z1 % P
    H = (U2 - X1) % P
    if not H:
        if (S2 - Y1) % P:
            return JAC_INF
        return g1_dbl(pt)
    HH = H * H % P
    I = 4 * HH % P
    J = H * I % P
    rr = 2 * (S2 - Y1) % P
    V = X1 * I % P
    X3 = (rr * rr - J - 2 * V) % P
    Y3 = (rr * (V - X3) - 2 * Y1 * J) % P
    t = Z1 + H
    Z3 = (t * t - Z1Z1 - HH) % P
    return (X3, Y3, Z3)


def g1_add(p1, p2):
    """Jacobian + Jacobian addition (add-2007-bl)."""
    X1, Y1, Z1 = p1
    X2, Y2, Z2 = p2
    if not Z1:
        return p2
    if not Z2:
        return p1
    Z1Z1 = Z1 * Z1 % P
    Z2Z2 = Z2 * Z2 % P
    U1 = X1 * Z2Z2 % P
    U2 = X2 * Z1Z1 % P
    S1 = Y1 * Z2 % P * Z2Z2 % P
    S2 = Y2 * Z1 % P * Z1Z1 % P
    H = (U2 - U1) % P
    if not H:
        if (S2 - S1) % P:
            return JAC_INF
        return g1_dbl(p1)
    I = 4 * H * H % P
    J = H * I % P
    rr = 2 * (S2 - S1) % P
    V = U1 * I % P
    X3 = (rr * rr - J - 2 * V) % P
    Y3 = (rr * (V - X3) - 2 * S1 * J) % P
    t = Z1 + Z2
    Z3 = ((t * t - Z1Z1 - Z2Z2) * H) % P
    return (X3, Y3, Z3)


def g1_neg(pt):
    if pt is INF:
        return INF
    return (pt[0], (P - pt[1]) % P)


def g1_neg_jac(pt):
    X, Y, Z = pt
    return (X, (P - Y) % P, Z)


def g1_jac(pt):
    if pt is INF:
        return JAC_INF
    return (pt[0], pt[1], mpz(1))


def g1_to_affine(pt):
    X, Y, Z = pt
    if not Z:
        return INF
    zi = _invert(Z, P)
    zi2 = zi * zi % P
    return (X * zi2 % P, Y * zi2 % P * zi % P)


def g1_batch_affine(points):
    """Normalize many Jacobian points with one field inversion."""
    zs = []
    idx = []
    for i, (_, _, Z) in enumerate(points):
        if Z:
            zs.append(Z)
            idx.append(i)
    invs = fq_batch_inv(zs) if zs else []
    out = [INF] * len(points)
    for k, i in enumerate(idx):
        X, Y, _ = points[i]
        zi = invs[k]
        zi2 = zi * zi % P
        out[i] = (X * zi2 % P, Y * zi2 % P * zi % P)
    return out


def g1_is_on_curve(pt):
    if pt is INF:
        return True
    x, y = pt
    return (y * y - (x * x % P * x + B_G1)) % P == 0


# --- scalar multiplication --------------------------------------------------


def _nibble_digits(k):
    return k.to_bytes(32, "big").hex()  # one hex char per 4-bit window


def _window_loop(pairs, windows, width):
    """Shared inlined window loop: double `width` times, add table entries.

    ``pairs`` is [(table, digits)] where digits[pos] indexes table (0 = skip).
    The Jacobian-plus-affine addition is inlined with lazy reduction; the rare
    exceptional cases (matching or opposite x) fall back to the generic ops.
    """
    p = P
    X1 = Y1 = Z1 = mpz(0)
    for pos in range(windows):
        if Z1:
            for _ in range(width):
                # dbl-2009-l with a = 0
                A = X1 * X1 % p
                B = Y1 * Y1 % p
                C = B * B % p
                t = X1 + B
                D = (t * t - A - C) * 2 % p
                E = 3 * A
                F = E * E % p
                Z1 = 2 * Y1 * Z1 % p
                X1n = (F - 2 * D) % p
                Y1 = (E * (D - X1n) - 8 * C) % p
                X1 = X1n
        for table, digits in pairs:
            d = digits[pos]
            if d:
                x2, y2 = table[d - 1]
                if not Z1:
                    X1, Y1, Z1 = x2, y2, mpz(1)
                    continue
                # madd-2007-bl, inlined
                Z1Z1 = Z1 * Z1 % p
                U2 = x2 * Z1Z1 % p
                S2 = y2 * Z1 % p * Z1Z1 % p
                H = U2 - X1
                if not H:
                    acc = g1_add_mixed((X1, Y1, Z1), (x2, y2))
                    X1, Y1, Z1 = acc
                    continue
                HH = H * H % p
                I = 4 * HH % p
                J = H * I % p
                rr = 2 * (S2 - Y1)
                V = X1 * I % p
                X3 = (rr * rr - J - 2 * V) % p
                Y3 = (rr * (V - X3) - 2 * Y1 * J) % p
                t = Z1 + H
                Z1 = (t * t - Z1Z1 - HH) % p
                X1, Y1 = X3, Y3
    return (X1, Y1, Z1) if Z1 else JAC_INF


def msm_var(points, scalars):
    """Multi-scalar multiplication over arbitrary affine points (4-bit windows).

    Returns a Jacobian point. Points may be None (skipped); scalars are
    reduced mod the group order.
    """
    live = [
        (pt, int(k) % R)
        for pt, k in zip(points, scalars)
        if pt is not INF and int(k) % R
    ]
    if not live:
        return JAC_INF
    # per-base tables of 1P..15P, normalized together
    jac_tables = []
    for pt, _ in live:
        base = g1_jac(pt)
        row = [base]
        for _ in range(14):
            row.append(g1_add_mixed(row[-1], pt))
        jac_tables.append(row)
    flat = g1_batch_affine([q for row in jac_tables for q in row])
    pairs = [
        (flat[i * 15 : (i + 1) * 15], [int(c, 16) for c in _nibble_digits(k)])
        for i, (_, k) in enumerate(live)
    ]
    return _window_loop(pairs, 64, 4)


def g1_mul(pt, k):
    """Scalar multiple of an affine point; returns an affine point."""
    return g1_to_affine(msm_var([pt], [k]))


def _mul_small_jac(pt, k):
    """k * pt for small positive k, plain double-and-add (affine input)."""
    acc = JAC_INF
    for bit in bin(k)[2:]:
        acc = g1_dbl(acc)
        if bit == "1":
            acc = g1_add_mixed(acc, pt)
    return acc


def _find_endo_beta():
    """Cube root of unity in Fq with phi(P) = (beta*x, y) acting as -u^2 on G1."""
    exp = (P - 1) // 3
    g = mpz(2)
    while True:
        beta = pow(g, exp, P)
        if beta != 1:
            break
        g += 1
    lam = (R - (BLS_U * BLS_U) % R) % R
    for candidate in (beta, beta * beta % P):
        endo = (G1_GEN[0] * candidate % P, G1_GEN[1])
        want = g1_to_affine(_mul_small_jac(G1_GEN, int(lam)))
        if endo == want:
            return candidate
    raise AssertionError("no cube root acts as the expected eigenvalue")


ENDO_BETA = _find_endo_beta()


def g1_in_subgroup_slow(pt):
    """Membership by full order multiplication (reference for the fast test)."""
    if pt is INF:
        return True
    if not g1_is_on_curve(pt):
        return False
    return not _mul_small_jac(pt, int(R))[2]


def g1_in_subgroup(pt):
    """True iff the point is on the curve and in the order-r subgroup.

    Uses the endomorphism eigenvalue test: P is in G1 iff (beta*x, y) equals
    -u^2 * P, which costs two 64-bit multiplications instead of one 255-bit.
    """
    if pt is INF:
        return True
    if not g1_is_on_curve(pt):
        return False
    up = _mul_small_jac(pt, BLS_U)
    uup = JAC_INF
    X, Y, Z = up
    if Z:
        aff = g1_to_affine(up)
        uup = _mul_small_jac(aff, BLS_U)
    if not uup[2]:
        return False  # u^2 * P = inf for a nonzero on-curve point: not order r
    minus = g1_to_affine((uup[0], (P - uup[1]) % P, uup[2]))
    return minus == (pt[0] * ENDO_BETA % P, pt[1])


# --- fixed-base machinery ---------------------------------------------------


class FixedBase:
    """Per-base table of the multiples 1P..255P in affine coordinates."""

    __slots__ = ("table",)

    def __init__(self, table):
        self.table = table

    @classmethod
    def build_many(cls, points):
        """Build tables for many affine points with one shared batch inversion."""
        rows = []
        for pt in points:
            row = [g1_jac(pt)]
            for _ in range(254):
                row.append(g1_add_mixed(row[-1], pt))
            rows.append(row)
        flat = g1_batch_affine([q for row in rows for q in row])
        return [cls(flat[i * 255 : (i + 1) * 255]) for i in range(len(points))]


def msm_fixed(bases, scalars):
    """MSM over FixedBase tables (8-bit windows); returns a Jacobian point."""
    pairs = []
    for base, k in zip(bases, scalars):
        k = int(k) % R
        if k:
            pairs.append((base.table, k.to_bytes(32, "big")))
    if not pairs:
        return JAC_INF
    return _window_loop(pairs, 32, 8)


# --- Fq2 and G2 (cold paths: keys and pairing preparation) ------------------


def fq2_add(a, b):
    return ((a[0] + b[0]) % P, (a[1] + b[1]) % P)


def fq2_sub(a, b):
    return ((a[0] - b[0]) % P, (a[1] - b[1]) % P)


def fq2_neg(a):
    return ((P - a[0]) % P, (P - a[1]) % P)


def fq2_conj(a):
    return (a[0], (P - a[1]) % P)


def fq2_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    t0 = a0 * b0 % P
    t1 = a1 * b1 % P
    t2 = (a0 + a1) * (b0 + b1) % P
    return ((t0 - t1) % P, (t2 - t0 - t1) % P)


def fq2_sqr(a):
    a0, a1 = a
    t0 = (a0 + a1) * (a0 - a1) % P
    t1 = 2 * a0 * a1 % P
    return (t0, t1)


def fq2_mul_fq(a, k):
    return (a[0] * k % P, a[1] * k % P)


def fq2_inv(a):
    a0, a1 = a
    norm = (a0 * a0 + a1 * a1) % P
    ni = _invert(norm, P)
    return (a0 * ni % P, (P - a1) * ni % P)


def fq2_is_zero(a):
    return not a[0] and not a[1]


FQ2_ZERO = (mpz(0), mpz(0))
FQ2_ONE = (mpz(1), mpz(0))
XI = (mpz(1), mpz(1))  # the sextic-twist constant 1 + u


def fq2_sqrt(a):
    """Square root in Fq2 for p = 3 mod 4, or None if a is not a square."""
    if fq2_is_zero(a):
        return FQ2_ZERO
    a1 = fq2_pow(a, (P - 3) >> 2)
    alpha = fq2_mul(fq2_sqr(a1), a)
    x0 = fq2_mul(a1, a)
    if alpha == ((P - 1) % P, 0):
        root = ((P - x0[1]) % P, x0[0])  # multiply by u = sqrt(-1)
    else:
        b = fq2_pow(fq2_add(FQ2_ONE, alpha), (P - 1) >> 1)
        root = fq2_mul(b, x0)
    return root if fq2_sqr(root) == a else None


def fq2_pow(a, e):
    result = FQ2_ONE
    base = a
    e = int(e)
    while e:
        if e & 1:
            result = fq2_mul(result, base)
        base = fq2_sqr(base)
        e >>= 1
    return result


def g2_dbl(pt):
    X, Y, Z = pt
    if fq2_is_zero(Z) or fq2_is_zero(Y):
        return (FQ2_ONE, FQ2_ONE, FQ2_ZERO)
    A = fq2_sqr(X)
    Bv = fq2_sqr(Y)
    C = fq2_sqr(Bv)
    t = fq2_sqr(fq2_add(X, Bv))
    D = fq2_add(*[fq2_sub(fq2_sub(t, A), C)] * 2)
    E = fq2_add(fq2_add(A, A), A)
    F = fq2_sqr(E)
    X3 = fq2_sub(F, fq2_add(D, D))
    eight_c = fq2_add(*[fq2_add(*[fq2_add(C, C)] * 2)] * 2)
    Y3 = fq2_sub(fq2_mul(E, fq2_sub(D, X3)), eight_c)
    Z3 = fq2_mul(fq2_add(Y, Y), Z)
    return (X3, Y3, Z3)


def g2_add_mixed(pt, q):
    X1, Y1, Z1 = pt
    if fq2_is_zero(Z1):
        return (q[0], q[1], FQ2_ONE)
    x2, y2 = q
    Z1Z1 = fq2_sqr(Z1)
    U2 = fq2_mul(x2, Z1Z1)
    S2 = fq2_mul(fq2_mul(y2, Z1), Z1Z1)
    H = fq2_sub(U2, X1)
    if fq2_is_zero(H):
        if fq2_is_zero(fq2_sub(S2, Y1)):
            return g2_dbl(pt)
        return (FQ2_ONE, FQ2_ONE, FQ2_ZERO)
    HH = fq2_sqr(H)
    I = fq2_add(*[fq2_add(HH, HH)] * 2)
    J = fq2_mul(H, I)
    rr = fq2_add(*[fq2_sub(S2, Y1)] * 2)
    V = fq2_mul(X1, I)
    X3 = fq2_sub(fq2_sub(fq2_sqr(rr), J), fq2_add(V, V))
    Y3 = fq2_sub(fq2_mul(rr, fq2_sub(V, X3)), fq2_mul(fq2_add(Y1, Y1), J))
    Z3 = fq2_sub(fq2_sub(fq2_sqr(fq2_add(Z1, H)), Z1Z1), HH)
    return (X3, Y3, Z3)


def g2_to_affine(pt):
    X, Y, Z = pt
    if fq2_is_zero(Z):
        return INF
    zi = fq2_inv(Z)
    zi2 = fq2_sqr(zi)
    return (fq2_mul(X, zi2), fq2_mul(fq2_mul(Y, zi2), zi))


def g2_mul(pt, k):
    """Scalar multiple of an affine G2 point; returns affine."""
    k = int(k) % R
    acc = (FQ2_ONE, FQ2_ONE, FQ2_ZERO)
    if pt is INF or not k:
        return INF
    for bit in bin(k)[2:]:
        acc = g2_dbl(acc)
        if bit == "1":
            acc = g2_add_mixed(acc, pt)
    return g2_to_affine(acc)


def g2_neg(pt):
    if pt is INF:
        return INF
    return (pt[0], fq2_neg(pt[1]))


def g2_is_on_curve(pt):
    if pt is INF:
        return True
    x, y = pt
    return fq2_sub(fq2_sqr(y), fq2_add(fq2_mul(fq2_sqr(x), x), B_G2)) == FQ2_ZERO


def g2_in_subgroup(pt):
    if pt is INF:
        return True
    if not g2_is_on_curve(pt):
        return False
    return g2_mul(pt, R) is INF


# --- serialization (ZCash-style flag bits) ----------------------------------


def _fq_to_bytes(a):
    return int(a).to_bytes(48, "big")


def g1_compress(pt) -> bytes:
    if pt is INF:
        return bytes([0xC0]) + bytes(47)
    x, y = pt
    data = bytearray(_fq_to_bytes(x))
    data[0] |= 0x80
    if int(y) > int(P) >> 1:
        data[0] |= 0x20
    return bytes(data)


def g1_decompress(data: bytes):
    """Decode a compressed G1 point; raises ValueError on anything invalid."""
    if len(data) != 48:
        raise ValueError("G1 point must be 48 bytes")
    flags = data[0]
    if not flags & 0x80:
        raise ValueError("uncompressed encoding not supported")
    if flags & 0x40:
        if any(data[1:]) or flags != 0xC0:
            raise ValueError("malformed infinity encoding")
        return INF
    x = mpz(int.from_bytes(data, "big") & ((1 << 381) - 1))
    if x >= P:
        raise ValueError("x out of range")
    y2 = (x * x % P * x + B_G1) % P
    y = fq_sqrt(y2)
    if y is None:
        raise ValueError("x not on curve")
    if (int(y) > int(P) >> 1) != bool(flags & 0x20):
        y = (P - y) % P
    return (x, y)


def g2_compress(pt) -> bytes:
    if pt is INF:
        return bytes([0xC0]) + bytes(95)
    (x0, x1), (y0, y1) = pt
    data = bytearray(_fq_to_bytes(x1) + _fq_to_bytes(x0))
    data[0] |= 0x80
    bigger = int(y1) > int(P) >> 1 if y1 else int(y0) > int(P) >> 1
    if bigger:
        data[0] |= 0x20
    return bytes(data)


def g2_decompress(data: bytes):
    if len(data) != 96:
        raise ValueError("G2 point must be 96 bytes")
    flags = data[0]
    if not flags & 0x80:
        raise ValueError("uncompressed encoding not supported")
    if flags & 0x40:
        if any(data[1:]) or flags != 0xC0:
            raise ValueError("malformed infinity encoding")
        return INF
    x1 = mpz(int.from_bytes(data[:48], "big") & ((1 << 381) - 1))
    x0 = mpz(int.from_bytes(data[48:], "big"))
    if x0 >= P or x1 >= P:
        raise ValueError("x out of range")
    x = (x0, x1)
    y2 = fq2_add(fq2_mul(fq2_sqr(x), x), B_G2)
    y = fq2_sqrt(y2)
    if y is None:
        raise ValueError("x not on curve")
    bigger = int(y[1]) > int(P) >> 1 if y[1] else int(y[0]) > int(P) >> 1
    if bigger != bool(flags & 0x20):
        y = fq2_neg(y)
    return (x, y)
