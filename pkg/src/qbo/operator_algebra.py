"""Exact polynomial algebra over the canonical pair (x, p) with [x, p] = i*hbar.

Monomials are stored in the canonical order x^a p^b hbar^h with exact
Gaussian-rational coefficients, so equal operators always have identical
term maps.  On top of the algebra sits the mechanical derivation of the
moment evolution equations

    d<A>/dt = (-i/hbar) <[A, H]> - (i*gamma/hbar) <{[A, x], p}>
              - (2 m gamma kbt / hbar^2) <[x, [x, A]]>

for symmetrized monomial observables A, which is assembled into a linear
generator matrix plus an affine forcing that couples each even moment order
only to lower even orders and constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .model import OscillatorParams

__all__ = [
    "AlgebraError",
    "UnsupportedOrder",
    "ClosureViolation",
    "GaussianRational",
    "PolyOperator",
    "canonicalize",
    "commutator",
    "anticommutator",
    "ParamPoly",
    "MomentODESystem",
    "derive_moment_ode",
    "ladder_matrices",
]


class AlgebraError(ValueError):
    pass


class UnsupportedOrder(AlgebraError):
    pass


class ClosureViolation(AlgebraError):
    """A derived equation left the expected moment span; indicates a
    transcription error rather than something to fix silently."""


class GaussianRational:
    """Exact complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    def __add__(self, other):
        other = _as_gr(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-_as_gr(other))

    def __mul__(self, other):
        other = _as_gr(other)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __eq__(self, other):
        try:
            other = _as_gr(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"


def _as_gr(v) -> GaussianRational:
    if isinstance(v, GaussianRational):
        return v
    if isinstance(v, (int, Fraction)):
        return GaussianRational(v, 0)
    if isinstance(v, complex):
        if v.real != int(v.real) or v.imag != int(v.imag):
            raise TypeError(f"non-exact complex coefficient {v!r}")
        return GaussianRational(int(v.real), int(v.imag))
    raise TypeError(f"cannot coerce {v!r} to GaussianRational")


_I = GaussianRational(0, 1)
_MINUS_I = GaussianRational(0, -1)

# (-i)^k for k mod 4
_MINUS_I_POW = (GaussianRational(1), _MINUS_I, GaussianRational(-1), _I)

Monomial = tuple  # (x_power, p_power, hbar_power)


def _mono_product(m1: Monomial, m2: Monomial):
    """Canonical form of (x^a1 p^b1 hbar^h1)(x^a2 p^b2 hbar^h2).

    Reordering p^b1 past x^a2 uses the closed normal-ordering sum

        p^b x^c = sum_k k! C(b,k) C(c,k) (-i hbar)^k x^(c-k) p^(b-k),

    so the hbar power grows by exactly the number of swaps performed.
    """
    a1, b1, h1 = m1
    a2, b2, h2 = m2
    out = []
    for k in range(min(b1, a2) + 1):
        c = (
            math.factorial(k)
            * math.comb(b1, k)
            * math.comb(a2, k)
        )
        coeff = _MINUS_I_POW[k % 4] * c
        out.append(((a1 + a2 - k, b1 + b2 - k, h1 + h2 + k), coeff))
    return out


class PolyOperator:
    """Polynomial in (x, p, hbar) in canonical x-before-p order.

    Immutable; zero coefficients are never stored, so `_terms` equality is
    operator equality.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for mono, coeff in dict(terms).items():
                coeff = _as_gr(coeff)
                if not coeff:
                    continue
                a, b, h = mono
                if a < 0 or b < 0 or h < 0:
                    raise AlgebraError(f"negative exponent in monomial {mono!r}")
                clean[(int(a), int(b), int(h))] = coeff
        object.__setattr__(self, "_terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("PolyOperator is immutable")

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def identity(cls, coeff=1):
        return cls({(0, 0, 0): coeff})

    @classmethod
    def x(cls, power=1):
        return cls({(power, 0, 0): 1})

    @classmethod
    def p(cls, power=1):
        return cls({(0, power, 0): 1})

    @classmethod
    def monomial(cls, a, b, h=0, coeff=1):
        return cls({(a, b, h): coeff})

    # -- ring operations ----------------------------------------------
    def __add__(self, other):
        terms = dict(self._terms)
        for mono, coeff in other._terms.items():
            acc = terms.get(mono)
            acc = coeff if acc is None else acc + coeff
            if acc:
                terms[mono] = acc
            else:
                terms.pop(mono, None)
        return PolyOperator(terms)

    def __neg__(self):
        return PolyOperator({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, PolyOperator):
            return self.scale(other)
        terms: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                c12 = c1 * c2
                for mono, swap_coeff in _mono_product(m1, m2):
                    acc = terms.get(mono)
                    add = c12 * swap_coeff
                    acc = add if acc is None else acc + add
                    if acc:
                        terms[mono] = acc
                    else:
                        terms.pop(mono, None)
        return PolyOperator(terms)

    def __rmul__(self, other):
        # scalars only; operator products use __mul__
        return self.scale(other)

    def scale(self, coeff):
        coeff = _as_gr(coeff)
        if not coeff:
            return PolyOperator()
        return PolyOperator({m: c * coeff for m, c in self._terms.items()})

    def shift_hbar(self, k: int):
        """Multiply by hbar^k (k may be negative if every power allows it)."""
        if k == 0:
            return self
        terms = {}
        for (a, b, h), c in self._terms.items():
            if h + k < 0:
                raise AlgebraError(
                    f"hbar power would go negative on {(a, b, h)!r} shifted by {k}"
                )
            terms[(a, b, h + k)] = c
        return PolyOperator(terms)

    def dagger(self):
        """Hermitian conjugate: reverses factor order, conjugates coefficients."""
        out = PolyOperator()
        for (a, b, h), c in self._terms.items():
            rev = PolyOperator.p(b) * PolyOperator.x(a) if (a or b) else PolyOperator.identity()
            out = out + rev.scale(c.conjugate()).shift_hbar(h)
        return out

    # -- queries -------------------------------------------------------
    @property
    def terms(self):
        return dict(self._terms)

    def coeff(self, mono) -> GaussianRational:
        return self._terms.get(tuple(mono), GaussianRational(0))

    def is_zero(self) -> bool:
        return not self._terms

    def order(self) -> int:
        """Largest x-plus-p degree among stored monomials."""
        return max((a + b for (a, b, _h) in self._terms), default=0)

    def is_hermitian(self) -> bool:
        return (self - self.dagger()).is_zero()

    def __eq__(self, other):
        if not isinstance(other, PolyOperator):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self):
        if not self._terms:
            return "PolyOperator(0)"
        bits = []
        for (a, b, h), c in sorted(self._terms.items()):
            mono = "".join(
                s for s, n in (("x^%d" % a, a), ("p^%d" % b, b), ("hbar^%d" % h, h)) if n
            )
            bits.append(f"({c.re}{'+' if c.im >= 0 else ''}{c.im}i){mono or '1'}")
        return "PolyOperator(" + " + ".join(bits) + ")"

    def to_matrix(self, dim: int, hbar: float = 1.0) -> np.ndarray:
        """Numeric matrix in the truncated number basis (oracle side)."""
        xm, pm = ladder_matrices(dim, hbar)
        xpow = [np.eye(dim, dtype=complex)]
        ppow = [np.eye(dim, dtype=complex)]
        amax = max((a for (a, _b, _h) in self._terms), default=0)
        bmax = max((b for (_a, b, _h) in self._terms), default=0)
        for _ in range(amax):
            xpow.append(xpow[-1] @ xm)
        for _ in range(bmax):
            ppow.append(ppow[-1] @ pm)
        out = np.zeros((dim, dim), dtype=complex)
        for (a, b, h), c in self._terms.items():
            out += complex(c) * hbar**h * (xpow[a] @ ppow[b])
        return out


def ladder_matrices(dim: int, hbar: float = 1.0):
    """Truncated (x, p) matrices from the oscillator ladder representation."""
    n = np.sqrt(np.arange(1, dim))
    a = np.zeros((dim, dim), dtype=complex)
    a[np.arange(dim - 1), np.arange(1, dim)] = n
    ad = a.conj().T
    s = math.sqrt(hbar / 2.0)
    x = s * (a + ad)
    p = 1j * s * (ad - a)
    return x, p


def canonicalize(terms) -> PolyOperator:
    """Canonical form of a list of unordered words.

    Each term is (coefficient, word) or (coefficient, word, hbar_power)
    with `word` a string over the letters 'x' and 'p' read left to right,
    e.g. (1, "px") -> x p - i hbar.
    """
    out = PolyOperator()
    for term in terms:
        if len(term) == 2:
            coeff, word = term
            hpow = 0
        else:
            coeff, word, hpow = term
        acc = PolyOperator.identity(coeff).shift_hbar(hpow)
        for letter in word:
            if letter == "x":
                acc = acc * PolyOperator.x()
            elif letter == "p":
                acc = acc * PolyOperator.p()
            else:
                raise AlgebraError(f"word letter must be 'x' or 'p', got {letter!r}")
        out = out + acc
    return out


def commutator(a: PolyOperator, b: PolyOperator) -> PolyOperator:
    return a * b - b * a


def anticommutator(a: PolyOperator, b: PolyOperator) -> PolyOperator:
    return a * b + b * a


# ---------------------------------------------------------------------------
# Symmetrized moment basis
# ---------------------------------------------------------------------------

def _sym(a: int, b: int) -> PolyOperator:
    """x^a p^b + p^b x^a (plain monomial when one power vanishes)."""
    if a == 0 or b == 0:
        return PolyOperator.monomial(a, b)
    return PolyOperator.x(a) * PolyOperator.p(b) + PolyOperator.p(b) * PolyOperator.x(a)


#: label -> (operator, leading canonical monomial, leading coefficient)
_BASIS_DEFS = {
    "x4": (_sym(4, 0), (4, 0), 1),
    "x3p_sym": (_sym(3, 1), (3, 1), 2),
    "x2p2_sym": (_sym(2, 2), (2, 2), 2),
    "xp3_sym": (_sym(1, 3), (1, 3), 2),
    "p4": (_sym(0, 4), (0, 4), 1),
    "x2": (_sym(2, 0), (2, 0), 1),
    "xp_sym": (_sym(1, 1), (1, 1), 2),
    "p2": (_sym(0, 2), (0, 2), 1),
    "x": (_sym(1, 0), (1, 0), 1),
    "p": (_sym(0, 1), (0, 1), 1),
}

#: decomposition order: strictly decreasing leading degree
_DECOMP_ORDER = [
    "x4", "x3p_sym", "x2p2_sym", "xp3_sym", "p4",
    "x2", "xp_sym", "p2", "x", "p",
]

ORDER_BASIS = {
    1: ["x", "p"],
    2: ["x2", "xp_sym", "p2"],
    4: ["x4", "x3p_sym", "x2p2_sym", "xp3_sym", "p4"],
}

_LABEL_ORDER = {lbl: sum(_BASIS_DEFS[lbl][1]) for lbl in _BASIS_DEFS}


def basis_operator(label: str) -> PolyOperator:
    return _BASIS_DEFS[label][0]


def _decompose(poly: PolyOperator):
    """Expand `poly` over the symmetrized basis plus hbar-power constants.

    Returns ({label: {h: GaussianRational}}, {h: GaussianRational}) for the
    basis and identity parts.  Raises ClosureViolation if anything is left.
    """
    buckets: dict[str, dict[int, GaussianRational]] = {}
    rest = poly
    for label in _DECOMP_ORDER:
        op, lead, lead_coeff = _BASIS_DEFS[label]
        hs = [h for (a, b, h) in rest._terms if (a, b) == lead]
        for h in sorted(hs):
            c = rest.coeff((lead[0], lead[1], h)) * Fraction(1, lead_coeff)
            rest = rest - op.scale(c).shift_hbar(h)
            buckets.setdefault(label, {})[h] = c
    const = {}
    for (a, b, h), c in list(rest._terms.items()):
        if a == 0 and b == 0:
            const[h] = c
        else:
            raise ClosureViolation(
                f"derived equation leaves the moment span: leftover term "
                f"x^{a} p^{b} hbar^{h} with coefficient {c!r}"
            )
    return buckets, const


# ---------------------------------------------------------------------------
# Exact parameter scalars
# ---------------------------------------------------------------------------

_ATOMS = ("m", "gamma", "omega", "kbt", "hbar")


class ParamPoly:
    """Exact Laurent polynomial in (m, gamma, omega, kbt, hbar).

    Keys are exponent tuples, values are Fractions; this is what makes the
    entrywise reproduction of the printed generator matrix a symbolic
    equality test rather than a float comparison.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for powers, coeff in dict(terms).items():
                coeff = Fraction(coeff)
                if coeff:
                    clean[tuple(int(e) for e in powers)] = coeff
        object.__setattr__(self, "_terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("ParamPoly is immutable")

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def term(cls, coeff, m=0, gamma=0, omega=0, kbt=0, hbar=0):
        return cls({(m, gamma, omega, kbt, hbar): coeff})

    def __add__(self, other):
        terms = dict(self._terms)
        for powers, coeff in other._terms.items():
            acc = terms.get(powers, Fraction(0)) + coeff
            if acc:
                terms[powers] = acc
            else:
                terms.pop(powers, None)
        return ParamPoly(terms)

    def __neg__(self):
        return ParamPoly({k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = ParamPoly({(0, 0, 0, 0, 0): other})
        terms: dict = {}
        for p1, c1 in self._terms.items():
            for p2, c2 in other._terms.items():
                key = tuple(a + b for a, b in zip(p1, p2))
                acc = terms.get(key, Fraction(0)) + c1 * c2
                if acc:
                    terms[key] = acc
                else:
                    terms.pop(key, None)
        return ParamPoly(terms)

    def __eq__(self, other):
        if not isinstance(other, ParamPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def is_zero(self) -> bool:
        return not self._terms

    def evaluate(self, params: OscillatorParams) -> float:
        vals = (params.m, params.gamma, params.omega, params.kbt, params.hbar)
        total = 0.0
        for powers, coeff in self._terms.items():
            prod = float(coeff)
            for v, e in zip(vals, powers):
                if e:
                    prod *= v**e
            total += prod
        return total

    def text(self) -> str:
        if not self._terms:
            return "0"
        bits = []
        for powers, coeff in sorted(self._terms.items()):
            num, den = [], []
            if coeff.numerator != 1 or all(e == 0 for e in powers):
                num.append(str(coeff.numerator))
            if coeff.denominator != 1:
                den.append(str(coeff.denominator))
            for atom, e in zip(_ATOMS, powers):
                if e > 0:
                    num.append(atom if e == 1 else f"{atom}^{e}")
                elif e < 0:
                    den.append(atom if e == -1 else f"{atom}^{-e}")
            s = "*".join(num) or "1"
            if den:
                s += "/" + "/".join(den)
            bits.append(s)
        out = bits[0]
        for b in bits[1:]:
            out += " - " + b[1:] if b.startswith("-") else " + " + b
        return out

    def __repr__(self):
        return f"ParamPoly<{self.text()}>"


# ---------------------------------------------------------------------------
# Moment ODE derivation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentODESystem:
    """Linear system d<B>/dt = generator @ <B> + forcing(<lower>).

    `generator_sym`, `forcing_const_sym` and `forcing_coupling_sym` hold the
    exact parameter polynomials; the plain ndarray attributes carry their
    values at `params`.  The forcing of an even order couples only to the
    even orders below it, which is what closes the hierarchy.
    """

    order: int
    params: OscillatorParams
    basis: tuple
    lower_basis: tuple
    generator_sym: tuple
    forcing_const_sym: tuple
    forcing_coupling_sym: tuple
    generator: np.ndarray
    forcing_const: np.ndarray
    forcing_coupling: np.ndarray

    def equations_text(self) -> str:
        """Plain-text dump, one line per basis element."""
        lines = []
        for i, label in enumerate(self.basis):
            parts = []
            for j, col in enumerate(self.basis):
                entry = self.generator_sym[i][j]
                if not entry.is_zero():
                    parts.append(f"({entry.text()})<{col}>")
            for j, col in enumerate(self.lower_basis):
                entry = self.forcing_coupling_sym[i][j]
                if not entry.is_zero():
                    parts.append(f"({entry.text()})<{col}>")
            if not self.forcing_const_sym[i].is_zero():
                parts.append(f"({self.forcing_const_sym[i].text()})")
            rhs = " + ".join(parts) if parts else "0"
            lines.append(f"d<{label}>/dt = {rhs}")
        return "\n".join(lines)


def _real_part(c: GaussianRational, context: str) -> Fraction:
    if c.im != 0:
        raise ClosureViolation(
            f"non-Hermitian coefficient {c!r} in {context}; expected exactly real"
        )
    return c.re


@lru_cache(maxsize=None)
def _derive_symbolic(order: int):
    """Parameter-independent part of the derivation (exact, cached)."""
    if order not in ORDER_BASIS:
        raise UnsupportedOrder(f"moment order must be one of {sorted(ORDER_BASIS)}, got {order}")
    basis = ORDER_BASIS[order]
    lower = [
        lbl for lbl in _DECOMP_ORDER
        if lbl not in basis and _LABEL_ORDER[lbl] % 2 == order % 2
        and _LABEL_ORDER[lbl] < order
    ]
    x = PolyOperator.x()
    p = PolyOperator.p()
    p2 = PolyOperator.p(2)
    x2 = PolyOperator.x(2)

    zero = ParamPoly.zero()
    gen = [[zero] * len(basis) for _ in range(len(basis))]
    f_coup = [[zero] * len(lower) for _ in range(len(basis))]
    f_const = [zero] * len(basis)

    # prefactors: (piece builder, ParamPoly factor carried by the i-free part,
    #              i-power expected, hbar shift)
    def pieces(a_op):
        com_x = commutator(a_op, x)
        return (
            # (-i/hbar)(1/2m) [A, p^2]
            (commutator(a_op, p2), ParamPoly.term(Fraction(1, 2), m=-1), True, -1),
            # (-i/hbar)(m omega^2/2) [A, x^2]
            (commutator(a_op, x2), ParamPoly.term(Fraction(1, 2), m=1, omega=2), True, -1),
            # (-i gamma/hbar) {[A, x], p}
            (anticommutator(com_x, p), ParamPoly.term(1, gamma=1), True, -1),
            # (-2 m gamma kbt/hbar^2) [x, [x, A]]
            (commutator(x, commutator(x, a_op)), ParamPoly.term(-2, m=1, gamma=1, kbt=1), False, -2),
        )

    for i, label in enumerate(basis):
        a_op = basis_operator(label)
        for piece, factor, times_minus_i, hshift in pieces(a_op):
            buckets, const = _decompose(piece)
            def contribution(c: GaussianRational, h: int, ctx: str) -> ParamPoly:
                if times_minus_i:
                    c = _MINUS_I * c
                r = _real_part(c, ctx)
                if h + hshift < 0:
                    raise ClosureViolation(f"hbar grading underflow in {ctx}")
                return factor * ParamPoly.term(r, hbar=h + hshift)

            for lbl, per_h in buckets.items():
                for h, c in per_h.items():
                    contrib = contribution(c, h, f"d<{label}>/dt term <{lbl}>")
                    if lbl in basis:
                        j = basis.index(lbl)
                        gen[i][j] = gen[i][j] + contrib
                    elif lbl in lower:
                        j = lower.index(lbl)
                        f_coup[i][j] = f_coup[i][j] + contrib
                    elif not contrib.is_zero():
                        raise ClosureViolation(
                            f"d<{label}>/dt couples to unexpected moment <{lbl}>"
                        )
            for h, c in const.items():
                f_const[i] = f_const[i] + contribution(c, h, f"d<{label}>/dt constant")

    return (
        tuple(basis),
        tuple(lower),
        tuple(tuple(row) for row in gen),
        tuple(f_const),
        tuple(tuple(row) for row in f_coup),
    )


def derive_moment_ode(order: int, params: OscillatorParams) -> MomentODESystem:
    """Derive the moment evolution system of the given order (1, 2 or 4).

    The algebra runs once over exact rationals with the parameters as
    opaque atoms; numeric entries are substituted at assembly.
    """
    basis, lower, gen_sym, f_const_sym, f_coup_sym = _derive_symbolic(order)
    n, nl = len(basis), len(lower)
    generator = np.array(
        [[gen_sym[i][j].evaluate(params) for j in range(n)] for i in range(n)]
    )
    forcing_const = np.array([f_const_sym[i].evaluate(params) for i in range(n)])
    forcing_coupling = np.array(
        [[f_coup_sym[i][j].evaluate(params) for j in range(nl)] for i in range(n)]
    ).reshape(n, nl)
    return MomentODESystem(
        order=order,
        params=params,
        basis=basis,
        lower_basis=lower,
        generator_sym=gen_sym,
        forcing_const_sym=f_const_sym,
        forcing_coupling_sym=f_coup_sym,
        generator=generator,
        forcing_const=forcing_const,
        forcing_coupling=forcing_coupling,
    )
