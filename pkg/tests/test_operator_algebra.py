from fractions import Fraction

import numpy as np
import pytest

from qbo.model import OscillatorParams
from qbo.operator_algebra import (
    ClosureViolation,
    GaussianRational,
    ParamPoly,
    PolyOperator,
    UnsupportedOrder,
    anticommutator,
    basis_operator,
    canonicalize,
    commutator,
    derive_moment_ode,
)
from qbo.operator_algebra import _decompose

X = PolyOperator.x
P = PolyOperator.p
I_HBAR = PolyOperator.monomial(0, 0, 1, coeff=GaussianRational(0, 1))


def oracle_agrees(op: PolyOperator, ref: np.ndarray, dim=60, guard=20, hbar=1.0):
    keep = dim - guard
    got = op.to_matrix(dim, hbar)[:keep, :keep]
    scale = max(1.0, float(np.max(np.abs(ref))))
    return float(np.max(np.abs(got - ref[:keep, :keep]))) / scale < 1e-12


class TestCanonicalize:
    def test_defining_relation(self):
        assert canonicalize([(1, "px")]) == X() * P() - I_HBAR

    def test_already_canonical_unchanged(self):
        assert canonicalize([(1, "xp")]) == PolyOperator.monomial(1, 1)

    def test_idempotent(self):
        once = canonicalize([(2, "pxxp"), (-1, "xppx")])
        again = canonicalize(
            [(coeff, "x" * a + "p" * b, h) for (a, b, h), coeff in once.terms.items()]
        )
        assert once == again

    def test_p2x2_against_matrix_oracle(self):
        op = canonicalize([(1, "ppxx")])
        # p^2 x^2 = x^2 p^2 - 4 i hbar x p - 2 hbar^2
        expected = PolyOperator({
            (2, 2, 0): 1,
            (1, 1, 1): GaussianRational(0, -4),
            (0, 0, 2): -2,
        })
        assert op == expected
        dim = 60
        xm, pm = PolyOperator.x().to_matrix(dim), PolyOperator.p().to_matrix(dim)
        assert oracle_agrees(op, pm @ pm @ xm @ xm, dim=dim)

    def test_degree_never_increases_and_hbar_counts_swaps(self, rng):
        letters = "xp"
        for _ in range(30):
            word = "".join(rng.choice(list(letters), size=rng.integers(1, 8)))
            poly = canonicalize([(1, word)])
            degree = len(word)
            swaps = sum(
                1 for i in range(len(word)) for j in range(i + 1, len(word))
                if word[i] == "p" and word[j] == "x"
            )
            for (a, b, h), _ in poly.terms.items():
                assert a + b <= degree
                assert h <= swaps
                assert (degree - (a + b)) == 2 * h  # each swap trades x,p for hbar


class TestCommutators:
    def test_canonical_commutation_relation(self):
        assert commutator(X(), P()) == I_HBAR

    def test_commuting_powers(self):
        assert commutator(X(), X(2)).is_zero()

    def test_x4_p2(self):
        got = commutator(X(4), P(2))
        expected = PolyOperator({
            (3, 1, 1): GaussianRational(0, 8),
            (2, 0, 2): 12,
        })
        assert got == expected

    def test_anticommutator_xp(self):
        assert anticommutator(X(), P()) == PolyOperator(
            {(1, 1, 0): 2, (0, 0, 1): GaussianRational(0, -1)}
        )

    def test_identity_element(self):
        a = canonicalize([(3, "xxp"), (1, "p")])
        assert anticommutator(PolyOperator.identity(), a) == a.scale(2)

    def test_p_x3_against_oracle(self):
        op = anticommutator(P(), X(3))
        dim = 60
        xm, pm = X().to_matrix(dim), P().to_matrix(dim)
        ref = pm @ xm @ xm @ xm + xm @ xm @ xm @ pm
        assert oracle_agrees(op, ref, dim=dim)

    def test_bilinear_antisymmetric(self, rng):
        for _ in range(20):
            a = PolyOperator.monomial(rng.integers(0, 3), rng.integers(0, 3))
            b = PolyOperator.monomial(rng.integers(0, 3), rng.integers(0, 3))
            c = PolyOperator.monomial(rng.integers(0, 3), rng.integers(0, 3))
            assert commutator(a, b) == -commutator(b, a)
            assert commutator(a + c, b) == commutator(a, b) + commutator(c, b)

    def test_hermitian_basis_elements(self):
        for label in ("x2", "xp_sym", "p2", "x4", "x3p_sym", "x2p2_sym", "xp3_sym", "p4"):
            assert basis_operator(label).is_hermitian()


class TestDerivation:
    def test_unsupported_order(self):
        with pytest.raises(UnsupportedOrder):
            derive_moment_ode(3, OscillatorParams(m=1, gamma=1, omega=1, kbt=1))

    def test_first_moments(self, std_params):
        sys1 = derive_moment_ode(1, std_params)
        m, g, w2 = std_params.m, std_params.gamma, std_params.omega**2
        expected = np.array([[0.0, 1.0 / m], [-m * w2, -2.0 * g]])
        np.testing.assert_allclose(sys1.generator, expected, rtol=0, atol=0)
        np.testing.assert_array_equal(sys1.forcing_const, 0.0)

    def test_second_moments(self, std_params):
        sys2 = derive_moment_ode(2, std_params)
        m, g, w2 = std_params.m, std_params.gamma, std_params.omega**2
        expected = np.array([
            [0.0, 1.0 / m, 0.0],
            [-2 * m * w2, -2 * g, 2.0 / m],
            [0.0, -m * w2, -4 * g],
        ])
        np.testing.assert_allclose(sys2.generator, expected, rtol=0, atol=0)
        np.testing.assert_allclose(
            sys2.forcing_const,
            [0.0, 0.0, 4 * m * g * std_params.kbt],
            rtol=0, atol=0,
        )

    def test_fourth_moment_generator_symbolic(self):
        # entrywise symbolic reproduction of the printed 5x5 system
        params = OscillatorParams(m=3.0, gamma=0.25, omega=2.0, kbt=0.7, hbar=2.0)
        sys4 = derive_moment_ode(4, params)
        f = Fraction
        expect = {
            (0, 1): ParamPoly.term(f(2), m=-1),
            (1, 0): ParamPoly.term(f(-2), m=1, omega=2),
            (1, 1): ParamPoly.term(f(-2), gamma=1),
            (1, 2): ParamPoly.term(f(3), m=-1),
            (2, 1): ParamPoly.term(f(-2), m=1, omega=2),
            (2, 2): ParamPoly.term(f(-4), gamma=1),
            (2, 3): ParamPoly.term(f(2), m=-1),
            (3, 2): ParamPoly.term(f(-3), m=1, omega=2),
            (3, 3): ParamPoly.term(f(-6), gamma=1),
            (3, 4): ParamPoly.term(f(2), m=-1),
            (4, 3): ParamPoly.term(f(-2), m=1, omega=2),
            (4, 4): ParamPoly.term(f(-8), gamma=1),
        }
        for i in range(5):
            for j in range(5):
                assert sys4.generator_sym[i][j] == expect.get((i, j), ParamPoly.zero())

    def test_fourth_moment_forcing_symbolic(self):
        params = OscillatorParams(m=3.0, gamma=0.25, omega=2.0, kbt=0.7, hbar=2.0)
        sys4 = derive_moment_ode(4, params)
        f = Fraction
        assert sys4.forcing_const_sym[0].is_zero()
        assert sys4.forcing_const_sym[1] == ParamPoly.term(f(3), m=-1, hbar=2)
        assert sys4.forcing_const_sym[2] == ParamPoly.term(f(-4), gamma=1, hbar=2)
        assert sys4.forcing_const_sym[3] == ParamPoly.term(f(-3), m=1, omega=2, hbar=2)
        assert sys4.forcing_const_sym[4].is_zero()
        assert sys4.lower_basis == ("x2", "xp_sym", "p2")
        coupling = {
            (2, 0): ParamPoly.term(f(8), m=1, gamma=1, kbt=1),
            (3, 1): ParamPoly.term(f(12), m=1, gamma=1, kbt=1),
            (4, 2): ParamPoly.term(f(24), m=1, gamma=1, kbt=1),
        }
        for i in range(5):
            for j in range(3):
                assert sys4.forcing_coupling_sym[i][j] == coupling.get(
                    (i, j), ParamPoly.zero()
                )

    def test_numeric_evaluation_matches_symbolic(self):
        params = OscillatorParams(m=3.0, gamma=0.25, omega=2.0, kbt=0.7, hbar=2.0)
        sys4 = derive_moment_ode(4, params)
        assert sys4.generator[1, 0] == -2 * 3.0 * 4.0
        assert sys4.forcing_const[1] == 3 * 4.0 / 3.0
        assert sys4.forcing_coupling[4, 2] == 24 * 3.0 * 0.25 * 0.7

    def test_equations_text_dump(self, std_params):
        text = derive_moment_ode(4, std_params).equations_text()
        lines = text.splitlines()
        assert len(lines) == 5
        assert lines[0] == "d<x4>/dt = (2/m)<x3p_sym>"
        assert "3*hbar^2/m" in lines[1]
        assert "24*m*gamma*kbt" in lines[4]

    def test_omega_zero_free_particle_allowed(self):
        params = OscillatorParams(m=2.0, gamma=0.5, omega=0.0, kbt=1.0)
        sys4 = derive_moment_ode(4, params)
        assert np.all(sys4.generator[np.tril_indices(5, -1)] == 0.0)

    def test_moment_span_leak_is_reported(self):
        # anything outside the symmetrized span (e.g. an order-6 monomial)
        # must surface as an error, never be dropped
        with pytest.raises(ClosureViolation, match="x\\^6"):
            _decompose(PolyOperator.monomial(6, 0))


class TestParamPoly:
    def test_text_rendering(self):
        p = ParamPoly.term(Fraction(3), m=-1, hbar=2)
        assert p.text() == "3*hbar^2/m"
        q = ParamPoly.term(Fraction(-2), m=1, omega=2)
        assert q.text() == "-2*m*omega^2"

    def test_exact_arithmetic(self):
        a = ParamPoly.term(Fraction(1, 3), gamma=1)
        b = ParamPoly.term(Fraction(2, 3), gamma=1)
        assert (a + b) == ParamPoly.term(Fraction(1), gamma=1)
        assert (a - a).is_zero()

    def test_evaluate(self):
        p = ParamPoly.term(Fraction(3, 2), m=-1, kbt=2)
        params = OscillatorParams(m=4.0, gamma=1.0, omega=1.0, kbt=2.0)
        assert p.evaluate(params) == 1.5 * (1 / 4.0) * 4.0
