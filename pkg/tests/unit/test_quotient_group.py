"""Tests for cyclic quotients, ages and terminality."""

import math
from fractions import Fraction

import numpy as np
import pytest
from alekahler.quotient_group import (
    CyclicQuotient,
    QuotientError,
    acts_freely,
    age,
    in_special_unitary,
    is_terminal,
    minimum_age,
    satisfies_symplectic_pairing,
    summarize,
    symplectic_family,
)


class TestCyclicQuotient:
    """Test construction and the reduced representation."""

    def test_valid_quotient(self):
        q = CyclicQuotient(2, 2, (1, 1))
        assert q.order == 2

    def test_unreduced_rejected(self):
        with pytest.raises(QuotientError, match="not reduced"):
            CyclicQuotient(2, 4, (2, 2))

    def test_reduced_divides_out_gcd(self):
        q = CyclicQuotient.reduced(2, 4, (2, 2))
        assert q.k == 2
        assert q.exponents == (1, 1)

    def test_reduced_wraps_exponents(self):
        q = CyclicQuotient.reduced(2, 5, (6, -1))
        assert q.exponents == (1, 4)

    def test_exponent_out_of_range(self):
        with pytest.raises(QuotientError):
            CyclicQuotient(2, 3, (1, 3))

    def test_wrong_exponent_count(self):
        with pytest.raises(QuotientError, match="expected 3 exponents"):
            CyclicQuotient(3, 3, (1, 2))

    def test_dimension_one_rejected(self):
        with pytest.raises(QuotientError):
            CyclicQuotient(1, 2, (1,))

    def test_dict_round_trip(self):
        q = CyclicQuotient(4, 5, (1, 4, 2, 3))
        assert CyclicQuotient.from_dict(q.to_dict()) == q

    def test_from_dict_missing_field(self):
        with pytest.raises(QuotientError, match="exponents"):
            CyclicQuotient.from_dict({"m": 2, "k": 2})


class TestFreeAndSpecial:
    """Test the free-action and SU membership tests."""

    def test_antipodal_map(self):
        q = CyclicQuotient(2, 2, (1, 1))
        assert acts_freely(q)
        assert in_special_unitary(q)

    def test_not_special(self):
        q = CyclicQuotient(2, 3, (1, 1))
        assert acts_freely(q)
        assert not in_special_unitary(q)

    def test_not_free(self):
        q = CyclicQuotient(2, 4, (1, 2))
        assert not acts_freely(q)


class TestAge:
    """Test exact ages of group elements."""

    def test_age_is_exact(self):
        q = CyclicQuotient(4, 2, (1, 1, 1, 1))
        assert age(q, 1) == Fraction(2)

    def test_age_of_power(self):
        q = CyclicQuotient(3, 3, (1, 1, 1))
        assert age(q, 1) == Fraction(1)
        assert age(q, 2) == Fraction(2)

    def test_identity_has_no_age(self):
        q = CyclicQuotient(2, 2, (1, 1))
        with pytest.raises(QuotientError, match="identity"):
            age(q, 2)

    def test_power_out_of_range(self):
        q = CyclicQuotient(2, 2, (1, 1))
        with pytest.raises(QuotientError):
            age(q, 3)

    def test_permutation_invariant(self, rng):
        q = CyclicQuotient(5, 7, (1, 2, 3, 5, 3))
        shuffled = CyclicQuotient(5, 7, tuple(int(a) for a in rng.permutation(q.exponents)))
        assert [age(shuffled, l) for l in range(1, 7)] == [age(q, l) for l in range(1, 7)]

    def test_negation_inverts_element(self):
        q = CyclicQuotient(4, 7, (1, 2, 4, 3))
        negated = CyclicQuotient.reduced(4, 7, [-a for a in q.exponents])
        for l in range(1, 7):
            assert age(negated, l) == age(q, 7 - l)
        assert minimum_age(negated) == minimum_age(q)

    @pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
    def test_ages_of_inverse_pairs_sum_to_m(self, m, rng):
        for k in range(2, 51):
            units = [a for a in range(1, k) if math.gcd(a, k) == 1]
            q = CyclicQuotient.reduced(m, k, rng.choice(units, size=m))
            for l in range(1, q.k):
                assert age(q, l) + age(q, q.k - l) == m

    @pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
    def test_age_from_eigenvalues(self, m, rng):
        for k in range(2, 51):
            units = [a for a in range(1, k) if math.gcd(a, k) == 1]
            exponents = rng.choice(units, size=m)
            q = CyclicQuotient.reduced(m, k, exponents)
            basis, _ = np.linalg.qr(rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m)))
            gamma = basis @ np.diag(np.exp(2j * np.pi * exponents / k)) @ basis.conj().T
            for l in range(1, q.k):
                eigenvalues = np.linalg.eigvals(np.linalg.matrix_power(gamma, l))
                turns = np.mod(np.angle(eigenvalues), 2 * np.pi) / (2 * np.pi)
                assert np.sum(turns) == pytest.approx(float(age(q, l)), abs=1e-9)


class TestTerminality:
    """Test the age criterion for terminal quotients."""

    def test_eguchi_hanson_not_terminal(self):
        assert not is_terminal(CyclicQuotient(2, 2, (1, 1)))

    def test_antipodal_in_dimension_four_terminal(self):
        assert is_terminal(CyclicQuotient(4, 2, (1, 1, 1, 1)))

    def test_calabi_quotient_not_terminal(self):
        assert not is_terminal(CyclicQuotient(3, 3, (1, 1, 1)))

    def test_requires_special_unitary(self):
        with pytest.raises(QuotientError, match="free SU"):
            is_terminal(CyclicQuotient(2, 3, (1, 1)))

    def test_minimum_age(self):
        assert minimum_age(CyclicQuotient(4, 5, (1, 4, 2, 3))) == Fraction(2)

    def test_trivial_group(self):
        q = CyclicQuotient(2, 1, (0, 0))
        assert minimum_age(q) is None
        assert is_terminal(q)


class TestSymplecticPairing:
    """Test the pairing of exponents into (a, -a) pairs."""

    def test_paired_exponents(self):
        assert satisfies_symplectic_pairing(CyclicQuotient(4, 5, (1, 2, 4, 3)))

    def test_unpaired_exponents(self):
        assert not satisfies_symplectic_pairing(CyclicQuotient(4, 5, (1, 1, 1, 2)))

    def test_odd_dimension_rejected(self):
        with pytest.raises(QuotientError, match="even"):
            satisfies_symplectic_pairing(CyclicQuotient(3, 3, (1, 1, 1)))

    def test_non_free_rejected(self):
        with pytest.raises(QuotientError, match="free"):
            satisfies_symplectic_pairing(CyclicQuotient(2, 4, (1, 2)))


class TestSymplecticFamily:
    """Test the enumeration of symplectic free SU actions."""

    def test_distinct_multisets(self):
        family = list(symplectic_family(4, 5))
        assert len(family) == 3
        assert len({q.exponents for q in family}) == 3

    def test_members_satisfy_hypotheses(self):
        for k in range(2, 13):
            for q in symplectic_family(4, k):
                assert acts_freely(q)
                assert in_special_unitary(q)
                assert satisfies_symplectic_pairing(q)

    @pytest.mark.parametrize("m", [4, 6])
    def test_scan_all_terminal(self, m):
        for k in range(2, 21):
            for q in symplectic_family(m, k):
                assert is_terminal(q), q

    def test_odd_dimension_rejected(self):
        with pytest.raises(QuotientError):
            list(symplectic_family(3, 5))


class TestSummarize:
    """Test the JSON-ready summary."""

    def test_terminal_summary(self):
        summary = summarize(CyclicQuotient(4, 2, (1, 1, 1, 1)))
        assert summary["terminal"] is True
        assert summary["minimum_age"] == "2"
        assert summary["ages"] == ["2"]
        assert summary["symplectic_pairing"] is True

    def test_non_free_summary_has_no_verdict(self):
        summary = summarize(CyclicQuotient(2, 4, (1, 2)))
        assert summary["acts_freely"] is False
        assert "terminal" not in summary
