import numpy as np
import pytest

from services.laplace import analytic_spectrum, convergence_ratio, laplace_validate


def test_analytic_spectrum_order():
    spectrum = analytic_spectrum(6)
    assert [modes for modes, _ in spectrum] == [(0, 1), (1, 0), (1, 1), (0, 2), (2, 0), (1, 2)]
    values = [value for _, value in spectrum]
    assert values == sorted(values)
    assert values[0] == pytest.approx(np.pi ** 2)


def test_discrete_eigenvalues_approach_analytic():
    rows = laplace_validate(32, 4)
    assert len(rows) == 4
    for row in rows:
        assert row.rel_error < 0.02
        # conforming P1 elements overestimate
        assert row.observed >= row.exact


def test_second_order_convergence():
    ratio = convergence_ratio(laplace_validate(16, 4), laplace_validate(32, 4))
    assert 3.0 < ratio < 5.0


@pytest.mark.slow
def test_fine_mesh_accuracy_and_rate():
    fine = laplace_validate(64, 4)
    assert max(row.rel_error for row in fine) < 0.02
    ratio = convergence_ratio(laplace_validate(32, 4), fine)
    assert 3.5 <= ratio <= 4.5
