import numpy as np
import pytest

from app.services import selfcheck


def test_fast_checks_pass():
    rng = np.random.default_rng(0)
    for result in (
        selfcheck.check_lattice_sums(),
        selfcheck.check_rho_zero(),
        selfcheck.check_partition_of_unity(rng),
        selfcheck.check_deviation(rng),
    ):
        assert result.passed, result


@pytest.mark.slow
def test_full_suite_passes():
    results = selfcheck.run_selfcheck(seed=1)
    assert len(results) == 6
    assert all(r.passed for r in results), [r for r in results if not r.passed]
