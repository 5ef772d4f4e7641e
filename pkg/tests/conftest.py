import numpy as np
import pytest

from mceuler.euler import EulerTrajectory


@pytest.fixture
def make_trajectory():
    """Fabricate an EulerTrajectory with prescribed values.

    The dominator machinery reads values and increments off the
    trajectory without re-running the scheme, so tests can hand it
    arbitrary sign patterns and increment sequences.
    """

    def build(model, values, incs=None):
        values = np.asarray(values, dtype=np.float64)
        n = values.size - 1
        if incs is None:
            incs = np.zeros(n)
        bad = np.flatnonzero(~np.isfinite(values))
        return EulerTrajectory(
            model=model,
            n_steps=n,
            initial=float(values[0]),
            increments=np.asarray(incs, dtype=np.float64),
            values=values,
            first_nonfinite=int(bad[0]) if bad.size else None,
        )

    return build
