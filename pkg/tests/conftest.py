import numpy as np
import pytest

from panelcast.neural import available_backends
from panelcast.panel import Panel, SplitSpec


@pytest.fixture(params=available_backends())
def kernel_backend(request):
    """Run the decorated test once per available kernel backend."""
    from panelcast.neural import use_backend

    with use_backend(request.param):
        yield request.param


def make_panel(values, start_year=2012, prefix="u"):
    values = np.asarray(values, dtype=np.float64)
    n, t = values.shape
    ids = tuple(f"{prefix}{i:04d}" for i in range(n))
    years = tuple(range(start_year, start_year + t))
    return Panel(ids, years, values)


def default_split(panel: Panel, n_test: int = 2) -> SplitSpec:
    years = panel.years
    return SplitSpec(years[0], years[-1 - n_test], years[-n_test], years[-1])
