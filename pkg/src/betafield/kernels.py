"""Selects the compiled kernel core at import, falling back to NumPy.

``BACKEND`` reports which implementation is active ("cython" or "python").
Set the environment variable ``BETAFIELD_FORCE_PYTHON_KERNELS=1`` to force
the fallback (used by the benchmark and the backend parity tests).
"""

import os

if os.environ.get("BETAFIELD_FORCE_PYTHON_KERNELS"):
    from . import _core_py as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _core_py as _impl

BACKEND = _impl.BACKEND

greedy_net = _impl.greedy_net
min_dists = _impl.min_dists
sup_min_dist = _impl.sup_min_dist
sup_dist_to_line = _impl.sup_dist_to_line
proj_minmax = _impl.proj_minmax
meb = _impl.meb
polyline_min_dists = _impl.polyline_min_dists
segments_min_dists = _impl.segments_min_dists
pairwise_min_gap = _impl.pairwise_min_gap
best_near_pair = _impl.best_near_pair
nearest_index = _impl.nearest_index
