"""Select the compiled kernels when available; ``HYPERHARM_PURE=1`` forces numpy."""

import os

import numpy as np

from . import _pycore

BACKEND = "python"
_impl = _pycore

if os.environ.get("HYPERHARM_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _pycore


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def min_line_product(alpha, I, J, C, impl=None):
    impl = impl or _impl
    return impl.min_line_product(_f64(alpha), _i64(I), _i64(J), _f64(C))


def greedy_cover(alpha, xi, thresh, impl=None):
    impl = impl or _impl
    return impl.greedy_cover(_f64(alpha), _f64(xi), float(thresh))


def greedy_select(indptr, indices, order, impl=None):
    impl = impl or _impl
    return impl.greedy_select(_i64(indptr), _i64(indices), _i64(order))


def greedy_color(indptr, indices, impl=None):
    impl = impl or _impl
    return impl.greedy_color(_i64(indptr), _i64(indices))


def edge_log_sum(F, indptr, indices, w, impl=None):
    impl = impl or _impl
    return impl.edge_log_sum(_f64(F), _i64(indptr), _i64(indices), _f64(w))


def cylinder_count(alpha, I, J, C, lo, hi, thresh, impl=None):
    impl = impl or _impl
    return impl.cylinder_count(_f64(alpha), _i64(I), _i64(J), _f64(C), _f64(lo), _f64(hi),
                               _f64(np.broadcast_to(thresh, np.shape(I))))
