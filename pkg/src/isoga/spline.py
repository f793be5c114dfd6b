"""B-spline and NURBS bases, geometry evaluation, refinement and Bezier
extraction.

Control points of a patch are stored flat, x-fastest: the point with
per-direction indices ``(i, j, k)`` lives at ``A = i + n*j + n*m*k``.
All indices are 0-based.
"""
from math import comb

import numpy as np

from . import kernels
from .errors import ArgumentError, ConvergenceError, DomainError

__all__ = [
    "KnotVector",
    "NurbsPatch",
    "find_span",
    "bspline_basis",
    "bspline_ders",
    "nurbs_basis_ders",
    "eval_point",
    "to_homogeneous",
    "from_homogeneous",
    "insert_knot",
    "refine_knots",
    "elevate_degree",
    "h_refine",
    "k_refine",
    "bezier_extract",
    "bezier_extract_patch",
    "bernstein",
    "invert_point",
]

_DOMAIN_SLACK = 1e-13


class KnotVector:
    """Open, non-decreasing knot vector with its degree.

    Parameters
    ----------
    knots : array_like
        Knot values. End knots must repeat exactly ``p + 1`` times and
        interior knots at most ``p`` times.
    degree : int
        Polynomial degree ``p``.
    """

    __slots__ = ("knots", "degree")

    def __init__(self, knots, degree):
        k = np.array(knots, dtype=float)
        p = int(degree)
        if k.ndim != 1:
            raise ArgumentError("knot vector must be one-dimensional")
        if p < 0:
            raise ArgumentError("degree must be non-negative")
        if np.any(np.diff(k) < 0):
            raise ArgumentError("knots must be non-decreasing")
        n = k.size - p - 1
        if n < p + 1:
            raise ArgumentError(f"need at least {2 * p + 2} knots for degree {p}, got {k.size}")
        inner = k[(k > k[0]) & (k < k[-1])]
        if inner.size:
            _, counts = np.unique(inner, return_counts=True)
            if counts.max() > p:
                raise ArgumentError(f"interior knot multiplicity {counts.max()} exceeds degree {p}")
        k.setflags(write=False)
        self.knots = k
        self.degree = p

    @classmethod
    def open_uniform(cls, degree, n_elements, lo=0.0, hi=1.0):
        """Open knot vector with ``n_elements`` equal spans on [lo, hi]."""
        inner = np.linspace(lo, hi, n_elements + 1)[1:-1]
        return cls(np.r_[[lo] * (degree + 1), inner, [hi] * (degree + 1)], degree)

    @property
    def n(self):
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def lo(self):
        return float(self.knots[0])

    @property
    def hi(self):
        return float(self.knots[-1])

    @property
    def breaks(self):
        """Unique knot values."""
        return np.unique(self.knots)

    @property
    def n_elements(self):
        return self.breaks.size - 1

    def multiplicity(self, value):
        """Number of knots equal to ``value``."""
        return int(np.count_nonzero(self.knots == value))

    def is_open(self):
        p = self.degree
        k = self.knots
        return (
            self.multiplicity(k[0]) == p + 1
            and self.multiplicity(k[-1]) == p + 1
            and all(self.multiplicity(b) <= p for b in self.breaks[1:-1])
        )

    def check_open(self):
        if not self.is_open():
            raise ArgumentError(
                "knot vector must be open: end multiplicity p+1, interior at most p"
            )

    def element_spans(self):
        """Span index of each non-degenerate knot interval."""
        k = self.knots
        p = self.degree
        s = np.arange(p, self.n)
        return s[k[s + 1] > k[s]]

    def greville(self):
        """Greville abscissae, one per basis function."""
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        idx = np.arange(self.n)[:, None] + np.arange(1, p + 1)[None, :]
        return self.knots[idx].mean(axis=1)

    def intervals(self):
        """Knot-interval vector (differences of consecutive knots)."""
        return np.diff(self.knots)

    @classmethod
    def from_intervals(cls, intervals, degree, start=0.0):
        """Inverse of :meth:`intervals`."""
        return cls(np.r_[start, start + np.cumsum(intervals)], degree)

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.degree == other.degree
            and np.array_equal(self.knots, other.knots)
        )

    def __repr__(self):
        return f"KnotVector(p={self.degree}, knots={self.knots.tolist()})"


def _as_kv(kv, degree=None):
    if isinstance(kv, KnotVector):
        return kv
    if degree is None:
        raise ArgumentError("degree required with a raw knot array")
    return KnotVector(kv, degree)


def find_spans(kv, xi):
    """Vectorized :func:`find_span`; returns int64 array."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    k = kv.knots
    tol = _DOMAIN_SLACK * max(1.0, abs(k[-1] - k[0]))
    if np.any(xi < k[0] - tol) or np.any(xi > k[-1] + tol):
        bad = xi[(xi < k[0] - tol) | (xi > k[-1] + tol)][0]
        raise DomainError(f"parameter {bad!r} outside [{k[0]}, {k[-1]}]")
    s = np.searchsorted(k, xi, side="right") - 1
    # last knot: clamp to the last non-degenerate span
    return np.clip(s, kv.degree, kv.n - 1).astype(np.int64)


def find_span(kv, xi):
    """Knot span index ``s`` with ``knots[s] <= xi < knots[s+1]``.

    At the last knot the last non-degenerate span is returned.

    Raises
    ------
    DomainError
        ``xi`` is outside the knot range.
    """
    return int(find_spans(kv, [xi])[0])


def _clip_param(kv, xi):
    return np.clip(np.asarray(xi, dtype=float), kv.knots[0], kv.knots[-1])


def basis_table(kv, xi, nder=0, spans=None):
    """Basis functions and derivatives at many points.

    Parameters
    ----------
    kv : KnotVector
    xi : array_like, shape (npts,)
    nder : int
        Highest derivative order; orders above ``p`` are zero.
    spans : array_like of int, optional
        Explicit spans, used for one-sided evaluation at knots.

    Returns
    -------
    spans : ndarray of int64, shape (npts,)
    table : ndarray, shape (npts, nder + 1, p + 1)
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if spans is None:
        spans = find_spans(kv, xi)
    else:
        spans = np.ascontiguousarray(np.broadcast_to(spans, xi.shape), dtype=np.int64)
        find_spans(kv, xi)  # domain check only
    xi = np.ascontiguousarray(_clip_param(kv, xi))
    tab = kernels.basis_ders(kv.knots, kv.degree, xi, spans, int(nder))
    return spans, tab


def bspline_basis(kv, xi, span=None):
    """Nonzero basis values ``N_{s-p..s}(xi)``.

    Examples
    --------
    >>> bspline_basis(KnotVector([0, 0, 0, 1, 1, 1], 2), 0.5)
    array([0.25, 0.5 , 0.25])
    """
    _, tab = basis_table(kv, [xi], 0, None if span is None else [span])
    return tab[0, 0]


def bspline_ders(kv, xi, order, span=None):
    """Basis values and derivatives up to ``order``.

    Returns
    -------
    ndarray, shape (order + 1, p + 1)
        Row ``k`` holds the k-th derivatives.

    Raises
    ------
    ArgumentError
        ``order > p``.
    """
    if order > kv.degree:
        raise ArgumentError(f"derivative order {order} exceeds degree {kv.degree}")
    if order < 0:
        raise ArgumentError("derivative order must be non-negative")
    _, tab = basis_table(kv, [xi], order, None if span is None else [span])
    return tab[0]


def to_homogeneous(points, weights):
    """Weighted homogeneous coordinates ``(x w, y w, z w, w)``.

    Raises
    ------
    ArgumentError
        A weight is zero or negative.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if np.any(w <= 0):
        raise ArgumentError("weights must be strictly positive")
    return np.hstack([P * w[:, None], w[:, None]])


def from_homogeneous(pw):
    """Inverse of :func:`to_homogeneous`; returns ``(points, weights)``."""
    pw = np.atleast_2d(np.asarray(pw, dtype=float))
    w = pw[:, -1]
    if np.any(w <= 0):
        raise ArgumentError("weights must be strictly positive")
    return pw[:, :-1] / w[:, None], w.copy()


def _tensor(tabs, ks):
    """Tensor product of per-direction rows, x-fastest flattening."""
    out = tabs[0][:, ks[0], :]
    for d in range(1, len(tabs)):
        out = (tabs[d][:, ks[d], :, None] * out[:, None, :]).reshape(out.shape[0], -1)
    return out


class NurbsPatch:
    """Tensor-product NURBS curve, surface or volume.

    Parameters
    ----------
    knot_vectors : sequence of KnotVector
        One per parametric direction (1 to 3).
    points : array_like, shape (N, d_s)
        Control points, x-fastest.
    weights : array_like, shape (N,), optional
        Defaults to all ones (a B-spline patch).
    """

    def __init__(self, knot_vectors, points, weights=None):
        kvs = tuple(knot_vectors)
        if not 1 <= len(kvs) <= 3:
            raise ArgumentError("a patch has 1 to 3 parametric directions")
        for kv in kvs:
            if not isinstance(kv, KnotVector):
                raise ArgumentError("knot_vectors must be KnotVector instances")
            kv.check_open()
        P = np.array(points, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        dims = tuple(kv.n for kv in kvs)
        N = int(np.prod(dims))
        if P.shape[0] != N:
            raise ArgumentError(f"expected {N} control points for dims {dims}, got {P.shape[0]}")
        w = np.ones(N) if weights is None else np.array(weights, dtype=float).ravel()
        if w.shape[0] != N:
            raise ArgumentError("one weight per control point required")
        if np.any(w <= 0):
            raise ArgumentError("weights must be strictly positive")
        P.setflags(write=False)
        w.setflags(write=False)
        self.knot_vectors = kvs
        self.points = P
        self.weights = w
        self.dims = dims

    # basic properties
    @property
    def dim_p(self):
        return len(self.knot_vectors)

    @property
    def dim_s(self):
        return self.points.shape[1]

    @property
    def degrees(self):
        return tuple(kv.degree for kv in self.knot_vectors)

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def n_en(self):
        return int(np.prod([p + 1 for p in self.degrees]))

    @property
    def is_rational(self):
        return not np.allclose(self.weights, self.weights[0], rtol=0, atol=1e-15)

    def grid(self, arr=None):
        """Reshape a per-control-point array to ``(l, m, n, ...)``."""
        arr = self.points if arr is None else np.asarray(arr)
        return arr.reshape(self.dims[::-1] + arr.shape[1:])

    def homogeneous(self):
        return to_homogeneous(self.points, self.weights)

    @classmethod
    def from_homogeneous(cls, knot_vectors, pw):
        P, w = from_homogeneous(pw)
        return cls(knot_vectors, P, w)

    def copy_with(self, points=None, weights=None):
        return NurbsPatch(
            self.knot_vectors,
            self.points if points is None else points,
            self.weights if weights is None else weights,
        )

    # evaluation
    def _params(self, xi):
        x = np.asarray(xi, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(1, -1) if self.dim_p > 1 or x.size == 1 else x[:, None]
        if x.shape[1] != self.dim_p:
            raise ArgumentError(f"parametric points need {self.dim_p} coordinates")
        return x

    def local_indices(self, spans):
        """Global indices of the nonzero functions for per-direction spans.

        Parameters
        ----------
        spans : ndarray of int, shape (npts, d_p)

        Returns
        -------
        ndarray of int64, shape (npts, n_en), local ordering x-fastest.
        """
        spans = np.atleast_2d(spans)
        idx = None
        stride = 1
        for d, kv in enumerate(self.knot_vectors):
            loc = spans[:, d, None] - kv.degree + np.arange(kv.degree + 1)[None, :]
            loc = loc * stride
            idx = loc if idx is None else (loc[:, :, None] + idx[:, None, :]).reshape(loc.shape[0], -1)
            stride *= kv.n
        return idx.astype(np.int64)

    def basis(self, xi, order=0, spans=None):
        """Rational basis and parametric derivatives at many points.

        Parameters
        ----------
        xi : array_like, shape (npts, d_p)
        order : {0, 1, 2}
        spans : array_like of int, shape (npts, d_p), optional
            Explicit spans for one-sided evaluation on knot lines.

        Returns
        -------
        idx : ndarray, shape (npts, n_en)
            Global control-point indices.
        R : ndarray, shape (npts, n_en)
        dR : ndarray, shape (npts, n_en, d_p)
            Only when ``order >= 1``.
        d2R : ndarray, shape (npts, n_en, d_p, d_p)
            Only when ``order == 2``.
        """
        if order not in (0, 1, 2):
            raise ArgumentError("order must be 0, 1 or 2")
        x = self._params(xi)
        npts, dp = x.shape
        sp = np.empty((npts, dp), dtype=np.int64)
        tabs = []
        for d, kv in enumerate(self.knot_vectors):
            s_d = None if spans is None else np.asarray(spans)[..., d].reshape(-1)
            sp[:, d], t = basis_table(kv, x[:, d], order, s_d)
            tabs.append(t)
        idx = self.local_indices(sp)
        return (idx,) + rationalize(tabs, self.weights[idx], order)

    def eval(self, xi, spans=None):
        """Physical points for many parameters, shape (npts, d_s)."""
        idx, R = self.basis(xi, 0, spans)
        return np.einsum("qa,qad->qd", R, self.points[idx])

    def jacobian(self, xi, spans=None):
        """``dx/dxi`` at many points, shape (npts, d_s, d_p)."""
        idx, _, dR = self.basis(xi, 1, spans)
        return np.einsum("qai,qad->qdi", dR, self.points[idx])

    @property
    def domain(self):
        return np.array([[kv.lo, kv.hi] for kv in self.knot_vectors])

    # serialization
    def to_dict(self):
        """JSON-ready dict with keys degrees, knots, points, weights, dims."""
        return {
            "degrees": list(self.degrees),
            "knots": [kv.knots.tolist() for kv in self.knot_vectors],
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
            "dims": list(self.dims),
        }

    @classmethod
    def from_dict(cls, data):
        degrees = data["degrees"]
        knots = data["knots"]
        if len(degrees) != len(knots):
            raise ArgumentError("degrees and knots must have the same length")
        kvs = [KnotVector(k, p) for k, p in zip(knots, degrees)]
        patch = cls(kvs, data["points"], data.get("weights"))
        if "dims" in data and tuple(data["dims"]) != patch.dims:
            raise ArgumentError(f"dims {data['dims']} inconsistent with knots/degrees {patch.dims}")
        return patch

    def __repr__(self):
        return f"NurbsPatch(degrees={self.degrees}, dims={self.dims}, dim_s={self.dim_s})"


def rationalize(tabs, w, order):
    """Turn per-direction B-spline tables into rational basis derivatives.

    Parameters
    ----------
    tabs : list of ndarray, each (npts, >= order + 1, p_d + 1)
    w : ndarray, shape (npts, n_en)
        Weights of the active functions.
    order : int

    Returns
    -------
    tuple
        ``(R,)``, ``(R, dR)`` or ``(R, dR, d2R)``; see :meth:`NurbsPatch.basis`.

    Notes
    -----
    With ``n = w N`` and ``W = sum(n)``::

        R      = n / W
        R_i    = (n_i - R W_i) / W
        R_ij   = (n_ij - R_i W_j - R_j W_i - R W_ij) / W
    """
    dp = len(tabs)
    zeros = [0] * dp
    n0 = w * _tensor(tabs, zeros)
    W = n0.sum(axis=1, keepdims=True)
    R = n0 / W
    if order == 0:
        return (R,)
    n1 = np.empty(R.shape + (dp,))
    for i in range(dp):
        ks = zeros.copy()
        ks[i] = 1
        n1[..., i] = w * _tensor(tabs, ks)
    W1 = n1.sum(axis=1)  # (npts, dp)
    dR = (n1 - R[..., None] * W1[:, None, :]) / W[..., None]
    if order == 1:
        return R, dR
    n2 = np.empty(R.shape + (dp, dp))
    for i in range(dp):
        for j in range(i, dp):
            ks = zeros.copy()
            ks[i] += 1
            ks[j] += 1
            n2[..., i, j] = w * _tensor(tabs, ks)
            n2[..., j, i] = n2[..., i, j]
    W2 = n2.sum(axis=1)
    d2R = (
        n2
        - dR[..., :, None] * W1[:, None, None, :]
        - dR[..., None, :] * W1[:, None, :, None]
        - R[..., None, None] * W2[:, None, :, :]
    ) / W[..., None, None]
    return R, dR, d2R


def nurbs_basis_ders(patch, xi, order=1, spans=None):
    """Rational basis and derivatives of all nonzero functions at one point.

    Returns
    -------
    idx : ndarray, shape (n_en,)
    R : ndarray, shape (n_en,)
    dR : ndarray, shape (n_en, d_p)
        Present when ``order >= 1``.
    d2R : ndarray, shape (n_en, d_p, d_p)
        Present when ``order == 2``.
    """
    x = np.asarray(xi, dtype=float).reshape(1, -1)
    sp = None if spans is None else np.asarray(spans).reshape(1, -1)
    out = patch.basis(x, order, sp)
    return tuple(a[0] for a in out)


def eval_point(patch, xi, spans=None):
    """Physical coordinates of one parametric point."""
    return patch.eval(np.asarray(xi, dtype=float).reshape(1, -1), spans)[0]


# refinement

def _apply_along(patch, direction, T, new_kv):
    """Transform homogeneous control points with ``T`` along a direction."""
    if not 0 <= direction < patch.dim_p:
        raise ArgumentError(f"direction {direction} invalid for a {patch.dim_p}-parameter patch")
    pw = patch.grid(patch.homogeneous())
    axis = patch.dim_p - 1 - direction
    moved = np.moveaxis(pw, axis, -2)  # (..., n_dir, d+1)
    new = np.einsum("ij,...jc->...ic", T, moved)
    new = np.moveaxis(new, -2, axis)
    kvs = list(patch.knot_vectors)
    kvs[direction] = new_kv
    return NurbsPatch.from_homogeneous(kvs, new.reshape(-1, new.shape[-1]))


def _insertion_matrix(kv, u):
    """Boehm insertion of a single knot as a matrix ``(n + 1, n)``."""
    p = kv.degree
    k = kv.knots
    s = find_span(kv, u)
    n = kv.n
    T = np.zeros((n + 1, n))
    for i in range(n + 1):
        if i <= s - p:
            T[i, i] = 1.0
        elif i >= s + 1:
            T[i, i - 1] = 1.0
        else:
            a = (u - k[i]) / (k[i + p] - k[i])
            T[i, i] = a
            T[i, i - 1] = 1.0 - a
    new_kv = KnotVector(np.insert(k, s + 1, u), p)
    return T, new_kv


def insert_knot(patch, direction, xi_new, times=1):
    """Insert a knot ``times`` times along one direction (Boehm).

    Raises
    ------
    ArgumentError
        Resulting multiplicity would exceed the degree.
    DomainError
        ``xi_new`` is not strictly inside the parameter range.
    """
    kv = patch.knot_vectors[direction] if 0 <= direction < patch.dim_p else None
    if kv is None:
        raise ArgumentError(f"direction {direction} invalid")
    if not kv.lo < xi_new < kv.hi:
        raise DomainError(f"knot {xi_new} must lie strictly inside ({kv.lo}, {kv.hi})")
    if times < 0:
        raise ArgumentError("times must be non-negative")
    if kv.multiplicity(xi_new) + times > kv.degree:
        raise ArgumentError(
            f"multiplicity of {xi_new} would become {kv.multiplicity(xi_new) + times} > p={kv.degree}"
        )
    T = np.eye(kv.n)
    cur = kv
    for _ in range(times):
        Ti, cur = _insertion_matrix(cur, float(xi_new))
        T = Ti @ T
    return _apply_along(patch, direction, T, cur)


def refine_knots(patch, direction, new_knots):
    """Insert several knots (each occurrence once) along a direction."""
    out = patch
    for u in np.sort(np.atleast_1d(new_knots)):
        out = insert_knot(out, direction, float(u), 1)
    return out


def h_refine(patch, n_splits=1, directions=None):
    """Uniform h-refinement: bisect every element ``n_splits`` times."""
    dirs = range(patch.dim_p) if directions is None else directions
    out = patch
    for _ in range(n_splits):
        for d in dirs:
            b = out.knot_vectors[d].breaks
            out = refine_knots(out, d, 0.5 * (b[:-1] + b[1:]))
    return out


def subdivide(patch, counts):
    """Insert knots so direction ``d`` gets ``counts[d]`` equal sub-spans
    per existing element."""
    out = patch
    for d, c in enumerate(counts):
        if c <= 1:
            continue
        b = out.knot_vectors[d].breaks
        t = np.arange(1, c) / c
        new = (b[:-1, None] + (b[1:] - b[:-1])[:, None] * t[None, :]).ravel()
        out = refine_knots(out, d, new)
    return out


def elevate_degree(patch, direction, raise_by=1):
    """Raise the degree along one direction, keeping geometry and continuity.

    Every distinct knot gains ``raise_by`` in multiplicity. The new
    homogeneous control points are obtained by interpolating the old
    homogeneous curve at the Greville abscissae of the elevated basis,
    which is exact because the old space is contained in the new one.
    """
    if raise_by < 1:
        raise ArgumentError("raise_by must be >= 1")
    if not 0 <= direction < patch.dim_p:
        raise ArgumentError(f"direction {direction} invalid")
    kv = patch.knot_vectors[direction]
    b = kv.breaks
    mult = [kv.multiplicity(x) + raise_by for x in b]
    new_kv = KnotVector(np.repeat(b, mult), kv.degree + raise_by)
    g = new_kv.greville()
    A = _collocation(new_kv, g)
    B = _collocation(kv, g)
    T = np.linalg.solve(A, B)
    T[np.abs(T) < 1e-15] = 0.0
    return _apply_along(patch, direction, T, new_kv)


def k_refine(patch, raise_by, n_splits):
    """Degree elevation followed by uniform knot insertion."""
    out = patch
    for d in range(patch.dim_p):
        if raise_by:
            out = elevate_degree(out, d, raise_by)
    return h_refine(out, n_splits)


def _collocation(kv, x):
    """Dense matrix ``N_j(x_i)``."""
    spans, tab = basis_table(kv, x, 0)
    M = np.zeros((x.size, kv.n))
    cols = spans[:, None] - kv.degree + np.arange(kv.degree + 1)[None, :]
    np.put_along_axis(M, cols, tab[:, 0, :], axis=1)
    return M


# Bezier extraction

def bernstein(p, xt, nder=0):
    """Bernstein polynomials on the parent interval [-1, 1].

    ``B_a(t) = C(p, a) (1 - t)^(p - a) (1 + t)^a / 2^p``

    Returns
    -------
    ndarray, shape (npts, nder + 1, p + 1)
    """
    t = np.atleast_1d(np.asarray(xt, dtype=float))
    u = 0.5 * (t + 1.0)  # map to [0, 1]
    out = np.zeros((t.size, nder + 1, p + 1))
    for k in range(nder + 1):
        if k > p:
            break
        # d^k/du^k of Bernstein degree p = p!/(p-k)! * forward differences of degree p-k
        q = p - k
        low = np.stack([comb(q, a) * (1 - u) ** (q - a) * u**a for a in range(q + 1)], axis=1)
        coef = np.prod(np.arange(p - k + 1, p + 1, dtype=float)) if k else 1.0
        d = np.zeros((t.size, p + 1))
        for a in range(q + 1):
            for j in range(k + 1):
                d[:, a + j] += (-1) ** (k - j) * comb(k, j) * low[:, a]
        out[:, k, :] = coef * d * 0.5**k
    return out


def bezier_extract(kv):
    """Element extraction operators ``C^e`` with ``N^e = C^e B``.

    Parameters
    ----------
    kv : KnotVector
        Must be open.

    Returns
    -------
    ndarray, shape (n_el, p + 1, p + 1)
        Columns sum to one: the Bernstein basis and the B-spline basis are
        both partitions of unity.
    """
    kv.check_open()
    p = kv.degree
    U = np.r_[np.nan, kv.knots]  # 1-based view
    m = kv.knots.size
    ops = [np.eye(p + 1)]
    a, b = p + 1, p + 2
    nb = 0
    alphas = np.zeros(p + 1)
    while b < m:
        ops.append(np.eye(p + 1))
        i = b
        while b < m and U[b + 1] == U[b]:
            b += 1
        mult = b - i + 1
        if mult < p:
            numer = U[b] - U[a]
            for j in range(p, mult, -1):
                alphas[j - mult] = numer / (U[a + j] - U[a])
            r = p - mult
            C = ops[nb]
            for j in range(1, r + 1):
                save = r - j + 1
                s = mult + j
                for k in range(p + 1, s, -1):
                    al = alphas[k - s]
                    C[:, k - 1] = al * C[:, k - 1] + (1 - al) * C[:, k - 2]
                if b < m:
                    ops[nb + 1][save - 1:save + j, save - 1] = C[p - j:p + 1, p]
        nb += 1
        if b < m:
            a = b
            b += 1
    return np.array(ops[: kv.n_elements])


def bezier_extract_patch(patch):
    """Tensor-product extraction operators, element order x-fastest.

    Returns
    -------
    ndarray, shape (n_el, n_en, n_en)
    """
    per = [bezier_extract(kv) for kv in patch.knot_vectors]
    ops = per[0]
    for d in range(1, len(per)):
        ops = np.array([np.kron(c, o) for c in per[d] for o in ops])
    return ops


def invert_point(patch, x, tol=1e-12, maxit=50, n_seed=8):
    """Parameters of a physical point (Newton on ``x(xi) - x``).

    Raises
    ------
    DomainError
        No preimage inside the parameter domain.
    ConvergenceError
        Newton stalls above ``tol``.
    """
    x = np.asarray(x, dtype=float)
    dom = patch.domain
    grids = np.meshgrid(*[np.linspace(lo, hi, n_seed + 1) for lo, hi in dom], indexing="ij")
    seeds = np.column_stack([g.ravel() for g in grids])
    xi = seeds[np.argmin(np.linalg.norm(patch.eval(seeds) - x, axis=1))].copy()
    scale = max(1.0, np.abs(x).max())
    for _ in range(maxit):
        res = patch.eval(xi[None])[0] - x
        if np.linalg.norm(res) <= tol * scale:
            return xi
        J = patch.jacobian(xi[None])[0]
        xi = np.clip(xi - np.linalg.lstsq(J, res, rcond=None)[0], dom[:, 0], dom[:, 1])
    res = patch.eval(xi[None])[0] - x
    if np.linalg.norm(res) <= tol * scale:
        return xi
    if np.any(np.isclose(xi, dom[:, 0]) | np.isclose(xi, dom[:, 1])):
        raise DomainError(f"point {x.tolist()} lies outside the patch")
    raise ConvergenceError(f"point inversion stalled at residual {np.linalg.norm(res):.3e}")
