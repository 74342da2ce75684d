"""Tensor-product B-spline spaces on an affine box map.

Provides the scalar C^1-quadratic space (phi, v and pressure) and the
divergence-conforming velocity space (component k cubic/C^2 in direction k,
quadratic/C^1 elsewhere), together with per-element metrics, Gauss-Legendre
quadrature and precomputed basis tables used by assembly.
"""
import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class KnotVector:
    degree: int
    knots: np.ndarray
    open: bool = True

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", k)
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if np.any(np.diff(k) < 0):
            raise ValueError("knots must be nondecreasing")
        if self.open:
            p = self.degree
            if not (np.all(k[: p + 1] == k[0]) and np.all(k[-p - 1:] == k[-1])):
                raise ValueError("open knot vector needs end multiplicity degree+1")

    @classmethod
    def open_uniform(cls, degree, n_elements, a=-1.0, b=1.0):
        interior = np.linspace(a, b, n_elements + 1)[1:-1]
        knots = np.concatenate([[a] * (degree + 1), interior, [b] * (degree + 1)])
        return cls(degree=degree, knots=knots)

    @property
    def n_basis(self):
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self):
        return np.unique(self.knots)

    def find_span(self, x):
        p = self.degree
        n = self.n_basis
        span = int(np.searchsorted(self.knots, x, side="right")) - 1
        return min(max(span, p), n - 1)


def ders_basis_funs(kv, x, nderiv):
    """Nonzero basis functions and derivatives at x (Cox-de Boor / Piegl-
    Tiller A2.3).  Returns (span, ders) with ders[k, j] the k-th derivative
    of basis function span-degree+j."""
    p = kv.degree
    U = kv.knots
    i = kv.find_span(x)
    ndu = np.zeros((p + 1, p + 1))
    ndu[0, 0] = 1.0
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    for j in range(1, p + 1):
        left[j] = x - U[i + 1 - j]
        right[j] = U[i + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    ders = np.zeros((nderiv + 1, p + 1))
    ders[0, :] = ndu[:, p]
    a = np.zeros((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nderiv + 1):
            d = 0.0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    r = p
    for k in range(1, nderiv + 1):
        ders[k, :] *= r
        r *= p - k
    return i, ders


@dataclass(frozen=True)
class TensorSpace:
    kvs: tuple

    @property
    def d(self):
        return len(self.kvs)

    @property
    def shape(self):
        return tuple(kv.n_basis for kv in self.kvs)

    @property
    def n_basis(self):
        return int(np.prod(self.shape))

    @property
    def degrees(self):
        return tuple(kv.degree for kv in self.kvs)


@dataclass(frozen=True)
class SpaceTables:
    """Per-element basis tables: conn (nel, nloc) global indices; B0
    (nel, nloc, nq) values; B1 (..., d) physical gradients; B2 (..., d, d)
    physical Hessians."""
    space: TensorSpace
    conn: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    B2: np.ndarray


def _gauss_1d(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


class SplineSystem:
    """Discretization backbone on a box: spaces, quadrature, metrics, tables.

    box : sequence of (lo, hi) per direction; n_elems : elements per
    direction.  The parametric domain is (-1,1)^d with the affine map
    x_i = c_i + s_i xi_i.
    """

    def __init__(self, box, n_elems, nq1=4):
        self.box = tuple((float(a), float(b)) for a, b in box)
        self.n_elems = tuple(int(n) for n in n_elems)
        self.d = len(self.n_elems)
        if self.d not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        self.scales = np.array([(b - a) / 2.0 for a, b in self.box])
        self.shifts = np.array([(b + a) / 2.0 for a, b in self.box])
        if np.any(self.scales <= 0):
            raise ValueError("degenerate box")
        self.nq1 = int(nq1)
        self.n_el = int(np.prod(self.n_elems))
        self.nq = self.nq1 ** self.d

        self.scalar = TensorSpace(tuple(
            KnotVector.open_uniform(2, n) for n in self.n_elems))
        self.velocity = tuple(
            TensorSpace(tuple(
                KnotVector.open_uniform(3 if i == k else 2, self.n_elems[i])
                for i in range(self.d)))
            for k in range(self.d))

        # metric data (affine map: element-independent)
        self.detJ = float(np.prod(self.scales))
        self.G = np.diag(1.0 / self.scales**2)
        self.h_Q = float(np.sqrt(np.sum((2.0 / np.array(self.n_elems)) ** 2)))
        self.h_K = float(np.sqrt(self.h_Q**2 / self.d * np.sum(self.scales**2)))

        self._build_quadrature()
        self._tables = {}

    # ------------------------------------------------------------------ setup
    def _build_quadrature(self):
        xg, wg = _gauss_1d(self.nq1)
        self._qp1 = []   # per dir: (ne_i, nq1) parametric points
        self._qw1 = []
        for i, n in enumerate(self.n_elems):
            edges = np.linspace(-1.0, 1.0, n + 1)
            half = np.diff(edges) / 2.0
            mid = (edges[:-1] + edges[1:]) / 2.0
            self._qp1.append(mid[:, None] + half[:, None] * xg[None, :])
            self._qw1.append(half[:, None] * wg[None, :])
        # combined physical weight per (element, qp); uniform mesh: identical
        # across elements, stored per qp
        w = self._qw1[0][0]
        for i in range(1, self.d):
            w = np.multiply.outer(w, self._qw1[i][0])
        self.wq = w.reshape(-1) * self.detJ
        # physical coordinates of quadrature points, (n_el, nq, d)
        grids = []
        for i in range(self.d):
            grids.append(self.shifts[i] + self.scales[i] * self._qp1[i])
        self.qp_phys = np.empty((self.n_el, self.nq, self.d))
        eidx = np.stack(np.meshgrid(
            *[np.arange(n) for n in self.n_elems], indexing="ij"),
            axis=-1).reshape(self.n_el, self.d)
        qidx = np.stack(np.meshgrid(
            *[np.arange(self.nq1)] * self.d, indexing="ij"),
            axis=-1).reshape(self.nq, self.d)
        for i in range(self.d):
            self.qp_phys[:, :, i] = grids[i][eidx[:, i]][:, qidx[:, i]]
        self._eidx = eidx
        self._qidx = qidx

    def _tables_1d(self, kv, dirn):
        """(ne, p+1, nq1, 3): values, d/dx, d2/dx2 (physical) per element."""
        p = kv.degree
        ne = self.n_elems[dirn]
        out = np.zeros((ne, p + 1, self.nq1, 3))
        s = self.scales[dirn]
        for e in range(ne):
            for q in range(self.nq1):
                x = self._qp1[dirn][e, q]
                span, ders = ders_basis_funs(kv, x, 2)
                assert span - p == e
                out[e, :, q, 0] = ders[0]
                out[e, :, q, 1] = ders[1] / s
                out[e, :, q, 2] = ders[2] / s**2
        return out

    def tables(self, space):
        """Precomputed SpaceTables for a TensorSpace (cached)."""
        key = space.degrees
        if key in self._tables:
            return self._tables[key]
        t1 = [self._tables_1d(space.kvs[i], i) for i in range(self.d)]
        d = self.d
        nloc = int(np.prod([kv.degree + 1 for kv in space.kvs]))

        def combine(orders):
            T = t1[0][:, :, :, orders[0]]
            for i in range(1, d):
                A = t1[i][:, :, :, orders[i]]
                T = np.einsum("abc,xyz->axbycz", T, A)
                T = T.reshape(T.shape[0] * T.shape[1], T.shape[2] * T.shape[3],
                              T.shape[4] * T.shape[5])
            return T

        B0 = combine([0] * d)
        B1 = np.stack([combine([1 if i == j else 0 for i in range(d)])
                       for j in range(d)], axis=-1)
        B2 = np.empty(B0.shape + (d, d))
        for j in range(d):
            for k in range(d):
                orders = [0] * d
                orders[j] += 1
                orders[k] += 1
                B2[..., j, k] = combine(orders)
        # connectivity: first nonzero function of 1d element e is e for open
        # uniform knots, so local index l covers e_i .. e_i + p_i
        lidx = np.stack(np.meshgrid(
            *[np.arange(kv.degree + 1) for kv in space.kvs], indexing="ij"),
            axis=-1).reshape(nloc, d)
        gidx = self._eidx[:, None, :] + lidx[None, :, :]
        conn = np.ravel_multi_index(
            tuple(gidx[..., i] for i in range(d)), space.shape)
        tab = SpaceTables(space=space, conn=conn, B0=B0, B1=B1, B2=B2)
        self._tables[key] = tab
        return tab

    # ------------------------------------------------------------- operations
    def mesh_metrics(self, element):
        """(G, h_K, h_Q) for one element (identical across a uniform box)."""
        if not 0 <= element < self.n_el:
            raise IndexError(f"element {element} out of range")
        return self.G, self.h_K, self.h_Q

    def to_parametric(self, x):
        return (np.asarray(x, dtype=float) - self.shifts) / self.scales

    def element_of(self, xi):
        """Element index containing parametric point xi."""
        loc = np.clip(((np.asarray(xi) + 1.0) / 2.0 *
                       np.array(self.n_elems)).astype(int),
                      0, np.array(self.n_elems) - 1)
        return int(np.ravel_multi_index(tuple(loc), self.n_elems))

    def eval_basis(self, space, element, ref_pt):
        """Values plus physical first/second derivatives of the nonzero basis
        functions of ``space`` at parametric point ref_pt in ``element``.

        Returns (global_indices, values, grads (nloc, d), hess (nloc, d, d)).
        """
        if not 0 <= element < self.n_el:
            raise IndexError(f"element {element} out of range")
        ref_pt = np.asarray(ref_pt, dtype=float)
        emi = np.array(np.unravel_index(element, self.n_elems))
        lo = -1.0 + 2.0 * emi / np.array(self.n_elems)
        hi = lo + 2.0 / np.array(self.n_elems)
        if np.any(ref_pt < lo - 1e-12) or np.any(ref_pt > hi + 1e-12):
            raise ValueError("ref_pt outside element")
        per_dir = []
        for i in range(self.d):
            span, ders = ders_basis_funs(space.kvs[i], ref_pt[i], 2)
            ders = ders.copy()
            ders[1] /= self.scales[i]
            ders[2] /= self.scales[i] ** 2
            per_dir.append((span - space.kvs[i].degree, ders))
        d = self.d
        shapes = [space.kvs[i].degree + 1 for i in range(d)]
        nloc = int(np.prod(shapes))
        vals = np.ones(shapes)
        for i in range(d):
            sh = [1] * d
            sh[i] = shapes[i]
            vals = vals * per_dir[i][1][0].reshape(sh)
        grads = np.empty(tuple(shapes) + (d,))
        hess = np.empty(tuple(shapes) + (d, d))
        for j in range(d):
            g = np.ones(shapes)
            for i in range(d):
                sh = [1] * d
                sh[i] = shapes[i]
                g = g * per_dir[i][1][1 if i == j else 0].reshape(sh)
            grads[..., j] = g
            for k in range(d):
                h = np.ones(shapes)
                for i in range(d):
                    order = (i == j) + (i == k)
                    sh = [1] * d
                    sh[i] = shapes[i]
                    h = h * per_dir[i][1][order].reshape(sh)
                hess[..., j, k] = h
        starts = [per_dir[i][0] for i in range(d)]
        gidx = np.stack(np.meshgrid(
            *[starts[i] + np.arange(shapes[i]) for i in range(d)],
            indexing="ij"), axis=-1).reshape(nloc, d)
        glob = np.ravel_multi_index(tuple(gidx[:, i] for i in range(d)),
                                    space.shape)
        return (glob, vals.reshape(nloc), grads.reshape(nloc, d),
                hess.reshape(nloc, d, d))

    def eval_field(self, space, coeffs, points, nderiv=0):
        """Evaluate a spline field at physical points (N, d).

        nderiv 0 -> values (N,); 1 -> (values, grads (N, d));
        2 -> (values, grads, hess (N, d, d)).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = pts.shape[0]
        vals = np.zeros(n)
        grads = np.zeros((n, self.d))
        hess = np.zeros((n, self.d, self.d))
        coeffs = np.asarray(coeffs)
        for ip in range(n):
            xi = np.clip(self.to_parametric(pts[ip]), -1.0, 1.0)
            el = self.element_of(xi)
            glob, v, g, h = self.eval_basis(space, el, xi)
            c = coeffs[glob]
            vals[ip] = c @ v
            if nderiv >= 1:
                grads[ip] = np.einsum("l,ld->d", c, g)
            if nderiv >= 2:
                hess[ip] = np.einsum("l,ljk->jk", c, h)
        if nderiv == 0:
            return vals
        if nderiv == 1:
            return vals, grads
        return vals, grads, hess

    def mass_matrix(self, space):
        tab = self.tables(space)
        loc = np.einsum("elq,emq,q->elm", tab.B0, tab.B0, self.wq,
                        optimize=True)
        rows = np.broadcast_to(tab.conn[:, :, None], loc.shape).ravel()
        cols = np.broadcast_to(tab.conn[:, None, :], loc.shape).ravel()
        n = space.n_basis
        return sp.coo_matrix((loc.ravel(), (rows, cols)),
                             shape=(n, n)).tocsr()

    def project_l2(self, space, f):
        """L^2 projection of callable f(points (N,d)) -> (N,) onto space."""
        tab = self.tables(space)
        fv = np.asarray(f(self.qp_phys.reshape(-1, self.d)), dtype=float)
        fv = fv.reshape(self.n_el, self.nq)
        rhs_loc = np.einsum("elq,eq,q->el", tab.B0, fv, self.wq,
                            optimize=True)
        rhs = np.bincount(tab.conn.ravel(), weights=rhs_loc.ravel(),
                          minlength=space.n_basis)
        M = self.mass_matrix(space)
        return spla.spsolve(M.tocsc(), rhs)


@dataclass(frozen=True)
class DofLayout:
    """Block offsets of the global coefficient vector (u components, p, phi,
    v), strong constraints (normal velocity pinned to 0) and the pressure
    mean-zero descriptor."""
    d: int
    n_u: tuple
    n_p: int
    n_s: int
    constrained: np.ndarray      # bool mask over the full vector
    pressure_mean_row: np.ndarray  # integral weights over the pressure block

    @property
    def offsets(self):
        offs = [0]
        for n in self.n_u:
            offs.append(offs[-1] + n)
        offs.append(offs[-1] + self.n_p)
        offs.append(offs[-1] + self.n_s)
        offs.append(offs[-1] + self.n_s)
        return offs

    @property
    def n_total(self):
        return self.offsets[-1]

    def slice_u(self, k):
        o = self.offsets
        return slice(o[k], o[k + 1])

    @property
    def slice_p(self):
        o = self.offsets
        return slice(o[self.d], o[self.d + 1])

    @property
    def slice_phi(self):
        o = self.offsets
        return slice(o[self.d + 1], o[self.d + 2])

    @property
    def slice_v(self):
        o = self.offsets
        return slice(o[self.d + 2], o[self.d + 3])

    @property
    def free_idx(self):
        return np.flatnonzero(~self.constrained)

    @property
    def n_free(self):
        return int(np.sum(~self.constrained))

    def reduce(self, full):
        return np.asarray(full)[self.free_idx]

    def expand(self, free):
        out = np.zeros(self.n_total)
        out[self.free_idx] = free
        return out

    @property
    def layout_hash(self):
        desc = repr((self.d, self.n_u, self.n_p, self.n_s,
                     int(np.sum(self.constrained)))).encode()
        return int.from_bytes(hashlib.sha256(desc).digest()[:8], "little")


def build_dof_layout(system, bc="normal-zero"):
    """DofLayout for a SplineSystem.  bc: 'normal-zero' pins the normal
    velocity on every face (the only condition the experiments use); None
    leaves the velocity unconstrained."""
    if bc not in (None, "none", "normal-zero"):
        raise ValueError(f"unsupported bc {bc!r}")
    d = system.d
    n_u = tuple(v.n_basis for v in system.velocity)
    n_s = system.scalar.n_basis
    layout_shape = sum(n_u) + 3 * n_s
    constrained = np.zeros(layout_shape, dtype=bool)
    off = 0
    for k in range(d):
        shape = system.velocity[k].shape
        if bc == "normal-zero":
            idx = np.stack(np.meshgrid(
                *[np.arange(s) for s in shape], indexing="ij"),
                axis=-1).reshape(-1, d)
            pinned = (idx[:, k] == 0) | (idx[:, k] == shape[k] - 1)
            constrained[off:off + n_u[k]][pinned] = True
        off += n_u[k]
    # pressure mean-zero: integral of each pressure basis function
    tab = system.tables(system.scalar)
    ints = np.einsum("elq,q->el", tab.B0, system.wq)
    mean_row = np.bincount(tab.conn.ravel(), weights=ints.ravel(),
                           minlength=n_s)
    return DofLayout(d=d, n_u=n_u, n_p=n_s, n_s=n_s,
                     constrained=constrained, pressure_mean_row=mean_row)
