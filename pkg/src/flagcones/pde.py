"""Scalar reduction of the self-duality equation on desk-scale domains.

In a fixed conformal chart the unknown is u = log h1, the metric weight of
the diagonal harmonic metric diag(h1, 1, 1/h1), and the equation reads

    (1/4) lap u = |t|^2 e^u - e^(-2u),

with lap the flat five-point Laplacian: periodic on a torus, Dirichlet on
a disk.  The supported model data are a constant |t|^2 on the torus and a
monomial t = c z^k on the disk.  Reference solutions: on the torus with
|t|^2 = c^2 the constant u = -(2/3) log c; on the disk with t = 0 the
radial profile u = log(1 - x^2 - y^2), whose induced metric h1^(-2) has
curvature -4 under this normalization.

Diagnostics: ``beta_field`` is the pointwise ratio |t| e^(3u/2) (strictly
below 1 for solves in the admissible regime), ``curvature_field`` is the
Gaussian curvature of h1^(-2), and ``ratio_identity_residual`` checks the
elliptic identity satisfied by log of the ratio field away from zeros
of t.

A solve owns its grid exclusively during iteration; distinct solves are
independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg


class DomainError(ValueError):
    """Invalid domain or field data."""


class SolveError(RuntimeError):
    """Newton iteration failed to converge."""

    def __init__(self, message, residual_norm=None, iterations=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Torus(periods) or Disk(radius, boundary profile), n grid points per side."""

    kind: str
    n: int
    periods: tuple = (1.0, 1.0)
    radius: float = 0.8
    boundary: str = "reference"

    def __post_init__(self):
        if self.kind not in ("torus", "disk"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.n < 16:
            raise DomainError("n must be at least 16")
        if self.kind == "torus":
            if not all(p > 0 for p in self.periods):
                raise DomainError("periods must be positive")
        else:
            if not (self.radius > 0):
                raise DomainError("radius must be positive")
            if self.boundary == "reference" and self.radius >= 1.0:
                raise DomainError("reference boundary profile requires radius < 1")

    @property
    def shape(self) -> tuple:
        return (self.n, self.n)

    def spacings(self) -> tuple:
        if self.kind == "torus":
            return self.periods[0] / self.n, self.periods[1] / self.n
        h = 2.0 * self.radius / (self.n - 1)
        return h, h

    def coords(self):
        """Node coordinates (disk only)."""
        if self.kind != "disk":
            raise DomainError("coords: torus nodes carry no embedded coordinates")
        ax = np.linspace(-self.radius, self.radius, self.n)
        return np.meshgrid(ax, ax, indexing="ij")

    def interior_mask(self) -> np.ndarray:
        if self.kind == "torus":
            return np.ones(self.shape, dtype=bool)
        x, y = self.coords()
        return x**2 + y**2 < self.radius**2

    def data_ring_mask(self) -> np.ndarray:
        """Non-interior nodes adjacent to an interior node (disk Dirichlet ring)."""
        if self.kind == "torus":
            return np.zeros(self.shape, dtype=bool)
        inner = self.interior_mask()
        near = np.zeros_like(inner)
        near[1:, :] |= inner[:-1, :]
        near[:-1, :] |= inner[1:, :]
        near[:, 1:] |= inner[:, :-1]
        near[:, :-1] |= inner[:, 1:]
        return near & ~inner

    def reference_profile(self) -> np.ndarray:
        """The t = 0 radial solution log(1 - x^2 - y^2) on interior and ring nodes."""
        if self.kind != "disk":
            raise DomainError("reference profile is a disk datum")
        x, y = self.coords()
        rho2 = x**2 + y**2
        carrier = self.interior_mask() | self.data_ring_mask()
        out = np.zeros(self.shape)
        out[carrier] = np.log(1.0 - rho2[carrier])
        return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A grid field attached to a domain."""

    values: np.ndarray
    dom: DomainSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.dom.shape:
            raise DomainError(f"field shape {v.shape} != domain shape {self.dom.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field contains non-finite values")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def sup_interior(self) -> float:
        return float(np.abs(self.values[self.dom.interior_mask()]).max())


@dataclass(frozen=True, eq=False)
class HiggsDatum:
    """Prescribed |t|^2 data on the grid plus its analytic descriptor."""

    t_abs2: np.ndarray
    descriptor: str
    dom: DomainSpec

    def __post_init__(self):
        v = np.asarray(self.t_abs2, dtype=float)
        if v.shape != self.dom.shape:
            raise DomainError("datum shape does not match the domain")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("|t|^2 must be finite and nonnegative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "t_abs2", v)

    @classmethod
    def zero(cls, dom: DomainSpec) -> "HiggsDatum":
        return cls(np.zeros(dom.shape), "zero", dom)

    @classmethod
    def constant(cls, c: float, dom: DomainSpec) -> "HiggsDatum":
        return cls(np.full(dom.shape, float(c) ** 2), f"const:{float(c)!r}", dom)

    @classmethod
    def monomial(cls, c: float, k: int, dom: DomainSpec) -> "HiggsDatum":
        """t = c z^k on a disk, so |t|^2 = c^2 rho^(2k)."""
        if dom.kind != "disk":
            raise DomainError("monomial datum requires a disk domain")
        x, y = dom.coords()
        rho2 = x**2 + y**2
        return cls(float(c) ** 2 * rho2 ** int(k), f"monomial:{float(c)!r},{int(k)}", dom)

    @classmethod
    def tabulated(cls, t_abs2, dom: DomainSpec) -> "HiggsDatum":
        return cls(np.asarray(t_abs2, dtype=float), "tabulated", dom)


def _laplacian(values: np.ndarray, dom: DomainSpec) -> np.ndarray:
    hx, hy = dom.spacings()
    if dom.kind == "torus":
        return (
            (np.roll(values, 1, 0) + np.roll(values, -1, 0) - 2 * values) / hx**2
            + (np.roll(values, 1, 1) + np.roll(values, -1, 1) - 2 * values) / hy**2
        )
    out = np.zeros_like(values)
    out[1:-1, 1:-1] = (
        (values[2:, 1:-1] + values[:-2, 1:-1] - 2 * values[1:-1, 1:-1]) / hx**2
        + (values[1:-1, 2:] + values[1:-1, :-2] - 2 * values[1:-1, 1:-1]) / hy**2
    )
    out[~dom.interior_mask()] = 0.0
    return out


def residual(u: ScalarField, datum: HiggsDatum, dom: DomainSpec) -> ScalarField:
    """(1/4) lap u - |t|^2 e^u + e^(-2u), on interior nodes (zero elsewhere)."""
    if u.dom is not dom and u.dom.shape != dom.shape:
        raise DomainError("field and domain shapes disagree")
    v = u.values
    r = 0.25 * _laplacian(v, dom) - datum.t_abs2 * np.exp(v) + np.exp(-2.0 * v)
    mask = dom.interior_mask()
    out = np.zeros_like(r)
    out[mask] = r[mask]
    return ScalarField(out, dom)


@dataclass(frozen=True)
class SolveReport:
    residual_norm: float
    iterations: int
    beta_sup: float
    curvature_max: float
    converged: bool

    def to_json(self) -> dict:
        return {
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "beta_sup": self.beta_sup,
            "curvature_max": self.curvature_max,
            "converged": self.converged,
        }


def _interior_operator(dom: DomainSpec):
    """Sparse (1/4) lap on unknowns, plus index bookkeeping for the disk."""
    n = dom.n
    hx, hy = dom.spacings()
    if dom.kind == "torus":
        ex = np.ones(n)
        d1 = scipy.sparse.diags([ex[:-1], ex[:-1], -2 * ex], [-1, 1, 0], format="lil")
        d1[0, -1] = 1.0
        d1[-1, 0] = 1.0
        d1 = d1.tocsr()
        eye = scipy.sparse.identity(n, format="csr")
        lap = scipy.sparse.kron(d1 / hx**2, eye) + scipy.sparse.kron(eye, d1 / hy**2)
        return 0.25 * lap.tocsr(), None
    mask = dom.interior_mask()
    idx = -np.ones(dom.shape, dtype=int)
    order = np.argwhere(mask)
    for k, (i, j) in enumerate(order):
        idx[i, j] = k
    rows, cols, vals = [], [], []
    for k, (i, j) in enumerate(order):
        rows.append(k)
        cols.append(k)
        vals.append(-2.0 / hx**2 - 2.0 / hy**2)
        for di, dj, w in ((1, 0, 1 / hx**2), (-1, 0, 1 / hx**2), (0, 1, 1 / hy**2), (0, -1, 1 / hy**2)):
            ii, jj = i + di, j + dj
            if idx[ii, jj] >= 0:
                rows.append(k)
                cols.append(idx[ii, jj])
                vals.append(w)
    lap = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(len(order), len(order)))
    return 0.25 * lap, (mask, order)


def solve(
    dom: DomainSpec,
    datum: HiggsDatum,
    u0: ScalarField | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> tuple[ScalarField, SolveReport]:
    """Damped Newton solve of the scalar equation.

    The Jacobian (1/4) lap - diag(|t|^2 e^u + 2 e^(-2u)) is strictly
    negative definite, hence invertible.  On a disk the Dirichlet ring is
    held fixed at the values of u0 (the reference profile by default).
    """
    if u0 is None:
        base = np.zeros(dom.shape)
        if dom.kind == "disk":
            if dom.boundary != "reference":
                raise DomainError("disk solve without u0 requires the reference boundary")
            base = dom.reference_profile()
        u0 = ScalarField(base, dom)
    values = u0.values.copy()
    op, disk_info = _interior_operator(dom)
    mask = dom.interior_mask()

    def full_residual(v):
        r = 0.25 * _laplacian(v, dom) - datum.t_abs2 * np.exp(v) + np.exp(-2.0 * v)
        return r[mask]

    r = full_residual(values)
    rnorm = float(np.abs(r).max())
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if rnorm <= tol:
            break
        weight = datum.t_abs2[mask] * np.exp(values[mask]) + 2.0 * np.exp(-2.0 * values[mask])
        jac = op - scipy.sparse.diags(weight)
        step = scipy.sparse.linalg.spsolve(jac.tocsc(), -r)
        t = 1.0
        phi0 = float(np.dot(r, r))
        accepted = False
        for _ in range(40):
            trial = values.copy()
            trial[mask] = values[mask] + t * step
            rt = full_residual(trial)
            if float(np.dot(rt, rt)) <= (1.0 - 1e-4 * t) * phi0:
                values, r = trial, rt
                rnorm = float(np.abs(r).max())
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise SolveError(
                "line search stalled", residual_norm=rnorm, iterations=iterations
            )
    converged = rnorm <= tol
    if not converged:
        raise SolveError(
            f"no convergence in {max_iter} iterations (residual {rnorm:.3e})",
            residual_norm=rnorm,
            iterations=iterations,
        )
    u = ScalarField(values, dom)
    beta = beta_field(u, datum)
    curv = curvature_field(u, dom)
    report = SolveReport(
        residual_norm=rnorm,
        iterations=iterations,
        beta_sup=float(beta.values[mask].max()),
        curvature_max=float(curv.values[mask].max()),
        converged=True,
    )
    return u, report


def beta_field(u: ScalarField, datum: HiggsDatum) -> ScalarField:
    """Pointwise ratio |t| e^(3u/2)."""
    return ScalarField(np.sqrt(datum.t_abs2) * np.exp(1.5 * u.values), u.dom)


def max_principle_check(beta: ScalarField) -> dict:
    """Sup of the ratio field over interior nodes and strictness of the bound."""
    mask = beta.dom.interior_mask()
    vals = beta.values[mask]
    k = int(np.argmax(vals))
    where = np.argwhere(mask)[k]
    sup = float(vals[k])
    return {
        "sup": sup,
        "argmax": [int(where[0]), int(where[1])],
        "strict": bool(sup < 1.0),
    }


def curvature_field(u: ScalarField, dom: DomainSpec) -> ScalarField:
    """Gaussian curvature of the metric e^(-2u) |dz|^2: K = e^(2u) lap u."""
    k = np.exp(2.0 * u.values) * _laplacian(u.values, dom)
    mask = dom.interior_mask()
    out = np.zeros_like(k)
    out[mask] = k[mask]
    return ScalarField(out, dom)


def ratio_identity_residual(
    u: ScalarField, datum: HiggsDatum, dom: DomainSpec, rel_floor: float = 0.25
) -> float:
    """Sup defect of the elliptic identity for log of the ratio field.

    Away from zeros of t the log ratio satisfies
    (e^(2u)/2) lap log(beta) = 3 (beta^2 - 1); nodes where |t|^2 is below
    rel_floor times its maximum are excluded, as are nodes within one
    stencil step of excluded ones.
    """
    tmax = float(datum.t_abs2.max())
    if tmax <= 0:
        raise DomainError("ratio identity needs a nonzero datum")
    good = datum.t_abs2 > rel_floor * tmax
    good &= dom.interior_mask()
    beta = beta_field(u, datum)
    logb = np.zeros(dom.shape)
    logb[good] = np.log(beta.values[good])
    lhs = 0.5 * np.exp(2.0 * u.values) * _laplacian(logb, dom)
    rhs = 3.0 * (beta.values**2 - 1.0)
    core = good.copy()
    core[1:, :] &= good[:-1, :]
    core[:-1, :] &= good[1:, :]
    core[:, 1:] &= good[:, :-1]
    core[:, :-1] &= good[:, 1:]
    if dom.kind == "disk":
        inner = dom.interior_mask()
        core[1:, :] &= inner[:-1, :]
        core[:-1, :] &= inner[1:, :]
        core[:, 1:] &= inner[:, :-1]
        core[:, :-1] &= inner[:, 1:]
    if not np.any(core):
        raise DomainError("ratio identity: no usable nodes away from zeros of t")
    return float(np.abs(lhs[core] - rhs[core]).max())


def slice_dimensions(genus: int) -> tuple[int, int]:
    """Complex and real dimension of the deformation slice at the given genus."""
    if genus < 2:
        raise DomainError("genus must be at least 2")
    return 2 * genus - 2, 4 * genus - 4


@dataclass(frozen=True, eq=False)
class GaugeParams:
    """Coefficient tuples (t, delta, q) identifying a slice Higgs field."""

    t: tuple
    delta: tuple
    q: tuple

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(float(v) for v in np.atleast_1d(self.t)))
        object.__setattr__(self, "delta", tuple(float(v) for v in np.atleast_1d(self.delta)))
        object.__setattr__(self, "q", tuple(float(v) for v in np.atleast_1d(self.q)))


def gauge_equivalent(p1: GaugeParams, p2: GaugeParams, over_complex: bool = False) -> bool:
    """Parameter-level gauge equivalence.

    Over the reals the three coefficient tuples must agree exactly; over
    the complexification t is additionally identified with -t.
    """
    if len(p1.t) != len(p2.t) or len(p1.delta) != len(p2.delta) or len(p1.q) != len(p2.q):
        raise DomainError("gauge_equivalent: coefficient shapes disagree")
    if p1.delta != p2.delta or p1.q != p2.q:
        return False
    if p1.t == p2.t:
        return True
    if over_complex and p1.t == tuple(-v for v in p2.t):
        return True
    return False


def write_field_csv(path, field: ScalarField) -> None:
    """Row-major CSV: header line 'nx,ny', the shape, then one row per line."""
    nx, ny = field.values.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("nx,ny\n")
        fh.write(f"{nx},{ny}\n")
        for row in field.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_field_csv(path, dom: DomainSpec) -> ScalarField:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "nx,ny":
            raise DomainError(f"unexpected CSV header {header!r}")
        nx, ny = (int(v) for v in fh.readline().split(","))
        rows = [np.fromstring(line, sep=",") for line in fh if line.strip()]
    values = np.vstack(rows)
    if values.shape != (nx, ny):
        raise DomainError("CSV shape does not match its header")
    return ScalarField(values, dom)
