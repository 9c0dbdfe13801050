"""Pointwise nestedness certificate: model matrices, rank-one flag
projectors, commutator fields and the swept margin inequality.

Everything lives in the complexified frame of ``flags.FRAME_TO_COMPLEX``,
where real symmetric matrices become Hermitian matrices commuting with
the antidiagonal real structure J conj(.) J.  The flow direction is

    H(beta) = [[0, beta, 1], [conj(beta), 0, beta], [1, conj(beta), 0]],

with |beta| < 1 the admissible regime.  The certified quantity is the
pairing of the flow field against the co-orienting one-form of the
boundary cylinder, swept over the modulus and phase of beta, the cylinder
parameter d and the fiber phase z.

The commutator definition of the fields is the primitive object and is
cross-checked against closed forms on every sweep cell; margins are
evaluated through the (algebraically identical) closed forms in a
cancellation-safe order, which is what makes the exact vanishing at
beta = 0 visible at the 1e-12 level.  The pairing keeps a constant sign
across the admissible regime (the unstated co-orientation); the margin
uses its absolute value and the sweep asserts the sign constancy.

Pure evaluation; sweep cells are independent.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .flags import (
    FRAME_TO_COMPLEX,
    Flag,
    GeometryError,
    GroupElem,
    ProjectiveCovector,
    ProjectivePoint,
    TangentDir,
    act_on_flag,
)
from .cones import Multicone, boundary_chart, _classify_position, _position

#: Antidiagonal real structure: admissible matrices satisfy J conj(M) J = M.
REAL_STRUCTURE = np.array(
    [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]], dtype=complex
)
REAL_STRUCTURE.setflags(write=False)

_SQRT2 = math.sqrt(2.0)

#: Sign of the pairing Im(alpha(M1) conj(alpha(M2))) across the admissible
#: regime; fixed once by evaluation at beta = 0, d = 0, z = 1.
PAIRING_SIGN = -1.0

#: Sign of the derivative of the horofunction along the pointing field,
#: calibrated once against ``flags.busemann`` at the identity.
POINTING_DERIVATIVE_SIGN = +1.0


class RegimeError(GeometryError):
    """Raised when |beta| leaves the admissible regime."""


def real_structure_defect(mat) -> float:
    """max |J conj(M) J - M|; zero for admissible matrices."""
    m = np.asarray(mat, dtype=complex)
    return float(np.abs(REAL_STRUCTURE @ np.conj(m) @ REAL_STRUCTURE - m).max())


@dataclass(frozen=True, eq=False)
class HermitianMat:
    """A Hermitian 3x3 matrix compatible with the antidiagonal real structure."""

    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=complex)
        if m.shape != (3, 3):
            raise GeometryError(f"HermitianMat: expected 3x3, got {m.shape}")
        scale = max(1.0, float(np.abs(m).max()))
        if float(np.abs(m - m.conj().T).max()) > 1e-12 * scale:
            raise GeometryError("HermitianMat: not Hermitian")
        if real_structure_defect(m) > 1e-12 * scale:
            raise GeometryError("HermitianMat: violates the real structure")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)


@dataclass(frozen=True, eq=False)
class NilpotentFlagMat:
    """A rank-one square-zero trace-free matrix encoding a flag."""

    mat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=complex)
        if m.shape != (3, 3):
            raise GeometryError(f"NilpotentFlagMat: expected 3x3, got {m.shape}")
        s = np.linalg.svd(m, compute_uv=False)
        if s[0] <= 0 or s[1] > 1e-10 * s[0]:
            raise GeometryError("NilpotentFlagMat: not rank one")
        if float(np.abs(m @ m).max()) > 1e-12 * max(1.0, s[0] ** 2):
            raise GeometryError("NilpotentFlagMat: square is not zero")
        if abs(complex(np.trace(m))) > 1e-12 * max(1.0, s[0]):
            raise GeometryError("NilpotentFlagMat: trace is not zero")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)


def _check_beta(beta) -> complex:
    b = complex(beta)
    if not (abs(b) < 1.0):
        raise RegimeError(f"|beta| = {abs(b)} is outside the admissible regime")
    return b


def flow_matrix(beta) -> np.ndarray:
    """The complexified flow direction H(beta)."""
    b = _check_beta(beta)
    bb = np.conj(b)
    return np.array([[0, b, 1], [bb, 0, b], [1, bb, 0]], dtype=complex)


def _ed_closed(d: float) -> np.ndarray:
    ch, sh = math.cosh(d), math.sinh(d)
    return np.array(
        [[ch, 0, -1j * sh], [0, 1, 0], [1j * sh, 0, ch]], dtype=complex
    )


def _hprime_closed(beta: complex, d) -> np.ndarray:
    ch, sh = np.cosh(d), np.sinh(d)
    b, bb = beta, np.conj(beta)
    c2 = ch * ch + sh * sh
    return np.array(
        [
            [2j * ch * sh, b * ch + 1j * bb * sh, c2],
            [bb * ch + 1j * b * sh, 0.0 * ch, b * ch - 1j * bb * sh],
            [c2, bb * ch - 1j * b * sh, -2j * ch * sh],
        ],
        dtype=complex,
    )


_H0 = np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]], dtype=complex)
_H0.setflags(write=False)
_H0PERP = np.array([[0, 0, -1j], [0, 0, 0], [1j, 0, 0]], dtype=complex)
_H0PERP.setflags(write=False)


@dataclass(frozen=True)
class ModelMatrices:
    h: HermitianMat
    h0: HermitianMat
    h0perp: HermitianMat
    ed: np.ndarray
    hprime: np.ndarray


def model_matrices(beta, d: float) -> ModelMatrices:
    """The five model matrices at (beta, d): H, H0, H0perp, e^(d H0perp), H'.

    H' is the conjugate Ed^-1 H Ed, returned in closed form; it satisfies
    the real structure but is not Hermitian (Ed is not unitary).  The
    conjugation identity is exercised against a matrix exponential oracle
    in the tests.
    """
    b = _check_beta(beta)
    mm = ModelMatrices(
        h=HermitianMat(flow_matrix(b)),
        h0=HermitianMat(_H0),
        h0perp=HermitianMat(_H0PERP),
        ed=_ed_closed(float(d)),
        hprime=_hprime_closed(b, float(d)),
    )
    for m in (mm.ed, mm.hprime):
        if real_structure_defect(m) > 1e-12 * max(1.0, float(np.abs(m).max())):
            raise GeometryError("model_matrices: real structure violated")
    return mm


def projector_pi(z) -> NilpotentFlagMat:
    """The rank-one flag matrix of the fiber flag at unit phase z."""
    zc = complex(z)
    if abs(abs(zc) - 1.0) > 1e-12:
        raise GeometryError(f"projector_pi: |z| = {abs(zc)} != 1")
    zb = np.conj(zc)
    m = 0.25 * np.array(
        [
            [-1.0, _SQRT2 * zc, -zc * zc],
            [-_SQRT2 * zb, 2.0, -_SQRT2 * zc],
            [-zb * zb, _SQRT2 * zb, -1.0],
        ],
        dtype=complex,
    )
    return NilpotentFlagMat(m)


def projector_flag(pi: NilpotentFlagMat) -> Flag:
    """The real-coordinate flag encoded by a rank-one flag matrix."""
    m = pi.mat
    cols = np.linalg.norm(m, axis=0)
    v = m[:, int(np.argmax(cols))]
    rows = np.linalg.norm(m, axis=1)
    w = m[int(np.argmax(rows)), :]
    x = np.linalg.inv(FRAME_TO_COMPLEX) @ v
    y = FRAME_TO_COMPLEX.T @ w
    x = x / x[int(np.argmax(np.abs(x)))]
    y = y / y[int(np.argmax(np.abs(y)))]
    if max(float(np.abs(x.imag).max()), float(np.abs(y.imag).max())) > 1e-9:
        raise GeometryError("projector_flag: matrix does not encode a real flag")
    return Flag(ProjectivePoint(x.real), ProjectiveCovector(y.real))


def pointing_vector(pi: NilpotentFlagMat) -> HermitianMat:
    """The normal field pi pi* - pi* pi attached to a fiber flag.

    Hermitian, trace-free, orthogonal to the plane span(H0, H0perp) under
    the trace pairing.  The horofunction of the encoded flag increases
    along its real-coordinate image at the identity
    (POINTING_DERIVATIVE_SIGN); the descent direction is its negative.
    """
    p = pi.mat
    ph = p.conj().T
    return HermitianMat(p @ ph - ph @ p)


def _field_from(a: np.ndarray, p: np.ndarray) -> np.ndarray:
    """[a,p] pi* + pi [a,p]* - [a,p]* pi - pi* [a,p], batched over leading axes."""
    c = a @ p - p @ a
    ph = np.conj(np.swapaxes(p, -1, -2))
    ch = np.conj(np.swapaxes(c, -1, -2))
    return c @ ph + p @ ch - ch @ p - ph @ c


def commutator_fields(beta, d: float, z) -> tuple[HermitianMat, HermitianMat]:
    """The two commutator fields at (beta, d, z): flow against H' and H0perp."""
    b = _check_beta(beta)
    p = projector_pi(z).mat
    m1 = _field_from(_hprime_closed(b, float(d)), p)
    m2 = _field_from(_H0PERP, p)
    return HermitianMat(m1), HermitianMat(m2)


def alpha_coefficient(mat) -> complex:
    """The corner coefficient pairing a Hermitian field against the cylinder.

    Reads the (3,1) entry; for Hermitian fields the (1,3) entry is its
    complex conjugate, so the pairing modulus is unaffected by the choice.
    """
    m = mat.mat if isinstance(mat, HermitianMat) else np.asarray(mat)
    return complex(m[2, 0])


def alpha_closed_forms(beta, d: float, z) -> tuple[complex, complex]:
    """Closed forms of the corner coefficients of the two commutator fields."""
    b = _check_beta(beta)
    zc = complex(z)
    zb = np.conj(zc)
    ch, sh = math.cosh(d), math.sinh(d)
    a1 = (3.0 - zb**4) * (ch * ch + sh * sh) / 4.0 - _SQRT2 * 1j * b * zb * sh
    a2 = (3.0 + zb**4) * 1j / 4.0
    return complex(a1), complex(a2)


def _stable_pairing_parts(beta: complex, d, z):
    """Return (Q2, A, B) with pairing P = Q2*A + sinh(d)*B.

    With |z| = 1 the fourth-power term has unit modulus exactly, so the
    constant part A of the scaled pairing is -1/2 identically; evaluating
    it as the algebraic constant keeps the beta = 0 cancellation exact
    instead of carrying cosh(2d)-scaled roundoff.
    """
    z = np.asarray(z, dtype=complex)
    d = np.asarray(d, dtype=float)
    q2 = np.cosh(2.0 * d)
    a = -0.5
    b_term = -(_SQRT2 / 4.0) * np.imag(3.0 * beta * np.conj(z) + beta * z**3)
    return q2, a, b_term


def certificate_margin(beta, d: float, z) -> tuple[float, float]:
    """Margin and eta value of the swept inequality at one grid cell.

    P is the pairing Im(alpha(M1) conj(alpha(M2))) of the two commutator
    fields (evaluated through the cross-checked closed forms in a
    cancellation-safe order);
    margin = |P| - ((cosh^2 d + sinh^2 d)/2)(1 - |beta|), eta = |P|/cosh^2 d.
    Both are nonnegative-to-roundoff on the admissible regime, margin
    vanishing identically at beta = 0.
    """
    b = _check_beta(beta)
    q2, a, bt = _stable_pairing_parts(b, float(d), complex(z))
    p_scaled = a + math.sinh(d) / float(q2) * float(bt)
    margin = float(q2) * (abs(p_scaled) - 0.5 * (1.0 - abs(b)))
    eta = float(q2) * abs(p_scaled) / math.cosh(d) ** 2
    return margin, eta


@dataclass(frozen=True)
class CertGrid:
    """Sweep grid: beta moduli and phases, fiber phases, cylinder range."""

    beta_moduli: tuple
    beta_phases: int = 16
    z_phases: int = 64
    d_max: float = 5.0
    d_step: float = 0.05

    def __post_init__(self):
        moduli = tuple(float(m) for m in self.beta_moduli)
        for m in moduli:
            if not (0.0 <= m < 1.0):
                raise RegimeError(f"beta modulus {m} outside [0, 1)")
        if self.beta_phases < 1 or self.z_phases < 1:
            raise GeometryError("CertGrid: counts must be positive")
        if self.d_max <= 0 or self.d_step <= 0:
            raise GeometryError("CertGrid: d range must be positive")
        object.__setattr__(self, "beta_moduli", moduli)

    def d_values(self) -> np.ndarray:
        n = int(round(2 * self.d_max / self.d_step))
        return np.linspace(-self.d_max, self.d_max, n + 1)

    def z_values(self) -> np.ndarray:
        return np.exp(1j * np.linspace(0.0, 2 * math.pi, self.z_phases, endpoint=False))

    def beta_values(self):
        phases = np.exp(1j * np.linspace(0.0, 2 * math.pi, self.beta_phases, endpoint=False))
        return [m * ph for m in self.beta_moduli for ph in phases]

    def describe(self) -> dict:
        return {
            "beta_moduli": list(self.beta_moduli),
            "beta_phases": self.beta_phases,
            "z_phases": self.z_phases,
            "d_max": self.d_max,
            "d_step": self.d_step,
        }


def default_grid() -> CertGrid:
    moduli = tuple(np.round(np.arange(0.0, 0.95, 0.1), 10)) + (0.95,)
    return CertGrid(beta_moduli=moduli)


@dataclass(frozen=True)
class CertReport:
    """Result of a sweep: minima, argmin, oracle agreement, side bounds."""

    min_margin: float
    min_eta: float
    argmin: dict
    oracle_dev: float
    grid: dict
    beta0_max_abs_margin: float
    eta_floor_gap_min: float
    bounded_surrogate_max: float
    pairing_sign: float
    sign_constant: bool
    n_cells: int
    runtime_s: float

    def to_json(self) -> dict:
        return {
            "min_margin": self.min_margin,
            "min_eta": self.min_eta,
            "argmin": dict(self.argmin),
            "oracle_dev": self.oracle_dev,
            "grid": dict(self.grid),
            "beta0_max_abs_margin": self.beta0_max_abs_margin,
            "eta_floor_gap_min": self.eta_floor_gap_min,
            "bounded_surrogate_max": self.bounded_surrogate_max,
            "pairing_sign": self.pairing_sign,
            "sign_constant": self.sign_constant,
            "n_cells": self.n_cells,
            "runtime_s": self.runtime_s,
        }


def _oracle_alphas_batch(beta: complex, d: np.ndarray, z: np.ndarray):
    """Corner coefficients of the commutator fields over a (d, z) block."""
    nd, nz = d.size, z.size
    hp = np.empty((nd, 1, 3, 3), dtype=complex)
    for i, dv in enumerate(d):
        hp[i, 0] = _hprime_closed(beta, float(dv))
    p = np.empty((1, nz, 3, 3), dtype=complex)
    for j, zv in enumerate(z):
        p[0, j] = projector_pi(zv).mat
    p = np.broadcast_to(p, (nd, nz, 3, 3))
    m1 = _field_from(np.broadcast_to(hp, (nd, nz, 3, 3)), p)
    m2 = _field_from(np.broadcast_to(_H0PERP, (nd, nz, 3, 3)), p)
    return m1[..., 2, 0], m2[..., 2, 0]


def sweep(grid: CertGrid) -> CertReport:
    """Evaluate the certificate over the grid and record minima and checks.

    Margins and eta values come from the stable closed-form path; on every
    cell the commutator-oracle corner coefficients are compared against
    the closed forms and the worst deviation is reported.
    """
    t0 = time.perf_counter()
    d = grid.d_values()
    z = grid.z_values()
    zb = np.conj(z)
    sh = np.sinh(d)[:, None]
    ch2 = np.cosh(d)[:, None] ** 2
    q2 = np.cosh(2.0 * d)[:, None]
    u = zb[None, :] ** 4
    a_part = -0.5
    a1c_base = (3.0 - u) * q2 / 4.0

    min_margin = math.inf
    min_eta = math.inf
    argmin = {}
    oracle_dev = 0.0
    beta0_max = 0.0
    eta_floor_gap = math.inf
    surrogate_max = -math.inf
    sign_constant = True
    n_cells = 0

    for beta in grid.beta_values():
        babs = abs(beta)
        b_part = -(_SQRT2 / 4.0) * np.imag(3.0 * beta * zb + beta * z**3)[None, :]
        p_scaled = a_part + sh / q2 * b_part
        sign_constant &= bool(np.all(p_scaled < 0.0))
        margins = q2 * (np.abs(p_scaled) - 0.5 * (1.0 - babs))
        etas = q2 * np.abs(p_scaled) / ch2
        n_cells += margins.size

        a1o, a2o = _oracle_alphas_batch(beta, d, z)
        a1c = a1c_base - _SQRT2 * 1j * beta * zb[None, :] * sh
        a2c = np.broadcast_to((3.0 + u) * 1j / 4.0, a1c.shape)
        dev = max(float(np.abs(a1o - a1c).max()), float(np.abs(a2o - a2c).max()))
        oracle_dev = max(oracle_dev, dev)

        i, j = np.unravel_index(int(np.argmin(margins)), margins.shape)
        if margins[i, j] < min_margin:
            min_margin = float(margins[i, j])
            argmin = {
                "beta_re": float(np.real(beta)),
                "beta_im": float(np.imag(beta)),
                "d": float(d[i]),
                "z_phase": float(np.angle(z[j])),
            }
        min_eta = min(min_eta, float(etas.min()))
        eta_floor_gap = min(eta_floor_gap, float((etas - 0.5 * (1.0 - babs)).min()))
        surrogate_max = max(surrogate_max, float(np.abs(p_scaled).max()))
        if babs == 0.0:
            beta0_max = max(beta0_max, float(np.abs(margins).max()))

    return CertReport(
        min_margin=min_margin,
        min_eta=min_eta,
        argmin=argmin,
        oracle_dev=oracle_dev,
        grid=grid.describe(),
        beta0_max_abs_margin=beta0_max,
        eta_floor_gap_min=eta_floor_gap,
        bounded_surrogate_max=surrogate_max,
        pairing_sign=PAIRING_SIGN,
        sign_constant=sign_constant,
        n_cells=n_cells,
        runtime_s=time.perf_counter() - t0,
    )


def flow_generator(beta) -> TangentDir:
    """Real-coordinate flow direction: the frame conjugate of H(beta)."""
    h = flow_matrix(beta)
    cinv = np.linalg.inv(FRAME_TO_COMPLEX)
    a = cinv @ h @ FRAME_TO_COMPLEX
    if float(np.abs(a.imag).max()) > 1e-12:
        raise GeometryError("flow_generator: conjugate is not real")
    return TangentDir(0.5 * (a.real + a.real.T))


def pushforward_check(
    beta,
    t_step: float,
    n_samples: int = 512,
    tol: float = 1e-6,
    loglam_range: tuple[float, float] = (-6.0, 6.0),
) -> dict:
    """Flow boundary-cylinder flags and classify them against the model cone.

    Samples the chart of the model cone's boundary cylinder, pushes each
    flag forward along exp(t H(beta)) and classifies the image.  For
    t_step > 0 and |beta| < 1 every sample lands strictly inside; the
    report records counts and the minimal signed displacement in the
    plane coordinate.
    """
    b = _check_beta(beta)
    if t_step < 0 or not np.isfinite(t_step):
        raise GeometryError("pushforward_check: t_step must be nonnegative")
    cone = Multicone.model(0.0)
    n_lam = max(2, int(math.isqrt(n_samples)))
    n_theta = max(2, int(math.ceil(n_samples / n_lam)))
    flags = []
    for ll in np.linspace(loglam_range[0], loglam_range[1], n_lam):
        for th in np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False):
            flags.append(boundary_chart(cone, float(th), math.exp(float(ll))))
            if len(flags) == n_samples:
                break
        if len(flags) == n_samples:
            break
    flow = GroupElem(scipy.linalg.expm(t_step * flow_generator(b).mat))
    counts = {"inside": 0, "boundary": 0, "outside": 0}
    min_disp = math.inf
    for f in flags:
        image = act_on_flag(flow, f)
        kind, value = _position(cone, image)
        if kind == "interior":
            min_disp = min(min_disp, value)
        counts[_classify_position(kind, value, tol)] += 1
    return {
        "beta_re": float(np.real(b)),
        "beta_im": float(np.imag(b)),
        "t_step": float(t_step),
        "samples": len(flags),
        "inside": counts["inside"],
        "boundary": counts["boundary"],
        "outside": counts["outside"],
        "all_inside": counts["inside"] == len(flags),
        "min_displacement": (min_disp if math.isfinite(min_disp) else 0.0),
    }
