"""Levy process models: triplets, classification, schedules and simulation.

A process is described by a triplet (gamma, sigma2, nu) in the cutoff
convention that compensates jumps with |y| < 1.  The jump measure nu is a
finite list of atoms plus one-sided density pieces, each either a power law
c/|y|^(1+alpha) or a constant, so tails, small-jump moments, the balanced-
small-jumps limit L and the truncation schedule are all closed form.

Two simulation engines share the same samplers:

* :func:`simulate_paths` builds one path object at a time with exact jump
  epochs interlaced into the time grid (plus an optional Brownian-bridge
  refinement of the running maximum), which is what path-level invariant
  checks and CSV dumps want.
* :func:`skeleton_chunks` vectorizes the grid-restricted skeleton across
  paths, folding jumps into grid cells.  The skeleton has exact marginals
  at grid times and i.i.d. increments, which is what the Monte Carlo
  batteries and the time-reversal two-sample check want.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Union

import numpy as np
from scipy import integrate
from scipy.stats import levy_stable

from .duality import CoupledPathPair
from .errors import PreconditionError, ResourceLimitError
from .seeding import STREAM_BRIDGE, STREAM_PATHS, STREAM_SKELETON, substream

CLASSIFY_TOL = 1e-12
QUAD_TOL = 1e-10
RATE_GUARD = 1e8
EPS_BOUND_BASE = 8.0


# ---------------------------------------------------------------------------
# measure representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasureAtom:
    y: float
    mass: float

    def __post_init__(self):
        if self.y == 0:
            raise ValueError("atoms must sit away from 0")
        if not self.mass > 0:
            raise ValueError(f"atom mass must be positive, got {self.mass}")


@dataclass(frozen=True)
class PowerLawPiece:
    """Density c / |y|^(1+alpha) on the signed interval (lo, hi), one-sided."""

    c: float
    alpha: float
    lo: float
    hi: float

    def __post_init__(self):
        _check_interval(self.lo, self.hi)
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        a, b = self.abs_interval()
        if a == 0 and not self.alpha < 2:
            raise ValueError("power piece touching 0 needs alpha < 2 for integrability")
        if math.isinf(b) and not self.alpha > 0:
            raise ValueError("unbounded power piece needs alpha > 0 for finite tails")

    @property
    def side(self) -> int:
        return 1 if self.lo >= 0 else -1

    def abs_interval(self) -> tuple[float, float]:
        if self.side > 0:
            return self.lo, self.hi
        return abs(self.hi), abs(self.lo)

    def moment(self, moment: int, a: float, b: float) -> float:
        """integral of |y|^moment * c |y|^(-1-alpha) over |y| in (a, b) within the piece."""
        pa, pb = self.abs_interval()
        a, b = max(a, pa), min(b, pb)
        if a >= b:
            return 0.0
        return _power_moment(self.c, self.alpha, moment, a, b)

    def density_abs(self, v: float) -> float:
        pa, pb = self.abs_interval()
        return self.c * v ** (-1.0 - self.alpha) if pa < v < pb else 0.0

    def mirrored(self) -> "PowerLawPiece":
        return PowerLawPiece(self.c, self.alpha, -self.hi, -self.lo)


@dataclass(frozen=True)
class ConstantPiece:
    """Constant density c on the signed interval (lo, hi), one-sided."""

    c: float
    lo: float
    hi: float

    def __post_init__(self):
        _check_interval(self.lo, self.hi)
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if math.isinf(self.lo) or math.isinf(self.hi):
            raise ValueError("constant pieces must be bounded")

    @property
    def side(self) -> int:
        return 1 if self.lo >= 0 else -1

    def abs_interval(self) -> tuple[float, float]:
        if self.side > 0:
            return self.lo, self.hi
        return abs(self.hi), abs(self.lo)

    def moment(self, moment: int, a: float, b: float) -> float:
        pa, pb = self.abs_interval()
        a, b = max(a, pa), min(b, pb)
        if a >= b:
            return 0.0
        e = moment + 1
        return self.c * (b**e - a**e) / e

    def density_abs(self, v: float) -> float:
        pa, pb = self.abs_interval()
        return self.c if pa < v < pb else 0.0

    def mirrored(self) -> "ConstantPiece":
        return ConstantPiece(self.c, -self.hi, -self.lo)


Piece = Union[PowerLawPiece, ConstantPiece]


def _check_interval(lo: float, hi: float) -> None:
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    if lo < 0 < hi:
        raise ValueError(f"piece interval ({lo}, {hi}) must not contain 0")


def _power_moment(c: float, alpha: float, moment: int, a: float, b: float) -> float:
    """integral of c * v^(moment - 1 - alpha) dv over (a, b), allowing a=0, b=inf."""
    e = moment - alpha
    if e == 0:
        if a == 0 or math.isinf(b):
            return math.inf
        return c * math.log(b / a)
    be = 0.0 if (math.isinf(b) and e < 0) else (math.inf if math.isinf(b) else b**e)
    ae = 0.0 if (a == 0 and e > 0) else (math.inf if a == 0 else a**e)
    if math.isinf(be) or math.isinf(ae):
        return math.inf
    return c * (be - ae) / e


@dataclass(frozen=True)
class LevyMeasure:
    atoms: tuple[MeasureAtom, ...] = ()
    pieces: tuple[Piece, ...] = ()

    def is_finite(self) -> bool:
        return not math.isinf(self.total_mass())

    def total_mass(self) -> float:
        m = sum(a.mass for a in self.atoms)
        return m + sum(p.moment(0, 0.0, math.inf) for p in self.pieces)

    def tail_above(self, a: float) -> float:
        """nu((a, inf)) for a >= 0."""
        m = sum(at.mass for at in self.atoms if at.y > a)
        return m + sum(
            p.moment(0, a, math.inf) for p in self.pieces if p.side > 0
        )

    def tail_below(self, a: float) -> float:
        """nu((-inf, -a)) for a >= 0."""
        m = sum(at.mass for at in self.atoms if at.y < -a)
        return m + sum(
            p.moment(0, a, math.inf) for p in self.pieces if p.side < 0
        )

    def atom_mass_at(self, y: float) -> float:
        return sum(a.mass for a in self.atoms if a.y == y)

    def density_pos(self, v: float) -> float:
        return sum(p.density_abs(v) for p in self.pieces if p.side > 0)

    def density_neg(self, v: float) -> float:
        return sum(p.density_abs(v) for p in self.pieces if p.side < 0)

    def second_moment_below(self, eps: float) -> float:
        """integral of y^2 over 0 < |y| < eps."""
        m = sum(a.mass * a.y**2 for a in self.atoms if abs(a.y) < eps)
        return m + sum(p.moment(2, 0.0, eps) for p in self.pieces)

    def band_mean(self, lo: float, hi: float) -> float:
        """integral of y over lo <= |y| < hi (signed)."""
        m = sum(a.mass * a.y for a in self.atoms if lo <= abs(a.y) < hi)
        return m + sum(p.side * p.moment(1, lo, hi) for p in self.pieces)

    def restrict(self, lo: float, hi: float) -> "LevyMeasure":
        """Sub-measure carried by lo <= |y| < hi."""
        atoms = tuple(a for a in self.atoms if lo <= abs(a.y) < hi)
        pieces = []
        for p in self.pieces:
            pa, pb = p.abs_interval()
            a, b = max(pa, lo), min(pb, hi)
            if a < b:
                if p.side > 0:
                    pieces.append(replace(p, lo=a, hi=b))
                else:
                    pieces.append(replace(p, lo=-b, hi=-a))
        return LevyMeasure(atoms, tuple(pieces))

    def dual(self) -> "LevyMeasure":
        return LevyMeasure(
            tuple(MeasureAtom(-a.y, a.mass) for a in self.atoms),
            tuple(p.mirrored() for p in self.pieces),
        )

    def breakpoints(self) -> list[float]:
        pts = {abs(a.y) for a in self.atoms}
        for p in self.pieces:
            a, b = p.abs_interval()
            if a > 0:
                pts.add(a)
            if not math.isinf(b):
                pts.add(b)
        return sorted(pts)

    def validate_square_integrable(self) -> None:
        if math.isinf(self.second_moment_below(1.0)) or math.isinf(self.tail_above(1.0) + self.tail_below(1.0)):
            raise ValueError("measure fails the (y^2 ^ 1) integrability requirement")


@dataclass(frozen=True)
class LevyTriplet:
    gamma: float
    sigma2: float
    nu: LevyMeasure = LevyMeasure()

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be nonnegative, got {self.sigma2}")
        self.nu.validate_square_integrable()

    def dual(self) -> "LevyTriplet":
        return LevyTriplet(-self.gamma, self.sigma2, self.nu.dual())


# ---------------------------------------------------------------------------
# characteristic exponent
# ---------------------------------------------------------------------------


def _quad(fn, a, b, **kw):
    val, err = integrate.quad(fn, a, b, epsabs=1e-13, epsrel=1e-12, limit=400, **kw)
    if err > QUAD_TOL:
        raise ArithmeticError(
            f"quadrature error estimate {err:.2e} exceeds {QUAD_TOL} on ({a}, {b})"
        )
    return val


def _piece_exponent_positive(c: float, alpha_or_none, dens, a: float, b: float, u: float,
                             m2) -> complex:
    """LK integral of a positive-side density over (a, b) at frequency u.

    dens(v) is the density, m2(lo, hi) its second moment; the compensated
    region is (a, min(b,1)), the raw region (max(a,1), b).
    """
    out = 0.0 + 0.0j
    s = min(b, 1.0)
    if a < s:
        re = _quad(lambda y: (math.cos(u * y) - 1 + 0.5 * u * u * y * y) * dens(y), a, s)
        re -= 0.5 * u * u * m2(a, s)
        im = _quad(lambda y: (math.sin(u * y) - u * y) * dens(y), a, s)
        out += complex(re, im)
    lo = max(a, 1.0)
    if lo < b:
        if math.isinf(b):
            if alpha_or_none is None:
                raise AssertionError("unbounded constant piece")
            re_cos = _quad(dens, lo, np.inf, weight="cos", wvar=u)
            tail_mass = _power_moment(c, alpha_or_none, 0, lo, b)
            re = re_cos - tail_mass
            im = _quad(dens, lo, np.inf, weight="sin", wvar=u)
        else:
            re = _quad(lambda y: (math.cos(u * y) - 1) * dens(y), lo, b)
            im = _quad(lambda y: math.sin(u * y) * dens(y), lo, b)
        out += complex(re, im)
    return out


def _full_halfline_power_exponent(c: float, alpha: float, u: float) -> complex:
    """Closed form of the positive-side LK integral for density c/y^(1+alpha)
    on all of (0, inf):  c * (Gamma(-alpha) (-iu)^alpha + iu/(alpha-1))."""
    g = math.gamma(-alpha) if alpha != 1.0 else None
    if g is None:
        raise AssertionError("alpha = 1 handled by quadrature")
    return c * (g * (-1j * u) ** alpha + 1j * u / (alpha - 1.0))


def characteristic_exponent(triplet: LevyTriplet, u: float) -> complex:
    """Levy-Khintchine exponent eta(u) with the |y| < 1 compensation cutoff.

    Full-half-line power pieces use the closed form; every other piece is
    integrated by adaptive quadrature with a smoothness-preserving split at
    the origin and oscillatory weights on unbounded tails.
    """
    u = float(u)
    eta = 1j * triplet.gamma * u - 0.5 * triplet.sigma2 * u * u
    for at in triplet.nu.atoms:
        comp = 1j * u * at.y if abs(at.y) < 1 else 0.0
        eta += at.mass * (cmath.exp(1j * u * at.y) - 1 - comp)
    if u == 0.0:
        return complex(eta)
    for p in triplet.nu.pieces:
        a, b = p.abs_interval()
        if isinstance(p, PowerLawPiece) and a == 0 and math.isinf(b) and p.alpha != 1.0:
            val = _full_halfline_power_exponent(p.c, p.alpha, abs(u))
        elif isinstance(p, PowerLawPiece):
            val = _piece_exponent_positive(
                p.c, p.alpha, lambda y, p=p: p.c * y ** (-1 - p.alpha), a, b, abs(u),
                lambda lo, hi, p=p: p.moment(2, lo, hi),
            )
        else:
            val = _piece_exponent_positive(
                p.c, None, lambda y, p=p: p.c, a, b, abs(u),
                lambda lo, hi, p=p: p.moment(2, lo, hi),
            )
        if p.side < 0:
            val = val.conjugate()
        if u < 0:
            val = val.conjugate()
        eta += val
    return complex(eta)


# ---------------------------------------------------------------------------
# drift quantities and classification
# ---------------------------------------------------------------------------


def finite_activity_drift(triplet: LevyTriplet) -> float:
    """b = gamma - integral of y over 0 < |y| < 1; needs a finite measure."""
    if not triplet.nu.is_finite():
        raise PreconditionError("finite-activity drift requires a finite Levy measure")
    return triplet.gamma - triplet.nu.band_mean(_next_up(0.0), 1.0)


def _next_up(x: float) -> float:
    return math.nextafter(x, math.inf)


def _small_jump_mean_terms(nu: LevyMeasure) -> tuple[float, dict]:
    """Limit decomposition of m(d) = integral of y over d <= |y| < 1 as d -> 0.

    Returns (finite_part, divergences) where divergences maps ('pow', alpha)
    or ('log',) to the coefficient of d^(1-alpha) resp. log(1/d).  The limit
    L exists iff every divergence coefficient cancels, and then equals the
    finite part.
    """
    finite = sum(a.mass * a.y for a in nu.atoms if 0 < abs(a.y) < 1)
    div: dict = {}
    for p in nu.pieces:
        a, b = p.abs_interval()
        u = min(b, 1.0)
        if a >= u:
            continue
        s = p.side
        if isinstance(p, ConstantPiece) or a > 0:
            finite += s * p.moment(1, a, u)
            continue
        alpha, c = p.alpha, p.c
        if alpha < 1:
            finite += s * c * u ** (1 - alpha) / (1 - alpha)
        elif alpha == 1:
            finite += s * c * math.log(u)
            div[("log",)] = div.get(("log",), 0.0) + s * c
        else:
            finite += s * c * u ** (1 - alpha) / (1 - alpha)
            key = ("pow", alpha)
            div[key] = div.get(key, 0.0) + s * c
    return finite, div


def small_jump_mean(triplet: LevyTriplet, delta: float) -> float:
    """m(delta) = integral of y over delta <= |y| < 1 (signed, closed form)."""
    if not 0 < delta:
        raise ValueError("delta must be positive")
    return triplet.nu.band_mean(delta, 1.0)


def bsj_limit(triplet: LevyTriplet) -> Optional[float]:
    """The balanced-small-jumps limit L, or None when the limit diverges."""
    finite, div = _small_jump_mean_terms(triplet.nu)
    scale = 1.0 + sum(abs(v) for v in div.values())
    if all(abs(v) <= CLASSIFY_TOL * scale for v in div.values()):
        return finite
    return None


def _small_jump_mean_limit(triplet: LevyTriplet) -> float:
    """lim of m(delta) as delta -> 0 in [-inf, inf] (monotone tail, so = liminf)."""
    finite, div = _small_jump_mean_terms(triplet.nu)
    scale = 1.0 + sum(abs(v) for v in div.values())
    live = {k: v for k, v in div.items() if abs(v) > CLASSIFY_TOL * scale}
    if not live:
        return finite
    # d^(1-alpha) with the largest alpha dominates; log loses to every power
    def strength(key):
        return key[1] if key[0] == "pow" else 1.0
    dom = max(live, key=strength)
    return math.inf if live[dom] > 0 else -math.inf


def _leading_sign(terms: dict) -> int:
    """Sign of a sum of c * a^(-e) (+ log) terms as a -> 0+.

    Keys are (exponent, tier) with tier 1 marking the log(1/a) term at
    exponent 0; larger keys dominate.  Coefficients within CLASSIFY_TOL of
    the total scale count as exact cancellations.
    """
    scale = 1.0 + sum(abs(v) for v in terms.values())
    for key in sorted(terms, reverse=True):
        if abs(terms[key]) > CLASSIFY_TOL * scale:
            return 1 if terms[key] > 0 else -1
    return 0


def _tail_terms(nu: LevyMeasure, side: int) -> dict:
    """Asymptotic expansion of the one-sided tail nu((a, inf)) resp.
    nu((-inf, -a)) as a -> 0+, as {(exponent, tier): coeff}."""
    out: dict = {}

    def add(key, v):
        out[key] = out.get(key, 0.0) + v

    for at in nu.atoms:
        if (at.y > 0) == (side > 0):
            add((0.0, 0), at.mass)
    for p in nu.pieces:
        if p.side != side:
            continue
        a, b = p.abs_interval()
        if a > 0:
            add((0.0, 0), p.moment(0, a, b))
            continue
        if isinstance(p, ConstantPiece):
            add((0.0, 0), p.c * b)
            add((-1.0, 0), -p.c)
        elif p.alpha == 0:
            add((0.0, 1), p.c)  # c * log(1/a); b finite since alpha = 0 unbounded is rejected
            add((0.0, 0), p.c * math.log(b))
        else:
            add((p.alpha, 0), p.c / p.alpha)
            if not math.isinf(b):
                add((0.0, 0), -p.c * b ** (-p.alpha) / p.alpha)
    return out


def _density_terms(nu: LevyMeasure, side: int) -> dict:
    """Asymptotic expansion of the one-sided density at |y| = v as v -> 0+."""
    out: dict = {}
    for p in nu.pieces:
        if p.side != side:
            continue
        a, _ = p.abs_interval()
        if a > 0:
            continue
        if isinstance(p, ConstantPiece):
            key = (0.0, 0)
            out[key] = out.get(key, 0.0) + p.c
        else:
            key = (1.0 + p.alpha, 0)
            out[key] = out.get(key, 0.0) + p.c
    return out


def _term_diff(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0.0) - v
    return out


def _tail_gap_points(nu: LevyMeasure, grid: int = 48) -> list[float]:
    bps = [b for b in nu.breakpoints() if b > 0]
    pts: list[float] = []
    anchors = bps if bps else [1.0]
    lo0 = anchors[0]
    pts.extend(np.geomspace(lo0 * 1e-6, lo0, grid).tolist())
    for a, b in zip(anchors, anchors[1:]):
        pts.extend(np.geomspace(a, b, grid).tolist())
    hi = anchors[-1]
    pts.extend(np.geomspace(hi, hi * 1e9, grid).tolist())
    pts.extend(anchors)
    return sorted(set(pts))


def _dominates_tails(nu: LevyMeasure) -> bool:
    """nu((a, inf)) >= nu((-inf, -a)) for all a > 0.

    Near 0 the comparison is structural: the leading coefficient of the
    asymptotic tail difference must be nonnegative.  Away from 0 the gap is
    evaluated on breakpoints, dense log grids between them, and the left
    limits at atom locations.
    """
    if _leading_sign(_term_diff(_tail_terms(nu, 1), _tail_terms(nu, -1))) < 0:
        return False
    for a in _tail_gap_points(nu):
        up, down = nu.tail_above(a), nu.tail_below(a)
        if up < down - CLASSIFY_TOL * (1.0 + up + down):
            return False
        # left limit picks up the atoms sitting exactly at a
        up_l = up + nu.atom_mass_at(a)
        down_l = down + nu.atom_mass_at(-a)
        if up_l < down_l - CLASSIFY_TOL * (1.0 + up_l + down_l):
            return False
    return True


def _majorization_eps(nu: LevyMeasure, cap: float = 1.0) -> float:
    """Largest eps <= cap with pointwise domination of the dual on (0, eps).

    Atom masses are compared location by location; densities structurally at
    0+ (leading asymptotic coefficient) and pointwise on log grids beyond.
    Returns 0 when even arbitrarily small neighborhoods fail.
    """
    if _leading_sign(_term_diff(_density_terms(nu, 1), _density_terms(nu, -1))) < 0:
        return 0.0
    eps = cap
    for a in nu.atoms:
        if a.y < 0 and abs(a.y) < eps:
            if nu.atom_mass_at(abs(a.y)) < a.mass - CLASSIFY_TOL * (1 + a.mass):
                eps = abs(a.y)
    bps = [b for b in nu.breakpoints() if b < eps] + [eps]
    lo = min(bps) * 1e-6
    vs = np.geomspace(lo, eps, 160)
    for v in vs:
        dp, dn = nu.density_pos(float(v)), nu.density_neg(float(v))
        if dp < dn - CLASSIFY_TOL * (1.0 + dp + dn):
            return float(v)
    return float(eps)


def _measures_mirror_equal(nu: LevyMeasure) -> bool:
    dual = nu.dual()
    pts = _tail_gap_points(nu)
    for a in pts:
        u1, d1 = nu.tail_above(a), nu.tail_below(a)
        if abs(u1 - d1) > CLASSIFY_TOL * (1.0 + u1 + d1):
            return False
    for at in nu.atoms:
        if abs(nu.atom_mass_at(-at.y) - at.mass) > CLASSIFY_TOL * (1 + at.mass):
            return False
    del dual
    return True


@dataclass(frozen=True)
class LevyClassification:
    finite_nu: bool
    b: Optional[float]
    rss: bool
    lss: bool
    symmetric: bool
    bsj: bool
    L: Optional[float]
    srss: bool
    slss: bool
    weak_rss: bool
    weak_lss: bool
    majorization_eps: Optional[float]
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "finite_nu": self.finite_nu,
            "b": self.b,
            "rss": self.rss,
            "lss": self.lss,
            "symmetric": self.symmetric,
            "bsj": self.bsj,
            "L": self.L,
            "srss": self.srss,
            "slss": self.slss,
            "weak_rss": self.weak_rss,
            "weak_lss": self.weak_lss,
            "majorization_eps": self.majorization_eps,
            "notes": list(self.notes),
        }


def classify(triplet: LevyTriplet) -> LevyClassification:
    """All skew-symmetry flags of a triplet, computed in closed form.

    Finite-activity right/left skew uses the drift b and the tail comparison;
    the strong variants add the balanced-small-jumps limit, gamma >= L and
    the small-neighborhood majorization; the weak variants only compare gamma
    with the limit of the compensated small-jump mean.
    """
    nu = triplet.nu
    notes: list[str] = []
    finite_nu = nu.is_finite()
    b = None
    if finite_nu:
        b = triplet.gamma - nu.band_mean(_next_up(0.0), 1.0)

    tails_right = _dominates_tails(nu)
    tails_left = _dominates_tails(nu.dual())

    rss = bool(finite_nu and b is not None and b >= -CLASSIFY_TOL and tails_right)
    lss = bool(finite_nu and b is not None and b <= CLASSIFY_TOL and tails_left)

    L = bsj_limit(triplet)
    bsj = L is not None
    if not bsj:
        notes.append("small-jump mean diverges; not balanced in its small jumps")

    symmetric = bool(
        abs(triplet.gamma) <= CLASSIFY_TOL and _measures_mirror_equal(nu)
    )

    maj_eps = _majorization_eps(nu)
    maj_eps_dual = _majorization_eps(nu.dual())

    srss = bool(bsj and triplet.gamma >= L - CLASSIFY_TOL and tails_right and maj_eps > 0)
    slss = bool(
        bsj and -triplet.gamma >= -L - CLASSIFY_TOL and tails_left and maj_eps_dual > 0
    )

    lim = _small_jump_mean_limit(triplet)
    lim_dual = _small_jump_mean_limit(triplet.dual())
    weak_rss = bool(tails_right and triplet.gamma >= lim - CLASSIFY_TOL)
    weak_lss = bool(tails_left and -triplet.gamma >= lim_dual - CLASSIFY_TOL)

    return LevyClassification(
        finite_nu=finite_nu,
        b=None if b is None else float(b),
        rss=rss,
        lss=lss,
        symmetric=symmetric,
        bsj=bsj,
        L=None if L is None else float(L),
        srss=srss,
        slss=slss,
        weak_rss=weak_rss,
        weak_lss=weak_lss,
        majorization_eps=float(maj_eps),
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# truncation schedule
# ---------------------------------------------------------------------------


def truncation_schedule(triplet: LevyTriplet, n_max: int, eps_seed: float) -> list[float]:
    """Strictly decreasing levels eps_n with  integral of y^2 over |y| < eps_n
    bounded by 8^(-n), each verified analytically before being emitted."""
    if not eps_seed > 0:
        raise ValueError("eps_seed must be positive")
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    nu = triplet.nu
    out: list[float] = []
    prev = 2.0 * eps_seed
    for n in range(1, n_max + 1):
        bound = EPS_BOUND_BASE ** (-n)
        if bound == 0.0:
            raise OverflowError(f"8^-{n} underflows; reduce n_max")
        cand = min(prev / 2.0, eps_seed)
        if nu.second_moment_below(cand) > bound:
            lo, hi = 0.0, cand
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if nu.second_moment_below(mid) <= bound:
                    lo = mid
                else:
                    hi = mid
            cand = lo
        if not 0.0 < cand < prev:
            raise OverflowError(f"schedule level {n} underflows to {cand}")
        if nu.second_moment_below(cand) > bound:
            raise AssertionError("schedule bound violated after bisection")
        out.append(cand)
        prev = cand
    return out


def compensated_drift(triplet: LevyTriplet, eps_n: float, eps: float) -> float:
    """gamma_n = gamma - L + integral of y over eps_n <= |y| < eps."""
    L = bsj_limit(triplet)
    if L is None:
        raise PreconditionError("compensated drift needs the balanced-small-jumps limit")
    return triplet.gamma - L + triplet.nu.band_mean(eps_n, eps)


# ---------------------------------------------------------------------------
# jump mark samplers
# ---------------------------------------------------------------------------


class MarkSampler:
    """Inverse-CDF sampler for a finite measure's normalized jump law.

    Components are sorted by position so the map u -> mark is the actual
    quantile function, which the comonotone coupling requires; overlapping
    components are rejected for coupling use but fine for plain sampling.
    """

    def __init__(self, nu: LevyMeasure, require_quantile: bool = False):
        comps = []
        for a in nu.atoms:
            comps.append(("atom", a.y, a.y, a.mass, a))
        for p in nu.pieces:
            a_, b_ = p.abs_interval()
            lo, hi = (a_, b_) if p.side > 0 else (-b_, -a_)
            comps.append(("piece", lo, hi, p.moment(0, 0.0, math.inf), p))
        comps = [c for c in comps if c[3] > 0]
        comps.sort(key=lambda c: (c[1], c[2]))
        if require_quantile:
            for (k1, l1, h1, *_), (k2, l2, h2, *_) in zip(comps, comps[1:]):
                overlap = min(h1, h2) > max(l1, l2)
                if overlap or (k1 == k2 == "atom" and l1 == l2):
                    raise PreconditionError(
                        "quantile coupling needs non-overlapping measure components"
                    )
        self.total = sum(c[3] for c in comps)
        if self.total <= 0:
            self.comps = []
            self.cum = np.array([])
            return
        self.comps = comps
        self.cum = np.cumsum([c[3] for c in comps]) / self.total

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Marks at uniform positions u in (0, 1); monotone in u."""
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        idx = np.searchsorted(self.cum, u, side="left")
        idx = np.minimum(idx, len(self.comps) - 1)
        starts = np.concatenate([[0.0], self.cum[:-1]])
        for i, (kind, lo, hi, mass, obj) in enumerate(self.comps):
            sel = idx == i
            if not np.any(sel):
                continue
            width = self.cum[i] - starts[i]
            loc = (u[sel] - starts[i]) / width
            loc = np.clip(loc, 1e-15, 1.0 - 1e-15)
            if kind == "atom":
                out[sel] = obj.y
            else:
                out[sel] = _piece_quantile(obj, loc)
        return out


def _piece_quantile(p: Piece, loc: np.ndarray) -> np.ndarray:
    a, b = p.abs_interval()
    if p.side < 0:
        # CDF increases from lo = -b toward hi = -a: |y| decreases with u
        q = 1.0 - loc
    else:
        q = loc
    if isinstance(p, ConstantPiece):
        v = a + q * (b - a)
    else:
        alpha, c = p.alpha, p.c
        mass = p.moment(0, 0.0, math.inf)
        if alpha == 0:
            v = a * (b / a) ** q
        else:
            a_pow = a ** (-alpha)
            b_pow = 0.0 if math.isinf(b) else b ** (-alpha)
            v = (a_pow - q * (a_pow - b_pow)) ** (-1.0 / alpha)
    return v if p.side > 0 else -v


# ---------------------------------------------------------------------------
# simulation schemes and plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimScheme:
    """How to discretize: interlacing (finite measure), truncated (level n of
    the 8^-n schedule) or exact stable increments, on a dt grid."""

    mode: str = "auto"
    dt: float = 0.01
    level: int = 4
    eps_seed: float = 0.5
    bridge_max_refinement: bool = False

    def __post_init__(self):
        if self.mode not in ("auto", "interlacing", "truncated", "stable_exact"):
            raise ValueError(f"unknown scheme mode {self.mode!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.level < 1:
            raise ValueError("level must be at least 1")


@dataclass(frozen=True)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    running_max: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray

    @property
    def supremum(self) -> float:
        return float(self.running_max[-1])

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class _SimPlan:
    kind: str                 # "jump_diffusion" | "stable_exact"
    drift: float = 0.0
    sigma: float = 0.0
    jumps: Optional[LevyMeasure] = None
    rate: float = 0.0
    eps_levels: tuple[float, ...] = ()
    stable: Optional[tuple[float, float, float, float]] = None  # alpha, beta, scale, mu


def stable_exact_params(triplet: LevyTriplet) -> tuple[float, float, float, float]:
    """(alpha, beta, scale-per-unit-time, mu) in the S1 parametrization.

    Requires a pure-stable triplet: sigma2 = 0, no atoms, and full-half-line
    power pieces of a common alpha.  For alpha = 1 only the symmetric case is
    representable without the log correction, so skewed alpha = 1 is refused.
    """
    if triplet.sigma2 != 0 or triplet.nu.atoms:
        raise PreconditionError("exact stable increments need sigma2 = 0 and no atoms")
    c1 = c2 = 0.0
    alpha = None
    for p in triplet.nu.pieces:
        a, b = p.abs_interval()
        if not (isinstance(p, PowerLawPiece) and a == 0.0 and math.isinf(b)):
            raise PreconditionError("exact stable increments need full-half-line power pieces")
        if alpha is None:
            alpha = p.alpha
        elif p.alpha != alpha:
            raise PreconditionError("stable pieces must share one alpha")
        if p.side > 0:
            c1 += p.c
        else:
            c2 += p.c
    if alpha is None or not 0 < alpha < 2 or c1 + c2 <= 0:
        raise PreconditionError("not a stable measure")
    if alpha == 1.0:
        if abs(c1 - c2) > CLASSIFY_TOL * (c1 + c2):
            raise PreconditionError("alpha = 1 supported only in the symmetric case")
        return 1.0, 0.0, math.pi * c1, triplet.gamma
    sigma_alpha = -math.gamma(-alpha) * math.cos(math.pi * alpha / 2.0) * (c1 + c2)
    beta = (c1 - c2) / (c1 + c2)
    mu = triplet.gamma + (c1 - c2) / (alpha - 1.0)
    return alpha, beta, sigma_alpha ** (1.0 / alpha), mu


def _plan(triplet: LevyTriplet, T: float, scheme: SimScheme) -> _SimPlan:
    mode = scheme.mode
    if mode == "auto":
        mode = "interlacing" if triplet.nu.is_finite() else "truncated"
    if mode == "stable_exact":
        return _SimPlan(kind="stable_exact", stable=stable_exact_params(triplet))
    if mode == "interlacing":
        if not triplet.nu.is_finite():
            raise PreconditionError(
                "interlacing needs a finite Levy measure; use the truncated scheme"
            )
        drift = finite_activity_drift(triplet)
        jumps = triplet.nu
        eps_levels: tuple[float, ...] = ()
    else:
        L = bsj_limit(triplet)
        if L is None:
            raise PreconditionError(
                "truncated simulation needs the balanced-small-jumps limit to exist"
            )
        eps_levels = tuple(truncation_schedule(triplet, scheme.level, scheme.eps_seed))
        drift = triplet.gamma - L
        jumps = triplet.nu.restrict(eps_levels[-1], math.inf)
    rate = jumps.total_mass()
    if rate * T > RATE_GUARD:
        raise ResourceLimitError(
            f"jump intensity {rate:.3e} over horizon {T} exceeds the {RATE_GUARD:.0e} "
            "guard; use a smaller truncation level n"
        )
    return _SimPlan(
        kind="jump_diffusion",
        drift=drift,
        sigma=math.sqrt(triplet.sigma2),
        jumps=jumps,
        rate=rate,
        eps_levels=eps_levels,
    )


def _grid(T: float, dt: float) -> np.ndarray:
    steps = max(1, int(round(T / dt)))
    return np.linspace(0.0, T, steps + 1)


def _bridge_max_samples(v0, v1, var, u):
    """Sample of the maximum of a Brownian bridge between the segment
    endpoints, via the inverse of P(max <= b) = 1 - exp(-2(b-v0)(b-v1)/var)."""
    disc = (v1 - v0) ** 2 - 2.0 * var * np.log(u)
    return 0.5 * (v0 + v1 + np.sqrt(disc))


def iter_sample_paths(
    triplet: LevyTriplet, T: float, scheme: SimScheme, count: int, seed: int
) -> Iterator[SamplePath]:
    """Exact-epoch paths, one at a time, on per-path substreams."""
    plan = _plan(triplet, T, scheme)
    grid = _grid(T, scheme.dt)
    if plan.kind == "stable_exact":
        if scheme.bridge_max_refinement:
            raise ValueError("bridge refinement needs Brownian segments, not stable ones")
        alpha, beta, scale, mu = plan.stable
        dts = np.diff(grid)
        for i in range(count):
            rng = substream(seed, STREAM_PATHS, i)
            incr = levy_stable.rvs(
                alpha, beta, loc=mu * dts, scale=scale * dts ** (1.0 / alpha),
                size=len(dts), random_state=rng,
            )
            x = np.concatenate([[0.0], np.cumsum(incr)])
            yield SamplePath(
                times=grid,
                values=x,
                running_max=np.maximum.accumulate(x),
                jump_times=np.array([]),
                jump_sizes=np.array([]),
            )
        return

    sampler = MarkSampler(plan.jumps)
    for i in range(count):
        rng = substream(seed, STREAM_PATHS, i)
        njump = rng.poisson(plan.rate * T) if plan.rate > 0 else 0
        jt = np.sort(rng.uniform(0.0, T, njump))
        marks = sampler.sample(rng.uniform(0.0, 1.0, njump)) if njump else np.array([])
        times = np.unique(np.concatenate([grid, jt]))
        dts = np.diff(times)
        cont = plan.drift * dts
        if plan.sigma > 0:
            cont = cont + plan.sigma * np.sqrt(dts) * rng.standard_normal(len(dts))
        cont = np.concatenate([[0.0], np.cumsum(cont)])
        jcum = np.concatenate([[0.0], np.cumsum(marks)])
        pre = cont + jcum[np.searchsorted(jt, times, side="left")]
        post = cont + jcum[np.searchsorted(jt, times, side="right")]
        step_max = np.maximum(pre, post)
        if scheme.bridge_max_refinement and plan.sigma > 0 and len(times) > 1:
            brng = substream(seed, STREAM_BRIDGE, i)
            u = brng.uniform(1e-300, 1.0, len(dts))
            seg = _bridge_max_samples(post[:-1], pre[1:], plan.sigma**2 * dts, u)
            step_max = np.maximum(step_max, np.concatenate([[step_max[0]], seg]))
        yield SamplePath(
            times=times,
            values=post,
            running_max=np.maximum.accumulate(step_max),
            jump_times=jt,
            jump_sizes=marks,
        )


def simulate_paths(
    triplet: LevyTriplet, T: float, scheme: SimScheme, count: int, seed: int
) -> list[SamplePath]:
    return list(iter_sample_paths(triplet, T, scheme, count, seed))


# ---------------------------------------------------------------------------
# coupled dual simulation
# ---------------------------------------------------------------------------


def simulate_coupled_dual(
    triplet: LevyTriplet, T: float, scheme: SimScheme, count: int, seed: int
) -> list[CoupledPathPair]:
    """Paths of X and its dual built on shared drivers.

    Both processes share the Brownian driver and, per jump band, the Poisson
    clock; marks are coupled comonotonically inside each band, so increments
    of X dominate increments of the dual pointwise.  Bands follow the
    truncation schedule for infinite measures; a finite measure is one band.
    Requires right-skew structure: finite-measure RSS, or SRSS with the
    majorization neighborhood covering the coarsest truncation level.
    """
    cls = classify(triplet)
    plan = _plan(triplet, T, scheme)
    if plan.kind == "stable_exact":
        raise PreconditionError("coupled duals need jump-diffusion schemes")
    if plan.eps_levels:
        if not cls.srss:
            raise PreconditionError(
                "coupled dual construction needs a strongly right-skew triplet"
            )
        eps1 = plan.eps_levels[0]
        if cls.majorization_eps is not None and cls.majorization_eps < eps1:
            raise PreconditionError(
                "small-jump majorization fails on "
                f"({cls.majorization_eps:.3g}, {eps1:.3g}); shrink eps_seed"
            )
        bands = [triplet.nu.restrict(eps1, math.inf)]
        for lo, hi in zip(plan.eps_levels[1:], plan.eps_levels[:-1]):
            bands.append(triplet.nu.restrict(lo, hi))
    else:
        if not (cls.rss or cls.symmetric):
            raise PreconditionError(
                "coupled dual construction needs a right-skew (or symmetric) triplet"
            )
        bands = [plan.jumps]

    samplers = [
        (MarkSampler(b, require_quantile=True), MarkSampler(b.dual(), require_quantile=True))
        for b in bands
    ]
    rates = [b.total_mass() for b in bands]
    grid = _grid(T, scheme.dt)
    out = []
    for i in range(count):
        rng = substream(seed, STREAM_PATHS, i)
        jt_parts, mk_parts, mkd_parts = [], [], []
        for (smp, smp_d), rate in zip(samplers, rates):
            njump = rng.poisson(rate * T) if rate > 0 else 0
            t = rng.uniform(0.0, T, njump)
            u = rng.uniform(0.0, 1.0, njump)
            jt_parts.append(t)
            mk_parts.append(smp.sample(u) if njump else np.array([]))
            mkd_parts.append(smp_d.sample(u) if njump else np.array([]))
        jt = np.concatenate(jt_parts) if jt_parts else np.array([])
        order = np.argsort(jt, kind="stable")
        jt = jt[order]
        marks = np.concatenate(mk_parts)[order] if len(jt) else np.array([])
        marks_d = np.concatenate(mkd_parts)[order] if len(jt) else np.array([])

        times = np.unique(np.concatenate([grid, jt]))
        dts = np.diff(times)
        bm = plan.sigma * np.sqrt(dts) * rng.standard_normal(len(dts)) if plan.sigma > 0 else np.zeros(len(dts))
        base = np.concatenate([[0.0], np.cumsum(bm)])
        at = np.searchsorted(jt, times, side="right")
        jc = np.concatenate([[0.0], np.cumsum(marks)])
        jcd = np.concatenate([[0.0], np.cumsum(marks_d)])
        x = plan.drift * times + base + jc[at]
        xd = -plan.drift * times + base + jcd[at]
        pair = CoupledPathPair(
            times=times,
            x=x,
            x_dual=xd,
            max_x=np.maximum.accumulate(x),
            max_dual=np.maximum.accumulate(xd),
        )
        pair.check_invariants()
        out.append(pair)
    return out


# ---------------------------------------------------------------------------
# grid-skeleton engine (vectorized)
# ---------------------------------------------------------------------------


def _chunk_size(rate: float, T: float, count: int) -> int:
    per_path = max(rate * T, 1.0)
    return max(64, min(8192, int(4e6 / per_path), count))


def skeleton_chunks(
    triplet: LevyTriplet,
    T: float,
    scheme: SimScheme,
    count: int,
    seed: int,
    stream: int = 0,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (times, X) chunks of the grid-restricted skeleton.

    X has shape (chunk, len(times)); marginals at grid times are exact and
    increments are i.i.d. across cells, so the skeleton is itself a random
    walk and inherits the discrete-time optimality statements exactly.
    """
    plan = _plan(triplet, T, scheme)
    times = _grid(T, scheme.dt)
    E = len(times) - 1
    dt = T / E
    chunk = _chunk_size(plan.rate, T, count)
    sampler = MarkSampler(plan.jumps) if plan.kind == "jump_diffusion" and plan.rate > 0 else None
    done = 0
    ci = 0
    while done < count:
        n = min(chunk, count - done)
        rng = substream(seed, STREAM_SKELETON, stream, ci)
        if plan.kind == "stable_exact":
            alpha, beta, scale, mu = plan.stable
            incr = levy_stable.rvs(
                alpha, beta, loc=mu * dt, scale=scale * dt ** (1.0 / alpha),
                size=(n, E), random_state=rng,
            )
        else:
            incr = np.full((n, E), plan.drift * dt)
            if plan.sigma > 0:
                incr = incr + plan.sigma * math.sqrt(dt) * rng.standard_normal((n, E))
            if plan.rate > 0:
                K = rng.poisson(plan.rate * T, n)
                tot = int(K.sum())
                if tot:
                    jt = rng.uniform(0.0, T, tot)
                    marks = sampler.sample(rng.uniform(0.0, 1.0, tot))
                    rows = np.repeat(np.arange(n), K)
                    cells = np.minimum((jt / dt).astype(int), E - 1)
                    flat = np.bincount(rows * E + cells, weights=marks, minlength=n * E)
                    incr = incr + flat.reshape(n, E)
        x = np.concatenate([np.zeros((n, 1)), np.cumsum(incr, axis=1)], axis=1)
        yield times, x
        done += n
        ci += 1


def terminal_samples(
    triplet: LevyTriplet,
    T: float,
    scheme: SimScheme,
    count: int,
    seed: int,
    stream: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """(X_T, max over grid) samples from the skeleton engine."""
    xs, ms = [], []
    for _, x in skeleton_chunks(triplet, T, scheme, count, seed, stream):
        xs.append(x[:, -1])
        ms.append(x.max(axis=1))
    return np.concatenate(xs), np.concatenate(ms)


@dataclass(frozen=True)
class CalibrationReport:
    us: tuple[float, ...]
    errors: tuple[float, ...]
    bound: float
    count: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "us": list(self.us),
            "errors": list(self.errors),
            "bound": self.bound,
            "count": self.count,
            "passed": self.passed,
        }


def empirical_cf_check(
    triplet: LevyTriplet,
    T: float,
    scheme: SimScheme,
    count: int,
    seed: int,
    us=(0.5, 1.0, 2.0),
    stream: int = 0,
) -> CalibrationReport:
    """Empirical characteristic function of X_T against exp(T * eta(u)),
    with the distribution-free 4/sqrt(count) acceptance bound."""
    xs, _ = terminal_samples(triplet, T, scheme, count, seed, stream)
    errs = []
    for u in us:
        ecf = np.exp(1j * u * xs).mean()
        target = cmath.exp(T * characteristic_exponent(triplet, u))
        errs.append(abs(ecf - target))
    bound = 4.0 / math.sqrt(count)
    return CalibrationReport(
        us=tuple(float(u) for u in us),
        errors=tuple(float(e) for e in errs),
        bound=bound,
        count=count,
        passed=all(e <= bound for e in errs),
    )
