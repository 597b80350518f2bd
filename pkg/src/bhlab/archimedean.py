"""Monte Carlo archimedean integrals, the level-set density and epsilon-cuttings."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import ceil, log, sqrt

import numpy as np

from .enumeration import DEFAULT_BUDGET, Patch, Region, RegionKind, SignMode, _histogram, prime_mask
from .errors import DegeneratePatchError, InvalidRegionError
from .spaces import Family, MatrixSpace, eval_real, gradient_real

__all__ = [
    "McEstimate",
    "MuInfinity",
    "EpsilonCutting",
    "PredictionRow",
    "PredictionReport",
    "log_plus",
    "bh_integrand",
    "bh_integral",
    "mu_infinity",
    "asymptotic_form",
    "epsilon_cutting",
    "cones_to_box_experiment",
    "write_report_csv",
]

_BATCH = 1 << 18


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    samples: int
    seed: int

    def agrees_with(self, other: "McEstimate", sigmas: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - other.value) <= sigmas * sqrt(self.stderr**2 + other.stderr**2) + slack


def log_plus(y: np.ndarray) -> np.ndarray:
    """max(2, log y) for y > 0 and +inf otherwise."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(y > 0, np.maximum(2.0, np.log(np.where(y > 0, y, 1.0))), np.inf)
    return out


def bh_integrand(F: np.ndarray, sign_mode: SignMode | str = SignMode.POSITIVE_PRIME) -> np.ndarray:
    """1 / log+(F) (or of |F|): zero where the argument is <= 0, 1/2 up to e^2."""
    F = np.asarray(F, dtype=float)
    if SignMode(sign_mode) is SignMode.PRIME_IDEAL:
        F = np.abs(F)
    return 1.0 / log_plus(F)


# ---------------------------------------------------------------------------
# samplers


def _shell_sample(rng: np.random.Generator, n: int, dim: int, a: float, b: float) -> np.ndarray:
    """n uniform points of the sup-norm shell a < |x| <= b in R^dim."""
    u = rng.random(n)
    rho = (a**dim + u * (b**dim - a**dim)) ** (1.0 / dim)
    X = (2.0 * rng.random((n, dim)) - 1.0) * rho[:, None]
    face = rng.integers(0, dim, size=n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    X[np.arange(n), face] = sign * rho
    return X


def _stream(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def bh_integral(
    space: MatrixSpace,
    region: Region,
    samples: int = 10**6,
    seed: int = 0,
    strata: int = 16,
) -> McEstimate:
    """MC estimate of the integral of 1/log+ F over the region.

    The bounding sup-norm ball is split into ``strata`` radial shells with
    samples allocated in proportion to shell volume; each shell draws from
    its own substream of the master seed.
    """
    if samples < 1000:
        raise ValueError("bh_integral needs at least 1000 samples")
    dim = space.ambient_dim
    r = region.bounding_radius
    if r == 0:
        return McEstimate(0.0, 0.0, samples, seed)
    edges = r * np.arange(strata + 1) / strata
    vols = (2.0 * edges[1:]) ** dim - (2.0 * edges[:-1]) ** dim
    alloc = np.maximum(2, np.round(samples * vols / vols.sum()).astype(np.int64))
    total = 0.0
    var = 0.0
    for s, rng in enumerate(_stream(seed, strata)):
        n = int(alloc[s])
        acc = 0.0
        acc2 = 0.0
        for start in range(0, n, _BATCH):
            m = min(_BATCH, n - start)
            X = _shell_sample(rng, m, dim, edges[s], edges[s + 1])
            F = eval_real(space, X)
            g = bh_integrand(F, region.sign_mode) * region.contains(space, X, F)
            acc += float(g.sum())
            acc2 += float((g * g).sum())
        mean = acc / n
        v = max(acc2 / n - mean * mean, 0.0) * n / (n - 1)
        total += vols[s] * mean
        var += vols[s] ** 2 * v / n
    return McEstimate(float(total), float(sqrt(var)), int(alloc.sum()), seed)


# ---------------------------------------------------------------------------
# level-set density


@dataclass(frozen=True)
class MuInfinity:
    shell: McEstimate
    surface: McEstimate
    shell_width: float

    def agree(self, sigmas: float = 3.0) -> bool:
        return self.shell.agrees_with(self.surface, sigmas)


def linear_coordinates(space: MatrixSpace) -> tuple[int, ...]:
    """Coordinates in which F is affine (degree at most one)."""
    if space.family is Family.SYM:
        return tuple(k for k, (i, j) in enumerate(space.positions) if i == j)
    return tuple(range(space.ambient_dim))


def _shell_estimate(space, patch, samples, seed, h, level):
    deg = space.poly_degree
    dim = space.ambient_dim
    a = dim / deg
    R = patch.bounding_radius * (level * (1 + h)) ** (1.0 / deg)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    hits = 0
    for start in range(0, samples, _BATCH):
        m = min(_BATCH, samples - start)
        X = (2.0 * rng.random((m, dim)) - 1.0) * R
        F = eval_real(space, X) * patch.sign
        ok = (F >= level * (1 - h)) & (F <= level * (1 + h))
        if ok.any():
            U = X[ok] / F[ok, None] ** (1.0 / deg)
            hits += int(patch.contains(U).sum())
    frac = hits / samples
    box = (2.0 * R) ** dim
    # vol{|F| in c[1-h, 1+h], direction in patch} = mu_c * c ((1+h)^a - (1-h)^a) / a
    norm = level * ((1 + h) ** a - (1 - h) ** a) / a
    value = box * frac / norm
    err = box * sqrt(frac * (1 - frac) / samples) / norm
    return McEstimate(value, err, samples, seed)


def _surface_estimate(space, patch, samples, seed, level):
    deg = space.poly_degree
    dim = space.ambient_dim
    lin = np.array(linear_coordinates(space))
    R = patch.bounding_radius * level ** (1.0 / deg)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    target = patch.sign * level
    acc = 0.0
    acc2 = 0.0
    for start in range(0, samples, _BATCH):
        m = min(_BATCH, samples - start)
        X = (2.0 * rng.random((m, dim)) - 1.0) * R
        i = lin[rng.integers(0, len(lin), size=m)]
        rows = np.arange(m)
        X[rows, i] = 0.0
        b = eval_real(space, X)
        X[rows, i] = 1.0
        a = eval_real(space, X) - b
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = (target - b) / a
        ok = np.isfinite(xi) & (np.abs(xi) <= R)
        X[rows, i] = np.where(ok, xi, 0.0)
        val = np.zeros(m)
        if ok.any():
            Xo = X[ok]
            inside = patch.contains(Xo / level ** (1.0 / deg))
            G = gradient_real(space, Xo)[:, lin]
            w = np.abs(a[ok]) / (G * G).sum(axis=1)
            val[ok] = np.where(inside, w, 0.0)
        acc += float(val.sum())
        acc2 += float((val * val).sum())
    scale = len(lin) * (2.0 * R) ** (dim - 1)
    mean = acc / samples
    var = max(acc2 / samples - mean * mean, 0.0)
    return McEstimate(scale * mean, scale * sqrt(var / samples), samples, seed)


def mu_infinity(
    space: MatrixSpace,
    patch: Patch,
    samples: int = 10**6,
    seed: int = 0,
    shell_width: float = 0.05,
    level: float = 1.0,
) -> MuInfinity:
    """The density of |grad F|^{-1} surface measure on a patch, two ways.

    The patch lives on the level set {F = sign}; with ``level = c`` the
    estimators measure the scaled patch c^{1/deg} * patch on {F = sign * c}.
    The shell estimator measures the volume of the thickened cone piece and
    divides by the exact co-area factor; the surface estimator integrates
    |grad F|^{-1} by solving for one linear coordinate at a time.
    """
    if not 0 < shell_width < 1:
        raise ValueError("shell width must lie in (0, 1)")
    if level <= 0:
        raise ValueError("level must be positive")
    shell = _shell_estimate(space, patch, samples, seed, shell_width, level)
    surface = _surface_estimate(space, patch, samples, seed, level)
    if shell.value == 0 and surface.value == 0:
        raise DegeneratePatchError("patch received no samples; it may be empty")
    return MuInfinity(shell, surface, shell_width)


def asymptotic_form(mu_inf: float, T: float, dim: int) -> float:
    """mu * T^dim / (dim * log T), the main term of the cone integral."""
    if T <= 1:
        raise ValueError("need T > 1")
    return mu_inf * T**dim / (dim * log(T))


# ---------------------------------------------------------------------------
# epsilon-cuttings of boxes


@dataclass(frozen=True)
class EpsilonCutting:
    """Cones inside the box of radius T plus an exceptional remainder.

    Piece (s, k) is the cone of height T / m_k over the directions u on
    {F = s} with m_k - eta < |u| <= m_k, where m_k = m0 + k eta.
    """

    space: MatrixSpace
    T: float
    epsilon: float
    delta: float
    m0: float
    eta: float
    count: int
    signs: tuple[int, ...]
    exceptional_fraction: McEstimate
    exceptional_volume_bound: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "exceptional_volume_bound", self.epsilon * (2.0 * self.T) ** self.space.ambient_dim)

    @property
    def pieces(self) -> list[tuple[Patch, float, float, float]]:
        out = []
        for s in self.signs:
            for k in range(1, self.count + 1):
                mk = self.m0 + k * self.eta
                out.append((Patch(s, mk - self.eta, mk), self.T / mk, mk - self.eta, mk))
        return out

    def piece_regions(self) -> list[Region]:
        return [Region.cone(p, h) for p, h, _, _ in self.pieces]

    def kernel_params(self) -> np.ndarray:
        return np.array([self.T, self.m0, self.eta, self.count, len(self.signs)], dtype=np.float64)

    def classify(self, X: np.ndarray) -> np.ndarray:
        """Piece index for each point (sign-major order) or -1 if exceptional."""
        X = np.asarray(X, dtype=float)
        F = eval_real(self.space, X)
        deg = self.space.poly_degree
        level = np.abs(F) ** (1.0 / deg)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(X).max(axis=1) / level
            k = np.ceil((ratio - self.m0) / self.eta)
        k = np.where(np.isfinite(k), k, -1).astype(np.int64)
        mk = self.m0 + k * self.eta
        ok = (F != 0) & (k >= 1) & (k <= self.count) & (level / self.T <= 1.0 / mk)
        if len(self.signs) == 1:
            ok &= F > 0
            offset = 0
        else:
            offset = np.where(F > 0, 0, self.count)
        return np.where(ok, offset + k - 1, -1)

    def in_pieces(self, X: np.ndarray) -> np.ndarray:
        return self.classify(X) >= 0

    def membership_counts(self, X: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Number of pieces containing each point, from each piece's own test."""
        X = np.asarray(X, dtype=float)
        F = eval_real(self.space, X)
        deg = self.space.poly_degree
        pieces = self.pieces
        sign = np.array([p.sign for p, _, _, _ in pieces], dtype=float)
        lo = np.array([p.lo for p, _, _, _ in pieces])
        hi = np.array([p.hi for p, _, _, _ in pieces])
        height = np.array([h for _, h, _, _ in pieces])
        out = np.zeros(len(X), dtype=np.int64)
        for start in range(0, len(X), chunk):
            Xc = X[start : start + chunk]
            Fc = F[start : start + chunk]
            level = np.abs(Fc) ** (1.0 / deg)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.abs(Xc).max(axis=1) / level
            member = (
                (Fc[:, None] * sign[None, :] > 0)
                & (level[:, None] <= height[None, :] * (1 + 1e-12))
                & (ratio[:, None] > lo[None, :])
                & (ratio[:, None] <= hi[None, :])
            )
            out[start : start + chunk] = member.sum(axis=1)
        return out


def _level_floor(space: MatrixSpace) -> float:
    """Lower bound for |u| on {|F| = 1} from the Hadamard-type bound |F(x)| <= c |x|^deg."""
    deg = space.poly_degree
    n = space.n
    c = float((2 * n - 1) ** 0.5) ** n if space.family is Family.SKEW else float(n**0.5) ** n
    return c ** (-1.0 / deg)


def epsilon_cutting(
    space: MatrixSpace,
    region: Region,
    epsilon: float,
    samples: int = 10**6,
    seed: int = 0,
) -> EpsilonCutting:
    """Cut a box into cones over sup-norm bands of the level sets.

    The neighbourhood {|F| <= delta} of the zero set takes volume fraction
    epsilon / 2 (delta is the sampled quantile).  Outside it every direction
    u = x / |F|^{1/deg} satisfies |u| <= M = delta^{-1/deg}; the band
    (m0, M] is sliced into intervals of width eta, and the cone over each
    band is cut at the height its outer edge allows.  eta is chosen so the
    slivers lost between that height and the box boundary are at most
    epsilon / 2 of the volume.
    """
    if region.kind is not RegionKind.BOX:
        raise InvalidRegionError("epsilon-cuttings are constructed for boxes")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    T = float(region.T)
    if T <= 0:
        raise InvalidRegionError("box radius must be positive")
    dim = space.ambient_dim
    deg = space.poly_degree
    rngs = _stream(seed, 2)
    X = (2.0 * rngs[0].random((samples, dim)) - 1.0)
    delta = float(np.quantile(np.abs(eval_real(space, X)), epsilon / 2))
    m0 = _level_floor(space)
    M = delta ** (-1.0 / deg) if delta > 0 else np.inf
    eta = m0 * ((1 - epsilon / 2) ** (-1.0 / dim) - 1.0)
    count = max(0, int(ceil((M - m0) / eta))) if np.isfinite(M) else 0
    cut = EpsilonCutting(space, T, epsilon, delta, m0, eta, count, (1, -1), McEstimate(1.0, 0.0, 0, seed))
    Y = (2.0 * rngs[1].random((samples, dim)) - 1.0) * T
    exc = ~cut.in_pieces(Y)
    frac = float(exc.mean())
    est = McEstimate(frac, sqrt(frac * (1 - frac) / samples), samples, seed)
    object.__setattr__(cut, "exceptional_fraction", est)
    return cut


# ---------------------------------------------------------------------------
# cones to box pipeline


@dataclass(frozen=True)
class PredictionRow:
    T: float
    empirical: int
    empirical_pieces: int
    predicted_main: float
    exceptional_bound: int
    ratio: float
    stderr: float


@dataclass(frozen=True)
class PredictionReport:
    space: MatrixSpace
    epsilon: float
    z: float
    rows: tuple[PredictionRow, ...]


def cones_to_box_experiment(
    space: MatrixSpace,
    T_list,
    epsilon: float,
    samples: int = 10**6,
    seed: int = 0,
    z: float = 5.0,
    singular: float | None = None,
    threads: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> PredictionReport:
    """Prime counts in a box versus cone-by-cone predictions.

    For each T the box is cut with ``epsilon_cutting``.  predicted_main is
    the singular series times the MC integral of 1/log+ F over the union of
    pieces; empirical_pieces is the exact prime count there, and ratio is
    their quotient.  exceptional_bound counts points of the exceptional set
    whose value is a prime <= z or is z-rough, which bounds the primes
    there; empirical <= empirical_pieces + exceptional_bound always holds.
    """
    from .localdensity import singular_series
    from .sieve import rough_mask

    if singular is None:
        singular = singular_series(space, 1000).closed_form
    rows = []
    for i, T in enumerate(T_list):
        box = Region.box(T)
        cut = epsilon_cutting(space, box, epsilon, samples, seed + i)
        pieces = Region.custom(lambda X, F, c=cut: c.in_pieces(X), radius=T)
        est = bh_integral(space, pieces, samples, seed + i)
        B, hist = _histogram(space, box, threads, budget, cutting=cut.kernel_params(), nclass=2)
        values = np.arange(-B, B + 1)
        pos_prime = prime_mask(values) & (values > 0)
        exc = hist[0]
        emp_pieces = int(hist[1][pos_prime].sum())
        empirical = int(exc[pos_prime].sum()) + emp_pieces
        small = pos_prime & (values <= z)
        exc_bound = int(exc[small].sum() + exc[rough_mask(values, z)].sum())
        pred = singular * est.value
        ratio = emp_pieces / pred if pred > 0 else float("nan")
        stderr = ratio * est.stderr / est.value if est.value > 0 else float("nan")
        rows.append(PredictionRow(float(T), empirical, emp_pieces, pred, exc_bound, ratio, stderr))
    return PredictionReport(space, epsilon, z, tuple(rows))


def write_report_csv(report: PredictionReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "empirical", "predicted", "exceptional_bound", "ratio", "stderr"])
        for r in report.rows:
            w.writerow([r.T, r.empirical, repr(r.predicted_main), r.exceptional_bound, repr(r.ratio), repr(r.stderr)])
