"""Family moments of the prime-sum proxies, Gaussian targets and rectangle laws."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special

from .arith import _enumerate_classes, _lcm, resolve_form, valid_pairs
from .charsum import DEFAULT_CUTOFF, main_term
from .explicit import KernelPair, predicted_main, zero_sum_proxy
from .parallel import chunk_ranges, pmap
from .proxy import (ProxyConfig, dirichlet_poly_many, tamagawa_sum_C_many, tamagawa_window)


def gaussian_moment(k):
    """k-th standard normal moment k! / (2^(k/2) (k/2)!), 0 for odd k."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be >= 0")
    if k % 2:
        return 0
    return math.factorial(k) // (2 ** (k // 2) * math.factorial(k // 2))


# --------------------------------------------------------------------------
# per-d family data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FamilySpec:
    """Which discriminants to scan and which statistics to attach to each.

    ``forms`` are curve labels or 'file:<path>' keys; ``classes`` None means
    every (kappa, a) realising ``sign`` for all forms.
    """

    forms: tuple
    sign: Optional[int] = -1
    classes: Optional[tuple] = None
    curve: Optional[str] = None  # attach C(d; x) for this curve
    kernel_L: Optional[float] = None  # attach Fejer zero sums with this L

    def resolved(self):
        return tuple(resolve_form(f) for f in self.forms)

    @property
    def N0(self):
        return _lcm([8] + [f.level for f in self.resolved()])

    def class_list(self):
        if self.classes is not None:
            return [tuple(c) for c in self.classes]
        return valid_pairs(self.resolved(), self.sign)


@dataclass
class FamilyData:
    X: float
    x: float
    d: np.ndarray
    w: np.ndarray
    P: np.ndarray  # (n, M)
    C: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    n_classes: int = 1
    N0: int = 8
    meta: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.P.shape[1]


def _kernel(L):
    from .explicit import fejer
    return fejer(L)


def chunk_stats(task):
    """Per-d statistics on one fixed |d| chunk: dict of arrays."""
    spec, classes, X, x, lo, hi, cutoff, window_cfg = task
    forms = spec.resolved()
    n0 = _lcm([8] + [f.level for f in forms])
    d = _enumerate_classes(n0, classes, lo, hi)
    w = cutoff(np.abs(d) / X)
    keep = w > 0
    d = d[keep]
    w = w[keep]
    out = {"d": d, "w": w, "P": dirichlet_poly_many(forms, d, x)}
    if spec.curve is not None:
        E = resolve_form(spec.curve).curve
        cfg = ProxyConfig(X, x=x) if window_cfg is None else window_cfg
        win = tamagawa_window(E, cfg, n0)
        out["C"] = tamagawa_sum_C_many(E, d, cfg, win)
    if spec.kernel_L is not None:
        out["z"] = zero_sum_proxy(d, forms, _kernel(spec.kernel_L)) if d.size else np.zeros(0)
    return out


def family_tasks(spec, X, x, cutoff=DEFAULT_CUTOFF, config=None):
    classes = spec.class_list()
    lo = math.floor(cutoff.lo * X)
    hi = math.ceil(cutoff.hi * X)
    return [(spec, classes, float(X), float(x), a, b, cutoff, config)
            for a, b in chunk_ranges(lo, hi)]


def assemble(chunks, spec, X, x, n_classes):
    cat = {}
    for key in ("d", "w", "P", "C", "z"):
        parts = [c[key] for c in chunks if key in c]
        if parts:
            cat[key] = np.concatenate(parts)
    M = len(spec.forms)
    P = cat.get("P", np.zeros((0, M))).reshape(-1, M)
    return FamilyData(float(X), float(x), cat.get("d", np.zeros(0, dtype=np.int64)),
                      cat.get("w", np.zeros(0)), P, cat.get("C"), cat.get("z"),
                      n_classes, spec.N0)


def family_data(spec: FamilySpec, X, x, cutoff=DEFAULT_CUTOFF, workers=None, config=None):
    """Proxy values for every d in the family with Phi(|d|/X) > 0."""
    tasks = family_tasks(spec, X, x, cutoff, config)
    chunks = pmap(chunk_stats, tasks, workers)
    return assemble(chunks, spec, X, x, len(spec.class_list()))


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

@dataclass
class MomentReport:
    k: int
    lhs: float
    predicted: float
    ratio: Optional[float]
    normalized: float
    X: float
    x: float
    L: Optional[float] = None
    weight: float = 0.0
    count: int = 0

    def as_dict(self):
        return dict(self.__dict__)


def _wsum(values):
    return math.fsum(np.asarray(values, dtype=np.float64).tolist())


def _report(k, lhs, base, X, x, L, weight, count):
    mk = gaussian_moment(k)
    pred = base * mk
    ratio = lhs / pred if pred else None
    return MomentReport(k, lhs, pred, ratio, lhs / base if base else math.nan,
                        X, x, L, weight, count)


def poly_moment(a, k, data: FamilyData):
    """sum_d P_a(d)^k Phi against (sum Phi)(|a|^2 loglog X)^(k/2) M_k.

    For odd k the ratio is None and ``normalized`` = lhs / (sum Phi (..)^(k/2)).
    """
    a = np.asarray(a, dtype=np.float64)
    if k > 8:
        raise ValueError("k <= 8")
    Pa = data.P @ a
    lhs = _wsum(data.w * Pa ** k)
    weight = _wsum(data.w)
    var = float(a @ a) * math.log(math.log(data.X))
    return _report(k, lhs, weight * var ** (k / 2.0), data.X, data.x, None, weight,
                   int(data.d.size))


def zero_main(data: FamilyData, kernel: KernelPair, cutoff=DEFAULT_CUTOFF):
    """n_classes * X/N0 * prod(1-p^-2) Phi^(0) * M (2 log X/L h^(0) + h(0)/2)."""
    return (data.n_classes * main_term(1, 1, data.X, cutoff, data.N0)
            * predicted_main(kernel, data.X, data.M))


def poly_moment_with_zeros(a, k, data: FamilyData, kernel: KernelPair, cutoff=DEFAULT_CUTOFF):
    """sum_d P_a^k (zero sum) Phi against the closed-form main term."""
    if data.z is None:
        raise ValueError("family data carries no zero sums")
    a = np.asarray(a, dtype=np.float64)
    Pa = data.P @ a
    lhs = _wsum(data.w * data.z * Pa ** k)
    var = float(a @ a) * math.log(math.log(data.X))
    base = zero_main(data, kernel, cutoff) * var ** (k / 2.0)
    return _report(k, lhs, base, data.X, data.x, kernel.L, _wsum(data.w), int(data.d.size))


def pc_moment(b, c, k, data: FamilyData, sigma2, kernel=None, cutoff=DEFAULT_CUTOFF, column=0):
    """(b P + c (P - C))^k moments; variance b^2 + 2bc + c^2 sigma^2 per loglog X."""
    if data.C is None:
        raise ValueError("family data carries no C(d; x)")
    P = data.P[:, column]
    S = b * P + c * (P - data.C)
    var = (b * b + 2 * b * c + c * c * sigma2) * math.log(math.log(data.X))
    if kernel is None:
        lhs = _wsum(data.w * S ** k)
        base = _wsum(data.w) * var ** (k / 2.0)
        L = None
    else:
        lhs = _wsum(data.w * data.z * S ** k)
        base = zero_main(data, kernel, cutoff) * var ** (k / 2.0)
        L = kernel.L
    return _report(k, lhs, base, data.X, data.x, L, _wsum(data.w), int(data.d.size))


def shape_stats(values, w=None):
    """Weighted (mean, variance, skewness, excess kurtosis)."""
    v = np.asarray(values, dtype=np.float64)
    w = np.ones_like(v) if w is None else np.asarray(w, dtype=np.float64)
    W = _wsum(w)
    mean = _wsum(w * v) / W
    c = v - mean
    m2 = _wsum(w * c * c) / W
    m3 = _wsum(w * c ** 3) / W
    m4 = _wsum(w * c ** 4) / W
    return mean, m2, m3 / m2 ** 1.5, m4 / (m2 * m2) - 3.0


def random_unit_vectors(n, M, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, M))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class ShapeReport:
    vector: list
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float


def projection_shapes(data: FamilyData, n=5, seed=0):
    """Shape of P_a / sqrt(loglog x) along ``n`` seeded random unit vectors a."""
    scale = math.sqrt(math.log(math.log(data.x)))
    out = []
    for a in random_unit_vectors(n, data.M, seed):
        m, v, s, k = shape_stats(data.P @ a / scale, data.w)
        out.append(ShapeReport(a.tolist(), m, v, s, k))
    return out


# --------------------------------------------------------------------------
# Gaussian rectangle probabilities
# --------------------------------------------------------------------------

def psi_rectangle(alpha, beta):
    """Standard M-variate normal mass of prod_j (alpha_j, beta_j)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if np.any(alpha >= beta):
        raise ValueError("need alpha_j < beta_j")
    return float(np.prod(special.ndtr(beta) - special.ndtr(alpha)))


def _clip(v):
    return float(np.clip(v, -40.0, 40.0))


def xi_rectangle(alpha, beta, sigma_E, tol=1e-10):
    """Bivariate normal mass of (a1,b1)x(a2,b2) with correlation 1/sigma_E,
    by 2D adaptive quadrature of the density."""
    rho = 1.0 / float(sigma_E)
    if not abs(rho) < 1:
        raise ValueError("|rho| = 1/sigma_E must be < 1")
    a1, a2 = (_clip(v) for v in alpha)
    b1, b2 = (_clip(v) for v in beta)
    if a1 >= b1 or a2 >= b2:
        raise ValueError("need alpha_j < beta_j")
    det = 1.0 - rho * rho
    norm = 1.0 / (2.0 * math.pi * math.sqrt(det))

    def dens(y, x):
        return norm * math.exp(-(x * x - 2 * rho * x * y + y * y) / (2 * det))

    # restrict to where the mass is, else quadpack may miss a narrow bump
    a1, b1 = max(a1, -12.0), min(b1, 12.0)
    a2, b2 = max(a2, -12.0), min(b2, 12.0)
    if a1 >= b1 or a2 >= b2:
        return 0.0
    val, _ = integrate.dblquad(dens, a1, b1, a2, b2, epsabs=tol, epsrel=tol)
    return float(val)


def mc_rectangle(alpha, beta, rho=0.0, n=10_000_000, seed=12345, batch=1_000_000):
    """Monte Carlo rectangle mass for (correlated) standard normals."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    dim = alpha.size
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n:
        m = min(batch, n - done)
        z = rng.standard_normal((m, dim))
        if dim == 2 and rho:
            z[:, 1] = rho * z[:, 0] + math.sqrt(1 - rho * rho) * z[:, 1]
        inside = np.all((z > alpha) & (z <= beta), axis=1)
        hits += int(inside.sum())
        done += m
    return hits / n


# --------------------------------------------------------------------------
# distribution reports
# --------------------------------------------------------------------------

def lower_bound_constant(kind, M=1):
    """1 - M/4 for the M-form derivative statistic, 3/4 for the Sha pair,
    1/4 for the rank-zero pair."""
    if kind == "theorem1":
        if not 1 <= M <= 3:
            raise ValueError("M in 1..3")
        return 1.0 - M / 4.0
    if kind == "theorem2":
        return 0.75
    if kind == "rank0":
        return 0.25
    raise ValueError(kind)


@dataclass
class DistributionReport:
    kind: str
    alpha: list
    beta: list
    fraction: float
    target: float
    constant: float
    count: int
    inside: int
    undecided: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def bound(self):
        return self.constant * self.target

    def as_dict(self):
        out = dict(self.__dict__)
        out["bound"] = self.bound
        return out


def rectangle_count(stats, alpha, beta):
    """Rows with alpha_j < s_j <= beta_j for all j."""
    s = np.atleast_2d(np.asarray(stats, dtype=np.float64))
    if s.shape[0] == 1 and len(np.atleast_1d(alpha)) == 1 and s.shape[1] != 1:
        s = s.T
    a = np.asarray(alpha, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    return int(np.all((s > a) & (s <= b), axis=1).sum())


def joint_report(stats, alpha, beta, kind, sigma_E=None, undecided=0, meta=None):
    """Empirical rectangle fraction next to C * (Gaussian target)."""
    s = np.asarray(stats, dtype=np.float64)
    if s.ndim == 1:
        s = s[:, None]
    n, m = s.shape
    inside = rectangle_count(s, alpha, beta) if n else 0
    if kind == "theorem1":
        target = psi_rectangle(alpha, beta)
        const = lower_bound_constant(kind, m)
    else:
        if sigma_E is None or m != 2:
            raise ValueError("pair statistics need sigma_E and two columns")
        target = xi_rectangle(alpha, beta, sigma_E)
        const = lower_bound_constant(kind)
    total = n + undecided
    frac = inside / total if total else math.nan
    return DistributionReport(kind, list(np.atleast_1d(alpha).tolist()),
                              list(np.atleast_1d(beta).tolist()), frac, target, const,
                              total, inside, undecided, dict(meta or {}))


def proxy_pair_stats(data: FamilyData, sigma2, column=0):
    """(R_1, R_2) = (P, (P - C)/sigma) / sqrt(loglog X) for every d."""
    ll = math.log(math.log(data.X))
    P = data.P[:, column]
    return np.column_stack([P / math.sqrt(ll), (P - data.C) / math.sqrt(sigma2 * ll)])
