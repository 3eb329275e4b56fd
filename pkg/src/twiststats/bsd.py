"""BSD invariants of quadratic twists: loading, computed proxies and the S-statistics."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from ._backend import cache_dir
from .arith import EllipticCurveSpec, factorint, get_curve, rational_roots
from .proxy import c_of_p, cubic_disc

log = logging.getLogger(__name__)

REQUIRED = ("omega", "torsion", "tamagawa")
OPTIONAL = ("regulator", "sha")
ALLOWED = {"d", "curve", "note"} | set(REQUIRED) | set(OPTIONAL)
CONFLICT_RTOL = 1e-9
ENVELOPE_FACTOR = 8.0


class InvariantNotFound(LookupError):
    pass


class InvariantParseError(ValueError):
    def __init__(self, message, field_name):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class MissingInvariant(ValueError):
    def __init__(self, missing):
        super().__init__("missing invariants: " + ", ".join(missing))
        self.missing = list(missing)


@dataclass
class CurveInvariants:
    curve: str
    d: int
    omega: float
    torsion: int
    tamagawa: int
    regulator: Optional[float] = None
    sha: Optional[int] = None
    provenance: str = "fixture"
    sources: dict = field(default_factory=dict)
    approximate: bool = False

    def __post_init__(self):
        if self.provenance not in ("fixture", "remote", "computed-proxy"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        for name in REQUIRED + OPTIONAL:
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvariantParseError("must be positive", name)
            if v is not None and name not in self.sources:
                self.sources[name] = self.provenance

    def record(self):
        """Fixture-schema dict (only present fields)."""
        out = {"d": self.d, "omega": self.omega, "torsion": self.torsion,
               "tamagawa": self.tamagawa}
        for name in OPTIONAL:
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out

    def as_dict(self):
        return asdict(self)


def parse_record(rec, curve, provenance, d=None):
    """Validate one fixture/remote record; errors name the offending field."""
    if not isinstance(rec, dict):
        raise InvariantParseError("record must be a JSON object", "<record>")
    extra = set(rec) - ALLOWED
    if extra:
        raise InvariantParseError("unknown field", sorted(extra)[0])
    for name in ("d",) + REQUIRED:
        if name not in rec:
            raise InvariantParseError("required field absent", name)
    vals = {}
    for name, kind in (("d", int), ("omega", float), ("torsion", int), ("tamagawa", int),
                       ("regulator", float), ("sha", int)):
        v = rec.get(name)
        if v is None:
            vals[name] = None
            continue
        if kind is int and not (isinstance(v, int) and not isinstance(v, bool)):
            raise InvariantParseError(f"expected integer, got {v!r}", name)
        if kind is float and not (isinstance(v, (int, float)) and not isinstance(v, bool)):
            raise InvariantParseError(f"expected number, got {v!r}", name)
        vals[name] = kind(v)
    if d is not None and vals["d"] != int(d):
        raise InvariantParseError(f"record is for d={vals['d']}, wanted {d}", "d")
    if "curve" in rec and rec["curve"] != curve:
        raise InvariantParseError(f"record is for {rec['curve']!r}", "curve")
    return CurveInvariants(curve, vals["d"], vals["omega"], vals["torsion"], vals["tamagawa"],
                           vals["regulator"], vals["sha"], provenance)


def _read_fixture_file(path, curve):
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".jsonl"):
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        obj = json.loads(text)
        recs = obj if isinstance(obj, list) else [obj]
    return [parse_record(r, curve, "fixture") for r in recs]


def load_fixtures(directory, curve):
    """All fixture records for ``curve`` from DIR/<curve>.json or DIR/<curve>.jsonl."""
    out = {}
    for ext in (".json", ".jsonl"):
        path = os.path.join(directory, curve + ext)
        if os.path.exists(path):
            for inv in _read_fixture_file(path, curve):
                out[inv.d] = inv
    return out


def write_fixture(directory, invariants):
    """Write records as DIR/<curve>.json (list), sorted by d."""
    by_curve = {}
    for inv in invariants:
        by_curve.setdefault(inv.curve, []).append(inv.record())
    os.makedirs(directory, exist_ok=True)
    for curve, recs in by_curve.items():
        recs.sort(key=lambda r: r["d"])
        with open(os.path.join(directory, curve + ".json"), "w") as fh:
            json.dump(recs, fh, indent=1, sort_keys=True)


class RemoteInvariants:
    """GET {base}/{curve}/{d}.json with an on-disk cache.

    Offline mode reads only the cache; ``refresh`` re-fetches cached records.
    """

    def __init__(self, base_url, cache=None, offline=False, refresh=False, transport=None,
                 retries=3, timeout=10.0):
        self.base_url = base_url.rstrip("/")
        self.cache = cache or os.path.join(cache_dir(), "remote")
        self.offline = offline
        self.refresh = refresh
        self.transport = transport
        self.retries = retries
        self.timeout = timeout
        self.fetches = 0

    def url(self, curve, d):
        return f"{self.base_url}/{curve}/{int(d)}.json"

    def _cache_path(self, url):
        return os.path.join(self.cache, hashlib.sha256(url.encode()).hexdigest() + ".json")

    def _fetch(self, url):
        import httpx

        last = None
        with httpx.Client(transport=self.transport, timeout=self.timeout) as client:
            for attempt in range(self.retries):
                try:
                    resp = client.get(url)
                except httpx.TransportError as exc:
                    last = exc
                    time.sleep(0.1 * 2 ** attempt)
                    continue
                self.fetches += 1
                if resp.status_code == 404:
                    return None
                if resp.status_code >= 500:
                    last = RuntimeError(f"HTTP {resp.status_code}")
                    continue
                resp.raise_for_status()
                return resp.json()
        raise ConnectionError(f"{url}: {last}")

    def get(self, curve, d):
        url = self.url(curve, d)
        path = self._cache_path(url)
        if os.path.exists(path) and not self.refresh:
            with open(path) as fh:
                rec = json.load(fh)
        elif self.offline:
            raise InvariantNotFound(f"{curve} d={d}: not cached and offline")
        else:
            rec = self._fetch(url)
            os.makedirs(self.cache, exist_ok=True)
            tmp = path + ".tmp"
            with open(tmp, "w") as fh:
                json.dump(rec, fh, sort_keys=True)
            os.replace(tmp, path)
        if rec is None:
            raise InvariantNotFound(f"{curve} d={d}: no remote record")
        return parse_record(rec, curve, "remote", d)


@dataclass
class InvariantSource:
    fixtures: Optional[str] = None
    remote: Optional[RemoteInvariants] = None
    computed: bool = False

    def __post_init__(self):
        self._fixture_cache = {}

    def _fixture(self, curve, d):
        if self.fixtures is None:
            return None
        if curve not in self._fixture_cache:
            self._fixture_cache[curve] = load_fixtures(self.fixtures, curve)
        return self._fixture_cache[curve].get(int(d))

    def load(self, curve, d):
        return load_invariants(self, curve, d)


def _merge(fix, rem):
    """Fixture wins field by field; remote only fills absent optional fields."""
    for name in REQUIRED + OPTIONAL:
        a, b = getattr(fix, name), getattr(rem, name)
        if a is None and b is not None:
            setattr(fix, name, b)
            fix.sources[name] = "remote"
        elif a is not None and b is not None and not math.isclose(a, b, rel_tol=CONFLICT_RTOL):
            log.warning("%s d=%d: fixture %s=%r conflicts with remote %r; using fixture",
                        fix.curve, fix.d, name, a, b)
    return fix


def load_invariants(source: InvariantSource, curve, d):
    """Invariants of E_d from fixtures, then remote, then (if enabled) computed proxies."""
    d = int(d)
    fix = source._fixture(curve, d)
    rem = None
    if source.remote is not None:
        try:
            rem = source.remote.get(curve, d)
        except (InvariantNotFound, ConnectionError) as exc:
            if fix is None and not source.computed:
                raise InvariantNotFound(str(exc)) from exc
    if fix is not None:
        return _merge(fix, rem) if rem is not None else fix
    if rem is not None:
        return rem
    if source.computed:
        return computed_invariants(get_curve(curve), d)
    raise InvariantNotFound(f"{curve} d={d}: no fixture record")


# --------------------------------------------------------------------------
# computed proxies
# --------------------------------------------------------------------------

def _agm(a, b):
    for _ in range(64):
        if abs(a - b) <= 1e-16 * abs(a):
            break
        a, b = (a + b) / 2.0, math.sqrt(a * b)
    return (a + b) / 2.0


def real_period(cubic):
    """Omega of y^2 = x^3 + c2 x^2 + c1 x + c0 for the differential dx/y, counting
    both real components when the discriminant is positive (AGM)."""
    c2, c1, c0 = (float(c) for c in cubic)
    roots = np.roots([1.0, c2, c1, c0])
    disc = cubic_disc(*(int(c) for c in cubic))
    if disc > 0:
        e3, e2, e1 = sorted(roots.real)
        half = math.pi / _agm(math.sqrt(e1 - e3), math.sqrt(e1 - e2))
        return 4.0 * half
    real = roots[np.argmin(np.abs(roots.imag))].real
    cplx = roots[np.argmax(roots.imag)]
    z = abs(real - cplx)
    half = 2.0 * math.pi / _agm(2.0 * math.sqrt(z), math.sqrt(2.0 * z + 3.0 * real + c2))
    return 2.0 * half


def twisted_cubic(E: EllipticCurveSpec, d):
    c2, c1, c0 = E.cubic
    return (c2 * d, c1 * d * d, c0 * d ** 3)


def tamagawa_proxy(E: EllipticCurveSpec, d):
    """prod over p | d, p !| 2 N disc(F), of 1 + #roots of F mod p; returns (value, omitted primes)."""
    bad = 2 * E.conductor * E.disc
    value = 1
    omitted = []
    for p in sorted(factorint(abs(int(d)))) if abs(int(d)) > 1 else []:
        if bad % p == 0:
            omitted.append(p)
            continue
        value *= c_of_p(E, p)
    return value, omitted


def computed_invariants(E: EllipticCurveSpec, d, envelope=ENVELOPE_FACTOR):
    """Period of the twisted model, 2-torsion count and Tamagawa product over good p | d.

    Flagged approximate: the twisted model need not be minimal at 2 and 3, and
    local factors at bad primes of E are omitted.
    """
    d = int(d)
    omega = real_period(twisted_cubic(E, d))
    base = real_period(E.cubic)
    rel = omega * math.sqrt(abs(d)) / base
    if not 1.0 / envelope <= rel <= envelope:
        raise ValueError(f"d={d}: period {omega} outside the 1/sqrt|d| envelope ({rel:.3g})")
    tors = 1 + len(rational_roots(E.cubic))
    tam, omitted = tamagawa_proxy(E, d)
    if omitted:
        log.info("%s d=%d: Tamagawa factors at %s omitted", E.label, d, omitted)
    return CurveInvariants(E.label, d, omega, tors, tam, provenance="computed-proxy",
                           approximate=True)


# --------------------------------------------------------------------------
# assembled statistics
# --------------------------------------------------------------------------

def _need(inv, names):
    missing = [n for n in names if inv is None or getattr(inv, n) is None]
    if missing:
        raise MissingInvariant(missing)


def sha_reg_proxy(Lprime, inv: CurveInvariants):
    """S(E_d) R(E_d) = L'(1/2) tors^2 / (Omega Tam)."""
    _need(inv, REQUIRED)
    return float(Lprime) * inv.torsion ** 2 / (inv.omega * inv.tamagawa)


def sha_proxy(Lprime, inv: CurveInvariants):
    """S(E_d) alone; needs the regulator."""
    _need(inv, REQUIRED + ("regulator",))
    return sha_reg_proxy(Lprime, inv) / inv.regulator


def s0_proxy(Lcentral, inv: CurveInvariants, sign):
    """S_0(E_d) = L(1/2) tors^2 / (Omega Tam) for an even-sign twist."""
    if sign != 1:
        raise ValueError("S_0 needs root number +1")
    if not Lcentral > 0:
        raise ValueError("central value vanishes or is negative")
    _need(inv, REQUIRED)
    return float(Lcentral) * inv.torsion ** 2 / (inv.omega * inv.tamagawa)


def sha_statistic(SR, d, mu, sigma2):
    """(log(S R / sqrt|d|) - (mu + 1) loglog|d|) / sqrt(sigma^2 loglog|d|)."""
    ll = math.log(math.log(abs(d)))
    return (math.log(SR / math.sqrt(abs(d))) - (mu + 1.0) * ll) / math.sqrt(sigma2 * ll)


def s0_statistic(S0, d, mu, sigma2):
    """(log(S_0 / sqrt|d|) - mu loglog|d|) / sqrt(sigma^2 loglog|d|)."""
    ll = math.log(math.log(abs(d)))
    return (math.log(S0 / math.sqrt(abs(d))) - mu * ll) / math.sqrt(sigma2 * ll)


def central_statistic(L, d):
    """(log L(1/2) + 1/2 loglog|d|) / sqrt(loglog|d|)."""
    ll = math.log(math.log(abs(d)))
    return (math.log(L) + 0.5 * ll) / math.sqrt(ll)
