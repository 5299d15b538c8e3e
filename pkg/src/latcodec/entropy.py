"""Probability models over latents and fixed-point PMF tables.

Two density families drive the coder: per-element Gaussians from a
hyperprior-style field, and a non-parametric 1D density represented as a
piecewise-linear CDF (the stand-in for a learned factorized model).
Tables are integer frequency vectors summing to exactly 2**precision so
the range coder is bit-exact across platforms.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import special

from latcodec.integrate import adaptive_simpson
from latcodec.lattice import Dictionary, LatticeKind, nearest_int_coords

PRECISION = 16
SIGMA_MIN = 0.01

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianField:
    """Per-element (mu, sigma) of the entropy model over a latent tensor."""

    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def make(cls, mu, sigma):
        mu = np.asarray(mu, dtype=float)
        sigma = np.clip(np.asarray(sigma, dtype=float), SIGMA_MIN, None)
        if mu.shape != sigma.shape:
            raise ValueError("mu and sigma lengths differ")
        return cls(mu=mu, sigma=sigma)

    def __len__(self):
        return self.mu.size


class FactorizedPdf:
    """1D density represented by a piecewise-linear CDF on a bounded grid."""

    def __init__(self, knots, cdf):
        knots = np.asarray(knots, dtype=float)
        cdf = np.asarray(cdf, dtype=float)
        if knots.ndim != 1 or knots.size < 2 or np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(np.diff(cdf) < 0) or abs(cdf[0]) > 1e-9 or abs(cdf[-1] - 1.0) > 1e-9:
            raise ValueError("cdf must rise monotonically from 0 to 1")
        self.knots = knots
        self.cdf_values = cdf
        self._slopes = np.diff(cdf) / np.diff(knots)
        self._mids = 0.5 * (knots[:-1] + knots[1:])

    @property
    def support(self):
        return float(self.knots[0]), float(self.knots[-1])

    @classmethod
    def from_density(cls, density, lo, hi, knots=1024):
        x = np.linspace(lo, hi, knots)
        w = np.clip(np.asarray(density(x), dtype=float), 0.0, None)
        seg = 0.5 * (w[:-1] + w[1:]) * np.diff(x)
        total = seg.sum()
        if total <= 0:
            raise ValueError("density has no mass on the support")
        cdf = np.clip(np.concatenate([[0.0], np.cumsum(seg) / total]), 0.0, 1.0)
        cdf[-1] = 1.0
        return cls(x, cdf)

    @classmethod
    def from_samples(cls, samples, knots=1024):
        s = np.sort(np.asarray(samples, dtype=float))
        if s.size < 2:
            raise ValueError("need at least two samples")
        pad = max(1e-6, 0.05 * (s[-1] - s[0]))
        x = np.linspace(s[0] - pad, s[-1] + pad, knots)
        cdf = np.searchsorted(s, x, side="right") / s.size
        cdf[0], cdf[-1] = 0.0, 1.0
        cdf = np.maximum.accumulate(cdf)
        return cls(x, cdf)

    def cdf(self, x):
        return np.interp(x, self.knots, self.cdf_values)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self._mids, self._slopes)
        lo, hi = self.support
        return np.where((x < lo) | (x > hi), 0.0, out)


class PmfTable:
    """Fixed-point PMF: integer frequencies summing to exactly 2**precision."""

    MAGIC = b"PMF1"

    def __init__(self, freqs, precision=PRECISION, raw=None, escape_index=None):
        freqs = np.asarray(freqs, dtype=np.uint32)
        total = 1 << precision
        if freqs.size == 0 or freqs.size > total:
            raise ValueError("code count out of range")
        if int(freqs.sum()) != total or np.any(freqs == 0):
            raise ValueError("frequencies must be >=1 and sum to 2**precision")
        self.freqs = freqs
        self.precision = precision
        self.raw = None if raw is None else np.asarray(raw, dtype=float)
        self.escape_index = escape_index
        self.cum = np.concatenate([[0], np.cumsum(freqs, dtype=np.uint64)]).astype(
            np.uint32
        )

    @property
    def code_count(self):
        return int(self.freqs.size)

    def __len__(self):
        return self.code_count

    @property
    def probs(self):
        return self.freqs.astype(float) / float(1 << self.precision)

    def bits(self, codes):
        codes = np.asarray(codes, dtype=np.int64)
        if codes.size and (codes.min() < 0 or codes.max() >= self.code_count):
            raise ValueError("code out of range")
        return float(-np.log2(self.probs[codes]).sum()) if codes.size else 0.0

    def entropy_bits(self):
        p = self.probs
        return float(-(p * np.log2(p)).sum())

    def to_bytes(self) -> bytes:
        head = self.MAGIC + struct.pack("<BI", self.precision, self.code_count)
        return head + self.freqs.astype("<u4").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "PmfTable":
        if data[:4] != cls.MAGIC:
            raise ValueError("bad magic")
        precision, count = struct.unpack("<BI", data[4:9])
        freqs = np.frombuffer(data[9 : 9 + 4 * count], dtype="<u4")
        if freqs.size != count:
            raise ValueError("truncated table")
        return cls(freqs.astype(np.uint32), precision)

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_bytes()).digest()


def table_pool_hash(tables) -> bytes:
    h = hashlib.sha256()
    for t in tables:
        h.update(t.to_bytes())
    return h.digest()


def normalize_fixed_point(raw, precision=PRECISION, **table_kwargs) -> PmfTable:
    """Largest-remainder apportionment of 2**precision with a floor of 1.

    Deterministic: remainder ties and donor picks resolve to the lowest
    index. Raises on nonpositive total mass ("empty support").
    """
    raw = np.asarray(raw, dtype=float)
    raw = np.where(raw > 0, raw, 0.0)
    total_mass = raw.sum()
    if not np.isfinite(total_mass) or total_mass <= 0:
        raise ValueError("empty support")
    total = 1 << precision
    m = raw.size
    if m > total:
        raise ValueError("dictionary too large")
    scaled = raw / total_mass * total
    base = np.floor(scaled).astype(np.int64)
    rem = scaled - base
    deficit = int(total - base.sum())
    order = np.lexsort((np.arange(m), -rem))
    if deficit > 0:
        base[order[:deficit]] += 1
    elif deficit < 0:
        donors = np.lexsort((np.arange(m), -base))
        base[donors[:-deficit]] -= 1
    # enforce the floor of 1 by taking from the largest entries
    while True:
        zeros = np.flatnonzero(base == 0)
        if zeros.size == 0:
            break
        donors = np.lexsort((np.arange(m), -base))
        k = 0
        for z in zeros:
            while base[donors[k]] <= 1:
                k += 1
            base[z] = 1
            base[donors[k]] -= 1
    return PmfTable(base.astype(np.uint32), precision, raw=raw, **table_kwargs)


def _scalar_cdf(model):
    """CDF callable from a (mu, sigma) pair or a FactorizedPdf."""
    if isinstance(model, FactorizedPdf):
        return model.cdf
    mu, sigma = model
    sigma = max(float(sigma), SIGMA_MIN)
    mu = float(mu)

    def cdf(x):
        return 0.5 * (1.0 + special.erf((np.asarray(x, dtype=float) - mu) / (sigma * _SQRT2)))

    return cdf


def pmf_scalar(model, bin_width, centers, precision=PRECISION) -> PmfTable:
    """PMF of width-w bins around 1D centers: CDF(c+w/2) - CDF(c-w/2)."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    centers = np.asarray(centers, dtype=float).reshape(-1)
    cdf = _scalar_cdf(model)
    half = 0.5 * bin_width
    raw = np.asarray(cdf(centers + half)) - np.asarray(cdf(centers - half))
    return normalize_fixed_point(raw, precision)


def _gauss_pdf(y, mu, sigma):
    t = (y - mu) / sigma
    return math.exp(-0.5 * t * t) * _INV_SQRT2PI / sigma


def _phi(t):
    return 0.5 * (1.0 + math.erf(t / _SQRT2))


def hex_cell_mass(mu, sigma, side, tol=1e-8) -> float:
    """Product-Gaussian mass over the origin-centered flat-top hexagon.

    The inner x-integral has the erf closed form; the outer y-integral is
    adaptive Simpson over the lower and upper half of the hexagon.
    """
    m1, m2 = float(mu[0]), float(mu[1])
    s1 = max(float(sigma[0]), SIGMA_MIN)
    s2 = max(float(sigma[1]), SIGMA_MIN)
    a = side
    h = 0.5 * _SQRT3 * a

    def upper(y):
        x_hi = a - y / _SQRT3
        x_lo = -a + y / _SQRT3
        return (_phi((x_hi - m1) / s1) - _phi((x_lo - m1) / s1)) * _gauss_pdf(y, m2, s2)

    def lower(y):
        x_hi = a + y / _SQRT3
        x_lo = -a - y / _SQRT3
        return (_phi((x_hi - m1) / s1) - _phi((x_lo - m1) / s1)) * _gauss_pdf(y, m2, s2)

    return adaptive_simpson(upper, 0.0, h, tol=0.5 * tol) + adaptive_simpson(
        lower, -h, 0.0, tol=0.5 * tol
    )


def pmf_hex(mu, sigma, dictionary: Dictionary, tol=1e-8, precision=PRECISION) -> PmfTable:
    """Gaussian PMF over a hexagonal dictionary by analytic-inner /
    numeric-outer integration of the product density over each cell."""
    if dictionary.lattice.kind is not LatticeKind.HEX:
        raise ValueError("dictionary is not hexagonal")
    mu = np.asarray(mu, dtype=float).reshape(2)
    sigma = np.asarray(sigma, dtype=float).reshape(2)
    side = dictionary.lattice.side_length
    raw = np.empty(len(dictionary))
    for i, c in enumerate(dictionary.centers):
        raw[i] = hex_cell_mass(mu - c, sigma, side, tol=tol)
    return normalize_fixed_point(raw, precision)


def pmf_mc(mu, sigma, dictionary: Dictionary, samples, seed, precision=PRECISION) -> PmfTable:
    """Monte Carlo PMF: nearest-cell frequencies of product-Gaussian draws.

    Deterministic for a fixed seed; cells never observed get the
    fixed-point floor of one count.
    """
    if samples < 10**5:
        raise ValueError("need at least 1e5 samples")
    v = dictionary.lattice.ndim
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (v,))
    sigma = np.clip(np.broadcast_to(np.asarray(sigma, dtype=float), (v,)), SIGMA_MIN, None)
    rng = np.random.default_rng(seed)
    counts = np.zeros(len(dictionary), dtype=np.int64)
    remaining = int(samples)
    chunk = 1 << 20
    while remaining > 0:
        n = min(chunk, remaining)
        x = rng.standard_normal((n, v)) * sigma + mu
        idx = dictionary.encode(x)
        counts += np.bincount(idx, minlength=len(dictionary))
        remaining -= n
    return normalize_fixed_point(counts.astype(float), precision)


def rate_lower_bound(codes, tables, refs=None) -> float:
    """Total -sum(log2 P(code)) in bits under fixed-point probabilities.

    ``tables`` may be a single PmfTable or a pool; ``refs`` gives the pool
    index per symbol (defaults to table 0).
    """
    codes = np.asarray(codes, dtype=np.int64)
    if isinstance(tables, PmfTable):
        tables = [tables]
    if codes.size == 0:
        return 0.0
    if refs is None:
        refs = np.zeros(codes.size, dtype=np.int64)
    refs = np.asarray(refs, dtype=np.int64)
    if refs.shape != codes.shape:
        raise ValueError("refs length mismatch")
    bits = 0.0
    for t in np.unique(refs):
        bits += tables[int(t)].bits(codes[refs == t])
    return bits
