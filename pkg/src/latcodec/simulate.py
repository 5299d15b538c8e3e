"""Rate-distortion sweeps over analytic sources and lattice grids.

Rate is the cross-entropy of the emitted codes under the built PMF table
(the theoretical bitlength), per scalar sample; a measured mode swaps in
the actual rANS payload length.  For the uniform source each packed
vector gets an independent random lattice phase: uniform statistics are
phase invariant, and dithering removes the bias the finite box edges
would otherwise impose on the per-cell error moments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from latcodec.entropy import normalize_fixed_point, pmf_hex, pmf_mc, pmf_scalar, rate_lower_bound
from latcodec.lattice import LatticeKind, LatticeSpec, center_of, enumerate_dictionary, nearest_int_coords
from latcodec.metrics import psnr_db
from latcodec.rans import rans_encode

CSV_HEADER = "lattice,scale,volume,rate_bps,mse,psnr_db"

_CONFIG_KEYS = {
    "source",
    "scales",
    "lattices",
    "volumes",
    "samples",
    "seed",
    "mc_samples",
    "measured",
}


@dataclass
class SimConfig:
    source: str = "gaussian"  # "uniform" (U(-4,4)) or "gaussian"
    scales: tuple = (1.0,)  # gaussian standard deviations
    lattices: tuple = ("sq", "hex", "oct")
    volumes: tuple = (1.0,)
    samples: int = 1_000_000  # scalar samples per sweep cell
    seed: int = 0
    mc_samples: int = 1_000_000  # Monte Carlo table size for 3D cells
    measured: bool = False  # report actual rANS payload length instead

    def validate(self):
        if self.source not in ("uniform", "gaussian"):
            raise ValueError(f"unknown source: {self.source}")
        if self.samples <= 0:
            raise ValueError("empty simulation")
        for name in self.lattices:
            LatticeKind.from_name(name)

    @classmethod
    def from_mapping(cls, mapping):
        bad = set(mapping) - _CONFIG_KEYS
        if bad:
            raise ValueError(f"unknown config key: {sorted(bad)[0]}")
        kw = {}
        for key, value in mapping.items():
            if key in ("scales", "volumes"):
                kw[key] = tuple(float(v) for v in str(value).split(","))
            elif key == "lattices":
                kw[key] = tuple(str(value).split(","))
            elif key in ("samples", "seed", "mc_samples"):
                kw[key] = int(value)
            elif key == "measured":
                kw[key] = str(value).lower() in ("1", "true", "yes", "on")
            else:
                kw[key] = str(value)
        return cls(**kw)


@dataclass
class SimRow:
    lattice: str
    scale: float
    volume: float
    rate_bps: float
    mse: float
    psnr: float

    def csv(self):
        return (
            f"{self.lattice},{self.scale:.6g},{self.volume:.6g},"
            f"{self.rate_bps:.8f},{self.mse:.10g},{self.psnr:.6f}"
        )


def _simulate_cell(kind: LatticeKind, scale, volume, source, samples, rng, mc_samples, measured):
    spec = LatticeSpec(kind, float(volume))
    v = spec.ndim
    n_vec = samples // v
    if n_vec == 0:
        raise ValueError("empty simulation")

    if source == "uniform":
        X = rng.uniform(-4.0, 4.0, size=(n_vec, v))
        phase = (rng.random((n_vec, v)) - 0.5) * spec.coset_period
        quant = center_of(nearest_int_coords(X - phase, spec), spec)
        Xh = quant + phase
        pad = spec.circumradius + np.max(spec.coset_period)
        d = enumerate_dictionary(spec, [(-4.0 - pad, 4.0 + pad)] * v)
        codes = d.index_of(nearest_int_coords(X - phase, spec))
        table = normalize_fixed_point(np.bincount(codes, minlength=len(d)).astype(float))
    else:
        sigma = float(scale)
        X = rng.normal(0.0, sigma, size=(n_vec, v))
        d = enumerate_dictionary(spec, [(-6.0 * sigma, 6.0 * sigma)] * v)
        codes = d.encode(X)
        Xh = d.centers[codes]
        if kind is LatticeKind.INTEGER:
            table = pmf_scalar((0.0, sigma), spec.volume, d.centers[:, 0])
        elif kind is LatticeKind.HEX:
            table = pmf_hex((0.0, 0.0), (sigma, sigma), d)
        else:
            table = pmf_mc(
                np.zeros(3), np.full(3, sigma), d, mc_samples,
                seed=rng.integers(0, 2**31),
            )

    if measured:
        rate = len(rans_encode(codes, table)) * 8.0 / (n_vec * v)
    else:
        rate = rate_lower_bound(codes, table) / (n_vec * v)
    mse = float(np.mean((X - Xh) ** 2))
    return SimRow(
        lattice=kind.value,
        scale=float(scale) if source == "gaussian" else 4.0,
        volume=float(volume),
        rate_bps=rate,
        mse=mse,
        psnr=float(psnr_db(mse)),
    )


def simulate_rd(config: SimConfig) -> list[SimRow]:
    """Run the sweep; rows come back sorted by (lattice, scale, volume)."""
    config.validate()
    scales = config.scales if config.source == "gaussian" else (4.0,)
    rows = []
    for name in config.lattices:
        kind = LatticeKind.from_name(name)
        for scale in scales:
            for volume in config.volumes:
                # one independent, reproducible stream per sweep cell
                rng = np.random.default_rng(
                    [config.seed, hash(kind.value) & 0x7FFFFFFF,
                     int(scale * 10**6), int(volume * 10**6)]
                )
                rows.append(
                    _simulate_cell(
                        kind, scale, volume, config.source, config.samples,
                        rng, config.mc_samples, config.measured,
                    )
                )
    rows.sort(key=lambda r: (r.lattice, r.scale, r.volume))
    return rows


def rows_to_csv(rows) -> str:
    return "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"


def parse_csv(text):
    """Read a sweep CSV back into column arrays (header required)."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    header = lines[0].split(",")
    cols = {name: [] for name in header}
    for ln in lines[1:]:
        for name, value in zip(header, ln.split(",")):
            cols[name].append(value)
    out = {}
    for name, values in cols.items():
        if name == "lattice":
            out[name] = np.array(values)
        else:
            out[name] = np.array([float(v) for v in values])
    return out
