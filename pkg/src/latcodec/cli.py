"""Command-line surface: RD sweeps, BD deltas, file encode/decode and the
latent-shift demos.  All output files are written atomically; every error
exits nonzero with a one-line diagnostic on stderr."""

from __future__ import annotations

import os
import sys
import tempfile

import click
import numpy as np

from latcodec import codec as codec_mod
from latcodec.bitstream import read_bitstream
from latcodec.lattice import LatticeKind, LatticeSpec
from latcodec.metrics import RDCurve, bd_psnr, bd_rate
from latcodec.shifting import (
    BaselineKind,
    GradientPair,
    StepCandidates,
    baseline_shifts,
    correlation_report,
    dequant_shift_traditional,
    search_step_main,
    true_gradient_bound,
)
from latcodec.simulate import SimConfig, parse_csv, rows_to_csv, simulate_rd
from latcodec.tensorio import read_tensor, tensor_to_bytes, write_tensor


def _atomic_write(path, data: bytes):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".latcodec-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_config(path):
    values = {}
    if path is None:
        return values
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            if "=" not in ln:
                raise ValueError(f"bad config line: {ln!r}")
            key, _, value = ln.partition("=")
            values[key.strip()] = value.strip()
    return values


def _run(fn):
    try:
        fn()
    except Exception as exc:  # one-line diagnostic, nonzero exit
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@click.group()
def main():
    """Lattice quantization, entropy coding and latent-shift experiments."""


@main.command("simulate-rd")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="flat key=value file with SimConfig fields")
@click.option("--source", default=None, type=str)
@click.option("--scales", default=None, type=str, help="comma list of gaussian scales")
@click.option("--lattices", default=None, type=str, help="comma list from sq,hex,oct")
@click.option("--volumes", default=None, type=str, help="comma list of cell volumes")
@click.option("--samples", default=None, type=int)
@click.option("--seed", default=None, type=int)
@click.option("--mc-samples", default=None, type=int)
@click.option("--measured", is_flag=True, default=None,
              help="report actual rANS payload length instead of cross-entropy")
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_simulate_rd(config_path, out_path, **flags):
    """Sweep (source, lattice, volume) cells and emit a CSV."""

    def body():
        mapping = _read_config(config_path)
        for key, value in flags.items():
            if value is not None:
                mapping[key.replace("-", "_")] = value
        config = SimConfig.from_mapping(mapping)
        text = rows_to_csv(simulate_rd(config))
        if out_path:
            _atomic_write(out_path, text.encode())
        else:
            click.echo(text, nl=False)

    _run(body)


def _curve_from_csv(path):
    cols = parse_csv(open(path).read())
    return RDCurve(cols["rate_bps"], cols["psnr_db"], label=path)


@main.command("bd")
@click.argument("curve_a", type=click.Path(exists=True))
@click.argument("curve_b", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["rate", "psnr"]), default="rate")
def cmd_bd(curve_a, curve_b, mode):
    """Bjontegaard delta of curve B against anchor curve A."""

    def body():
        a, b = _curve_from_csv(curve_a), _curve_from_csv(curve_b)
        if mode == "rate":
            click.echo(f"bd_rate_percent={bd_rate(a, b):.6f}")
        else:
            click.echo(f"bd_psnr_db={bd_psnr(a, b):.6f}")

    _run(body)


@main.command("encode")
@click.argument("input_tns", type=click.Path(exists=True))
@click.argument("output_ltc", type=click.Path())
@click.option("--lattice", type=click.Choice(["sq", "hex", "oct"]), default="sq")
@click.option("--volume", type=float, default=1.0)
@click.option("--shift", type=click.Choice(["on", "off"]), default="on")
@click.option("--seed", type=int, default=0)
def cmd_encode(input_tns, output_ltc, lattice, volume, shift, seed):
    """Encode a TNS1 tensor through the hyperprior lattice codec."""

    def body():
        x = read_tensor(input_tns).reshape(-1).astype(float)
        model = codec_mod.build_model(seed, m=x.size, identity=True)
        spec = LatticeSpec(LatticeKind.from_name(lattice), volume)
        data, inst = codec_mod.encode_full(x, model, spec, shift_enabled=(shift == "on"))
        _atomic_write(output_ltc, data)
        rate = len(data) * 8.0 / x.size
        click.echo(f"rate_bpp={rate:.6f} psnr_db={inst.psnr:.6f}")

    _run(body)


@main.command("decode")
@click.argument("input_ltc", type=click.Path(exists=True))
@click.argument("output_tns", type=click.Path())
@click.option("--seed", type=int, default=0)
@click.option("--length", type=int, required=True, help="tensor length used at encode time")
def cmd_decode(input_ltc, output_tns, seed, length):
    """Decode a bitstream back to a TNS1 tensor (flat)."""

    def body():
        data = open(input_ltc, "rb").read()
        model = codec_mod.build_model(seed, m=length, identity=True)
        x_hat = codec_mod.decode_full(data, model)
        _atomic_write(output_tns, tensor_to_bytes(x_hat))
        click.echo(f"rate_bpp={len(data) * 8.0 / length:.6f}")

    _run(body)


@main.command("dequant-shift")
@click.argument("input_tns", type=click.Path(exists=True))
@click.argument("output_tns", type=click.Path())
@click.option("--alpha", type=float, default=0.0)
@click.option("--reference", type=click.Path(exists=True), default=None,
              help="pre-quantization values for the MSE report")
def cmd_dequant_shift(input_tns, output_tns, alpha, reference):
    """Traditional-codec dequantization shift |c| <- |c| + alpha/|c|.

    Reports the synthetic log-rate model sum(log|c|) over |c| >= 1 before
    and after, plus MSE against a reference when one is supplied.
    """

    def body():
        coeffs = read_tensor(input_tns).astype(float)
        if not np.all(coeffs == np.round(coeffs)):
            raise ValueError("input coefficients must be integers")
        shifted = dequant_shift_traditional(coeffs, alpha)
        _atomic_write(output_tns, tensor_to_bytes(shifted))

        def log_rate(c):
            mag = np.abs(c)
            return float(np.log(mag[mag >= 1.0]).sum())

        click.echo(f"rate_model_before={log_rate(coeffs):.6f}")
        click.echo(f"rate_model_after={log_rate(shifted):.6f}")
        if reference is not None:
            ref = read_tensor(reference).astype(float)
            click.echo(f"mse_before={np.mean((coeffs - ref) ** 2):.10g}")
            click.echo(f"mse_after={np.mean((shifted - ref) ** 2):.10g}")

    _run(body)


@main.command("shift-demo")
@click.option("--seeds", type=int, default=20)
@click.option("--lattice", type=click.Choice(["sq", "hex", "oct"]), default="sq")
@click.option("--volume", type=float, default=codec_mod.DEFAULT_REF_VOLUME)
@click.option("--seed", type=int, default=0, help="model seed")
@click.option("--baselines/--no-baselines", default=True)
def cmd_shift_demo(seeds, lattice, volume, seed, baselines):
    """Mean PSNR gains of the latent shift and the alternative shifts."""

    def body():
        model = codec_mod.build_model(seed)
        spec = LatticeSpec(LatticeKind.from_name(lattice), volume)
        src = codec_mod.mixture_source(model)
        gains = {"latent_shift": []}
        kinds = [BaselineKind.SIGN, BaselineKind.SCALAR, BaselineKind.RANDOM] if baselines else []
        for k in kinds:
            gains[k.value + "_shift"] = []
        gains["true_gradient"] = []
        for i in range(seeds):
            x = src(1000 + i)
            _, on = codec_mod.encode_full(x, model, spec, shift_enabled=True)
            _, off = codec_mod.encode_full(x, model, spec, shift_enabled=False)
            gains["latent_shift"].append(on.psnr - off.psnr)
            cand = StepCandidates.from_sigma(off.field.sigma)
            rep = true_gradient_bound(x, off.y_hat, off.field, model.decode_latents, cand,
                                      distortion_gradient=model.distortion_gradient)
            gains["true_gradient"].append(rep.true_gain_db)
            for k in kinds:
                res = baseline_shifts(k, x, off.y_hat, off.field, model.decode_latents,
                                      seed=2000 + i)
                gains[k.value + "_shift"].append(res.gain_db)
        for name, vals in gains.items():
            click.echo(f"{name}_mean_db={np.mean(vals):.6f}")

    _run(body)


@main.command("correlation")
@click.option("--seeds", type=int, default=30)
@click.option("--pair", type=click.Choice(["main", "side"]), default="main")
@click.option("--volume", type=float, default=codec_mod.DEFAULT_REF_VOLUME)
@click.option("--seed", type=int, default=0, help="model seed")
def cmd_correlation(seeds, pair, volume, seed):
    """Mean Pearson correlation of the KKT gradient pair over seeds."""

    def body():
        model = codec_mod.build_model(seed)
        spec = LatticeSpec(LatticeKind.INTEGER, volume)
        src = codec_mod.mixture_source(model)
        pid = (
            GradientPair.MAIN_ENTROPY_VS_DISTORTION
            if pair == "main"
            else GradientPair.SIDE_ENTROPY_VS_MAIN_ENTROPY
        )
        rs = []
        for i in range(seeds):
            x = src(1000 + i)
            _, inst = codec_mod.encode_full(x, model, spec, shift_enabled=False)
            rs.append(correlation_report([codec_mod.gradient_pair(model, inst, pid)], pid).pearson_r)
        click.echo(f"pair={pair} mean_pearson_r={np.mean(rs):.6f} n_seeds={seeds}")

    _run(body)


if __name__ == "__main__":
    main()
