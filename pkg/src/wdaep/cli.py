"""``wdaep <command> [--config FILE] [--key value ...]``

Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error.
Every command writes its fully resolved configuration beside its outputs
(``<out>.config.json`` for files, ``<out>/config.json`` for directories);
passing that file back through ``--config`` repeats the run.
"""

from __future__ import annotations

import json
import math
import os
import sys
import warnings
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchmark, io
from .config import DEFAULTS, RunConfig, parse_dims, parse_list
from .data import make_phantom, make_phantom_set, training_patches
from .errors import (
    ConfigError,
    DataError,
    MaskError,
    UnsupportedWavelet,
    UsageError,
    WdaepError,
)
from .kspace import add_measurement_noise, encode, make_mask, zero_filled
from .metrics import evaluate
from .prior.network import Architecture, build_network
from .prior.training import TrainConfig, train_dae
from .recon import ReconConfig, reconstruct, sigma_for_acceleration

__all__ = ["main", "COMMANDS", "parse_args", "usage"]

# namespaces searched, in order, for an undotted ``--key``
_SEARCH = {
    "maskgen": ("mask", "io"),
    "phantom": ("phantom", "io"),
    "encode": ("encode", "io"),
    "train": ("train", "prior", "io"),
    "reconstruct": ("recon", "io"),
    "metrics": ("io",),
    "sweep": ("sweep", "recon", "io"),
    "inspect": ("inspect", "io"),
}
COMMANDS = tuple(_SEARCH)


def _resolve_key(command: str, name: str) -> str:
    name = name.replace("-", "_")
    if name == "wavelet":
        return "wavelet.name"
    if "." in name:
        if name not in DEFAULTS:
            raise UsageError(f"unknown option --{name}")
        return name
    for ns in _SEARCH[command]:
        if f"{ns}.{name}" in DEFAULTS:
            return f"{ns}.{name}"
    raise UsageError(f"unknown option --{name} for '{command}'")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def usage(command: str | None = None) -> str:
    if command not in _SEARCH:
        return f"usage: wdaep <{'|'.join(COMMANDS)}> [--config FILE] [--key value ...]"
    keys = [k for k in DEFAULTS if k.split(".")[0] in _SEARCH[command]]
    if command in ("train", "reconstruct", "sweep"):
        keys.append("wavelet.name")
    lines = [f"usage: wdaep {command} [--config FILE] [--key value ...]", "keys (default):"]
    lines += [f"  --{k} ({DEFAULTS[k]!r})" for k in keys]
    return "\n".join(lines)


def parse_args(argv) -> RunConfig:
    """Turn ``[command, --key, value, ...]`` into a resolved :class:`RunConfig`."""
    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        raise UsageError(usage())
    command, rest = argv[0], argv[1:]
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    config_file, overrides = None, []
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--") or tok == "--":
            raise UsageError(f"unexpected argument {tok!r}")
        name, eq, value = tok[2:].partition("=")
        if not eq:
            if i + 1 >= len(rest):
                raise UsageError(f"option --{name} needs a value")
            value = rest[i + 1]
            i += 1
        i += 1
        if name == "config":
            config_file = value
        else:
            overrides.append((_resolve_key(command, name), _parse_value(value)))
    cfg = RunConfig.from_file(config_file, command) if config_file else RunConfig(command=command)
    for key, value in overrides:
        cfg.update({key: value})
    return cfg


# -- helpers -------------------------------------------------------------------

def _abs(cfg: RunConfig, *keys):
    """Store path settings as absolute paths so the resolved config is cwd-independent."""
    for key in keys:
        value = cfg[key]
        if value is not None:
            cfg.update({key: str(Path(value).expanduser().resolve())})


def _out(cfg: RunConfig) -> Path:
    return Path(cfg.require("io.out"))


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".config.json")


def _load_network(spec):
    """Checkpoint directory, or the name of a shipped checkpoint."""
    path = Path(spec)
    if (path / "manifest.json").is_file():
        return io.load_checkpoint(path)
    if path.name == str(spec) and (benchmark.PRETRAINED_DIR / str(spec) / "manifest.json").is_file():
        return benchmark.load_pretrained(str(spec))
    raise DataError(f"checkpoint {spec} not found (no manifest.json)")


def _sigma(value):
    return None if value is None else float(value) / 255


# -- commands ------------------------------------------------------------------

def cmd_maskgen(cfg: RunConfig) -> int:
    _abs(cfg, "io.out")
    out = _out(cfg)
    h, w = parse_dims(cfg["mask.dims"])
    pattern = cfg["mask.pattern"]
    kwargs = {}
    if pattern in ("cartesian1d", "random2d"):
        kwargs["center_fraction"] = cfg["mask.center_fraction"]
    if pattern == "random2d":
        kwargs["decay_power"] = cfg["mask.decay_power"]
    mask = make_mask(pattern, (h, w), cfg["mask.r"], seed=cfg["mask.seed"], **kwargs)
    io.save_mask(out, mask)
    if cfg["io.pgm"]:
        _abs(cfg, "io.pgm")
        io.write_pgm(cfg["io.pgm"], mask.samples.astype(float))
    cfg.write(_sidecar(out))
    print(f"{pattern} mask {h}x{w}: {mask.n_sampled} samples, achieved R {mask.achieved_R:.4f} -> {out}")
    return 0


def cmd_phantom(cfg: RunConfig) -> int:
    _abs(cfg, "io.out", "io.pgm")
    out = _out(cfg)
    dims = parse_dims(cfg["phantom.dims"])
    count = cfg["phantom.count"]
    if count < 1:
        raise ConfigError("phantom.count must be >= 1")
    if count == 1:
        image = make_phantom(dims, cfg["phantom.n_ellipses"], cfg["phantom.seed"])
    else:
        image = np.stack(make_phantom_set(count, dims, seed=cfg["phantom.seed"]))
    io.save_array(out, image.astype(np.complex128), {"kind": "image" if count == 1 else "image_stack"})
    if cfg["io.pgm"]:
        io.export_pgm(image if count == 1 else image[0], cfg["io.pgm"])
    cfg.write(_sidecar(out))
    print(f"{count} phantom(s) {dims[0]}x{dims[1]} -> {out}")
    return 0


def cmd_encode(cfg: RunConfig) -> int:
    _abs(cfg, "io.out", "io.image", "io.mask")
    out = _out(cfg)
    u = io.load_image(cfg.require("io.image"))
    mask = io.load_mask(cfg.require("io.mask"))
    f = encode(u, mask)
    if cfg["encode.noise_std"] > 0:
        f = add_measurement_noise(f, mask, cfg["encode.noise_std"], seed=cfg["encode.seed"])
    io.save_kspace(out, f, {"achieved_R": mask.achieved_R})
    cfg.write(_sidecar(out))
    print(f"k-space {f.shape[0]}x{f.shape[1]}, {mask.n_sampled} samples -> {out}")
    return 0


def _training_images(cfg: RunConfig):
    if cfg["io.data"] is None:
        return make_phantom_set(cfg["train.n_images"], parse_dims(cfg["train.image_dims"]), seed=cfg["train.data_seed"])
    arr, _ = io.load_array(cfg["io.data"])
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise DataError(f"{cfg['io.data']}: expected an image or an image stack, got shape {arr.shape}")
    return list(arr.astype(np.complex128))


def cmd_train(cfg: RunConfig) -> int:
    _abs(cfg, "io.out", "io.data")
    out = _out(cfg)
    sigma = _sigma(cfg["prior.sigma_eta"])
    arch = Architecture(cfg["prior.width"], cfg["prior.blocks"], cfg["prior.block_depth"], cfg["prior.tail_layers"])
    wavelet = cfg["wavelet.name"]
    patches = training_patches(
        _training_images(cfg), wavelet, cfg["train.patch_size"], cfg["train.stride"],
        cfg["train.max_patches"], cfg["train.data_seed"],
    )
    tcfg = TrainConfig(
        patch_size=cfg["train.patch_size"],
        batch_size=cfg["train.batch_size"],
        epochs=cfg["train.epochs"],
        learning_rate=cfg["train.learning_rate"],
        sigma_eta=sigma,
        seed=cfg["train.seed"],
    )

    def report(epoch, loss, *_):
        print(f"epoch {epoch + 1}/{tcfg.epochs}: loss {loss:.6g} ({loss / max(sigma, 1e-300) ** 2:.4f} sigma^2)")

    net, history = train_dae(build_network(arch, seed=cfg["train.seed"]), patches, tcfg, callback=report)
    net.meta["wavelet"] = wavelet
    net.meta["loss_history"] = [float(h) for h in history]
    with io.atomic_dir(out) as tmp:
        io.save_checkpoint(tmp, net)
        cfg.write(tmp / "config.json")
    print(f"{len(patches)} patches, {tcfg.epochs} epochs -> {out}")
    return 0


def cmd_reconstruct(cfg: RunConfig) -> int:
    _abs(cfg, "io.out", "io.kspace", "io.mask", "io.ref", "io.trace", "io.pgm")
    out = _out(cfg)
    f = io.load_kspace(cfg.require("io.kspace"))
    mask = io.load_mask(cfg.require("io.mask"))
    reference = io.load_image(cfg["io.ref"]) if cfg["io.ref"] else None
    lam = cfg["recon.lambda"]
    net = None
    if lam > 0:
        spec = cfg["io.checkpoint"]
        if spec is None:
            level = round(sigma_for_acceleration(mask.achieved_R) * 255)
            spec = benchmark.checkpoint_name(16, 1, level / 255, cfg["wavelet.name"])
            cfg.update({"io.checkpoint": spec})
        elif Path(spec).exists():
            _abs(cfg, "io.checkpoint")
            spec = cfg["io.checkpoint"]
        net = _load_network(spec)
        trained_on = net.meta.get("wavelet")
        if trained_on and trained_on != cfg["wavelet.name"]:
            warnings.warn(f"prior was trained on {trained_on} coefficients, reconstructing with {cfg['wavelet.name']}",
                          stacklevel=1)
    rcfg = ReconConfig(
        lam=lam,
        beta=cfg["recon.beta"],
        iterations=cfg["recon.iterations"],
        sigma_eta=_sigma(cfg["recon.sigma_eta"]),
        noise_mode=cfg["recon.noise_mode"],
        seed=cfg["recon.seed"],
        stop_tol=cfg["recon.stop_tol"],
        wavelet=cfg["wavelet.name"],
    )
    result = reconstruct(f, mask, net, rcfg, reference)
    trace_path = Path(cfg["io.trace"]) if cfg["io.trace"] else out.with_name(out.name + ".trace.csv")
    io.save_image(out, result.image, {"iterations": result.iterations_run, "converged": result.converged})
    with io.atomic_path(trace_path) as tmp:
        tmp.write_text(result.trace_csv())
    if cfg["io.pgm"]:
        io.export_pgm(result.image, cfg["io.pgm"])
    cfg.write(_sidecar(out))
    print(f"{result.iterations_run} iterations (converged: {result.converged}) -> {out}")
    if reference is not None:
        zf = evaluate(zero_filled(f, mask), reference)
        rec = evaluate(result.image, reference)
        print(f"zero-filled   {zf}")
        print(f"reconstructed {rec}")
    return 0


def cmd_metrics(cfg: RunConfig) -> int:
    _abs(cfg, "io.ref", "io.img")
    ref = io.load_image(cfg.require("io.ref"))
    img = io.load_image(cfg.require("io.img"))
    report = evaluate(img, ref)
    print(report.csv())
    print(report)
    return 0


def _sweep_values(cfg: RunConfig) -> tuple[list, list]:
    """Values to run and the labels shown for them (sigma_eta is typed on the 0-255 scale)."""
    labels = [str(v) for v in parse_list(cfg["sweep.values"])]
    if cfg["sweep.axis"] == "sigma_eta":
        try:
            return [float(v) / 255 for v in labels], labels
        except ValueError:
            raise ConfigError(f"sweep.values must be numbers for sigma_eta, got {labels}") from None
    return labels, labels


def cmd_sweep(cfg: RunConfig) -> int:
    _abs(cfg, "io.out", "sweep.checkpoints", "io.checkpoint")
    out = _out(cfg)
    axis = cfg["sweep.axis"]
    values, labels = _sweep_values(cfg)
    bench = benchmark.BENCHMARK
    if cfg["recon.iterations"] != DEFAULTS["recon.iterations"]:
        bench = replace(bench, iterations=cfg["recon.iterations"])
    if axis != "lambda" and cfg["recon.lambda"] != DEFAULTS["recon.lambda"]:
        bench = replace(bench, lam=cfg["recon.lambda"])
    with io.atomic_dir(out) as tmp:
        rows = benchmark.run_sweep(axis, values, cfg["sweep.checkpoints"], bench,
                                   base_checkpoint=cfg["io.checkpoint"], trace_dir=tmp, labels=labels)
        table = benchmark.sweep_csv(axis, rows)
        (tmp / "table.csv").write_text(table)
        io.write_line_chart(tmp / "psnr_traces.pgm", [[t.psnr for t in r.result.trace] for r in rows])
        cfg.write(tmp / "config.json")
    sys.stdout.write(table)
    return 0


def _tile_kernels(weight: np.ndarray) -> np.ndarray:
    kernels = np.asarray(weight, dtype=np.float64).reshape(-1, *weight.shape[-2:])
    n, kh, kw = kernels.shape
    side = math.ceil(math.sqrt(n))
    canvas = np.zeros((side * kh, side * kw))
    for idx, k in enumerate(kernels):
        lo, hi = k.min(), k.max()
        tile = (k - lo) / (hi - lo) if hi > lo else np.full_like(k, 0.5)
        r, c = divmod(idx, side)
        canvas[r * kh : (r + 1) * kh, c * kw : (c + 1) * kw] = tile
    return canvas


def cmd_inspect(cfg: RunConfig) -> int:
    _abs(cfg, "io.out")
    out = _out(cfg)
    spec = cfg.require("io.checkpoint")
    if Path(spec).exists():
        _abs(cfg, "io.checkpoint")
        spec = cfg["io.checkpoint"]
    net = _load_network(spec)
    index = cfg["inspect.layer"]
    if not 0 <= index < len(net.layers):
        raise UsageError(f"layer index {index} out of range; the checkpoint has {len(net.layers)} layers")
    weight = net.layers[index].weight
    io.write_pgm(out, _tile_kernels(weight))
    cfg.write(_sidecar(out))
    n = weight.shape[0] * weight.shape[1]
    side = math.ceil(math.sqrt(n))
    print(f"layer {index}: {n} kernels tiled {side}x{side} -> {out}")
    return 0


_HANDLERS = {
    "maskgen": cmd_maskgen,
    "phantom": cmd_phantom,
    "encode": cmd_encode,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "metrics": cmd_metrics,
    "sweep": cmd_sweep,
    "inspect": cmd_inspect,
}


def _thread_limit():
    value = os.environ.get("WDAEP_THREADS")
    if not value:
        return nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"WDAEP_THREADS must be a positive integer, got {value!r}") from None
    if n < 1:
        raise UsageError(f"WDAEP_THREADS must be a positive integer, got {value!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv[:1] in (["-h"], ["--help"]) or (len(argv) > 1 and argv[1] in ("-h", "--help")):
        print(usage(argv[0] if len(argv) > 1 else None))
        return 0
    try:
        cfg = parse_args(argv)
        with _thread_limit():
            return _HANDLERS[cfg.command](cfg)
    except (UsageError, ConfigError, UnsupportedWavelet, MaskError) as exc:
        print(f"wdaep: error: {exc}", file=sys.stderr)
        return 1
    except (WdaepError, OSError) as exc:
        print(f"wdaep: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
