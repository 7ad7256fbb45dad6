"""Command-line entry point: ``styleid {train,stylize,invert,eval,sweep,replay,samples}``.

Exit codes: 0 success, 1 replay mismatch, 2 usage, 3 I/O, 4 numerical failure.
Reports go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, ablation, data, plots
from .config import (digest_tree, env_seed, parse_floats, parse_ints, read_config,
                     read_manifest, sha256, write_manifest)
from .errors import InvalidArgumentError, StyleIDError
from .generator import Generator, make_backend
from .imageio import list_images, load_image, save_png
from .inversion import InversionOptions, invert
from .latent import save_latent
from .metrics import fid_score, ssim
from .perceptual import default_stack, load_stack, perc_distance
from .trainer import FULL_SWAP, PROFILE_EPOCHS, TOY_SWAP, TrainConfig, fine_tune

log = logging.getLogger("styleid")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4

# option -> (type, default); flags > STYLEID_SEED (seed only) > config file > default
COMMON = {
    "backend": (str, "toy"),
    "seed": (int, 0),
    "perceptual_weights": (str, None),
    "inv_steps": (int, 300),
    "inv_step_size": (float, 0.05),
    "perceptual_weight": (float, 1.0),
    "pixel_weight": (float, 0.1),
}
TRAIN = {
    "refs": (str, None),
    "input": (str, None),
    "alpha": (float, 0.5),
    "swap_list": (str, None),
    "lambda_feature": (float, 0.001),
    "profile": (str, "sketch"),
    "epochs": (int, None),
    "step_size": (float, 0.01),
    "resample_rand": (lambda s: str(s).lower() in ("1", "true", "yes", "on"), True),
}
SCHEMAS = {
    "train": {**COMMON, **TRAIN},
    "sweep": {**COMMON, **TRAIN, "photos": (str, None), "lambdas": (str, None),
              "ref_counts": (str, None), "workers": (int, 1)},
    "stylize": {**COMMON, "checkpoint": (str, None), "input": (str, None)},
    "invert": {**COMMON, "input": (str, None)},
    "eval": {"seed": (int, 0), "perceptual_weights": (str, None), "window": (int, 7)},
    "samples": {"n_refs": (int, 3), "n_photos": (int, 4), "seed": (int, 0)},
}
PATH_KEYS = ("refs", "input", "checkpoint", "photos", "perceptual_weights", "dir_a", "dir_b", "out")


class UsageError(InvalidArgumentError):
    pass


# ----------------------------------------------------------------- parsing

def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="styleid", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"styleid {__version__}")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    helps = {
        "train": "fine-tune a generator on reference styles",
        "sweep": "train over a lambda / reference-count grid",
        "stylize": "stylize a photo with a fine-tuned checkpoint",
        "invert": "invert an image to a SIDL1 latent",
        "eval": "FID and paired SSIM between two image directories",
        "samples": "write the bundled procedural sample data",
    }
    for cmd, schema in SCHEMAS.items():
        sp = sub.add_parser(cmd, help=helps[cmd])
        if cmd == "eval":
            sp.add_argument("dir_a")
            sp.add_argument("dir_b")
        if cmd != "samples":
            sp.add_argument("--config", help="key=value file; flags override it")
        sp.add_argument("--out")
        for name, (typ, _) in schema.items():
            sp.add_argument(_flag(name), dest=name, default=None,
                            type=typ if typ in (int, float) else str)
    rp = sub.add_parser("replay", help="rerun a recorded manifest and compare outputs")
    rp.add_argument("manifest")
    rp.add_argument("--out", help="output directory (default: <original out>-replay)")
    return p


def resolve(ns: argparse.Namespace) -> dict:
    schema = SCHEMAS[ns.command]
    file_opts = read_config(ns.config) if getattr(ns, "config", None) else {}
    unknown = set(file_opts) - set(schema) - {"out"}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    opts = {}
    for name, (typ, default) in schema.items():
        value = getattr(ns, name)
        if value is None and name == "seed":
            value = env_seed()
        if value is None and name in file_opts:
            value = file_opts[name]
        opts[name] = default if value is None else typ(value)
    opts["out"] = ns.out if ns.out is not None else file_opts.get("out")
    if ns.command == "eval":
        opts["dir_a"], opts["dir_b"] = ns.dir_a, ns.dir_b
    for key in PATH_KEYS:
        if opts.get(key):
            opts[key] = str(Path(opts[key]).resolve())
    if str(opts.get("backend", "")).startswith("checkpoint:"):
        opts["backend"] = "checkpoint:" + str(Path(opts["backend"].split(":", 1)[1]).resolve())
    return opts


# ----------------------------------------------------------------- helpers

def _stack(opts):
    return load_stack(opts["perceptual_weights"]) if opts.get("perceptual_weights") else default_stack()


def _inv_opts(opts) -> InversionOptions:
    return InversionOptions(steps=opts["inv_steps"], step_size=opts["inv_step_size"],
                            perceptual_weight=opts["perceptual_weight"],
                            pixel_weight=opts["pixel_weight"], seed=opts["seed"])


def _train_cfg(opts, g: Generator) -> TrainConfig:
    if opts["profile"] not in PROFILE_EPOCHS:
        raise UsageError(f"--profile must be one of {sorted(PROFILE_EPOCHS)}")
    if opts["swap_list"] is not None:
        swap = tuple(parse_ints(opts["swap_list"]))
    else:
        swap = FULL_SWAP if g.n_layers >= 18 else TOY_SWAP
    epochs = opts["epochs"] if opts["epochs"] is not None else PROFILE_EPOCHS[opts["profile"]]
    return TrainConfig(alpha=opts["alpha"], swap=swap, lambda_feature=opts["lambda_feature"],
                       epochs=epochs, step_size=opts["step_size"], seed=opts["seed"],
                       resample_rand_each_epoch=opts["resample_rand"])


def _load_dir(path, size, what):
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"{what} directory not found: {path}")
    files = list_images(path)
    if not files:
        raise UsageError(f"{what} directory has no images: {path}")
    return files, [load_image(f, size) for f in files]


def _require(opts, *keys):
    missing = [_flag(k) for k in keys if not opts.get(k)]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _size(g):
    return g.image_shape[:2]


# ----------------------------------------------------------------- commands

def cmd_train(opts) -> tuple[list, dict]:
    _require(opts, "refs", "input", "out")
    g = make_backend(opts["backend"])
    fs = _stack(opts)
    cfg = _train_cfg(opts, g)
    inv = _inv_opts(opts)
    ref_files, refs = _load_dir(opts["refs"], _size(g), "reference")
    photo = load_image(opts["input"], _size(g))
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)

    ref_latents = [invert(r, g, inv, fs)[0] for r in refs]
    w_photo, _ = invert(photo, g, inv, fs)
    trained, history = fine_tune(g, refs, photo, cfg, fs, inv,
                                 ref_latents=ref_latents, photo_latent=w_photo)
    trained.save(out / "checkpoint.sidg")
    (out / "history.log").write_text(history.to_text())
    save_latent(out / "photo.sidl", w_photo)
    save_png(out / "preview.png", trained.synthesize(w_photo))
    if len(history):
        plots.loss_curves(history, out / "loss.png")
        print(f"epochs\t{len(history)}\nL_ref\t{history.l_ref[-1]:.6g}\n"
              f"L_feature\t{history.l_feature[-1]:.6g}\ntotal\t{history.total[-1]:.6g}")
    else:
        print("epochs\t0")
    return [*ref_files, opts["input"]], {"train": asdict(cfg), "inversion": asdict(inv)}


def cmd_stylize(opts):
    _require(opts, "checkpoint", "input", "out")
    base = make_backend(opts["backend"])
    trained = make_backend("checkpoint:" + opts["checkpoint"])
    if trained.latent_shape != base.latent_shape or trained.image_shape != base.image_shape:
        raise UsageError("checkpoint and --backend disagree on latent or image shape")
    fs = _stack(opts)
    inv = _inv_opts(opts)
    photo = load_image(opts["input"], _size(base))
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    w, _ = invert(photo, base, inv, fs)
    img = trained.synthesize(w)
    save_png(out / "stylized.png", img)
    save_latent(out / "photo.sidl", w)
    print(f"perc_to_photo\t{perc_distance(img, photo, fs):.6g}")
    return [opts["input"], opts["checkpoint"]], {"inversion": asdict(inv)}


def cmd_invert(opts):
    _require(opts, "input", "out")
    g = make_backend(opts["backend"])
    fs = _stack(opts)
    inv = _inv_opts(opts)
    target = load_image(opts["input"], _size(g))
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    w, loss = invert(target, g, inv, fs)
    save_latent(out / "latent.sidl", w)
    save_png(out / "reconstruction.png", g.synthesize(w))
    print(f"final_loss\t{loss:.6g}")
    return [opts["input"]], {"inversion": asdict(inv)}


def cmd_eval(opts):
    fs = load_stack(opts["perceptual_weights"]) if opts["perceptual_weights"] else default_stack(opts["seed"])
    files_a, imgs_a = _load_dir(opts["dir_a"], None, "first")
    size = imgs_a[0].shape[:2]
    imgs_a = [load_image(f, size) for f in files_a]
    files_b, imgs_b = _load_dir(opts["dir_b"], size, "second")
    fid = fid_score(imgs_a, imgs_b, fs)

    by_name = {f.name: img for f, img in zip(files_b, imgs_b)}
    names_a = {f.name for f in files_a}
    unpaired = sorted(names_a ^ set(by_name))
    if unpaired:
        log.warning("skipping unpaired images: %s", ", ".join(unpaired))
    window = opts["window"]
    scores = [ssim(img, by_name[f.name], window=window) for f, img in zip(files_a, imgs_a) if f.name in by_name]
    mean_ssim = float(np.mean(scores)) if scores else float("nan")

    lines = ["metric\tvalue\tn_a\tn_b\textractor\tseed",
             f"fid\t{fid:.10g}\t{len(imgs_a)}\t{len(imgs_b)}\t{fs.name}\t{opts['seed']}",
             f"ssim\t{mean_ssim:.10g}\t{len(scores)}\t{len(scores)}\twindow{window}\t{opts['seed']}"]
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if opts.get("out"):
        out = Path(opts["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.tsv").write_text(report)
        if scores:
            plots.ssim_histogram(scores, out / "ssim.png")
    return [*files_a, *files_b], {"window": window}


def cmd_sweep(opts):
    _require(opts, "refs", "input", "out")
    lambdas = parse_floats(opts["lambdas"]) if opts["lambdas"] else []
    counts = parse_ints(opts["ref_counts"]) if opts["ref_counts"] else []
    if not lambdas and not counts:
        raise UsageError("empty sweep grid: pass --lambdas and/or --ref-counts")
    g = make_backend(opts["backend"])
    fs = _stack(opts)
    cfg = _train_cfg(opts, g)
    inv = _inv_opts(opts)
    ref_files, refs = _load_dir(opts["refs"], _size(g), "reference")
    photo = load_image(opts["input"], _size(g))
    photo_files, extra = _load_dir(opts["photos"], _size(g), "photo") if opts["photos"] else ([], [])
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)

    w_photo, _ = invert(photo, g, inv, fs)
    prob = ablation.Problem(
        g=g, refs=refs, photo=photo, perc=fs, inv_opts=inv,
        ref_latents=[invert(r, g, inv, fs)[0] for r in refs], photo_latent=w_photo,
        eval_latents=[w_photo] + [invert(p, g, inv, fs)[0] for p in extra])
    points = ablation.run_grid(prob, cfg, lambdas, counts, workers=opts["workers"])
    for p in points:
        evals = [img for r in p.runs for img in r.eval_outputs]
        if len(evals) >= 2:
            p.fid = fid_score(evals, refs, fs)
        else:
            log.warning("%s: FID needs >= 2 stylized images; pass --photos", p.label)

    header = "point\tkind\tlambda_feature\tn_refs\truns\tL_ref\tL_feature\ttotal\tdispersion\tfid"
    rows = [header]
    for p in points:
        rows.append("\t".join([p.label, p.kind, f"{p.lambda_feature:g}", str(p.n_refs), str(len(p.runs)),
                               f"{p.final('l_ref'):.10g}", f"{p.final('l_feature'):.10g}",
                               f"{p.final('total'):.10g}", _fmt(p.dispersion), _fmt(p.fid)]))
    table = "\n".join(rows) + "\n"
    (out / "sweep.tsv").write_text(table)
    sys.stdout.write(table)
    images = [photo] + [p.runs[0].output for p in points]
    plots.montage(images, ["input"] + [p.label for p in points], out / "montage.png")
    return [*ref_files, opts["input"], *photo_files], {"train": asdict(cfg), "inversion": asdict(inv),
                                                       "lambdas": lambdas, "ref_counts": counts}


def _fmt(x):
    return "nan" if math.isnan(x) else f"{x:.10g}"


def cmd_samples(opts):
    _require(opts, "out")
    dirs = data.write_sample_set(opts["out"], n_refs=opts["n_refs"], n_photos=opts["n_photos"], seed=opts["seed"])
    for name, d in dirs.items():
        print(f"{name}\t{d}")
    return [], {}


COMMANDS = {"train": cmd_train, "stylize": cmd_stylize, "invert": cmd_invert, "eval": cmd_eval,
            "sweep": cmd_sweep, "samples": cmd_samples}


def execute(command: str, opts: dict) -> int:
    start = time.perf_counter()
    inputs, config = COMMANDS[command](opts)
    backend = opts.get("backend", "")
    if backend.startswith("checkpoint:"):
        inputs = [*inputs, backend.split(":", 1)[1]]
    if opts.get("out") and command != "samples":
        write_manifest(opts["out"], command, opts, inputs, opts.get("backend", "n/a"), config,
                       time.perf_counter() - start)
    return EXIT_OK


def replay(manifest_path, out=None) -> int:
    manifest = read_manifest(manifest_path)
    opts = dict(manifest["options"])
    if manifest.get("version") != __version__:
        log.warning("manifest written by styleid %s, replaying with %s", manifest.get("version"), __version__)
    orig_out = opts.get("out") or str(Path(manifest_path).parent)
    opts["out"] = str(Path(out).resolve()) if out else orig_out.rstrip("/") + "-replay"
    for path, digest in manifest.get("inputs", {}).items():
        if not Path(path).exists():
            raise FileNotFoundError(f"replay input missing: {path}")
        if sha256(path) != digest:
            log.warning("input changed since recording: %s", path)
    execute(manifest["command"], opts)
    got = digest_tree(opts["out"])
    want = manifest["outputs"]
    bad = sorted(k for k in set(want) | set(got) if want.get(k) != got.get(k))
    if bad:
        print(f"replay mismatch in {len(bad)} file(s): {', '.join(bad)}", file=sys.stderr)
        return EXIT_MISMATCH
    print(f"replay ok\t{len(want)} files identical\t{opts['out']}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(ns.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if ns.command == "replay":
            return replay(ns.manifest, ns.out)
        return execute(ns.command, resolve(ns))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"styleid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StyleIDError as exc:
        print(f"styleid: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"styleid: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"styleid: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
