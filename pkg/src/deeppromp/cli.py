"""Command-line front end: ``deeppromp <verb> [--config file.yaml] [flags]``.

Verbs: dataset-gen, train, eval, generate, condition, blend, refine.
Each verb reads an optional YAML mapping (``--config``) whose keys mirror
the long flags; explicit flags win. Exit codes: 0 success, 2 config or
schema error, 3 numeric failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from dataclasses import fields

import numpy as np
import yaml

from . import autodiff as ad
from .baselines.cnmp import cnmp_train
from .baselines.promp import promp_fit
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import DatasetError, DatasetSpec, generate as generate_dataset, load_dataset, save_dataset
from .evaluate import MODES, evaluate
from .model import DeepProMP, TrainingConfig, blend_trajectories, condition, generate, refine_viapoints, train
from .phase import LINEAR

SCHEMA_VERSION = 1
MODEL_KINDS = {
    "deeppromp": None,
    "promp": None,
    "cnmp": ("cnmp", "joint"),
    "vae_cnmp": ("vae_cnmp", "joint"),
    "cnmp_indep": ("cnmp", "indep"),
    "vae_cnmp_indep": ("vae_cnmp", "indep"),
}
TRAINING_KEYS = {f.name: f.type for f in fields(TrainingConfig)}
PROMP_KEYS = {"n_basis": "int", "ridge": "float", "sigma_obs": "float"}

log = logging.getLogger("deeppromp")


class ConfigError(ValueError):
    pass


# config handling ------------------------------------------------------------

def read_config(path):
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version {version!r} unsupported (expected {SCHEMA_VERSION})")
    return cfg


def _check_types(section, spec, where):
    bad = []
    for key, value in section.items():
        if key not in spec:
            bad.append(f"{where}.{key} (unknown key)")
            continue
        want = spec[key]
        ok = {"int": isinstance(value, int) and not isinstance(value, bool),
              "float": isinstance(value, (int, float)) and not isinstance(value, bool),
              "str": isinstance(value, str)}.get(want, True)
        if not ok:
            bad.append(f"{where}.{key} (expected {want})")
    return bad


def validate_train_config(cfg):
    """Return the list of offending keys; empty when the config is usable."""
    bad = []
    allowed = {"schema_version", "dataset", "model_kind", "training", "promp", "out", "seed"}
    bad += [f"{k} (unknown key)" for k in cfg if k not in allowed]
    if not cfg.get("dataset"):
        bad.append("dataset (required)")
    kind = cfg.get("model_kind", "deeppromp")
    if kind not in MODEL_KINDS:
        bad.append(f"model_kind (one of {sorted(MODEL_KINDS)})")
    if not isinstance(cfg.get("training", {}), dict):
        bad.append("training (must be a mapping)")
    else:
        bad += _check_types(cfg.get("training", {}), TRAINING_KEYS, "training")
    if not isinstance(cfg.get("promp", {}), dict):
        bad.append("promp (must be a mapping)")
    else:
        bad += _check_types(cfg.get("promp", {}), PROMP_KEYS, "promp")
    return bad


def merged(cfg, args, keys):
    out = {k: cfg[k] for k in keys if k in cfg}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


# csv helpers ------------------------------------------------------------------

def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_targets(path):
    """Via-point file: CSV with header ``t,y0,y1,...``; returns (t, y)."""
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or not rows[0] or rows[0][0] != "t":
        raise ConfigError(f"{path}: expected a header row starting with 't' and at least one target")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return data[:, 0], data[:, 1:]


def parse_contexts(items):
    out = {}
    for item in items or []:
        name, _, values = item.partition("=")
        if not name or not values:
            raise ConfigError(f"context {item!r} must look like name=v1,v2,...")
        out[name] = np.array([float(v) for v in values.split(",")])
    return out


def trajectory_rows(t, y):
    return [[float(ti)] + [float(v) for v in yi] for ti, yi in zip(t, y)]


def maybe_plot(path, t, series, labels):
    if not path:
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3))
    for y, label in zip(series, labels):
        ax.plot(t, y, label=label)
    ax.set_xlabel("t [s]")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _deeppromp(path):
    model = load_checkpoint(path)
    if not isinstance(model, DeepProMP):
        raise ConfigError(f"{path} holds a {type(model).__name__}; this verb needs a DeepProMP checkpoint")
    return model


def _timestamps(model, duration, n, periods):
    if n < 2:
        raise ConfigError("n-samples must be at least 2")
    if model.phase_mode == LINEAR and periods != 1:
        raise ConfigError("multiple periods need a rhythmic model")
    return periods * duration * np.arange(n) / (n - 1)


# verbs -------------------------------------------------------------------------

def cmd_dataset_gen(args, cfg):
    keys = [f.name for f in fields(DatasetSpec)]
    opts = {k: cfg[k] for k in keys if k in cfg}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    unknown = [k for k in cfg if k not in keys + ["schema_version", "out"]]
    if unknown:
        raise ConfigError("unknown keys: " + ", ".join(unknown))
    out = args.out or cfg.get("out")
    if not out:
        raise ConfigError("--out is required")
    try:
        spec = DatasetSpec(**opts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    save_dataset(generate_dataset(spec), out)
    return 0


def cmd_train(args, cfg):
    if args.seed is not None:
        cfg.setdefault("training", {})["seed"] = args.seed
    if args.model_kind:
        cfg["model_kind"] = args.model_kind
    bad = validate_train_config(cfg)
    if bad:
        raise ConfigError("invalid config keys: " + "; ".join(bad))
    out = args.out or cfg.get("out")
    if not out:
        raise ConfigError("out (required: --out or config key)")
    dataset = load_dataset(cfg["dataset"])
    kind = cfg.get("model_kind", "deeppromp")
    if kind == "promp":
        low = [k for k in dataset.channel_widths() if k != "image"]
        model = promp_fit(dataset, context_channels=low, **cfg.get("promp", {}))
        trace = []
    else:
        try:
            config = TrainingConfig(**cfg.get("training", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"training: {exc}") from None
        if kind == "deeppromp":
            model = train(dataset, config)
        else:
            variant, padding = MODEL_KINDS[kind]
            model = cnmp_train(dataset, variant, padding, config)
        trace = model.loss_trace
    os.makedirs(out, exist_ok=True)
    save_checkpoint(model, os.path.join(out, "checkpoint.json"))
    write_csv(os.path.join(out, "trace.csv"), ["epoch", "loss"],
              [[i + 1, float(v)] for i, v in enumerate(trace)])
    return 0


def cmd_eval(args, cfg):
    opts = merged(cfg, args, ["checkpoint", "dataset", "mode", "out", "seed"])
    for k in ("checkpoint", "dataset", "out"):
        if not opts.get(k):
            raise ConfigError(f"{k} is required")
    modes = opts.get("mode") or ",".join(MODES)
    modes = tuple(m.strip() for m in modes.split(",")) if isinstance(modes, str) else tuple(modes)
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ConfigError(f"unknown modes {bad}; expected a subset of {MODES}")
    model = load_checkpoint(opts["checkpoint"])
    dataset = load_dataset(opts["dataset"])
    report = evaluate(model, dataset, modes, seed=opts.get("seed") or 0)
    with open(opts["out"], "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv())
    return 0


def _posterior_from(model, targets, contexts, duration):
    via_x = via_y = None
    if targets:
        t, y = read_targets(targets)
        via_x, via_y = model.phase(t, duration), y
    return model.posterior(via_x, via_y, contexts), via_x, via_y


def cmd_generate(args, cfg):
    opts = merged(cfg, args, ["checkpoint", "out", "seed", "n_samples", "duration", "periods",
                              "targets", "plot"])
    if not opts.get("checkpoint") or not opts.get("out"):
        raise ConfigError("checkpoint and out are required")
    model = _deeppromp(opts["checkpoint"])
    duration = float(opts.get("duration", 1.0))
    t = _timestamps(model, duration, int(opts.get("n_samples", 101)), int(opts.get("periods", 1)))
    q, _, _ = _posterior_from(model, opts.get("targets"), parse_contexts(args.context), duration)
    noise = np.random.default_rng(opts.get("seed") or 0).standard_normal(model.latent_dim)
    y = generate(model, q, model.phase(t, duration), noise)
    header = ["t"] + [f"y{i}" for i in range(model.dim)]
    write_csv(opts["out"], header, trajectory_rows(t, y))
    maybe_plot(opts.get("plot"), t, y.T, header[1:])
    return 0


def cmd_condition(args, cfg):
    opts = merged(cfg, args, ["checkpoint", "out", "seed", "n_samples", "duration", "targets", "k",
                              "plot"])
    if not opts.get("checkpoint") or not opts.get("out"):
        raise ConfigError("checkpoint and out are required")
    model = _deeppromp(opts["checkpoint"])
    duration = float(opts.get("duration", 1.0))
    contexts = parse_contexts(args.context)
    via_x = via_y = None
    if opts.get("targets"):
        t_via, via_y = read_targets(opts["targets"])
        via_x = model.phase(t_via, duration)
    t = _timestamps(model, duration, int(opts.get("n_samples", 101)), 1)
    rng = np.random.default_rng(opts.get("seed") or 0)
    try:
        dist = condition(model, via_x, via_y, contexts, model.phase(t, duration),
                         k=int(opts.get("k", 32)), rng=rng)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    header = ["t"] + [f"mean{i}" for i in range(model.dim)] + [f"var{i}" for i in range(model.dim)]
    rows = [[float(ti)] + [float(v) for v in m] + [float(v) for v in s]
            for ti, m, s in zip(t, dist.mean, dist.var)]
    write_csv(opts["out"], header, rows)
    maybe_plot(opts.get("plot"), t, dist.mean.T, header[1:1 + model.dim])
    return 0


def cmd_blend(args, cfg):
    opts = merged(cfg, args, ["checkpoint", "out", "seed", "n_samples", "duration", "targets",
                              "targets2", "omega", "plot"])
    for k in ("checkpoint", "out", "targets", "targets2"):
        if not opts.get(k):
            raise ConfigError(f"{k} is required")
    model = _deeppromp(opts["checkpoint"])
    duration = float(opts.get("duration", 1.0))
    t = _timestamps(model, duration, int(opts.get("n_samples", 101)), 1)
    q1, _, _ = _posterior_from(model, opts["targets"], {}, duration)
    q2, _, _ = _posterior_from(model, opts["targets2"], {}, duration)
    omega = opts.get("omega", "ramp")
    if omega == "ramp":
        w = 1.0 - t / t[-1]
    else:
        w = np.full(t.size, float(omega))
    noise = np.random.default_rng(opts.get("seed") or 0).standard_normal(model.latent_dim)
    try:
        y = blend_trajectories(model, q1, q2, w, model.phase(t, duration), noise)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    header = ["t", "omega"] + [f"y{i}" for i in range(model.dim)]
    write_csv(opts["out"], header, [[float(ti), float(wi)] + [float(v) for v in yi]
                                    for ti, wi, yi in zip(t, w, y)])
    maybe_plot(opts.get("plot"), t, y.T, header[2:])
    return 0


def cmd_refine(args, cfg):
    opts = merged(cfg, args, ["checkpoint", "out", "seed", "targets", "steps", "k", "init",
                              "duration", "n_samples", "trajectory_out"])
    for k in ("checkpoint", "out", "targets"):
        if not opts.get(k):
            raise ConfigError(f"{k} is required")
    model = _deeppromp(opts["checkpoint"])
    duration = float(opts.get("duration", 1.0))
    t_via, via_y = read_targets(opts["targets"])
    try:
        via_x = model.phase(t_via, duration)
    except ValueError as exc:
        raise ConfigError(f"target time out of domain: {exc}") from None
    init = opts.get("init", "posterior")
    if init not in ("posterior", "prior"):
        raise ConfigError("init must be 'posterior' or 'prior'")
    q = model.posterior(via_x, via_y) if init == "posterior" else model.posterior()
    rng = np.random.default_rng(opts.get("seed") or 0)
    res = refine_viapoints(model, q, via_x, via_y, k=int(opts.get("k", 32)),
                           steps=int(opts.get("steps", 200)), rng=rng)
    write_csv(opts["out"], ["step", "objective", "max_viapoint_error"],
              [[i, float(f), float(e)] for i, (f, e) in enumerate(zip(res.objective, res.error))])
    if opts.get("trajectory_out"):
        t = _timestamps(model, duration, int(opts.get("n_samples", 101)), 1)
        y = generate(model, res.posterior, model.phase(t, duration), np.zeros(model.latent_dim))
        write_csv(opts["trajectory_out"], ["t"] + [f"y{i}" for i in range(model.dim)],
                  trajectory_rows(t, y))
    return 0


VERBS = {
    "dataset-gen": cmd_dataset_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "generate": cmd_generate,
    "condition": cmd_condition,
    "blend": cmd_blend,
    "refine": cmd_refine,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="deeppromp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="YAML file with option values")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path")
        return p

    p = common(sub.add_parser("dataset-gen", help="write a synthetic dataset file"))
    p.add_argument("--family", choices=["sine", "bimodal", "reach2d"])
    p.add_argument("--n-demos", dest="n_demos", type=int)
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--phase-mode", dest="phase_mode", choices=["linear", "rhythmic"])

    p = common(sub.add_parser("train", help="train a model; --out is a directory"))
    p.add_argument("--model-kind", dest="model_kind", choices=sorted(MODEL_KINDS))

    p = common(sub.add_parser("eval", help="reconstruction MSE per conditioning mode"))
    p.add_argument("--checkpoint")
    p.add_argument("--dataset")
    p.add_argument("--mode", help=f"comma-separated subset of {','.join(MODES)}")
    p.add_argument("--model-kind", dest="model_kind", help="ignored; the checkpoint records its kind")

    for name, helptext in (("generate", "sample one trajectory from the prior or a posterior"),
                           ("condition", "predictive mean/variance given via-points and contexts"),
                           ("blend", "blend two conditioned motions"),
                           ("refine", "refine a posterior to meet via-points")):
        p = common(sub.add_parser(name, help=helptext))
        p.add_argument("--checkpoint")
        p.add_argument("--targets", help="CSV with header t,y0,... of via-points")
        p.add_argument("--duration", type=float)
        p.add_argument("--n-samples", dest="n_samples", type=int)
        p.add_argument("--mode", help="unused; accepted for a uniform flag set")
        p.add_argument("--model-kind", dest="model_kind", help="unused; accepted for a uniform flag set")
        if name in ("generate", "condition"):
            p.add_argument("--context", action="append", help="name=v1,v2,... (repeatable)")
        if name != "refine":
            p.add_argument("--plot", help="optional SVG plot path")
        if name == "generate":
            p.add_argument("--periods", type=int)
        if name in ("condition", "refine"):
            p.add_argument("--k", type=int, help="Monte-Carlo samples")
        if name == "blend":
            p.add_argument("--targets2", help="via-points of the second motion")
            p.add_argument("--omega", help="'ramp' (1 -> 0) or a constant in [0, 1]")
        if name == "refine":
            p.add_argument("--steps", type=int)
            p.add_argument("--init", choices=["posterior", "prior"])
            p.add_argument("--trajectory-out", dest="trajectory_out")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = read_config(args.config)
        return VERBS[args.verb](args, cfg)
    except ConfigError as exc:
        print(f"deeppromp {args.verb}: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ad.NonFiniteError) as exc:
        print(f"deeppromp {args.verb}: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, DatasetError, CheckpointError) as exc:
        print(f"deeppromp {args.verb}: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError) as exc:
        print(f"deeppromp {args.verb}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
