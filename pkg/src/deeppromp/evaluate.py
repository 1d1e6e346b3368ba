"""Reconstruction metrics per conditioning mode, shared by every model kind.

Modes: ``via_point`` conditions on every point of the demonstration;
``low_dim``, ``image_like`` and ``low+image`` condition on the named
context channels plus the initial configuration as a single via-point.
``aggregate`` is the mean of the four mode MSEs, taken before the log.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines.cnmp import CNMP, cnmp_forward
from .baselines.promp import ProMP, promp_condition, promp_condition_context
from .data import IMAGE_CHANNEL
from .model import DeepProMP, condition

MODES = ("via_point", "low_dim", "image_like", "low+image")
REPORT_COLUMNS = ("model", "mode", "mse", "log10_mse", "seed", "epochs", "dataset")
NOT_APPLICABLE = "n/a"


class NotApplicable(Exception):
    pass


def model_label(model):
    if isinstance(model, DeepProMP):
        return "DeepProMP"
    if isinstance(model, ProMP):
        return "ProMP"
    return model.name


def mode_inputs(demo, mode, phase_mode):
    """``(via_x, via_y, contexts)`` for a conditioning mode."""
    x = demo.phases(phase_mode)
    low = {k: v for k, v in demo.contexts.items() if k != IMAGE_CHANNEL}
    image = {k: v for k, v in demo.contexts.items() if k == IMAGE_CHANNEL}
    if mode == "via_point":
        return x, demo.y, {}
    if mode == "low_dim":
        ctx = low
    elif mode == "image_like":
        ctx = image
    elif mode == "low+image":
        ctx = {**low, **image}
    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not ctx:
        raise NotApplicable(f"dataset has no channel for mode {mode}")
    return x[:1], demo.y[:1], ctx


def predict(model, demo, mode, rng=None, k=32):
    """Mean reconstruction of ``demo`` under ``mode``; raises NotApplicable."""
    phase_mode = getattr(model, "phase_mode", "linear")
    via_x, via_y, ctx = mode_inputs(demo, mode, phase_mode)
    x = demo.phases(phase_mode)
    if isinstance(model, DeepProMP):
        return condition(model, via_x, via_y, ctx, x, k=k, rng=rng).mean
    if isinstance(model, ProMP):
        if IMAGE_CHANNEL in ctx:
            raise NotApplicable("ProMP has no image channel")
        m = model
        if ctx:
            if not model.ctx_names:
                raise NotApplicable("ProMP fitted without contexts")
            m = promp_condition_context(m, ctx)
        return promp_condition(m, via_x[:, 0], via_y).mean_trajectory(x[:, 0])
    if isinstance(model, CNMP):
        try:
            return cnmp_forward(model, via_x, via_y, ctx, x)[0]
        except ValueError as exc:
            raise NotApplicable(str(exc)) from None
    raise TypeError(f"cannot evaluate {type(model).__name__}")


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    seed: int = 0
    epochs: int = 0
    dataset: str = ""

    def mse(self, model, mode):
        for r in self.rows:
            if r["model"] == model and r["mode"] == mode:
                return r["mse"]
        raise KeyError((model, mode))

    def log_mse(self, model, mode):
        v = self.mse(model, mode)
        return None if v is None else math.log10(v)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in self.rows:
            mse = NOT_APPLICABLE if r["mse"] is None else repr(float(r["mse"]))
            lg = NOT_APPLICABLE if r["mse"] is None else repr(math.log10(r["mse"]))
            writer.writerow([r["model"], r["mode"], mse, lg, self.seed, self.epochs, self.dataset])
        return buf.getvalue()


def evaluate(models, dataset, modes=MODES, seed=0, k=32):
    """Evaluate one or more models on every demonstration of ``dataset``."""
    if not isinstance(models, (list, tuple)):
        models = [models]
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}; expected one of {MODES}")
    epochs = max((m.config.epochs for m in models if getattr(m, "config", None)), default=0)
    report = EvalReport(seed=seed, epochs=epochs, dataset=dataset.digest())
    for model in models:
        if getattr(model, "phase_mode", "linear") != dataset.phase_mode:
            raise ValueError(f"model phase mode {model.phase_mode!r} != dataset {dataset.phase_mode!r}")
        label = model_label(model)
        scores = {}
        for mode in modes:
            rng = np.random.default_rng(seed)
            try:
                errs = [np.mean((predict(model, d, mode, rng, k) - d.y) ** 2) for d in dataset]
                scores[mode] = float(np.mean(errs))
            except NotApplicable:
                scores[mode] = None
            report.rows.append({"model": label, "mode": mode, "mse": scores[mode]})
        if set(MODES) <= set(modes):
            vals = [scores[m] for m in MODES]
            agg = None if any(v is None for v in vals) else float(np.mean(vals))
            report.rows.append({"model": label, "mode": "aggregate", "mse": agg})
    return report
