"""Synthetic demonstrations, dataset files, and conditioning-set subsampling.

Dataset file format (UTF-8, one JSON object per line):

* line 1, header: ``{"format": "deeppromp.dataset", "version": 1,
  "phase_mode": "linear" | "rhythmic", "meta": {...}}``
* every further line, one demonstration: ``{"id": str, "T": float,
  "points": [[t, [y_1, ..., y_d]], ...], "contexts": {name: [floats]}}``

Times are seconds in ``[0, T]``; phases are derived on load and never
stored. Floats are written with ``repr`` precision, so a save/load cycle
is bit-exact. Unknown context channels are carried through untouched.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .phase import LINEAR, MODES, phase

FORMAT_NAME = "deeppromp.dataset"
FORMAT_VERSION = 1
IMAGE_CHANNEL = "image"
IMAGE_SIZE = 16


class DatasetError(ValueError):
    pass


class DatasetParseError(DatasetError):
    def __init__(self, line, msg):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class DatasetVersionError(DatasetError):
    pass


@dataclass
class Demonstration:
    id: str
    T: float
    t: np.ndarray
    y: np.ndarray
    contexts: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        self.contexts = {k: np.asarray(v, dtype=np.float64).reshape(-1)
                         for k, v in self.contexts.items()}
        if self.y.shape[0] != self.t.size:
            raise DatasetError(f"demo {self.id}: {self.t.size} times but {self.y.shape[0]} configurations")
        if self.t.size == 0:
            raise DatasetError(f"demo {self.id}: no points")
        if np.any(np.diff(self.t) <= 0):
            raise DatasetError(f"demo {self.id}: times must be strictly increasing")
        if self.t[0] < 0 or self.t[-1] > self.T:
            raise DatasetError(f"demo {self.id}: times outside [0, {self.T}]")

    @property
    def dim(self):
        return self.y.shape[1]

    def phases(self, mode):
        return phase(self.t, self.T, mode)

    def __eq__(self, other):
        if not isinstance(other, Demonstration):
            return NotImplemented
        return (self.id == other.id and self.T == other.T
                and np.array_equal(self.t, other.t) and np.array_equal(self.y, other.y)
                and self.contexts.keys() == other.contexts.keys()
                and all(np.array_equal(v, other.contexts[k]) for k, v in self.contexts.items()))


@dataclass
class Dataset:
    demos: list
    phase_mode: str = LINEAR
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.phase_mode not in MODES:
            raise DatasetError(f"unknown phase mode {self.phase_mode!r}")

    def __len__(self):
        return len(self.demos)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Dataset(self.demos[i], self.phase_mode, dict(self.meta))
        return self.demos[i]

    def __iter__(self):
        return iter(self.demos)

    @property
    def dim(self):
        return self.demos[0].dim

    def channel_widths(self):
        """``{name: width}`` for context channels, checked for consistency."""
        widths = {}
        for demo in self.demos:
            for k, v in demo.contexts.items():
                if widths.setdefault(k, v.size) != v.size:
                    raise DatasetError(f"channel {k!r} has inconsistent widths")
        return widths

    def validate(self):
        if not self.demos:
            raise DatasetError("dataset is empty")
        dims = {d.dim for d in self.demos}
        if len(dims) != 1:
            raise DatasetError(f"inconsistent configuration dimensions {sorted(dims)}")
        names = {tuple(sorted(d.contexts)) for d in self.demos}
        if len(names) != 1:
            raise DatasetError("demonstrations carry different context channels")
        self.channel_widths()
        return self

    def split(self, n_first):
        return self[:n_first], self[n_first:]

    def digest(self):
        return hashlib.sha256(dumps_dataset(self).encode()).hexdigest()[:16]


@dataclass
class DatasetSpec:
    family: str = "sine"
    n_demos: int = 200
    n_points: int = 51
    noise: float = 0.0
    duration: float = 1.0
    phase_mode: str = LINEAR
    image: bool = True
    height: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in GENERATORS:
            raise ValueError(f"unknown family {self.family!r}; expected one of {sorted(GENERATORS)}")
        if self.n_demos < 1 or self.n_points < 2:
            raise ValueError("need at least one demo and two points per demo")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")


def render_image(u, v, size=IMAGE_SIZE, width=1.0):
    """Flattened ``size x size`` image with a Gaussian spot at ``(u, v)`` in [0, 1]^2."""
    grid = np.arange(size, dtype=np.float64)
    cu, cv = u * (size - 1), v * (size - 1)
    img = np.exp(-0.5 * ((grid[None, :] - cu) ** 2 + (grid[:, None] - cv) ** 2) / width ** 2)
    return img.ravel()


def _times(spec):
    return spec.duration * np.arange(spec.n_points) / (spec.n_points - 1)


def sine_trajectory(t, T, amplitude, phase0, offset):
    return amplitude * np.sin(2.0 * np.pi * np.asarray(t) / T + phase0) + offset


def gen_sine_family(spec):
    """``y = a sin(2 pi t/T + phi0) + b`` with per-demo (a, phi0, b) as the "params" channel."""
    rng = np.random.default_rng(spec.seed)
    t = _times(spec)
    demos = []
    for i in range(spec.n_demos):
        a = rng.uniform(0.5, 1.5)
        phi0 = rng.uniform(-np.pi / 4, np.pi / 4)
        b = rng.uniform(-0.5, 0.5)
        y = sine_trajectory(t, spec.duration, a, phi0, b)
        if spec.noise:
            y = y + spec.noise * rng.standard_normal(y.shape)
        ctx = {"params": np.array([a, phi0, b])}
        if spec.image:
            ctx[IMAGE_CHANNEL] = render_image(a - 0.5, b + 0.5)
        demos.append(Demonstration(f"sine-{i:05d}", spec.duration, t, y, ctx))
    return Dataset(demos, spec.phase_mode, {"spec": asdict(spec)})


def bimodal_trajectory(t, T, sign, height, power):
    return sign * height * np.sin(np.pi * np.asarray(t) / T) ** power


def gen_bimodal(spec):
    """Detour through +h or -h at T/2 with equal odds; the context never shows the branch."""
    rng = np.random.default_rng(spec.seed)
    t = _times(spec)
    demos = []
    for i in range(spec.n_demos):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        power = rng.uniform(1.0, 2.0)
        y = bimodal_trajectory(t, spec.duration, sign, spec.height, power)
        if spec.noise:
            y = y + spec.noise * rng.standard_normal(y.shape)
        ctx = {"params": np.array([power])}
        if spec.image:
            ctx[IMAGE_CHANNEL] = render_image(power - 1.0, 0.5)
        demos.append(Demonstration(f"bimodal-{i:05d}", spec.duration, t, y, ctx))
    return Dataset(demos, spec.phase_mode, {"spec": asdict(spec)})


def min_jerk(s):
    return 10 * s ** 3 - 15 * s ** 4 + 6 * s ** 5


def gen_reach2d(spec):
    """Planar minimum-jerk reaches from a jittered start to a target; "target" is the context."""
    rng = np.random.default_rng(spec.seed)
    t = _times(spec)
    s = min_jerk(t / spec.duration)[:, None]
    demos = []
    for i in range(spec.n_demos):
        start = rng.uniform(-0.1, 0.1, size=2)
        goal = np.array([rng.uniform(0.2, 1.0), rng.uniform(-1.0, 1.0)])
        y = start + (goal - start) * s
        if spec.noise:
            y = y + spec.noise * rng.standard_normal(y.shape)
        ctx = {"target": goal}
        if spec.image:
            ctx[IMAGE_CHANNEL] = render_image((goal[0] - 0.2) / 0.8, (goal[1] + 1.0) / 2.0)
        demos.append(Demonstration(f"reach-{i:05d}", spec.duration, t, y, ctx))
    return Dataset(demos, spec.phase_mode, {"spec": asdict(spec)})


GENERATORS = {"sine": gen_sine_family, "bimodal": gen_bimodal, "reach2d": gen_reach2d}


def generate(spec):
    return GENERATORS[spec.family](spec)


def _demo_record(demo):
    return {
        "id": demo.id,
        "T": float(demo.T),
        "points": [[float(t), y.tolist()] for t, y in zip(demo.t, demo.y)],
        "contexts": {k: v.tolist() for k, v in demo.contexts.items()},
    }


def dumps_dataset(dataset):
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
              "phase_mode": dataset.phase_mode, "meta": dataset.meta}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(_demo_record(d), sort_keys=True) for d in dataset.demos]
    return "\n".join(lines) + "\n"


def save_dataset(dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_dataset(dataset))


def load_dataset(path, limit=None):
    """Read a dataset file; ``limit`` stops after that many demonstrations."""
    demos = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(lineno, f"malformed record ({exc.msg})") from None
            if header is None:
                if not isinstance(rec, dict) or rec.get("format") != FORMAT_NAME:
                    raise DatasetParseError(lineno, "missing dataset header")
                if rec.get("version") != FORMAT_VERSION:
                    raise DatasetVersionError(
                        f"dataset format version {rec.get('version')!r}, reader supports {FORMAT_VERSION}")
                header = rec
                continue
            if limit is not None and len(demos) >= limit:
                break
            try:
                pts = rec["points"]
                demos.append(Demonstration(
                    str(rec["id"]), float(rec["T"]),
                    [p[0] for p in pts], [p[1] for p in pts],
                    {k: v for k, v in rec.get("contexts", {}).items()}))
            except (KeyError, TypeError, IndexError, ValueError) as exc:
                raise DatasetParseError(lineno, f"bad demonstration record: {exc}") from None
    if header is None:
        raise DatasetParseError(1, "empty file")
    return Dataset(demos, header.get("phase_mode", LINEAR), header.get("meta", {}))


@dataclass
class SubsamplePolicy:
    """How training draws conditioning sets.

    ``n_points`` ~ Uniform{min_points..max_points} via-points without
    replacement (capped at the demo length); each context channel enters
    independently with probability ``channel_prob``. Draws with neither
    via-points nor channels are rejected.
    """

    min_points: int = 1
    max_points: int = 10
    channel_prob: float = 0.5
    use_all: bool = False

    def __post_init__(self):
        if not 0 <= self.min_points <= self.max_points:
            raise ValueError("need 0 <= min_points <= max_points")
        if not 0.0 <= self.channel_prob <= 1.0:
            raise ValueError("channel_prob must be in [0, 1]")


def subsample_conditioning(demo, policy, rng, channels=None):
    """Return ``(via_indices, channel_names, target_indices)``.

    Targets are always every point of the demonstration.
    """
    n = demo.t.size
    names = sorted(demo.contexts) if channels is None else list(channels)
    targets = np.arange(n)
    if policy.use_all:
        return targets.copy(), names, targets
    if policy.min_points == 0 and (not names or policy.channel_prob == 0.0):
        raise ValueError("policy can only produce empty conditioning sets for this demo")
    while True:
        k = int(rng.integers(policy.min_points, policy.max_points + 1))
        via = np.sort(rng.choice(n, size=min(k, n), replace=False))
        chosen = [c for c in names if rng.random() < policy.channel_prob]
        if via.size or chosen:
            return via, chosen, targets
