"""Dataset supply: simulators, fault injection, and the NSL-KDD loader.

Three sources live here. A correlated-component simulator produces wide
telemetry-like records (one driver value plus 99 noisy functions of it
per component). A three-stream generator emulates network monitoring
data (flow records, device counters, log-template counts) coupled
through shared latent factors, with injectable fault archetypes. The
NSL-KDD loader turns the benchmark's CSV files into fixed-width numeric
vectors using a bundled column descriptor.

Every generator draws from the seeded portable RNG, so streams are
bit-identical across runs and platforms.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DataError
from .rng import PortableRng, derive_seed


# ---------------------------------------------------------------------------
# correlated-component simulator


@dataclass
class SimConfig:
    n_components: int = 10
    dims_per_component: int = 100
    beta: float = 100.0
    gamma: float = 50.0
    t_train: int = 10_000
    seed: int = 0
    layout: str = "interleaved"

    def __post_init__(self):
        if self.n_components < 1 or self.dims_per_component < 1 or self.t_train < 1:
            raise DataError("counts must be positive")
        if self.gamma < 0:
            raise DataError("gamma must be non-negative")
        if self.layout not in ("interleaved", "block"):
            raise DataError("layout must be 'interleaved' or 'block'")

    @property
    def dim(self) -> int:
        return self.n_components * self.dims_per_component

    def dim_index(self, component: int, j: int) -> int:
        """Flat index of slot j (0 = driver) of one component.

        The interleaved layout strides components fastest, so component c,
        slot j sits at c + n_components*j; the block layout keeps each
        component contiguous.
        """
        if self.layout == "interleaved":
            return component + self.n_components * j
        return component * self.dims_per_component + j

    def component_dims(self, component: int) -> np.ndarray:
        return np.array(
            [self.dim_index(component, j) for j in range(self.dims_per_component)]
        )


def gen_simulated(cfg: SimConfig, t: int | None = None) -> np.ndarray:
    """Records where each component is a driver plus noisy functions of it.

    Per record and component: the driver is N(1000, 200^2); slot j >= 1
    carries (1 + 0.1*j) * driver^2 + N(beta, gamma^2). Negative driver
    draws are kept as-is.
    """
    t = cfg.t_train if t is None else t
    if t < 1:
        raise DataError("record count must be positive")
    c, d = cfg.n_components, cfg.dims_per_component
    rng = PortableRng(derive_seed(cfg.seed, 0x51))
    drivers = rng.normal(1000.0, 200.0, t * c).reshape(t, c)
    noise = rng.normal(cfg.beta, cfg.gamma, t * c * (d - 1)).reshape(t, c, d - 1)
    coef = 1.0 + 0.1 * np.arange(1, d)
    correlated = coef[None, None, :] * (drivers**2)[:, :, None] + noise

    out = np.empty((t, cfg.dim))
    for comp in range(c):
        out[:, cfg.dim_index(comp, 0)] = drivers[:, comp]
        for j in range(1, d):
            out[:, cfg.dim_index(comp, j)] = correlated[:, comp, j - 1]
    return out


@dataclass
class FaultSpec:
    """What kind of fault to inject; the where and how much are drawn."""

    n_f: int
    direction: str = "increase"

    def __post_init__(self):
        if self.n_f < 0:
            raise DataError("n_f must be non-negative")
        if self.direction not in ("increase", "decrease"):
            raise DataError("direction must be 'increase' or 'decrease'")


@dataclass
class EventLabel:
    """Ground truth for one injected fault; never shown to training."""

    index: int
    dims: tuple
    tag: str = "fault"
    stream: str = ""


def inject_fault(
    record: np.ndarray, spec: FaultSpec, cfg: SimConfig, seed: int
) -> tuple[np.ndarray, EventLabel]:
    """Scale n_f correlated slots of one random component by a common r.

    r is uniform in [2, 10] for an increase, [0.1, 0.5] for a decrease;
    the affected slots are drawn without replacement from the chosen
    component's correlated slots (the driver is never touched). Returns
    the modified copy and the ground-truth label.
    """
    record = np.asarray(record, dtype=np.float64)
    if record.shape != (cfg.dim,):
        raise DataError(f"record must have {cfg.dim} dimensions")
    if spec.n_f > cfg.dims_per_component - 1:
        raise DataError("n_f exceeds the correlated slots of one component")
    out = record.copy()
    if spec.n_f == 0:
        return out, EventLabel(0, (), "none")

    rng = PortableRng(derive_seed(seed, 0xFA))
    component = rng.integer_below(cfg.n_components)
    slots = rng.choice_without_replacement(cfg.dims_per_component - 1, spec.n_f) + 1
    dims = tuple(int(cfg.dim_index(component, int(j))) for j in slots)
    if spec.direction == "increase":
        r = float(rng.uniform(2.0, 10.0, 1)[0])
    else:
        r = float(rng.uniform(0.1, 0.5, 1)[0])
    out[list(dims)] *= r
    return out, EventLabel(0, dims, f"{spec.direction} x{r:.3f}")


# ---------------------------------------------------------------------------
# coupled three-stream generator

STREAM_NAMES = ("flow", "mib", "syslog")
FAULT_ARCHETYPES = ("volume_flood", "counter_spike", "template_burst", "decouple")


@dataclass
class MultimodalConfig:
    t: int = 2000
    flow_dims: int = 32
    mib_dims: int = 14
    syslog_dims: int = 68  # last dimension reserved for novel templates
    latent_dim: int = 6
    noise_flow: float = 0.1
    noise_mib: float = 0.002
    noise_syslog: float = 0.05
    coupling: float = 1.0
    faults: tuple = ()  # (record_index, archetype) pairs
    seed: int = 0

    def __post_init__(self):
        if min(self.t, self.flow_dims, self.mib_dims, self.latent_dim) < 1:
            raise DataError("counts must be positive")
        if self.syslog_dims < 2:
            raise DataError("syslog needs at least one template plus the reserve")
        if not 0.0 <= self.coupling <= 1.0:
            raise DataError("coupling must be in [0, 1]")
        for idx, tag in self.faults:
            if not 0 <= idx < self.t:
                raise DataError(f"fault index {idx} out of range")
            if tag not in FAULT_ARCHETYPES:
                raise DataError(f"unknown fault archetype {tag!r}")


def _readout_params(cfg: MultimodalConfig):
    """Fixed mixing matrices, derived from the seed but not the stream."""
    rng = PortableRng(derive_seed(cfg.seed, 0x30))
    ld = cfg.latent_dim

    def mat(rows):
        return rng.uniform(0.3, 1.2, rows * ld).reshape(rows, ld)

    flow_lin = mat(cfg.flow_dims)
    flow_quad = rng.uniform(0.0, 0.4, cfg.flow_dims * ld).reshape(cfg.flow_dims, ld)
    mib_lin = mat(cfg.mib_dims)
    n_templates = cfg.syslog_dims - 1
    # each template listens to one latent and fires only when that factor
    # exceeds its trigger level, which keeps most counts at zero
    sys_pick = np.array([rng.integer_below(ld) for _ in range(n_templates)])
    sys_gain = rng.uniform(4.0, 12.0, n_templates)
    sys_trigger = rng.uniform(0.5, 0.95, n_templates)
    return flow_lin, flow_quad, mib_lin, sys_pick, sys_gain, sys_trigger


def _stream_rows(cfg, latents, flow_noise, mib_noise, sys_noise, params):
    flow_lin, flow_quad, mib_lin, sys_pick, sys_gain, sys_trigger = params
    flow = latents @ flow_lin.T + (latents**2) @ flow_quad.T + flow_noise
    mib = latents @ mib_lin.T + mib_noise
    fired = latents[:, sys_pick] - sys_trigger
    counts = np.maximum(fired * sys_gain + sys_noise, 0.0)
    syslog = np.concatenate([counts, np.zeros((latents.shape[0], 1))], axis=1)
    return flow, mib, syslog


def gen_multimodal(cfg: MultimodalConfig) -> tuple[dict, list[EventLabel]]:
    """Three aligned streams driven by shared latent factors, plus labels.

    Streams: a dense affine+quadratic readout with heavy noise (flow), a
    clean affine readout (mib), and sparse non-negative template counts
    whose last column is a reserved never-fires-normally template
    (syslog). Each type mixes the shared latent vector with its own
    private one according to cfg.coupling (1.0 = fully shared).

    Fault archetypes, applied at the requested record indices:
      volume_flood    scale a fixed quarter of flow and mib dims by r
      counter_spike   scale one mib dim by r
      template_burst  set the reserved syslog column to a burst count
      decouple        redraw one stream's record from independent latents

    Returns ({stream name: array}, labels). Faulted records appear only
    in the returned arrays; training protocols should slice them out or
    generate a separate clean run.
    """
    params = _readout_params(cfg)
    t, ld = cfg.t, cfg.latent_dim
    shared = PortableRng(derive_seed(cfg.seed, 0x31)).uniform(0.2, 1.0, t * ld).reshape(t, ld)

    def mixed(tag):
        if cfg.coupling == 1.0:
            return shared
        own = PortableRng(derive_seed(cfg.seed, tag)).uniform(0.2, 1.0, t * ld).reshape(t, ld)
        return cfg.coupling * shared + (1.0 - cfg.coupling) * own

    flow_noise = PortableRng(derive_seed(cfg.seed, 0x35)).normal(0, cfg.noise_flow, t * cfg.flow_dims).reshape(t, cfg.flow_dims)
    mib_noise = PortableRng(derive_seed(cfg.seed, 0x36)).normal(0, cfg.noise_mib, t * cfg.mib_dims).reshape(t, cfg.mib_dims)
    sys_noise = PortableRng(derive_seed(cfg.seed, 0x37)).normal(0, cfg.noise_syslog, t * (cfg.syslog_dims - 1)).reshape(t, cfg.syslog_dims - 1)

    lat_flow, lat_mib, lat_sys = mixed(0x32), mixed(0x33), mixed(0x34)
    f_rows = _stream_rows(cfg, lat_flow, flow_noise, 0.0, 0.0, params)[0]
    m_rows = _stream_rows(cfg, lat_mib, 0.0, mib_noise, 0.0, params)[1]
    s_rows = _stream_rows(cfg, lat_sys, 0.0, 0.0, sys_noise, params)[2]
    streams = {"flow": f_rows, "mib": m_rows, "syslog": s_rows}

    labels: list[EventLabel] = []
    frng = PortableRng(derive_seed(cfg.seed, 0x38))
    for idx, tag in cfg.faults:
        if tag == "volume_flood":
            r = float(frng.uniform(2.0, 6.0, 1)[0])
            n_flow = max(1, cfg.flow_dims // 4)
            n_mib = max(1, cfg.mib_dims // 4)
            fdims = tuple(int(v) for v in frng.choice_without_replacement(cfg.flow_dims, n_flow))
            mdims = tuple(int(v) for v in frng.choice_without_replacement(cfg.mib_dims, n_mib))
            streams["flow"][idx, list(fdims)] *= r
            streams["mib"][idx, list(mdims)] *= r
            labels.append(EventLabel(idx, fdims, tag, "flow"))
            labels.append(EventLabel(idx, mdims, tag, "mib"))
        elif tag == "counter_spike":
            r = float(frng.uniform(2.0, 6.0, 1)[0])
            dim = frng.integer_below(cfg.mib_dims)
            streams["mib"][idx, dim] *= r
            labels.append(EventLabel(idx, (int(dim),), tag, "mib"))
        elif tag == "template_burst":
            burst = float(frng.uniform(5.0, 20.0, 1)[0])
            streams["syslog"][idx, cfg.syslog_dims - 1] = burst
            labels.append(EventLabel(idx, (cfg.syslog_dims - 1,), tag, "syslog"))
        else:  # decouple: sever one stream from the shared factors
            pick = int(frng.integer_below(3))
            name = STREAM_NAMES[pick]
            fresh = frng.uniform(0.2, 1.0, ld)[None, :]
            rows = _stream_rows(cfg, fresh, 0.0, 0.0, 0.0, params)
            streams[name][idx] = rows[pick][0]
            labels.append(
                EventLabel(idx, tuple(range(streams[name].shape[1])), tag, name)
            )
    return streams, labels


# ---------------------------------------------------------------------------
# NSL-KDD loader

NSLKDD_CATEGORIES = ("normal", "DoS", "R2L", "U2R", "probing")


def load_nslkdd_schema() -> dict:
    """The bundled column descriptor (names, discrete columns, class map)."""
    with resources.files("anomalens.data").joinpath("nslkdd_schema.json").open() as fh:
        return json.load(fh)


@dataclass
class NslkddData:
    x: np.ndarray
    categories: list[str]
    attack_names: list[str]
    feature_names: list[str]
    vocabulary: dict


def load_nslkdd(path, schema: dict | None = None, vocabulary: dict | None = None) -> NslkddData:
    """Encode one NSL-KDD CSV file into fixed-width numeric vectors.

    Symbolic columns become one-hot blocks. The vocabularies are frozen
    from whichever file is loaded without one (the training file); pass
    that result's vocabulary when loading the test file, where unseen
    category values encode as all-zero blocks. Attack names map to the
    five standard classes.
    """
    schema = schema or load_nslkdd_schema()
    columns = schema["columns"]
    symbolic = set(schema["symbolic"])
    attack_map = schema["attack_categories"]
    n_cols = len(columns)

    rows = []
    attacks = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) not in (n_cols + 1, n_cols + 2):
                raise DataError(
                    f"{path}:{lineno}: expected {n_cols + 1} or {n_cols + 2} fields, got {len(row)}"
                )
            attack = row[n_cols].strip()
            if attack not in attack_map:
                raise DataError(f"{path}:{lineno}: unknown class tag {attack!r}")
            rows.append([v.strip() for v in row[:n_cols]])
            attacks.append(attack)
    if not rows:
        raise DataError(f"{path}: no records")

    if vocabulary is None:
        vocabulary = {
            col: sorted({row[i] for row in rows})
            for i, col in enumerate(columns)
            if col in symbolic
        }

    feature_names = []
    blocks = []  # (column index, None) for numeric, (index, {value: slot}) for symbolic
    width = 0
    for i, col in enumerate(columns):
        if col in symbolic:
            values = vocabulary[col]
            blocks.append((i, {v: j for j, v in enumerate(values)}, width))
            feature_names.extend(f"{col}_{v}" for v in values)
            width += len(values)
        else:
            blocks.append((i, None, width))
            feature_names.append(col)
            width += 1

    x = np.zeros((len(rows), width))
    for r, row in enumerate(rows):
        for i, mapping, offset in blocks:
            if mapping is None:
                try:
                    x[r, offset] = float(row[i])
                except ValueError:
                    raise DataError(
                        f"{path}:{r + 1}: non-numeric value {row[i]!r} in column {columns[i]}"
                    ) from None
            else:
                slot = mapping.get(row[i])
                if slot is not None:
                    x[r, offset + slot] = 1.0

    categories = [attack_map[a] for a in attacks]
    return NslkddData(x, categories, attacks, feature_names, vocabulary)


# ---------------------------------------------------------------------------
# CSV plumbing shared by the command-line tools


def write_csv(path, array: np.ndarray, names: list[str]) -> None:
    array = np.asarray(array)
    if array.ndim != 2 or array.shape[1] != len(names):
        raise DataError("array width must match the header")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in array:
            w.writerow([repr(float(v)) for v in row])


def read_csv(path) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            names = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise DataError(f"{path}:{lineno}: expected {len(names)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows), names


def write_events_csv(path, labels: list[EventLabel]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "stream", "tag", "dims"])
        for lab in labels:
            w.writerow([lab.index, lab.stream, lab.tag, " ".join(str(d) for d in lab.dims)])


def read_events_csv(path) -> list[EventLabel]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index", "stream", "tag", "dims"]:
            raise DataError(f"{path}: not an events file")
        out = []
        for row in reader:
            if not row:
                continue
            dims = tuple(int(v) for v in row[3].split()) if row[3] else ()
            out.append(EventLabel(int(row[0]), dims, row[2], row[1]))
    return out
