"""Run configuration: TOML parsing, validation, presets and the initial-data grammar."""

import logging
import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np
import sympy as sp
import toml
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .domain_grid import ScalarField, build_grid, integrate
from .errors import ConfigurationError

logger = logging.getLogger(__name__)

PRESETS = (
    "tent",
    "two_phase_tents",
    "two_phase_asymmetric",
    "square_halves",
    "disk_sectors",
    "caloric_linear",
    "caloric_quadratic",
)
CALORIC_PRESETS = ("caloric_linear", "caloric_quadratic")

SECTION_KEYS = {
    "run": {"name", "seed"},
    "grid": {"dim", "extents", "counts", "geometry"},
    "flow": {
        "m",
        "c",
        "epsilon",
        "eps_schedule",
        "stage_durations",
        "dt",
        "t_end",
        "theta",
        "clip_negative",
        "snapshot_stride",
        "series_stride",
        "kappa",
    },
    "initial": {"preset", "expressions"},
    "probe": {"bases", "radii", "include_penalty", "class_tol", "lipschitz_pairs"},
    "partition": {"rel_tol", "window", "threshold"},
    "oracle": {"family", "stride"},
    "output": {"dir", "registry"},
}


@dataclass
class GridSpec:
    dim: int
    extents: list
    counts: list
    geometry: str = "box"


@dataclass
class FlowSpec:
    m: int
    c: list
    eps_schedule: list
    dt: object
    t_end: float
    stage_durations: list = None
    theta: float = 1.0
    clip_negative: bool = True
    snapshot_stride: int = 1
    series_stride: int = 1
    kappa: float = 0.25


@dataclass
class InitialSpec:
    preset: str = None
    expressions: list = None


@dataclass
class ProbeSpec:
    bases: list = field(default_factory=list)
    radii: object = "auto"
    include_penalty: bool = False
    class_tol: float = 0.02
    lipschitz_pairs: int = 200


@dataclass
class PartitionSpec:
    rel_tol: float = 1e-4
    window: float = None
    threshold: float = None


@dataclass
class OracleSpec:
    family: str = "axis-aligned-lines"
    stride: int = 1


@dataclass
class RunConfig:
    name: str
    seed: int
    grid: GridSpec
    flow: FlowSpec
    initial: InitialSpec
    probe: ProbeSpec
    partition: PartitionSpec
    oracle: OracleSpec
    output_dir: str
    registry: str = None

    @property
    def epsilon(self):
        return self.flow.eps_schedule[0]

    def build_grid(self):
        return build_grid(self.grid.dim, self.grid.extents, self.grid.counts, self.grid.geometry)

    def to_dict(self):
        """Plain dict with every default filled in, in TOML section layout."""
        data = {
            "run": {"name": self.name, "seed": self.seed},
            "grid": asdict(self.grid),
            "flow": asdict(self.flow),
            "initial": {k: v for k, v in asdict(self.initial).items() if v is not None},
            "probe": asdict(self.probe),
            "partition": {k: v for k, v in asdict(self.partition).items() if v is not None},
            "oracle": asdict(self.oracle),
            "output": {"dir": self.output_dir},
        }
        if self.flow.stage_durations is None:
            del data["flow"]["stage_durations"]
        if self.registry:
            data["output"]["registry"] = self.registry
        return data


def _line_of(text, section, key):
    """Best-effort line number of `key` inside `[section]` for diagnostics."""
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        header = re.match(r"^\[([^\]]+)\]", stripped)
        if header:
            current = header.group(1).strip()
        elif current == section and re.match(rf"^{re.escape(key)}\s*=", stripped):
            return number
    return None


class _Reader:
    """Typed access to one parsed TOML document with field/line diagnostics."""

    def __init__(self, data, text):
        self.data = data
        self.text = text

    def error(self, section, key, message):
        return ConfigurationError(message, field=f"{section}.{key}", line=_line_of(self.text, section, key))

    def get(self, section, key, kind, default=..., required=False):
        table = self.data.get(section, {})
        if key not in table:
            if required or default is ...:
                raise ConfigurationError(f"missing required key '{key}' in [{section}]", field=f"{section}.{key}")
            return default
        value = table[key]
        try:
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is list:
                if not isinstance(value, list):
                    raise TypeError
                return value
            if kind is int and (isinstance(value, bool) or (isinstance(value, float) and not value.is_integer())):
                raise TypeError
            return kind(value)
        except (TypeError, ValueError):
            raise self.error(section, key, f"expected {kind.__name__}, got {value!r}")


def parse_config(text, source="<string>"):
    """Parse and validate a TOML run configuration."""
    try:
        data = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigurationError(f"cannot parse {source}: {e.msg}", line=e.lineno)

    for section, table in data.items():
        if section not in SECTION_KEYS:
            raise ConfigurationError(f"unknown section [{section}]", field=section, line=_line_of(text, section, ""))
        if not isinstance(table, dict):
            raise ConfigurationError(f"'{section}' must be a table", field=section)
        for key in table:
            if key not in SECTION_KEYS[section]:
                raise ConfigurationError(
                    f"unknown key '{key}' in [{section}]", field=f"{section}.{key}", line=_line_of(text, section, key)
                )
    r = _Reader(data, text)

    grid = GridSpec(
        dim=r.get("grid", "dim", int, required=True),
        extents=[float(v) for v in r.get("grid", "extents", list, required=True)],
        counts=[int(v) for v in r.get("grid", "counts", list, required=True)],
        geometry=r.get("grid", "geometry", str, "box"),
    )
    try:
        build_grid(grid.dim, grid.extents, grid.counts, grid.geometry)
    except ConfigurationError as e:
        raise ConfigurationError(e.detail, field=e.field, line=_line_of(text, "grid", e.field.split(".")[-1]))

    m = r.get("flow", "m", int, required=True)
    if m < 1:
        raise r.error("flow", "m", f"m must be at least 1, got {m}")
    c = [float(v) for v in r.get("flow", "c", list, [1.0] * m)]
    if len(c) != m or any(not v > 0 for v in c):
        raise r.error("flow", "c", f"c needs {m} positive entries, got {c}")

    if "eps_schedule" in data.get("flow", {}):
        schedule = [float(v) for v in r.get("flow", "eps_schedule", list)]
        if "epsilon" in data["flow"]:
            raise r.error("flow", "epsilon", "give either epsilon or eps_schedule, not both")
    else:
        schedule = [r.get("flow", "epsilon", float, 1.0 if m == 1 else ...)]
    if not schedule or any(not e > 0 for e in schedule):
        raise r.error("flow", "eps_schedule", f"epsilon values must be positive, got {schedule}")
    if any(not b < a for a, b in zip(schedule, schedule[1:])):
        raise r.error("flow", "eps_schedule", f"epsilon schedule must be strictly decreasing, got {schedule}")

    dt = data.get("flow", {}).get("dt", "auto")
    if dt != "auto":
        dt = r.get("flow", "dt", float)
        if not dt > 0:
            raise r.error("flow", "dt", f"dt must be positive or \"auto\", got {dt}")
    t_end = r.get("flow", "t_end", float, required=True)
    if not t_end > 0:
        raise r.error("flow", "t_end", f"t_end must be positive, got {t_end}")
    durations = r.get("flow", "stage_durations", list, None)
    if durations is not None:
        durations = [float(v) for v in durations]
        if len(durations) != len(schedule) or any(not d > 0 for d in durations):
            raise r.error("flow", "stage_durations", "need one positive duration per epsilon stage")
    flow = FlowSpec(
        m=m,
        c=c,
        eps_schedule=schedule,
        dt=dt,
        t_end=t_end,
        stage_durations=durations,
        theta=r.get("flow", "theta", float, 1.0),
        clip_negative=r.get("flow", "clip_negative", bool, True),
        snapshot_stride=r.get("flow", "snapshot_stride", int, 1),
        series_stride=r.get("flow", "series_stride", int, 1),
        kappa=r.get("flow", "kappa", float, 0.25),
    )
    if not 0.5 <= flow.theta <= 1.0:
        raise r.error("flow", "theta", f"theta must lie in [0.5, 1], got {flow.theta}")
    for key in ("snapshot_stride", "series_stride"):
        if getattr(flow, key) < 1:
            raise r.error("flow", key, f"{key} must be >= 1")

    initial = InitialSpec(
        preset=r.get("initial", "preset", str, None),
        expressions=r.get("initial", "expressions", list, None),
    )
    if (initial.preset is None) == (initial.expressions is None):
        raise ConfigurationError("give exactly one of initial.preset or initial.expressions", field="initial")
    if initial.preset is not None and initial.preset not in PRESETS:
        raise r.error("initial", "preset", f"unknown preset {initial.preset!r}; choose from {', '.join(PRESETS)}")
    if initial.expressions is not None:
        if len(initial.expressions) != m:
            raise r.error("initial", "expressions", f"need {m} expressions, got {len(initial.expressions)}")
        for expression in initial.expressions:
            compile_expression(str(expression), grid.dim, _line_of(text, "initial", "expressions"))

    radii = data.get("probe", {}).get("radii", "auto")
    if radii != "auto":
        radii = [float(v) for v in r.get("probe", "radii", list)]
    bases = r.get("probe", "bases", list, [])
    for base in bases:
        if not isinstance(base, list) or len(base) != grid.dim + 1:
            raise r.error("probe", "bases", f"each base is [x{', y' if grid.dim == 2 else ''}, t0], got {base!r}")
    probe = ProbeSpec(
        bases=[[float(v) for v in b] for b in bases],
        radii=radii,
        include_penalty=r.get("probe", "include_penalty", bool, False),
        class_tol=r.get("probe", "class_tol", float, 0.02),
        lipschitz_pairs=r.get("probe", "lipschitz_pairs", int, 200),
    )
    partition = PartitionSpec(
        rel_tol=r.get("partition", "rel_tol", float, 1e-4),
        window=r.get("partition", "window", float, 0.1 * t_end),
        threshold=r.get("partition", "threshold", float, None),
    )
    oracle = OracleSpec(
        family=r.get("oracle", "family", str, "axis-aligned-lines"),
        stride=r.get("oracle", "stride", int, 1),
    )
    config = RunConfig(
        name=r.get("run", "name", str, "segflow-run"),
        seed=r.get("run", "seed", int, 0),
        grid=grid,
        flow=flow,
        initial=initial,
        probe=probe,
        partition=partition,
        oracle=oracle,
        output_dir=r.get("output", "dir", str, "runs/out"),
        registry=r.get("output", "registry", str, None),
    )
    logger.debug("parsed config %s from %s", config.name, source)
    return config


def load_config(path):
    """Read and parse a TOML run configuration file."""
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e.strerror}")
    return parse_config(text, source=str(path))


def dump_config(config):
    return toml.dumps(config.to_dict())


_X, _Y = sp.symbols("x y", real=True)


def _indicator(a, b, var=None):
    """1 on the open interval a < var < b, 0 elsewhere."""
    var = _X if var is None else var
    return sp.Piecewise((1, sp.And(var > a, var < b)), (0, True))


_GRAMMAR = {
    "x": _X,
    "y": _Y,
    "sin": sp.sin,
    "cos": sp.cos,
    "abs": sp.Abs,
    "sqrt": sp.sqrt,
    "exp": sp.exp,
    "pi": sp.pi,
    "ind": _indicator,
}
_NUMBERS = {"Integer": sp.Integer, "Float": sp.Float, "Rational": sp.Rational, "Symbol": sp.Symbol}


def compile_expression(expression, dim, line=None):
    """Compile an initial-data expression into a numpy callable of (x) or (x, y)."""
    allowed = {_X} if dim == 1 else {_X, _Y}
    try:
        expr = parse_expr(
            expression, local_dict=dict(_GRAMMAR), global_dict=dict(_NUMBERS), transformations=standard_transformations
        )
        expr = sp.sympify(expr)
    except Exception as e:
        raise ConfigurationError(f"cannot parse expression {expression!r}: {e}", field="initial.expressions", line=line)
    unknown = expr.free_symbols - allowed
    if unknown or expr.atoms(AppliedUndef):
        names = sorted(str(s) for s in unknown | expr.atoms(AppliedUndef))
        raise ConfigurationError(
            f"expression {expression!r} uses unsupported names {names}", field="initial.expressions", line=line
        )
    args = (_X,) if dim == 1 else (_X, _Y)
    return sp.lambdify(args, expr, modules="numpy")


def _tent(coord, a, b):
    return np.clip(np.minimum(coord - a, b - coord), 0.0, None)


def preset_components(grid, name, m):
    """Raw (unnormalized) component arrays for a named preset."""
    coords = grid.coordinates()
    x = coords[0]
    Lx = grid.extents[0]

    def need(condition, message):
        if not condition:
            raise ConfigurationError(f"preset {name!r}: {message}", field="initial.preset")

    if name == "tent":
        need(m == 1, "needs m = 1")
        values = _tent(x, 0.0, Lx)
        for a in range(1, grid.dim):
            values = values * _tent(coords[a], 0.0, grid.extents[a])
        return [values]
    if name == "two_phase_tents":
        need(m == 2, "needs m = 2")
        across = 1.0 if grid.dim == 1 else np.sin(math.pi * coords[1] / grid.extents[1])
        return [_tent(x, 0.0, 0.5 * Lx) * across, _tent(x, 0.5 * Lx, Lx) * across]
    if name == "two_phase_asymmetric":
        need(m == 2 and grid.dim == 1, "needs m = 2 on a 1-D grid")
        return [_tent(x, 0.0, 0.25 * Lx), _tent(x, 0.25 * Lx, Lx)]
    if name == "square_halves":
        need(m == 2 and grid.dim == 2, "needs m = 2 on a 2-D grid")
        y, Ly = coords[1], grid.extents[1]
        # Off-centre split so the flow has to move the interface
        split = 0.4 * Lx
        return [
            _tent(x, 0.0, split) * _tent(y, 0.0, Ly),
            _tent(x, split, Lx) * _tent(y, 0.0, Ly),
        ]
    if name == "disk_sectors":
        need(grid.dim == 2 and m >= 2, "needs m >= 2 on a 2-D grid")
        cx, cy = grid.center()
        radius = 0.5 * min(grid.extents)
        r = np.hypot(x - cx, coords[1] - cy)
        angle = np.mod(np.arctan2(coords[1] - cy, x - cx), 2.0 * math.pi)
        sector = np.minimum((angle * m / (2.0 * math.pi)).astype(int), m - 1)
        profile = np.clip(r * (radius - r), 0.0, None) * np.abs(np.sin(angle * m / 2.0))
        return [np.where(sector == j, profile, 0.0) for j in range(m)]
    raise ConfigurationError(f"preset {name!r} does not define initial data", field="initial.preset")


def initial_data(config, grid=None):
    """Target-valued initial components: masked to the interior and normalized to c_j."""
    grid = grid or config.build_grid()
    m = config.flow.m
    if config.initial.preset is not None:
        raw = preset_components(grid, config.initial.preset, m)
    else:
        raw = []
        for expression in config.initial.expressions:
            fn = compile_expression(str(expression), grid.dim)
            raw.append(np.asarray(fn(*grid.coordinates()), dtype=float) * np.ones(grid.counts))

    fields = []
    for j, (values, cj) in enumerate(zip(raw, config.flow.c)):
        values = np.where(grid.interior_mask, values, 0.0)
        norm = math.sqrt(integrate(ScalarField(grid, values ** 2)))
        if not norm > 0:
            raise ConfigurationError(f"initial component {j + 1} is zero on the interior", field="initial")
        fields.append(ScalarField(grid, values * (cj / norm)))
    return fields


def resolve_dt(config, g):
    """Numeric dt; "auto" is min(0.25 h^2, 0.25 eps^2 / max|g|^2)."""
    if config.flow.dt != "auto":
        return float(config.flow.dt)
    grid = g[0].grid
    umax = max(f.sup() for f in g)
    return min(0.25 * grid.min_spacing ** 2, 0.25 * config.epsilon ** 2 / umax ** 2)
