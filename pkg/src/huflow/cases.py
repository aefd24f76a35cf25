"""Built-in benchmark cases and INI-style case configuration.

A :class:`CaseSpec` is a plain, serialisable description of a simulation:
grid, fluids, initial condition, time schedule, and solver settings.  It can
be rendered to and re-read from an INI file without loss (floats are written
with ``repr`` so round-trips are bit-exact), and two specs compare equal when
they describe the same physical setup regardless of their display name.

Built-in cases:

* ``seg1d_<dt>`` -- vertical two-phase gravity segregation column, 100 cells,
  water initially on top; ``dt`` in days is one of 100, 150, 200, 300.
* ``tilted_box_<angle>[_cap]`` -- square cross-section rotated by ``angle``
  degrees (0, 20, 45, 70, 90), water initially filling 80% of the box along
  its own z axis; ``_cap`` enables capillary pressure on the water phase.
* ``barriers[_<n>][_cap]`` -- three-phase redistribution in a closed box with
  five interior low-permeability barriers pierced by one-cell openings;
  ``n`` is the lateral/vertical cell count (default 100) on a fixed 100 m
  domain, and ``_cap`` enables capillary pressure on water and gas.
* ``one_cell`` -- the dimensionless single-interface problem used by the
  residual-space diagnostics, posed as a two-cell grid with the right cell
  held at fixed pressure and saturation.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .flux import SCHEME_LABELS, SchemeConfig
from .fluid import (
    BUILTIN_CAPILLARY_TABLES,
    CapillarySpline,
    FluidSystem,
    PhaseSpec,
    RelPermModel,
    build_capillary_spline,
)
from .mesh import MILLIDARCY, Grid, build_structured_grid
from .solver import Problem, SolverSettings, SourceSpec, State

SECONDS_PER_DAY = 86400.0

#: Interior barrier rows for the ``barriers`` case: (z fraction of the face,
#: x fractions of one-cell openings).  Openings are staggered so that fluid
#: must sweep laterally between rows.
BARRIER_LAYOUT: tuple[tuple[float, tuple[float, ...]], ...] = (
    (0.20, (0.25, 0.75)),
    (0.35, (0.50,)),
    (0.50, (0.10, 0.90)),
    (0.65, (0.35, 0.65)),
    (0.80, (0.05, 0.55)),
)

_CHOPS = ("vanilla", "appleyard")
_KINDS = ("box", "one_cell")
_BOX_ANGLES = (0, 20, 45, 70, 90)


@dataclass
class CaseSpec:
    """Complete, serialisable description of a simulation case.

    ``name`` is excluded from equality: two specs are the same case when all
    physical and numerical parameters match, whatever they are called.
    """

    name: str = field(default="case", compare=False)
    kind: str = "box"
    scheme: str = ""
    gravity: float = 9.81
    weight_sharpness: float = 1.0  # alpha multiplier of the blend exponents

    # grid ----------------------------------------------------------------
    nx: int = 1
    ny: int = 1
    nz: int = 1
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0
    tilt_deg: float = 0.0
    permeability: float = 100.0 * MILLIDARCY  # m^2
    porosity: float = 0.25
    barriers: tuple[tuple[float, tuple[float, ...]], ...] = ()

    # fluids (reference phase last) ----------------------------------------
    phase_names: tuple[str, ...] = ("water", "gas")
    densities: tuple[float, ...] = (1000.0, 100.0)
    viscosities: tuple[float, ...] = (1.0e-3, 1.0e-3)
    kr_scales: tuple[float, ...] = (1.0, 0.6)
    kr_exponents: tuple[float, ...] = (2.5, 3.0)
    wettability: tuple[int, ...] = (0, 1)
    capillary_scales: tuple[float, ...] = (0.0, 0.0)

    # initial condition -----------------------------------------------------
    initial_pressure: float = 1.0e7  # at the shallowest cell
    hydrostatic_guess: bool = True  # seed pressure with local-mixture head
    top_phase: int = 0
    top_fraction: float = 0.0
    bottom_phase: int = -1  # -1: no bottom band
    bottom_fraction: float = 0.0

    # schedule (in multiples of time_unit seconds; final step truncated) ----
    ramp: tuple[float, ...] = ()
    dt: float = 1.0
    end: float = 1.0
    time_unit: float = SECONDS_PER_DAY

    # solver ----------------------------------------------------------------
    max_iterations: int = 15
    chop: str = "vanilla"
    update_tests: bool = True
    max_cut_depth: int = 6

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        """Raise ``ValueError`` on any physically or numerically bad field."""
        if self.kind not in _KINDS:
            raise ValueError(f"unknown case kind {self.kind!r}")
        if self.scheme and self.scheme not in SCHEME_LABELS:
            raise ValueError(f"unknown scheme {self.scheme!r}; valid: {', '.join(SCHEME_LABELS)}")
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("cell counts must be at least 1")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError("cell sizes must be positive")
        if not 0.0 <= self.tilt_deg <= 90.0:
            raise ValueError("tilt_deg must lie in [0, 90]")
        if self.permeability <= 0:
            raise ValueError("permeability must be positive")
        if not 0.0 < self.porosity <= 1.0:
            raise ValueError(f"porosity {self.porosity} outside (0, 1]")
        if self.gravity < 0 or self.weight_sharpness < 0:
            raise ValueError("gravity and weight_sharpness must be non-negative")

        n = len(self.phase_names)
        if n not in (2, 3):
            raise ValueError("two or three phases supported")
        for attr in ("densities", "viscosities", "kr_scales", "kr_exponents",
                     "wettability", "capillary_scales"):
            if len(getattr(self, attr)) != n:
                raise ValueError(f"{attr} must have one entry per phase")
        if min(self.densities) <= 0 or min(self.viscosities) <= 0:
            raise ValueError("densities and viscosities must be positive")
        if min(self.kr_scales) <= 0:
            raise ValueError("kr_scales must be positive")
        if min(self.kr_exponents) < 1:
            raise ValueError("kr_exponents must be at least 1")
        if min(self.capillary_scales) < 0:
            raise ValueError("capillary_scales must be non-negative")

        if not 0 <= self.top_phase < n:
            raise ValueError("top_phase out of range")
        if self.bottom_phase != -1 and not 0 <= self.bottom_phase < n:
            raise ValueError("bottom_phase out of range")
        if self.top_fraction < 0 or self.bottom_fraction < 0:
            raise ValueError("initial band fractions must be non-negative")
        if self.top_fraction + self.bottom_fraction > 1.0 + 1e-12:
            raise ValueError("initial bands overlap")
        if self.initial_pressure <= 0:
            raise ValueError("initial_pressure must be positive")

        if self.dt <= 0 or self.end <= 0 or self.time_unit <= 0:
            raise ValueError("dt, end and time_unit must be positive")
        if any(r <= 0 for r in self.ramp):
            raise ValueError("ramp steps must be positive")
        if sum(self.ramp) > self.end:
            raise ValueError("ramp exceeds the schedule end time")

        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.chop not in _CHOPS:
            raise ValueError(f"chop must be one of {_CHOPS}")
        if self.max_cut_depth < 0:
            raise ValueError("max_cut_depth must be non-negative")
        for zf, opens in self.barriers:
            if not 0.0 < zf < 1.0:
                raise ValueError("barrier z fraction must lie strictly inside (0, 1)")
            if any(not 0.0 <= xf <= 1.0 for xf in opens):
                raise ValueError("barrier opening fractions must lie in [0, 1]")

    # -- construction of solver inputs --------------------------------------

    def schedule(self) -> tuple[float, ...]:
        """Step sizes in seconds: ramp steps, then ``dt`` until ``end``.

        The final step is truncated so the cumulative time lands exactly on
        ``end``.
        """
        steps = list(self.ramp)
        t = float(sum(self.ramp))
        tol = 1e-9 * max(self.end, 1.0)
        while t < self.end - tol:
            step = min(self.dt, self.end - t)
            steps.append(step)
            t += step
        return tuple(s * self.time_unit for s in steps)

    def grid(self) -> Grid:
        nz_faces = []
        for zf, opens in self.barriers:
            layer = int(round(zf * self.nz)) - 1
            open_ix = {int(round(xf * (self.nx - 1))) for xf in opens}
            nz_faces.append((layer, open_ix))
        return build_structured_grid(
            self.nx, self.ny, self.nz, self.dx, self.dy, self.dz,
            tilt_deg=self.tilt_deg, perm=self.permeability, phi=self.porosity,
            barriers=nz_faces or None,
        )

    def fluid_system(self, alpha: float | None = None) -> FluidSystem:
        phases = tuple(
            PhaseSpec(
                name=self.phase_names[i],
                viscosity=self.viscosities[i],
                density=self.densities[i],
                relperm=RelPermModel(self.kr_scales[i], self.kr_exponents[i]),
                wettability_rank=self.wettability[i],
            )
            for i in range(len(self.phase_names))
        )
        capillary: dict[int, CapillarySpline] = {}
        for i, scale in enumerate(self.capillary_scales):
            if scale > 0.0:
                capillary[i] = build_capillary_spline(
                    BUILTIN_CAPILLARY_TABLES["appendixB"], scale=scale
                )
        a = self.weight_sharpness if alpha is None else alpha
        return FluidSystem(phases=phases, capillary=capillary, alpha=a)

    def initial_state(self, grid: Grid | None = None) -> State:
        n = self.nx * self.ny * self.nz
        n_ph = len(self.phase_names)
        pressure = np.full(n, self.initial_pressure)
        sats = np.zeros((n, n_ph))
        if self.kind == "one_cell":
            sats[:, 0] = (0.4, 0.2)
            sats[:, 1] = 1.0 - sats[:, 0]
            return State(pressure, sats)
        sats[:, n_ph - 1] = 1.0  # reference phase everywhere by default
        iz = np.arange(n) // (self.nx * self.ny)
        top = iz < int(round(self.top_fraction * self.nz))
        sats[top] = 0.0
        sats[top, self.top_phase] = 1.0
        if self.bottom_phase != -1 and self.bottom_fraction > 0:
            bottom = iz >= self.nz - int(round(self.bottom_fraction * self.nz))
            sats[bottom] = 0.0
            sats[bottom, self.bottom_phase] = 1.0
        if self.hydrostatic_guess:
            # Newton start only: incompressible closed problems determine
            # pressure from saturations, so this changes no converged state.
            depths = (grid if grid is not None else self.grid()).depths
            rho = sats @ np.asarray(self.densities)
            pressure += rho * self.gravity * (depths - depths.min())
        return State(pressure, sats)

    def sources(self) -> SourceSpec:
        if self.kind == "one_cell":
            # Hold the down-gradient cell at the fixed boundary condition.
            return SourceSpec(dirichlet={1: (210.0, (0.2, 0.8))})
        return SourceSpec()

    def settings(self) -> SolverSettings:
        return SolverSettings(
            max_iterations=self.max_iterations,
            chop=self.chop,
            update_tests=self.update_tests,
            max_cut_depth=self.max_cut_depth,
        )

    def build(self, scheme: str | None = None,
              alpha: float | None = None) -> tuple[Problem, State, tuple[float, ...]]:
        """Materialise (problem, initial state, step sizes) for one scheme run."""
        self.validate()
        label = scheme or self.scheme
        if not label:
            raise ValueError("no scheme given: pass one or set CaseSpec.scheme")
        a = self.weight_sharpness if alpha is None else alpha
        cfg = SchemeConfig.from_label(label, alpha=a)
        grid = self.grid()
        problem = Problem(
            grid=grid,
            fluids=self.fluid_system(alpha=a),
            scheme=cfg,
            settings=self.settings(),
            sources=self.sources(),
            gravity=self.gravity,
            label=f"{self.name}:{label}",
        )
        return problem, self.initial_state(grid), self.schedule()


# -- built-in cases ----------------------------------------------------------


def _seg1d(dt_days: float) -> CaseSpec:
    return CaseSpec(
        name=f"seg1d_{dt_days:g}",
        nx=1, ny=1, nz=100, dx=10.0, dy=10.0, dz=2.0,
        permeability=100.0 * MILLIDARCY, porosity=0.25,
        top_phase=0, top_fraction=0.5,
        ramp=(5.0, 25.0, 50.0), dt=dt_days, end=5000.0,
        max_iterations=15, update_tests=True,
    )


def _tilted_box(angle: int, capillary: bool) -> CaseSpec:
    return CaseSpec(
        name=f"tilted_box_{angle}" + ("_cap" if capillary else ""),
        nx=40, ny=1, nz=40, dx=0.5, dy=1.0, dz=0.5, tilt_deg=float(angle),
        permeability=100.0 * MILLIDARCY, porosity=0.25,
        capillary_scales=(1.0, 0.0) if capillary else (0.0, 0.0),
        top_phase=0, top_fraction=0.8,
        ramp=(0.1, 0.5, 2.0, 5.0), dt=10.0, end=400.0,
        max_iterations=15, update_tests=True,
    )


def _barriers(cells: int, capillary: bool) -> CaseSpec:
    size = 100.0 / cells
    suffix = ("" if cells == 100 else f"_{cells}") + ("_cap" if capillary else "")
    return CaseSpec(
        name=f"barriers{suffix}",
        nx=cells, ny=1, nz=cells, dx=size, dy=1.0, dz=size,
        permeability=1000.0 * MILLIDARCY, porosity=0.3,
        barriers=BARRIER_LAYOUT,
        phase_names=("water", "gas", "oil"),
        densities=(1500.0, 500.0, 1000.0),
        viscosities=(1.0e-3, 1.0e-3, 1.0e-3),
        kr_scales=(1.0, 1.0, 1.0),
        kr_exponents=(2.0, 2.0, 2.0),
        wettability=(0, 2, 1),
        capillary_scales=(0.4, 0.4, 0.0) if capillary else (0.0, 0.0, 0.0),
        top_phase=0, top_fraction=0.1,
        bottom_phase=1, bottom_fraction=0.1,
        ramp=(1.0, 2.0, 5.0, 10.0), dt=60.0, end=600.0,
        max_iterations=20, update_tests=False,
    )


def _one_cell() -> CaseSpec:
    return CaseSpec(
        name="one_cell", kind="one_cell", gravity=1.0,
        # Two unit cells rotated to horizontal so the connection carries
        # g*dz = -1 with unit transmissibility and unit volumes.
        nx=2, ny=1, nz=1, dx=1.0, dy=1.0, dz=1.0, tilt_deg=90.0,
        permeability=1.0, porosity=0.3,
        densities=(6.18, 2.06), viscosities=(1.0, 1.0),
        kr_scales=(1.0, 1.0), kr_exponents=(2.0, 3.0),
        capillary_scales=(5.0e-5, 0.0),
        initial_pressure=210.0, hydrostatic_guess=False,
        ramp=(), dt=0.1, end=0.1, time_unit=1.0,
        max_iterations=50, update_tests=False,
    )


def builtin_labels() -> tuple[str, ...]:
    labels = [f"seg1d_{d}" for d in (100, 150, 200, 300)]
    for angle in _BOX_ANGLES:
        labels.append(f"tilted_box_{angle}")
        labels.append(f"tilted_box_{angle}_cap")
    labels += ["barriers", "barriers_cap", "one_cell"]
    return tuple(labels)


def builtin_case(label: str) -> CaseSpec:
    """Construct a built-in case from its label.

    ``barriers`` accepts an optional cell count (``barriers_50``) and the
    box cases an optional ``_cap`` suffix; see the module docstring.
    """
    parts = label.split("_")
    if parts[0] == "seg1d" and len(parts) == 2:
        try:
            dt = float(parts[1])
        except ValueError:
            raise ValueError(f"bad seg1d step size in {label!r}") from None
        if dt not in (100.0, 150.0, 200.0, 300.0):
            raise ValueError(f"seg1d step must be 100, 150, 200 or 300 days, got {dt:g}")
        return _seg1d(dt)
    if label == "one_cell":
        return _one_cell()
    if parts[0] == "tilted" and len(parts) >= 3 and parts[1] == "box":
        cap = parts[-1] == "cap"
        body = parts[2:-1] if cap else parts[2:]
        if len(body) != 1 or not body[0].lstrip("-").isdigit():
            raise ValueError(f"bad tilted_box label {label!r}")
        angle = int(body[0])
        if angle not in _BOX_ANGLES:
            raise ValueError(f"tilt angle must be one of {_BOX_ANGLES}, got {angle}")
        return _tilted_box(angle, cap)
    if parts[0] == "barriers":
        cap = parts[-1] == "cap"
        body = parts[1:-1] if cap else parts[1:]
        if len(body) > 1 or (body and not body[0].isdigit()):
            raise ValueError(f"bad barriers label {label!r}")
        cells = int(body[0]) if body else 100
        if cells < 10:
            raise ValueError("barriers needs at least 10 cells per side")
        return _barriers(cells, cap)
    raise ValueError(
        f"unknown case {label!r}; built-ins: {', '.join(builtin_labels())}"
    )


# -- INI serialisation -------------------------------------------------------

_SECTIONS: dict[str, tuple[str, ...]] = {
    "case": ("name", "kind", "scheme", "gravity", "weight_sharpness"),
    "grid": ("nx", "ny", "nz", "dx", "dy", "dz", "tilt_deg",
             "permeability", "porosity", "barriers"),
    "fluids": ("phase_names", "densities", "viscosities", "kr_scales",
               "kr_exponents", "wettability", "capillary_scales"),
    "init": ("initial_pressure", "hydrostatic_guess", "top_phase",
             "top_fraction", "bottom_phase", "bottom_fraction"),
    "schedule": ("ramp", "dt", "end", "time_unit"),
    "solver": ("max_iterations", "chop", "update_tests", "max_cut_depth"),
}

_FLOAT_TUPLES = {"densities", "viscosities", "kr_scales", "kr_exponents",
                 "capillary_scales", "ramp"}
_INT_TUPLES = {"wettability"}
_STR_TUPLES = {"phase_names"}


def _format_value(name: str, value) -> str:
    if name == "barriers":
        return "; ".join(
            f"{value_repr(zf)}: {' '.join(value_repr(x) for x in opens)}"
            for zf, opens in value
        )
    if name in _FLOAT_TUPLES:
        return " ".join(value_repr(v) for v in value)
    if name in _INT_TUPLES:
        return " ".join(str(int(v)) for v in value)
    if name in _STR_TUPLES:
        return " ".join(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return value_repr(value)
    return str(value)


def value_repr(x: float) -> str:
    """Shortest decimal string that reparses to exactly the same float."""
    return repr(float(x))


def _parse_value(name: str, text: str, kind: type):
    text = text.strip()
    if name == "barriers":
        rows = []
        for chunk in filter(None, (c.strip() for c in text.split(";"))):
            head, _, tail = chunk.partition(":")
            rows.append((float(head), tuple(float(t) for t in tail.split())))
        return tuple(rows)
    if name in _FLOAT_TUPLES:
        return tuple(float(t) for t in text.split())
    if name in _INT_TUPLES:
        return tuple(int(t) for t in text.split())
    if name in _STR_TUPLES:
        return tuple(text.split())
    if kind is bool:
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"bad boolean {text!r} for {name}")
        return low in ("true", "1", "yes")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def save_case(spec: CaseSpec, path: str) -> None:
    """Write the spec as an INI file that :func:`load_case` reads back."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, names in _SECTIONS.items():
        parser[section] = {n: _format_value(n, getattr(spec, n)) for n in names}
    with open(path, "w") as handle:
        parser.write(handle)


def load_case(path: str, base: CaseSpec | None = None) -> CaseSpec:
    """Read a case config, overlaying it on ``base`` (or on defaults).

    Unknown sections or keys raise ``ValueError``; the result is validated.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path!r}")
    kinds = {f.name: f.type for f in fields(CaseSpec)}
    types = {"str": str, "int": int, "float": float, "bool": bool}
    updates = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section [{section}]")
        for key, text in parser[section].items():
            if key not in _SECTIONS[section]:
                raise ValueError(f"unknown key {key!r} in section [{section}]")
            kind = types.get(str(kinds[key]).split("|")[0].strip(), str)
            try:
                updates[key] = _parse_value(key, text, kind)
            except ValueError as exc:
                raise ValueError(f"bad value for {key!r}: {exc}") from None
    spec = replace(base, **updates) if base is not None else CaseSpec(**updates)
    spec.validate()
    return spec
