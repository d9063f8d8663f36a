"""Parameter sweeps, phase-portrait data and figure presets.

Time series go to CSV (fixed column order, 17 significant digits, a leading
``#`` line carrying the resolved configuration as JSON); summaries and
metadata go to JSON. Output bytes depend only on the configuration, never
on the number of worker threads.
"""

from __future__ import annotations

import csv
import gzip
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (
    KETS,
    Chart,
    Polarization,
    bloch_point,
    evolve_state,
    first_return_time,
    phase_velocity,
    stationary_points,
)
from .errors import ConfigError, IoError, PTLabError
from .formalisms import (
    DensityState,
    Formalism,
    density_from_ensemble,
    eigenbasis_mixed,
    entropy,
    evolve_series,
    maximally_mixed,
)
from .operators import EPS_EIG, EPS_EP, EPS_MAT, ModelParams, Regime, dyson_map, exceptional_theta

INITIAL_STATES = ("ket0", "maximally_mixed", "biorthogonal_mixed")
BASE_COLUMNS = ["theta", "t", "regime", "trace_re", "trace_im", "purity", "von_neumann"]
BLOCH_COLUMNS = ["bloch_x", "bloch_y", "bloch_z"]
CONVENTIONS = {
    "sqrt_branch": "principal: sqrt(disc) = +i sqrt(-disc) for disc < 0",
    "eigenvector_phase": "second component real positive before normalization",
    "bloch_axis": "|0> = (1,0) on the north pole",
    "source_operator": "broken-regime Liouville/Lindblad forms use C_u on the branch -i sqrt(-disc)",
    "entropy_units": "nats",
}


@dataclass(frozen=True)
class Tolerances:
    ep: float = EPS_EP
    mat: float = EPS_MAT
    eig: float = EPS_EIG


@dataclass(frozen=True)
class SweepSpec:
    r: float
    d: float
    theta_values: list
    t_max: float
    samples: int
    initial_state: object = "ket0"
    formalisms: list = field(default_factory=lambda: ["hermitian_adjoint"])
    alphas: list = field(default_factory=lambda: [0.5, 2.0, 3.0])

    def __post_init__(self):
        if not self.theta_values:
            raise ConfigError("theta_values must not be empty")
        if not (isinstance(self.samples, int) and self.samples >= 2):
            raise ConfigError("samples must be an integer >= 2")
        if not self.t_max > 0:
            raise ConfigError("t_max must be positive")
        try:
            ModelParams(self.r, self.d, 0.0)
            for th in self.theta_values:
                ModelParams(self.r, self.d, float(th))
            for f in self.formalisms:
                Formalism(f)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.formalisms:
            raise ConfigError("formalisms must not be empty")
        if any(a <= 0 for a in self.alphas):
            raise ConfigError("Renyi orders must be positive")
        _parse_initial(self.initial_state)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        missing = {"r", "d", "theta_values", "t_max", "samples"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            kwargs = dict(data)
            kwargs["theta_values"] = [float(x) for x in data["theta_values"]]
            kwargs["r"], kwargs["d"] = float(data["r"]), float(data["d"])
            kwargs["t_max"] = float(data["t_max"])
            if "alphas" in data:
                kwargs["alphas"] = [float(a) for a in data["alphas"]]
            if "formalisms" in data:
                kwargs["formalisms"] = list(data["formalisms"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _parse_complex(x) -> complex:
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, str):
        return complex(x.replace(" ", ""))
    return complex(float(x))


def _parse_initial(spec) -> tuple[str, np.ndarray | None]:
    if isinstance(spec, str):
        if spec not in INITIAL_STATES:
            raise ConfigError(f"initial_state must be one of {INITIAL_STATES} or {{'custom': [...]}}")
        return spec, (KETS["0"].copy() if spec == "ket0" else None)
    if isinstance(spec, dict) and set(spec) == {"custom"}:
        try:
            amps = np.array([_parse_complex(a) for a in spec["custom"]], dtype=complex)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad custom amplitudes: {exc}") from exc
        if amps.shape != (2,) or not np.any(amps) or not np.all(np.isfinite(amps)):
            raise ConfigError("custom amplitudes must be two finite numbers, not both zero")
        return "custom", amps
    raise ConfigError(f"unrecognized initial_state {spec!r}")


def initial_density(spec, formalism: Formalism, p: ModelParams, cpt_norm_power: int = 2) -> DensityState:
    """Initial density matrix for a named initial-state spec.

    Pure states in the biorthogonal and isospectral pictures are normalized
    as ``|psi><psi| g / (psi|psi)_CPT ** cpt_norm_power``.
    """
    name, psi = _parse_initial(spec)
    formalism = Formalism(formalism)
    if name == "maximally_mixed":
        return maximally_mixed(formalism, p)
    if name == "biorthogonal_mixed":
        return eigenbasis_mixed(formalism, p)
    power = 1 if formalism is Formalism.HERMITIAN_ADJOINT else cpt_norm_power
    return density_from_ensemble([(1.0, psi)], formalism, p, cpt_norm_power=power)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % (x + 0.0)


def _ensure_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_csv(path: Path, columns: list, rows: list, meta: dict) -> None:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_bytes(buf.getvalue().encode())


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


def read_csv(path) -> tuple[list, list]:
    """Read a series CSV (plain or gzip) into ``(columns, rows)``, skipping ``#`` lines."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    return columns, [row for row in reader]


def compare_csv(path_a, path_b, tol: float = 1e-9) -> list[str]:
    """Cell-wise comparison; numeric cells agree to ``tol * max(1, |b|)``."""
    cols_a, rows_a = read_csv(path_a)
    cols_b, rows_b = read_csv(path_b)
    problems = []
    if cols_a != cols_b:
        return [f"column mismatch {cols_a} != {cols_b}"]
    if len(rows_a) != len(rows_b):
        return [f"row count {len(rows_a)} != {len(rows_b)}"]
    for i, (ra, rb) in enumerate(zip(rows_a, rows_b)):
        for col, a, b in zip(cols_a, ra, rb):
            try:
                fa, fb = float(a), float(b)
            except ValueError:
                if a != b:
                    problems.append(f"row {i} {col}: {a!r} != {b!r}")
                continue
            if math.isnan(fa) and math.isnan(fb):
                continue
            if not abs(fa - fb) <= tol * max(1.0, abs(fb)):
                problems.append(f"row {i} {col}: {a} vs {b}")
    return problems


def _growth_rate(ts: np.ndarray, traces: np.ndarray) -> float | None:
    sel = ts >= ts[-1] / 2
    tr = traces[sel]
    if len(tr) < 2 or np.any(tr <= 0):
        return None
    return float(np.polyfit(ts[sel], np.log(tr), 1)[0])


def _theta_job(args):
    spec, theta, formalism, cpt_power, tol = args
    p = ModelParams(spec.r, spec.d, float(theta), eps_ep=tol.ep)
    regime = p.regime
    ts = np.linspace(0.0, spec.t_max, spec.samples)
    alphas = [float(a) for a in spec.alphas]
    name, psi0 = _parse_initial(spec.initial_state)
    info = {"theta": float(theta), "regime": regime.value, "status": "ok", "notes": []}
    n_cols = 4 + len(alphas) + 3
    try:
        rho0 = initial_density(spec.initial_state, formalism, p, cpt_power)
        states = evolve_series(rho0, ts)
    except PTLabError as exc:
        info.update(status="error", error=f"{type(exc).__name__}: {exc}")
        rows = [[float(theta), float(t), regime.value] + [math.nan] * n_cols for t in ts]
        return rows, info

    eta = None
    if psi0 is not None and formalism is Formalism.ISOSPECTRAL:
        eta, _ = dyson_map(p)
    rows, traces, failures = [], [], 0
    for t, st in zip(ts, states):
        tr = st.trace
        traces.append(tr.real)
        try:
            rep = entropy(st, alphas)
            obs = [rep.purity, rep.von_neumann] + [rep.renyi[a] for a in alphas]
        except PTLabError:
            failures += 1
            obs = [math.nan] * (2 + len(alphas))
        if psi0 is not None:
            psi = evolve_state(psi0, p, t)
            if eta is not None:
                psi = eta @ psi
            b = bloch_point(psi)
            bloch = [b.x, b.y, b.z]
        else:
            bloch = [math.nan] * 3
        rows.append([float(theta), float(t), regime.value, tr.real, tr.imag] + obs + bloch)
    if failures:
        info["notes"].append(f"entropy undefined at {failures} sample(s)")

    traces = np.array(traces)
    info["trace_range"] = [float(traces.min()), float(traces.max())]
    if regime is Regime.UNBROKEN:
        info["expected_period"] = math.pi / p.omega.real
        period = None
        if np.ptp(traces) > 1e-9 * max(1.0, abs(traces).max()):
            f = lambda t: evolve_series(rho0, [t])[0].trace.real  # noqa: E731
            period = first_return_time(f, min(spec.t_max, 4 * math.pi / p.omega.real))
        info["trace_period"] = period
    elif regime is Regime.BROKEN:
        info["expected_growth_rate"] = 2 * p.kappa
        info["growth_rate"] = _growth_rate(ts, traces)
    return rows, info


def run_sweep(
    spec: SweepSpec,
    out_dir,
    *,
    name: str = "sweep",
    threads: int = 1,
    tol: Tolerances = Tolerances(),
    extra_meta: dict | None = None,
) -> dict:
    """Evolve every ``(theta, formalism)`` pair of ``spec`` and write the series.

    One CSV per formalism (``<name>.csv`` when there is only one). Pure
    initial states in the biorthogonal/isospectral pictures produce an
    extra ``*_unsquared.csv`` with the plain CPT normalization.
    Per-theta failures fill that theta's rows with ``nan`` and are listed in
    the summary.
    """
    out = _ensure_dir(out_dir)
    thetas = sorted(float(t) for t in spec.theta_values)
    alphas = [float(a) for a in spec.alphas]
    columns = BASE_COLUMNS + [f"renyi_{a:g}" for a in alphas] + BLOCH_COLUMNS
    init_name, _ = _parse_initial(spec.initial_state)
    formalisms = [Formalism(f) for f in spec.formalisms]

    variants = []
    for f in formalisms:
        stem = name if len(formalisms) == 1 else f"{name}_{f.value}"
        if init_name in ("ket0", "custom") and f is not Formalism.HERMITIAN_ADJOINT:
            variants.append((f, 2, stem, "cpt_squared"))
            variants.append((f, 1, stem + "_unsquared", "cpt"))
        else:
            variants.append((f, 1, stem, "cpt" if f is not Formalism.HERMITIAN_ADJOINT else "hermitian"))

    config = {
        "sweep": spec.to_dict(),
        "tolerances": asdict(tol),
        "conventions": CONVENTIONS,
        "time_grid": {"start": 0.0, "stop": spec.t_max, "samples": spec.samples, "spacing": "uniform"},
    }
    if extra_meta:
        config.update(extra_meta)

    summary = {"config": config, "files": {}, "thetas": {}}
    jobs = [(spec, th, f, power, tol) for f, power, _, _ in variants for th in thetas]
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(_theta_job, jobs))

    for k, (f, power, stem, label) in enumerate(variants):
        chunk = results[k * len(thetas):(k + 1) * len(thetas)]
        rows = [row for r, _ in chunk for row in r]
        rows.sort(key=lambda row: (row[0], row[1]))
        meta = dict(config, formalism=f.value, normalization_variant=label, file=f"{stem}.csv")
        _write_csv(out / f"{stem}.csv", columns, rows, meta)
        summary["files"][f"{stem}.csv"] = {"formalism": f.value, "normalization_variant": label}
        summary["thetas"][stem] = [info for _, info in chunk]
    _write_json(out / f"{name}.json", summary)
    return summary


def emit_portrait(
    p: ModelParams,
    grid: int,
    out_dir,
    *,
    name: str = "portrait",
    svg: bool = False,
) -> dict:
    """Vector field of the polarization flow on both charts plus fixed points.

    Each chart is sampled on a ``grid x grid`` lattice of ``[-1, 1]^2``
    restricted to the closed unit disk, so together they cover the sphere.
    """
    if not isinstance(grid, int) or grid < 8:
        raise ConfigError("portrait grid must be at least 8x8")
    out = _ensure_dir(out_dir)
    axis = np.linspace(-1.0, 1.0, grid)
    rows = []
    for chart in (Chart.Z, Chart.W):
        for im in axis:
            for re in axis:
                u = complex(re, im)
                if abs(u) > 1 + 1e-12:
                    continue
                v = phase_velocity(Polarization(u, chart), p)
                rows.append([chart.value, re, im, v.real, v.imag])

    def _point(pol: Polarization) -> dict:
        b = bloch_point(pol.state())
        return {"chart": pol.chart.value, "re": pol.value.real, "im": pol.value.imag,
                "bloch": [b.x, b.y, b.z]}

    fixed = None
    try:
        rep = stationary_points(p)
        fixed = {
            "kind": rep.kind.value,
            "points": [
                dict(_point(loc), linearization=[list(_json_default(l)) for l in lam], residual=res)
                for loc, lam, res in zip(rep.locations, rep.eigenvalues, rep.residuals)
            ],
        }
    except PTLabError as exc:
        fixed = {"kind": None, "error": f"{type(exc).__name__}: {exc}"}
    markers = {name_: _point(Polarization.from_state(v)) for name_, v in KETS.items()}
    meta = {
        "params": {"r": p.r, "d": p.d, "theta": p.theta},
        "regime": p.regime.value,
        "grid": grid,
        "conventions": CONVENTIONS,
        "tolerances": {"ep": p.eps_ep},
    }
    _write_csv(out / f"{name}.csv", ["chart", "re", "im", "re_dot", "im_dot"], rows, meta)
    summary = dict(meta, stationary_points=fixed, reference_states=markers, files=[f"{name}.csv"])
    if svg:
        (out / f"{name}.svg").write_text(_portrait_svg(p, grid, fixed, markers))
        summary["files"].append(f"{name}.svg")
    _write_json(out / f"{name}.json", summary)
    return summary


def _portrait_svg(p: ModelParams, grid: int, fixed: dict, markers: dict) -> str:
    size, pad = 400, 20
    scale = (size - 2 * pad) / 2

    def xy(u: complex) -> tuple[float, float]:
        return pad + (u.real + 1) * scale, pad + (1 - u.imag) * scale

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
        f'<circle cx="{size / 2}" cy="{size / 2}" r="{scale}" fill="none" stroke="#999"/>',
    ]
    step = 0.6 / grid
    for im in np.linspace(-1, 1, grid):
        for re in np.linspace(-1, 1, grid):
            u = complex(re, im)
            if abs(u) > 1:
                continue
            pts = [u]
            for _ in range(6):
                v = phase_velocity(Polarization(pts[-1], Chart.Z), p)
                if abs(v) < 1e-12:
                    break
                pts.append(pts[-1] + step * v / abs(v))
            coords = " ".join("%.2f,%.2f" % xy(q) for q in pts)
            parts.append(f'<polyline points="{coords}" fill="none" stroke="#36c" stroke-width="1"/>')
    for mk in markers.values():
        if mk["chart"] == "z":
            x, y = xy(complex(mk["re"], mk["im"]))
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="black"/>')
    for pt in (fixed or {}).get("points", []):
        if pt["chart"] == "z":
            x, y = xy(complex(pt["re"], pt["im"]))
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="red"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# Figure presets: r = 1, d = 0.95, twelve angles on [0, pi/2] plus the EP.
FIGURE_R, FIGURE_D = 1.0, 0.95
FIGURE_T_MAX, FIGURE_SAMPLES = 30.0, 400
FIGURE2_PARAMS = {
    "figure2a": (1.0, 1.0, math.pi / 5),
    "figure2b": (1.0, 1.0, math.pi / 2),
    "figure2c": (1.0, 0.95, math.pi / 2),
}
FIGURE_SWEEPS = {
    3: ("hermitian_adjoint", "ket0"),
    4: ("hermitian_adjoint", "maximally_mixed"),
    5: ("biorthogonal", "ket0"),
    6: ("biorthogonal", "biorthogonal_mixed"),
}


def figure_thetas() -> list[float]:
    thetas = list(np.linspace(0.0, math.pi / 2, 12)) + [exceptional_theta(FIGURE_R, FIGURE_D)]
    return sorted(float(t) for t in thetas)


def figure_spec(number: int) -> SweepSpec:
    formalism, initial = FIGURE_SWEEPS[number]
    return SweepSpec(
        r=FIGURE_R, d=FIGURE_D, theta_values=figure_thetas(), t_max=FIGURE_T_MAX,
        samples=FIGURE_SAMPLES, initial_state=initial, formalisms=[formalism],
    )


def figures(number: int, out_dir, *, threads: int = 1, tol: Tolerances = Tolerances(), svg: bool = False) -> dict:
    """Write the data behind one figure (1 to 6)."""
    if number == 1:
        p = ModelParams(1.0, 1.0, 0.0, eps_ep=tol.ep)
        return emit_portrait(p, 21, out_dir, name="figure1", svg=svg)
    if number == 2:
        return {
            name: emit_portrait(ModelParams(*args, eps_ep=tol.ep), 21, out_dir, name=name, svg=svg)
            for name, args in FIGURE2_PARAMS.items()
        }
    if number not in FIGURE_SWEEPS:
        raise ConfigError(f"unknown figure {number}; choose 1-6")
    return run_sweep(
        figure_spec(number), out_dir, name=f"figure{number}", threads=threads, tol=tol,
        extra_meta={"figure": number, "window_note": "time window chosen qualitatively"},
    )
