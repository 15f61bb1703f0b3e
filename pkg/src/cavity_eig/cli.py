"""Command-line front end: ``cavity-eig {mesh,solve,sweep,audit,export-vtk}``.

Jobs are described by a TOML file.  Every complex number is an explicit
``[re, im]`` pair and every tensor a 3 x 3 array of such pairs; signs are
taken verbatim (no time-convention flips)::

    [geometry]
    kind = "cylinder"          # box | cylinder | torus, or: file = "cavity.msh"
    dims = [0.2, 0.5]          # box: a b c, cylinder: r height, torus: rho1 rho2
    level = 6                  # or counts = [n_az, n_rings, n_layers]

    [[media]]                  # one entry per region (omit region for all)
    eps_r = [[[2, 1], [0, 0], [0, 0]], [[0, 0], [2, 1], [0, 0]], [[0, 0], [0, 0], [2, 0]]]
    mu_r = ...

    [solver]
    formulation = "e"          # e | h | naive
    shift = [24.25, -7.56]
    nev = 6

    [sweep]
    mesh_sizes = [4, 6, 9]

Exit codes: 0 success, 1 unexpected error, 2 configuration or path error,
3 solver failure (non-convergence, singular shift), 4 dummy-variable
violation or failed spurious audit, 5 mode tracking failure in a sweep.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    Geometry,
    Thresholds,
    TrackingError,
    convergence_study,
    observed_order,
    solve,
    spurious_audit,
)
from .assembly import AssemblyError, write_matrix_market
from .eigen import ConvergenceError, SingularShiftError, SolverConfig
from .fem_kernels import Formulation, Medium, TensorError
from .gmsh import read_gmsh_file
from .mesh import Mesh, MeshError
from .results import ResultsError, ResultsFile, dumps
from .vtk import VTKError, write_vtk

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

__all__ = ["ConfigError", "JobConfig", "load_config", "parse_config", "main"]

log = logging.getLogger("cavity_eig")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VIOLATION = 4
EXIT_TRACKING = 5

THREADS_ENV = "CAVITY_EIG_THREADS"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class JobConfig:
    geometry: Geometry | None
    level: object | None
    mesh_file: str | None
    media: dict            # region id (or None for all) -> Medium
    formulation: Formulation
    solver: SolverConfig
    thresholds: Thresholds
    output: str
    mesh_sizes: list = field(default_factory=list)
    reference: complex | None = None
    target: complex | None = None
    cluster: int = 1
    write_matrices: bool = False
    write_vectors: bool = True
    mesh_dump: bool = False
    source: str = "<config>"

    def build_mesh(self, level=None) -> Mesh:
        if self.mesh_file is not None:
            if not os.path.exists(self.mesh_file):
                raise ConfigError(f"geometry.file: no such file {self.mesh_file!r}")
            return read_gmsh_file(self.mesh_file)
        return self.geometry.build(self.level if level is None else level)

    def media_for(self, mesh: Mesh):
        if None in self.media:
            return self.media[None]
        return {r: m for r, m in self.media.items()}


def _complex(value, where) -> complex:
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        raise ConfigError(f"{where}: expected a [re, im] pair of numbers, got {value!r}")
    return complex(float(value[0]), float(value[1]))


def _tensor(value, where) -> np.ndarray:
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(f"{where}: expected 3 rows of 3 [re, im] pairs")
    out = np.empty((3, 3), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != 3:
            raise ConfigError(f"{where}[{i}]: expected 3 [re, im] pairs")
        for j, v in enumerate(row):
            out[i, j] = _complex(v, f"{where}[{i}][{j}]")
    return out


def _number(table, key, where, default=None, kind=float):
    if key not in table:
        if default is None:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _level(value, where):
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected an integer or a list of counts")
    if isinstance(value, int):
        if value < 1:
            raise ConfigError(f"{where}: resolution must be >= 1")
        return value
    if isinstance(value, list) and value and all(
        isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in value
    ):
        return tuple(value)
    raise ConfigError(f"{where}: expected an integer or a list of positive counts, got {value!r}")


def parse_config(data: dict, base_dir: str = ".", source: str = "<config>") -> JobConfig:
    """Validate a parsed TOML document."""
    known = {"geometry", "media", "solver", "thresholds", "sweep", "output"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown section(s): {sorted(extra)}")

    geo = data.get("geometry")
    if not isinstance(geo, dict):
        raise ConfigError("geometry: section missing")
    has_file = "file" in geo
    has_kind = "kind" in geo
    if has_file == has_kind:
        raise ConfigError("geometry: give exactly one of 'kind' or 'file'")
    geometry = level = mesh_file = None
    if has_file:
        if not isinstance(geo["file"], str):
            raise ConfigError("geometry.file: expected a path string")
        mesh_file = os.path.join(base_dir, geo["file"])
    else:
        kind = geo["kind"]
        ndims = {"box": 3, "cylinder": 2, "torus": 2}
        if kind not in ndims:
            raise ConfigError(f"geometry.kind: expected box, cylinder or torus, got {kind!r}")
        dims = geo.get("dims")
        if (not isinstance(dims, list) or len(dims) != ndims[kind]
                or not all(isinstance(d, (int, float)) and not isinstance(d, bool) and d > 0
                           for d in dims)):
            raise ConfigError(f"geometry.dims: {kind} needs {ndims[kind]} positive lengths in m")
        if kind == "torus" and dims[0] <= dims[1]:
            raise ConfigError("geometry.dims: torus needs rho1 > rho2")
        geometry = Geometry(kind, tuple(float(d) for d in dims))
        if ("level" in geo) == ("counts" in geo):
            raise ConfigError("geometry: give exactly one of 'level' or 'counts'")
        level = _level(geo.get("level", geo.get("counts")), "geometry.level")

    media_raw = data.get("media")
    if not isinstance(media_raw, list) or not media_raw:
        raise ConfigError("media: expected at least one [[media]] entry")
    media = {}
    for i, entry in enumerate(media_raw):
        where = f"media[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected a table")
        region = entry.get("region")
        if region is not None and (isinstance(region, bool) or not isinstance(region, int)):
            raise ConfigError(f"{where}.region: expected an integer")
        if "eps_r" not in entry or "mu_r" not in entry:
            raise ConfigError(f"{where}: needs both eps_r and mu_r")
        eps = _tensor(entry["eps_r"], f"{where}.eps_r")
        mu = _tensor(entry["mu_r"], f"{where}.mu_r")
        try:
            medium = Medium(eps, mu)
        except TensorError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if region in media:
            raise ConfigError(f"{where}: region {region} given twice")
        media[region] = medium
    if None in media and len(media) > 1:
        raise ConfigError("media: an entry without 'region' must be the only one")

    sol = data.get("solver", {})
    if not isinstance(sol, dict):
        raise ConfigError("solver: expected a table")
    try:
        formulation = Formulation.parse(sol.get("formulation", "e"))
    except ValueError as exc:
        raise ConfigError(f"solver.formulation: {exc}") from None
    shift = _complex(sol["shift"], "solver.shift") if "shift" in sol else complex(1.0)
    if shift == 0:
        raise ConfigError("solver.shift: must be nonzero (the mass matrix is singular)")
    try:
        cfg = SolverConfig(
            shift=shift,
            nev=_number(sol, "nev", "solver", 6, int),
            ncv=_number(sol, "ncv", "solver", 0, int) or None,
            tol=_number(sol, "tol", "solver", 1e-10),
            max_restarts=_number(sol, "max_restarts", "solver", 300, int),
            seed=_number(sol, "seed", "solver", 0, int),
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None

    th = data.get("thresholds", {})
    thresholds = Thresholds(
        dummy=_number(th, "dummy", "thresholds", Thresholds.dummy),
        divergence=_number(th, "divergence", "thresholds", Thresholds.divergence),
        dc=_number(th, "dc", "thresholds", Thresholds.dc),
    )

    sw = data.get("sweep", {})
    mesh_sizes = [_level(v, f"sweep.mesh_sizes[{i}]")
                  for i, v in enumerate(sw.get("mesh_sizes", []))]
    reference = _complex(sw["reference"], "sweep.reference") if "reference" in sw else None
    target = _complex(sw["target"], "sweep.target") if "target" in sw else None
    cluster = _number(sw, "cluster", "sweep", 1, int)

    out = data.get("output", {})
    outdir = out.get("dir", "cavity_eig_out")
    if not isinstance(outdir, str):
        raise ConfigError("output.dir: expected a path string")

    return JobConfig(
        geometry=geometry, level=level, mesh_file=mesh_file, media=media,
        formulation=formulation, solver=cfg, thresholds=thresholds,
        output=os.path.join(base_dir, outdir), mesh_sizes=mesh_sizes,
        reference=reference, target=target, cluster=cluster,
        write_matrices=bool(out.get("matrices", False)),
        write_vectors=bool(out.get("vectors", True)),
        mesh_dump=bool(out.get("mesh_dump", False)),
        source=source,
    )


def load_config(path) -> JobConfig:
    path = str(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return parse_config(data, os.path.dirname(os.path.abspath(path)), path)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _apply_overrides(job: JobConfig, args) -> JobConfig:
    if getattr(args, "output", None):
        job.output = args.output
    if getattr(args, "formulation", None):
        job.formulation = Formulation.parse(args.formulation)
    s = job.solver
    shift, nev = s.shift, s.nev
    if getattr(args, "shift", None):
        try:
            re, im = (float(t) for t in args.shift.split(","))
        except ValueError:
            raise ConfigError(f"--shift: expected 're,im', got {args.shift!r}") from None
        shift = complex(re, im)
    if getattr(args, "nev", None) is not None:
        nev = args.nev
    if (shift, nev) != (s.shift, s.nev):
        try:
            job.solver = SolverConfig(shift=shift, nev=nev,
                                      ncv=max(s.ncv, 2 * nev + 1) if nev != s.nev else s.ncv,
                                      tol=s.tol, max_restarts=s.max_restarts, seed=s.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return job


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


# ---------------------------------------------------------------------------
# output helpers


def _fmt_c(z: complex) -> str:
    return f"{z.real:.6f}{z.imag:+.6f}j"


def _mode_table(res: ResultsFile) -> str:
    lines = [f"{'#':>3} {'Lambda (m^-2)':>26} {'f (Hz)':>12} {'kind':<17} "
             f"{'residual':>9} {'div':>9} {'dummy':>9}"]
    for i, m in enumerate(res.modes):
        flag = f"  [{m.flag}]" if m.flag else ""
        lines.append(
            f"{i:>3} {_fmt_c(m.lam):>26} {m.frequency:>12.6g} {m.kind:<17} "
            f"{m.residual:>9.1e} {m.divergence_residual:>9.1e} {m.dummy_stat:>9.1e}{flag}"
        )
    return "\n".join(lines)


def _write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


# ---------------------------------------------------------------------------
# commands


def cmd_mesh(job: JobConfig, args) -> int:
    mesh = job.build_mesh()
    st = mesh.stats()
    print(f"vertices {st['vertices']}  edges {st['edges']}  faces {st['faces']}  "
          f"tets {st['tets']}")
    print(f"boundary faces {st['boundary_faces']}  edges {st['boundary_edges']}  "
          f"vertices {st['boundary_vertices']}")
    print(f"h = {st['h']:.6g} m  volume = {st['volume']:.6g} m^3  "
          f"Euler characteristic {st['euler_characteristic']}  regions {st['regions']}")
    if job.mesh_dump:
        path = os.path.join(job.output, "mesh.json")
        os.makedirs(job.output, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(mesh.dump())
        print(f"mesh dump written to {path}")
    return EXIT_OK


def cmd_solve(job: JobConfig, args) -> int:
    mesh = job.build_mesh()
    report = solve(mesh, job.media_for(mesh), job.formulation, job.solver, job.thresholds)
    system = report.system
    res = ResultsFile.from_report(
        report,
        extra={"config": os.path.basename(job.source), "nev": job.solver.nev,
               "tol": job.solver.tol},
        dofmap=system.dofmap if job.write_vectors else None,
    )
    written = res.save(os.path.join(job.output, "results.json"))
    if job.write_matrices:
        written += write_matrix_market(system, os.path.join(job.output, "matrices"))
    print(f"{job.formulation.name}  h = {report.h:.6g} m  unknowns {report.m}+{report.n}  "
          f"beta = {report.beta:.6g}  shift = {_fmt_c(report.shift)}")
    print(_mode_table(res))
    t = report.timing
    print(f"time: assemble {t['assemble']:.2f}s  factorize {t['factorize']:.2f}s  "
          f"arnoldi {t['arnoldi']:.2f}s  total {t['total']:.2f}s")
    print("wrote " + ", ".join(written))
    if not report.converged:
        print("error: eigensolver did not converge; partial results written", file=sys.stderr)
        return EXIT_SOLVER
    if report.has_dummy_violation():
        print("error: dummy-variable violation among accepted modes", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_sweep(job: JobConfig, args) -> int:
    if job.geometry is None:
        raise ConfigError("sweep needs a parametric geometry (kind = box | cylinder | torus)")
    if len(job.mesh_sizes) < 2:
        raise ConfigError("sweep.mesh_sizes: need at least two mesh sizes")
    media = job.media_for(None)
    workers = min(_threads(), len(job.mesh_sizes))
    try:
        table = convergence_study(
            job.geometry, media, job.formulation, job.mesh_sizes, job.solver,
            reference=job.reference, target=job.target, thresholds=job.thresholds,
            workers=workers, cluster=job.cluster,
        )
    except TrackingError as exc:
        print(f"error: mode tracking failed: {exc}", file=sys.stderr)
        return EXIT_TRACKING
    hs = [r.h for r in table.rows]
    lams = [r.lam for r in table.rows]
    richardson = observed_order(hs, lams) if len(lams) >= 3 else float("nan")
    print(f"{'h (m)':>10} {'Lambda_h (m^-2)':>26} {'error':>10} {'unknowns':>9} {'t (s)':>8}")
    for r in table.rows:
        err = "" if r.error is None else f"{r.error:.3e}"
        print(f"{r.h:>10.5f} {_fmt_c(r.lam):>26} {err:>10} {r.dofs:>9} {r.seconds:>8.2f}")
    if table.reference is not None:
        print(f"observed order (vs reference): {table.order:.3f}")
    print(f"observed order (Richardson, last 3 levels): {richardson:.3f}")
    out = {
        "formulation": job.formulation.value,
        "rows": [{"h": r.h, "lam": [r.lam.real, r.lam.imag], "error": r.error,
                  "seconds": r.seconds, "unknowns": r.dofs} for r in table.rows],
        "order": table.order,
        "order_richardson": richardson,
        "reference": None if table.reference is None else
        [table.reference.real, table.reference.imag],
        "ambiguous_levels": table.ambiguous,
    }
    path = os.path.join(job.output, "sweep.json")
    _write_json(path, out)
    print(f"wrote {path}")
    if table.ambiguous:
        print(f"error: ambiguous mode tracking at level(s) {table.ambiguous}", file=sys.stderr)
        return EXIT_TRACKING
    return EXIT_OK


def cmd_audit(job: JobConfig, args) -> int:
    mesh = job.build_mesh()
    audit = spurious_audit(mesh, job.media_for(mesh), shift=job.solver.shift,
                           nev=job.solver.nev, thresholds=job.thresholds, tol=job.solver.tol)
    topo = "simply connected" if audit.simply_connected else "multiply connected"
    print(f"mesh: {topo}, h = {mesh.h:.6g} m; modes per formulation: {job.solver.nev}")
    for name, count in audit.near_zero.items():
        print(f"  {name:<6} near-zero eigenvalues: {count:>3}  "
              f"(flagged possible physical dc: {audit.flagged[name]})")
    print("audit " + ("passed" if audit.passed else "FAILED"))
    out = {"simply_connected": audit.simply_connected, "near_zero": audit.near_zero,
           "flagged": audit.flagged, "passed": audit.passed, "h": mesh.h}
    _write_json(os.path.join(job.output, "audit.json"), out)
    return EXIT_OK if audit.passed else EXIT_VIOLATION


def cmd_export_vtk(job: JobConfig, args) -> int:
    path = args.results or os.path.join(job.output, "results.json")
    if not os.path.exists(path):
        raise ConfigError(f"--results: no such file {path!r}")
    res = ResultsFile.load(path)
    mesh = job.build_mesh()
    target = os.path.join(job.output, "modes.vtk")
    n = write_vtk(target, mesh, res)
    print(f"wrote {n} mode(s) to {target}")
    return EXIT_OK


COMMANDS = {
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "audit": cmd_audit,
    "export-vtk": cmd_export_vtk,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cavity-eig",
        description="Spurious-free mixed FEM eigensolver for lossy anisotropic cavities.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp_ = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        sp_.add_argument("--config", required=True, help="job file (TOML)")
        sp_.add_argument("--output", help="output directory (overrides output.dir)")
        sp_.add_argument("--shift", help="shift as re,im (m^-2)")
        sp_.add_argument("--nev", type=int, help="number of eigenpairs")
        sp_.add_argument("--formulation", choices=["e", "h", "naive"])
        sp_.add_argument("-v", "--verbose", action="store_true")
        if name == "export-vtk":
            sp_.add_argument("--results", help="results.json (default: <output>/results.json)")
    return p


cmd_mesh.__doc__ = "Print mesh statistics."
cmd_solve.__doc__ = "Assemble, solve and classify; write results."
cmd_sweep.__doc__ = "Convergence study over sweep.mesh_sizes."
cmd_audit.__doc__ = "Count near-zero eigenvalues: naive vs mixed."
cmd_export_vtk.__doc__ = "Write computed modes as legacy VTK."


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        job = _apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](job, args)
    except (ConfigError, MeshError, AssemblyError, ResultsError, VTKError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, SingularShiftError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def run():  # console-script entry point
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    run()
