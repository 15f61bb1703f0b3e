"""Mode classification, analytic references and the standard studies.

A computed pair is *physical* when its eigenvalue is away from zero, its
discrete divergence ``||C xi|| / ||xi||`` is tiny and its dummy scalar part
behaves as the continuous theory predicts: identically zero for the E-field
system, constant for the H-field system.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import BlockSystem, assemble, build_gevp
from .eigen import (
    ConvergenceError,
    EigenPair,
    SolverConfig,
    compute_residuals,
    factorize,
    shift_invert_arnoldi,
)
from .fem_kernels import Formulation
from .mesh import Mesh, generate_box_mesh, generate_cylinder_mesh, generate_torus_mesh

__all__ = [
    "Thresholds",
    "ModeClassification",
    "Mode",
    "SolveReport",
    "Geometry",
    "TrackingError",
    "classify",
    "solve",
    "analytic_box_spectrum",
    "convergence_study",
    "observed_order",
    "spurious_audit",
    "e_h_cross_check",
    "relative_difference",
]

log = logging.getLogger(__name__)

PHYSICAL = "physical"
SPURIOUS_DC = "spurious_dc"
SPURIOUS_NONZERO = "spurious_nonzero"
DUMMY_VIOLATION = "dummy_violation"
MULTIPLY_CONNECTED_FLAG = "possible physical dc (multiply connected)"


@dataclass(frozen=True)
class Thresholds:
    dummy: float = 1e-6
    divergence: float = 1e-8
    dc: float = 1e-6  # m^-2


@dataclass(frozen=True)
class ModeClassification:
    kind: str
    divergence_residual: float
    dummy_stat: float
    flag: str | None = None


def dummy_statistic(pair: EigenPair, formulation) -> float:
    formulation = Formulation.parse(formulation)
    zeta = np.asarray(pair.zeta)
    nxi = float(np.linalg.norm(pair.xi))
    if zeta.size == 0 or formulation is Formulation.NAIVE:
        return 0.0
    if formulation is Formulation.EFIELD:
        return float(np.max(np.abs(zeta)) / nxi)
    return float(np.std(zeta) / (abs(np.mean(zeta)) + nxi))


def divergence_residual(pair: EigenPair, system: BlockSystem) -> float:
    nxi = float(np.linalg.norm(pair.xi))
    if system.formulation.mixed:
        if system.n == 0:
            return 0.0
        return float(np.linalg.norm(system.C @ pair.xi) / nxi)
    # naive: weak divergence against interior nodal functions
    if system.gradient.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(system.gradient.T @ (system.D @ pair.xi)) / nxi)


def classify(pair: EigenPair, system: BlockSystem,
             thresholds: Thresholds = Thresholds()) -> ModeClassification:
    div = divergence_residual(pair, system)
    stat = dummy_statistic(pair, system.formulation)
    if abs(pair.lam) < thresholds.dc:
        flag = None if system.simply_connected else MULTIPLY_CONNECTED_FLAG
        return ModeClassification(SPURIOUS_DC, div, stat, flag)
    if stat >= thresholds.dummy:
        return ModeClassification(DUMMY_VIOLATION, div, stat)
    if div >= thresholds.divergence:
        return ModeClassification(SPURIOUS_NONZERO, div, stat)
    return ModeClassification(PHYSICAL, div, stat)


@dataclass
class Mode:
    pair: EigenPair
    classification: ModeClassification

    @property
    def lam(self) -> complex:
        return self.pair.lam

    @property
    def kind(self) -> str:
        return self.classification.kind


@dataclass
class SolveReport:
    formulation: Formulation
    h: float
    beta: float
    m: int
    n: int
    shift: complex
    modes: list[Mode]
    timing: dict = field(default_factory=dict)
    converged: bool = True
    simply_connected: bool = True
    n_edges_total: int = 0
    n_vertices_total: int = 0
    system: BlockSystem | None = field(default=None, repr=False)

    def physical(self) -> list[Mode]:
        return [md for md in self.modes if md.kind == PHYSICAL]

    def dominant(self, target=None) -> Mode:
        """Physical mode nearest ``target`` (default: the shift)."""
        target = self.shift if target is None else complex(target)
        phys = self.physical()
        if not phys:
            raise LookupError("no physical mode among the computed eigenpairs")
        return min(phys, key=lambda md: abs(md.lam - target))

    def near_zero(self, thresholds: Thresholds = Thresholds()) -> list[Mode]:
        return [md for md in self.modes if abs(md.lam) < thresholds.dc]

    def has_dummy_violation(self) -> bool:
        return any(md.kind == DUMMY_VIOLATION for md in self.modes)


def solve(mesh: Mesh, media, formulation, cfg: SolverConfig = None,
          thresholds: Thresholds = Thresholds(), system: BlockSystem = None) -> SolveReport:
    """Assemble, factorize, run Arnoldi and classify the returned modes."""
    cfg = cfg or SolverConfig()
    formulation = Formulation.parse(formulation)
    t0 = time.perf_counter()
    if system is None:
        system = assemble(mesh, media, formulation)
    gevp = build_gevp(system)
    t1 = time.perf_counter()
    solver = factorize(gevp.K, gevp.M, cfg.shift, gevp.gauge)
    t2 = time.perf_counter()
    converged = True
    try:
        pairs = shift_invert_arnoldi(gevp.K, gevp.M, cfg, gauge=gevp.gauge,
                                     solver=solver, m=gevp.m)
    except ConvergenceError as exc:
        log.warning("%s", exc)
        pairs, converged = exc.pairs, False
    t3 = time.perf_counter()
    C = system.C if formulation.mixed else None
    modes = []
    for p in pairs:
        p.constraint_residual = compute_residuals(p, gevp.K, gevp.M, C)["constraint_residual"]
        modes.append(Mode(p, classify(p, system, thresholds)))
    return SolveReport(
        formulation=formulation,
        h=mesh.h,
        beta=system.beta,
        m=system.m,
        n=system.n,
        shift=cfg.shift,
        modes=modes,
        timing={
            "assemble": t1 - t0,
            "factorize": t2 - t1,
            "arnoldi": t3 - t2,
            "total": t3 - t0,
        },
        converged=converged,
        simply_connected=system.simply_connected,
        n_edges_total=mesh.n_edges,
        n_vertices_total=mesh.n_vertices,
        system=system,
    )


# ---------------------------------------------------------------------------
# analytic reference


def analytic_box_spectrum(a, b, c, max_index) -> list[tuple[float, int]]:
    """PEC rectangular cavity eigenvalues ``(m pi/a)^2 + (n pi/b)^2 + (p pi/c)^2``.

    Index triples with at most one zero are admissible; triples with all
    indices nonzero carry a TE and a TM mode (multiplicity 2).  Returns
    ``(Lambda, multiplicity)`` sorted ascending, equal values merged.
    """
    if min(a, b, c) <= 0:
        raise ValueError("box dimensions must be positive")
    vals = {}
    rng = range(max_index + 1)
    for i, j, k in itertools.product(rng, rng, rng):
        zeros = (i == 0) + (j == 0) + (k == 0)
        if zeros > 1:
            continue
        lam = math.pi**2 * ((i / a) ** 2 + (j / b) ** 2 + (k / c) ** 2)
        mult = 2 if zeros == 0 else 1
        key = round(lam, 9)
        vals[key] = vals.get(key, 0) + mult
    return sorted(vals.items())


# ---------------------------------------------------------------------------
# studies


@dataclass(frozen=True)
class Geometry:
    """Parametric geometry; ``build(level)`` returns a mesh.

    ``kind`` is ``box`` (dims a, b, c), ``cylinder`` (r, height) or ``torus``
    (rho1, rho2).  A level is either an explicit count tuple passed to the
    generator or an integer resolution mapped to near-isotropic counts.
    """

    kind: str
    dims: tuple

    def counts(self, level):
        if not isinstance(level, (int, np.integer)):
            return tuple(int(v) for v in level)
        n = int(level)
        if self.kind == "box":
            L = max(self.dims)
            return tuple(max(1, round(n * d / L)) for d in self.dims)
        if self.kind == "cylinder":
            r, height = self.dims
            return (6, n, max(1, round(n * height / r)))
        if self.kind == "torus":
            rho1, rho2 = self.dims
            return (max(3, round(2 * math.pi * rho1 * n / rho2)), 6, n)
        raise ValueError(f"unknown geometry kind {self.kind!r}")

    def build(self, level) -> Mesh:
        counts = self.counts(level)
        if self.kind == "box":
            return generate_box_mesh(*self.dims, *counts)
        if self.kind == "cylinder":
            return generate_cylinder_mesh(*self.dims, *counts)
        if self.kind == "torus":
            return generate_torus_mesh(*self.dims, *counts)
        raise ValueError(f"unknown geometry kind {self.kind!r}")


class TrackingError(RuntimeError):
    pass


def relative_difference(a, b) -> float:
    return float(abs(complex(a) - complex(b)) / abs(complex(b)))


def observed_order(hs, values, reference=None) -> float:
    """Observed convergence order.

    With a reference value: least-squares slope of ``log|error|`` against
    ``log h``.  Without: three-level Richardson estimate from the last three
    levels (geometric mean mesh ratio).
    """
    hs = np.asarray(hs, dtype=float)
    values = np.asarray(values, dtype=complex)
    if reference is not None:
        err = np.abs(values - complex(reference))
        slope, _ = np.polyfit(np.log(hs), np.log(err), 1)
        return float(slope)
    if len(values) < 3:
        return float("nan")
    l1, l2, l3 = values[-3:]
    ratio = math.sqrt(hs[-3] / hs[-1])
    return float(math.log(abs(l1 - l2) / abs(l2 - l3)) / math.log(ratio))


@dataclass
class StudyRow:
    h: float
    lam: complex
    error: float | None
    seconds: float
    dofs: int


@dataclass
class ConvergenceTable:
    rows: list[StudyRow]
    order: float
    reference: complex | None
    ambiguous: list[int] = field(default_factory=list)


def _track(prev, candidates, capture=0.2, ambiguity=1e-3, merge=1e-8):
    """Candidate nearest ``prev``; ``(value, ambiguous)``."""
    cands = sorted(candidates, key=lambda z: abs(z - prev))
    if not cands or abs(cands[0] - prev) > capture * abs(prev):
        raise TrackingError(f"no eigenvalue within {capture:.0%} of {prev}")
    best = cands[0]
    ambiguous = False
    for z in cands[1:]:
        if abs(z - best) <= merge * abs(best):
            continue  # same (degenerate) eigenvalue
        if abs(abs(z - prev) - abs(best - prev)) <= ambiguity * abs(prev):
            ambiguous = True
        break
    return best, ambiguous


def _cluster_mean(center, candidates, cluster):
    near = sorted(candidates, key=lambda z: abs(z - center))[:cluster]
    if len(near) < cluster:
        raise TrackingError(f"fewer than {cluster} physical modes near {center}")
    return complex(np.mean(near))


def convergence_study(geometry: Geometry, media, formulation, mesh_sizes,
                      cfg: SolverConfig = None, reference=None, target=None,
                      thresholds: Thresholds = Thresholds(),
                      workers: int = 1, cluster: int = 1) -> ConvergenceTable:
    """Track the dominant eigenvalue over a sequence of meshes.

    The first level picks the physical mode nearest ``target`` (default the
    shift); every later level picks the one nearest the previous value.

    ``cluster > 1`` is for a degenerate eigenvalue that the mesh splits into
    several branches: the tracked value is then the mean of the ``cluster``
    physical eigenvalues nearest the previous one.
    """
    if len(mesh_sizes) < 2:
        raise ValueError("a convergence study needs at least two mesh sizes")
    cfg = cfg or SolverConfig()

    def run(level):
        mesh = geometry.build(level)
        t = time.perf_counter()
        rep = solve(mesh, media, formulation, cfg, thresholds)
        return mesh, rep, time.perf_counter() - t

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, mesh_sizes))
    else:
        results = [run(level) for level in mesh_sizes]

    prev = complex(target) if target is not None else cfg.shift
    rows, ambiguous = [], []
    for i, (mesh, rep, secs) in enumerate(results):
        cands = [md.lam for md in rep.physical()]
        if i == 0:
            lam, amb = _track(prev, cands, capture=np.inf)
        else:
            lam, amb = _track(prev, cands)
        if cluster > 1:
            lam, amb = _cluster_mean(lam, cands, cluster), False
        if amb:
            ambiguous.append(i)
        err = relative_difference(lam, reference) if reference is not None else None
        rows.append(StudyRow(h=mesh.h, lam=lam, error=err, seconds=secs, dofs=rep.m + rep.n))
        prev = lam
    order = observed_order([r.h for r in rows], [r.lam for r in rows], reference)
    return ConvergenceTable(rows=rows, order=order,
                            reference=None if reference is None else complex(reference),
                            ambiguous=ambiguous)


@dataclass
class AuditReport:
    simply_connected: bool
    near_zero: dict          # formulation name -> count of |Lambda| < dc threshold
    flagged: dict            # formulation name -> count flagged as possible physical dc
    reports: dict            # formulation name -> SolveReport
    passed: bool


def spurious_audit(mesh: Mesh, media, shift=1.0, nev: int = 20,
                   thresholds: Thresholds = Thresholds(),
                   formulations=("naive", "e", "h"), tol: float = 1e-10) -> AuditReport:
    """Count near-zero eigenvalues of the naive and the mixed formulations.

    Passes when no mixed formulation has a near-zero eigenvalue, or, on a
    multiply connected mesh, when every such eigenvalue is flagged as a
    possible physical dc mode.
    """
    cfg = SolverConfig(shift=shift, nev=nev, tol=tol)
    reports, near, flagged = {}, {}, {}
    for f in formulations:
        f = Formulation.parse(f)
        rep = solve(mesh, media, f, cfg, thresholds)
        nz = rep.near_zero(thresholds)
        reports[f.value] = rep
        near[f.value] = len(nz)
        flagged[f.value] = sum(1 for md in nz if md.classification.flag)
    passed = True
    for f in formulations:
        f = Formulation.parse(f)
        if f.mixed and near[f.value] > 0:
            if mesh.simply_connected or flagged[f.value] < near[f.value]:
                passed = False
    return AuditReport(
        simply_connected=mesh.simply_connected,
        near_zero=near,
        flagged=flagged,
        reports=reports,
        passed=passed,
    )


@dataclass
class CrossCheckRow:
    h: float
    lam_e: complex
    lam_h: complex
    difference: float


def e_h_cross_check(geometry: Geometry, media, mesh_sizes, cfg: SolverConfig = None,
                    target=None, thresholds: Thresholds = Thresholds()) -> list[CrossCheckRow]:
    """Dominant eigenvalue of both mixed formulations on each mesh."""
    cfg = cfg or SolverConfig()
    target = cfg.shift if target is None else complex(target)
    rows = []
    for level in mesh_sizes:
        mesh = geometry.build(level)
        le = solve(mesh, media, "e", cfg, thresholds).dominant(target).lam
        lh = solve(mesh, media, "h", cfg, thresholds).dominant(target).lam
        rows.append(CrossCheckRow(mesh.h, le, lh, relative_difference(le, lh)))
    return rows
