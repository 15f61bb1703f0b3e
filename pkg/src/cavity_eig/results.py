"""Results file: one record per eigenpair plus a solve header.

The file is JSON.  Every float is written with 17 significant digits so a
parse/serialize cycle reproduces the exact doubles; complex numbers are
``[re, im]`` pairs.  Timings sit in their own header block so two runs of
the same job differ only there.

Eigenvectors are optional and go to a ``.npz`` sidecar next to the JSON
file (needed by the VTK export).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .analysis import SolveReport

__all__ = ["ModeRecord", "ResultsFile", "ResultsError", "dumps", "loads"]

FORMAT = "cavity-eig-results/1"


class ResultsError(ValueError):
    pass


def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = f"{x:.17g}"
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent=0) -> str:
    pad = " " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return f"[{_num(obj.real)}, {_num(obj.imag)}]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f"{pad}  {json.dumps(str(k))}: {_encode(v, indent + 2)}" for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        inner = ",\n".join(f"{pad}  {_encode(v, indent + 2)}" for v in obj)
        return "[\n" + inner + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with 17-significant-digit floats."""
    return _encode(obj) + "\n"


def loads(text: str):
    return json.loads(text)


def _cplx(v) -> complex:
    return complex(float(v[0]), float(v[1]))


@dataclass
class ModeRecord:
    lam: complex
    kind: str
    flag: str | None
    residual: float
    constraint_residual: float
    divergence_residual: float
    dummy_stat: float
    omega: complex
    frequency: float

    def to_json(self) -> dict:
        d = asdict(self)
        d["lam"] = [self.lam.real, self.lam.imag]
        d["omega"] = [self.omega.real, self.omega.imag]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ModeRecord":
        d = dict(d)
        d["lam"] = _cplx(d["lam"])
        d["omega"] = _cplx(d["omega"])
        return cls(**d)


@dataclass
class ResultsFile:
    header: dict
    modes: list[ModeRecord]
    timing: dict = field(default_factory=dict)
    vectors: dict | None = None  # xi, zeta (n_modes x m / n), edge_dofs, scalar_dofs

    @classmethod
    def from_report(cls, report: SolveReport, extra: dict | None = None,
                    dofmap=None) -> "ResultsFile":
        header = {
            "format": FORMAT,
            "formulation": report.formulation.value,
            "h": float(report.h),
            "edge_dofs": int(report.m),
            "scalar_dofs": int(report.n),
            "n_edges_total": int(report.n_edges_total),
            "n_vertices_total": int(report.n_vertices_total),
            "beta": float(report.beta),
            "shift": [report.shift.real, report.shift.imag],
            "converged": bool(report.converged),
            "simply_connected": bool(report.simply_connected),
        }
        if extra:
            header.update(extra)
        modes = []
        for md in report.modes:
            c = md.classification
            p = md.pair
            modes.append(ModeRecord(
                lam=complex(p.lam), kind=c.kind, flag=c.flag,
                residual=float(p.residual),
                constraint_residual=float(p.constraint_residual),
                divergence_residual=float(c.divergence_residual),
                dummy_stat=float(c.dummy_stat),
                omega=complex(p.omega), frequency=float(p.frequency),
            ))
        vectors = None
        if dofmap is not None:
            m, n = report.m, report.n
            vectors = {
                "xi": np.array([md.pair.xi for md in report.modes], dtype=complex).reshape(-1, m),
                "zeta": np.array([md.pair.zeta for md in report.modes],
                                 dtype=complex).reshape(-1, n),
                "edge_dofs": np.asarray(dofmap.edge_dofs),
                "scalar_dofs": np.asarray(dofmap.scalar_dofs),
            }
        return cls(header=header, modes=modes, timing=dict(report.timing), vectors=vectors)

    def to_json(self) -> dict:
        return {
            "header": self.header,
            "timing": self.timing,
            "modes": [md.to_json() for md in self.modes],
        }

    def dumps(self) -> str:
        return dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "ResultsFile":
        try:
            d = loads(text)
            header = d["header"]
            if header.get("format") != FORMAT:
                raise ResultsError(f"not a results file (format {header.get('format')!r})")
            return cls(header=header, modes=[ModeRecord.from_json(m) for m in d["modes"]],
                       timing=d.get("timing", {}))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ResultsError(f"malformed results file: {exc}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultsFile):
            return NotImplemented
        return self.to_json() == other.to_json()

    # files

    def save(self, path) -> list[str]:
        path = str(path)
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        written = [path]
        header = dict(self.header)
        if self.vectors is not None:
            side = os.path.splitext(path)[0] + ".npz"
            np.savez_compressed(side, **self.vectors)
            header["vectors"] = os.path.basename(side)
            written.append(side)
        text = ResultsFile(header, self.modes, self.timing).dumps()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        self.header = header
        return written

    @classmethod
    def load(cls, path) -> "ResultsFile":
        with open(path, encoding="utf-8") as fh:
            res = cls.loads(fh.read())
        side = res.header.get("vectors")
        if side:
            side = os.path.join(os.path.dirname(os.path.abspath(str(path))), side)
            if not os.path.exists(side):
                raise ResultsError(f"eigenvector file {side} is missing")
            with np.load(side) as z:
                res.vectors = {k: z[k] for k in z.files}
        return res
