"""System definition files (YAML) with strict key checking.

A file has four top-level blocks::

    name: heisenberg3
    algebra:
      dim: 3
      labels: [e1, e2, e3]
      structure:          # 1-based (i, j, k, value): [e_i, e_j] has value on e_k
        - [1, 2, 3, 1]
    derivation:           # dense, row-major
      - [1, 0, 0]
      - [0, 1, 0]
      - [0, 0, 2]
    controls:
      kind: lcs           # lcs: vectors are Y_j in g; sigma: vectors are Z_j in n
      vectors: [[1, 0, 0], [0, 1, 0]]
      derivations: []     # sigma only: one matrix D_j per control
      radii: [1, 1]
      sign_convention: 1
    analysis:
      S: 1.0
      rng_seed: 0
      ...

Unknown keys are rejected with the line where they appear.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .algebra import LieAlgebra
from .dynamics import ControlRange, ProductSystem, SemidirectLCS, SigmaASystem, build_semidirect
from .errors import DimensionMismatch, ParseError

__all__ = ["AnalysisConfig", "SystemSpec", "load_system", "parse_system", "dump_system"]


@dataclass
class AnalysisConfig:
    S: float = 1.0
    scan: int = 10
    budget: int = 2000
    horizon: float = 2.0
    max_pieces: int = 4
    r_match: float = 0.05
    search_budget: int = 100_000
    search_horizon: float = 3.0
    window: float = 2.0
    grid_points: int = 5
    fiber_ball: float = 0.1
    fiber_horizon: float = 6.0
    tol_seed: float = 1e-7
    rng_seed: int = 0


_ANALYSIS_TYPES = {f.name: f.type for f in dataclasses.fields(AnalysisConfig)}


@dataclass(eq=False)
class SystemSpec:
    name: str
    algebra: LieAlgebra
    derivation: np.ndarray
    vectors: np.ndarray
    radii: tuple[float, ...]
    kind: str = "lcs"
    derivations: np.ndarray | None = None
    sign: int = 1
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    @property
    def range(self) -> ControlRange:
        return ControlRange(self.radii)

    def semidirect(self) -> SemidirectLCS:
        if self.kind != "lcs":
            raise ValueError("only 'lcs' systems have a semidirect form")
        return SemidirectLCS(self.algebra, self.derivation, self.vectors, self.range)

    def model(self) -> SigmaASystem | ProductSystem:
        """Simulation model: the inner system, or the product system of the reduction."""
        if self.kind == "sigma":
            Dj = self.derivations if self.derivations is not None else np.zeros((len(self.radii), self.algebra.dim, self.algebra.dim))
            return SigmaASystem(self.algebra, self.derivation, Dj, self.vectors, self.range, self.sign)
        ps = build_semidirect(self.semidirect())
        return ps if ps.V_dim > 0 else ps.inner

    def to_dict(self) -> dict:
        """Normalized form; parsing it again gives an equal dict."""
        alg = self.algebra
        out: dict[str, Any] = {
            "name": self.name,
            "algebra": {
                "dim": alg.dim,
                "labels": list(alg.labels),
                "structure": [[i, j, k, _num(v)] for i, j, k, v in alg.to_triples()],
            },
            "derivation": _mat(self.derivation),
            "controls": {
                "kind": self.kind,
                "vectors": _mat(self.vectors),
                "derivations": [] if self.derivations is None else [_mat(D) for D in self.derivations],
                "radii": [_num(r) for r in self.radii],
                "sign_convention": self.sign,
            },
            "analysis": dataclasses.asdict(self.analysis),
        }
        return out


def _num(x) -> float | int:
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def _mat(M) -> list:
    return [[_num(v) for v in row] for row in np.asarray(M, dtype=float)]


# ---------------------------------------------------------------------------
# parsing with line numbers


class _Doc:
    """Plain data plus the source line of every mapping key and sequence item."""

    def __init__(self, source: str):
        self.source = source
        self.lines: dict[tuple, int] = {}

    def convert(self, node, path=()):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = k.value
                if key in out:
                    raise ParseError(f"duplicate key '{key}'", self.where(path + (key,), k))
                self.lines[path + (key,)] = k.start_mark.line + 1
                out[key] = self.convert(v, path + (key,))
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self.convert(v, path + (i,)) for i, v in enumerate(node.value)]
        return yaml.safe_load(yaml.serialize(node))

    def where(self, path, node=None) -> str:
        line = node.start_mark.line + 1 if node is not None else self._line(path)
        return f"{self.source}:{line}" + (f" ({'.'.join(map(str, path))})" if path else "")

    def _line(self, path) -> int:
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path, 1)


def _expect_keys(doc: _Doc, d, path, allowed, required=()):
    if not isinstance(d, dict):
        raise ParseError("expected a mapping", doc.where(path))
    for k in d:
        if k not in allowed:
            raise ParseError(f"unknown key '{k}' (allowed: {', '.join(sorted(allowed))})", doc.where(path + (k,)))
    for k in required:
        if k not in d:
            raise ParseError(f"missing key '{k}'", doc.where(path))


def _matrix(doc: _Doc, v, path, shape=None) -> np.ndarray:
    try:
        M = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ParseError("expected a numeric matrix", doc.where(path)) from None
    if M.size == 0 and shape is not None and 0 in shape:
        return M.reshape(shape)
    if shape is not None and M.shape != shape:
        raise ParseError(f"expected shape {shape}, got {M.shape}", doc.where(path))
    if not np.all(np.isfinite(M)):
        raise ParseError("non-finite entry", doc.where(path))
    return M


def parse_system(text: str, source: str = "<string>") -> SystemSpec:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        loc = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ParseError(f"invalid YAML: {getattr(e, 'problem', e)}", loc) from None
    if node is None:
        raise ParseError("empty file", source)
    doc = _Doc(source)
    data = doc.convert(node)
    _expect_keys(doc, data, (), {"name", "algebra", "derivation", "controls", "analysis"}, ("algebra", "derivation", "controls"))

    a = data["algebra"]
    _expect_keys(doc, a, ("algebra",), {"dim", "labels", "structure"}, ("dim",))
    dim = a["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ParseError("dim must be a positive integer", doc.where(("algebra", "dim")))
    labels = a.get("labels") or []
    if labels and (len(labels) != dim or not all(isinstance(s, str) for s in labels)):
        raise ParseError(f"expected {dim} string labels", doc.where(("algebra", "labels")))
    triples = a.get("structure") or []
    if not isinstance(triples, list):
        raise ParseError("structure must be a list of [i, j, k, value]", doc.where(("algebra", "structure")))
    for t, tr in enumerate(triples):
        p = ("algebra", "structure", t)
        if not (isinstance(tr, list) and len(tr) == 4 and all(isinstance(x, int) for x in tr[:3])):
            raise ParseError("structure entries are [i, j, k, value] with integer indices", doc.where(p))
        if not all(1 <= x <= dim for x in tr[:3]):
            raise ParseError(f"index out of range 1..{dim}", doc.where(p))
        if isinstance(tr[3], bool) or not isinstance(tr[3], (int, float)):
            raise ParseError("structure value must be a number", doc.where(p))
    try:
        alg = LieAlgebra.from_triples(dim, triples, labels)
    except DimensionMismatch as e:
        raise ParseError(str(e), doc.where(("algebra",))) from None

    D = _matrix(doc, data["derivation"], ("derivation",), (dim, dim))

    c = data["controls"]
    _expect_keys(doc, c, ("controls",), {"kind", "vectors", "derivations", "radii", "sign_convention"}, ("vectors", "radii"))
    kind = c.get("kind", "lcs")
    if kind not in ("lcs", "sigma"):
        raise ParseError("kind must be 'lcs' or 'sigma'", doc.where(("controls", "kind")))
    radii = c["radii"]
    if not isinstance(radii, list) or not radii:
        raise ParseError("radii must be a nonempty list", doc.where(("controls", "radii")))
    m = len(radii)
    R = _matrix(doc, radii, ("controls", "radii"), (m,))
    if np.any(R <= 0):
        raise ParseError("radii must be positive", doc.where(("controls", "radii")))
    vectors = _matrix(doc, c["vectors"], ("controls", "vectors"), (m, dim))
    Dj = None
    if c.get("derivations"):
        if kind != "sigma":
            raise ParseError("control derivations are only allowed for kind 'sigma'", doc.where(("controls", "derivations")))
        Dj = _matrix(doc, c["derivations"], ("controls", "derivations"), (m, dim, dim))
    sign = c.get("sign_convention", 1)
    if sign not in (1, -1) or isinstance(sign, bool):
        raise ParseError("sign_convention must be 1 or -1", doc.where(("controls", "sign_convention")))

    cfg = AnalysisConfig()
    an = data.get("analysis") or {}
    _expect_keys(doc, an, ("analysis",), set(_ANALYSIS_TYPES))
    for k, v in an.items():
        want = _ANALYSIS_TYPES[k]
        if want in ("int", int):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ParseError(f"'{k}' must be an integer", doc.where(("analysis", k)))
        else:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"'{k}' must be a number", doc.where(("analysis", k)))
            v = float(v)
        setattr(cfg, k, v)

    name = data.get("name", Path(source).stem if source != "<string>" else "system")
    if not isinstance(name, str):
        raise ParseError("name must be a string", doc.where(("name",)))
    return SystemSpec(name, alg, D, vectors, tuple(float(r) for r in R), kind, Dj, int(sign), cfg)


def load_system(path: str | Path) -> SystemSpec:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ParseError(f"cannot read system file: {e.strerror}", str(p)) from None
    return parse_system(text, str(p))


def dump_system(spec: SystemSpec) -> str:
    return yaml.safe_dump(spec.to_dict(), sort_keys=False, default_flow_style=None)
