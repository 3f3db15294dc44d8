"""Run configuration: one JSON document, complex numbers as ``[re, im]`` pairs.

Example::

    {
      "system": {"builtin": "second_order", "params": {"w": {"geometric": 0.5}}},
      "sse": {"M": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]], "N": ...},
      "schedule": {"b0": 15, "factor": 2, "count": 4},
      "shift": 0.0,
      "tolerances": {"tail": 1e-11, "cluster": 1e-8, "definiteness": 1e-10},
      "out": "results"
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .classify import CaseKind, CaseLabel, classify
from .extensions import (SseDescriptor, default_intermediate_sse, build_psi_basis,
                         lcc_identity, lpc_dirichlet)
from .linalg import ContractViolation
from .model import HamSequence, SystemCoefficients, builtin, cmatrix_from_json, table_with_tail


class ConfigError(ValueError):
    pass


DEFAULT_TOLERANCES = {"tail": 1e-11, "cluster": 1e-8, "definiteness": 1e-10, "zero": 1e-10}


@dataclass
class RunConfig:
    system: dict
    case: Any = None
    sse: dict = field(default_factory=dict)
    boundary: str | None = None
    frame: float = 0.0
    schedule: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    shift: float = 0.0
    out: str | None = None
    emit: dict = field(default_factory=lambda: {"csv": True, "json": True, "svg": True})
    b: int | None = None
    seed: int = 0
    g: Any = None
    oracle_window: list | None = None
    oracle_grid: float = 1e-2
    indices: int = 3
    workers: int = 1
    base_dir: Path = Path(".")

    def __post_init__(self):
        if any(b2 <= b1 for b1, b2 in zip(self.schedule, self.schedule[1:])):
            raise ConfigError("schedule must be strictly increasing")
        for key, val in self.tolerances.items():
            if not val > 0:
                raise ConfigError(f"tolerance {key!r} must be positive")


def _schedule(raw) -> list[int]:
    if raw is None:
        return []
    if isinstance(raw, list):
        return [int(x) for x in raw]
    if isinstance(raw, dict):
        try:
            b0, factor, count = int(raw["b0"]), float(raw.get("factor", 2)), int(raw["count"])
        except KeyError as exc:
            raise ConfigError(f"geometric schedule needs {exc}") from exc
        return [int(round(b0 * factor ** k)) for k in range(count)]
    raise ConfigError("schedule must be a list or {b0, factor, count}")


def parse_config(doc: dict, base_dir: Path | str = ".") -> RunConfig:
    if not isinstance(doc, dict) or "system" not in doc:
        raise ConfigError("config needs a 'system' entry")
    known = {"system", "case", "sse", "boundary", "frame", "schedule", "tolerances", "shift", "out",
             "emit", "b", "seed", "g", "oracle_window", "oracle_grid", "indices", "workers"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(doc.get("tolerances", {}))
    emit = {"csv": True, "json": True, "svg": True}
    emit.update(doc.get("emit", {}))
    return RunConfig(
        system=doc["system"], case=doc.get("case"), sse=doc.get("sse", {}) or {},
        # the bounds need the frame at the shift, so that is the default
        boundary=doc.get("boundary"), frame=float(doc.get("frame", doc.get("shift", 0.0))),
        schedule=_schedule(doc.get("schedule")), tolerances=tol,
        shift=float(doc.get("shift", 0.0)), out=doc.get("out"), emit=emit,
        b=doc.get("b"), seed=int(doc.get("seed", 0)), g=doc.get("g"),
        oracle_window=doc.get("oracle_window"), oracle_grid=float(doc.get("oracle_grid", 1e-2)),
        indices=int(doc.get("indices", 3)), workers=int(doc.get("workers", 1)),
        base_dir=Path(base_dir))


def load_config(path: str | Path) -> RunConfig:
    """Read and parse a config file.  IO and JSON errors propagate as ``OSError``/``ValueError``."""
    path = Path(path)
    return parse_config(json.loads(path.read_text()), path.parent)


def build_system(cfg: RunConfig) -> SystemCoefficients:
    spec = cfg.system
    try:
        if "table" in spec:
            return table_with_tail(cfg.base_dir / spec["table"])
        if "builtin" in spec:
            params = dict(spec.get("params", {}))
            if spec["builtin"] == "table_with_tail" and "path" in params:
                params["path"] = cfg.base_dir / params["path"]
            return builtin(spec["builtin"], params)
    except (ContractViolation, KeyError, TypeError) as exc:
        raise ConfigError(f"bad system spec: {exc}") from exc
    raise ConfigError("system needs 'builtin' or 'table'")


def case_label(cfg: RunConfig, sys: SystemCoefficients) -> CaseLabel:
    force = cfg.case
    if isinstance(force, list):
        force = tuple(force)
    return classify(sys, force=force)


def _cmat(raw, name):
    try:
        return cmatrix_from_json(raw)
    except ContractViolation as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def build_descriptor(cfg: RunConfig, sys: SystemCoefficients, label: CaseLabel) -> SseDescriptor:
    """Boundary data from the config, with per-case defaults.

    Defaults: limit circle ``M = N = I``; limit point ``M = aux_N = (I, 0)``;
    intermediate ``M = Ψ_1*(a)``, ``N = [I; 0]`` at ``sse.lam0`` (default 0).
    """
    sse = cfg.sse
    if label.kind is CaseKind.LIMIT_CIRCLE:
        if "M" in sse or "N" in sse:
            return SseDescriptor(sys, label.kind, _cmat(sse["M"], "M"), _cmat(sse["N"], "N"),
                                 lam_frame=cfg.frame)
        return lcc_identity(sys, cfg.frame)
    if label.kind is CaseKind.LIMIT_POINT:
        if "M" in sse:
            aux = _cmat(sse["aux_N"], "aux_N") if "aux_N" in sse else None
            return SseDescriptor(sys, label.kind, _cmat(sse["M"], "M"), aux_N=aux, lam_frame=cfg.frame)
        d = lpc_dirichlet(sys)
        d.lam_frame = cfg.frame
        return d
    lam0 = float(sse.get("lam0", 0.0))
    if "M" in sse:
        psi = build_psi_basis(sys, lam0, label.d)
        return SseDescriptor(sys, label.kind, _cmat(sse["M"], "M"), _cmat(sse["N"], "N"), psi=psi,
                             lam_frame=lam0)
    return default_intermediate_sse(sys, lam0, label.d)


def load_source(cfg: RunConfig, sys: SystemCoefficients, b: int) -> HamSequence:
    """The right-hand side ``g``: inline ``{start, values}``, a file, or seeded noise."""
    raw = cfg.g
    if raw is None:
        rng = np.random.default_rng(cfg.seed)
        m = 2 * sys.n
        vals = rng.standard_normal((b + 2 - sys.a, m)) + 1j * rng.standard_normal((b + 2 - sys.a, m))
        return HamSequence(sys.a, vals)
    if raw == "zero" or raw == 0:
        return HamSequence.zeros(sys.a, b + 2 - sys.a, sys.n)
    if isinstance(raw, str):
        raw = json.loads((cfg.base_dir / raw).read_text())
    try:
        vals = np.asarray(raw["values"], dtype=float)
        vals = vals[..., 0] + 1j * vals[..., 1]
        return HamSequence(int(raw.get("start", sys.a)), vals)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad source g: {exc}") from exc
