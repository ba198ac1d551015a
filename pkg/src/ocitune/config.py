"""Experiment configuration files.

One YAML file describes a whole study: the simulation-only truth plant,
noise model, collection loop, controller class, reference-model templates,
optimizer settings, and the evaluation/Monte Carlo protocol.  The schema is
documented in docs/config_schema.md.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import yaml

from .controller import ControllerStructure
from .errors import ConfigError
from .experiment import (
    EvaluationProtocol,
    ExcitationSettings,
    ExperimentConfig,
    MonteCarloSettings,
)
from .optimize import OptimOptions
from .polynomial import Polynomial
from .rational import RationalFunction
from .refmodel import EntryTemplate, RefModelSpec
from .transfer import TransferMatrix

__all__ = ["load_config", "config_sha256", "load_config_dict"]

_OPTIM_FIELDS = ("sd_iters", "lm_max_iters", "lm_lambda0", "lm_up", "lm_down",
                 "grad_tol", "cost_rel_tol", "multistart", "multistart_std", "seed")


def config_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_config_dict(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return raw


def _need(raw: dict, key: str):
    if key not in raw:
        raise ConfigError(f"missing config key: {key!r}")
    return raw[key]


def _rational(node, where: str) -> RationalFunction:
    if not isinstance(node, dict) or "num" not in node or "den" not in node:
        raise ConfigError(f"{where}: expected a {{num: [...], den: [...]}} mapping")
    try:
        return RationalFunction(node["num"], node["den"])
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _grid(node, dim: int, where: str) -> TransferMatrix:
    if not isinstance(node, list) or len(node) != dim:
        raise ConfigError(f"{where}: expected {dim} rows of entries")
    rows = []
    for i, row in enumerate(node):
        if not isinstance(row, list) or len(row) != dim:
            raise ConfigError(f"{where}: row {i + 1} must have {dim} entries")
        rows.append([_rational(e, f"{where}[{i + 1}][{j + 1}]")
                     for j, e in enumerate(row)])
    return TransferMatrix(rows)


def _transfer_matrix(node, dim: int, where: str) -> TransferMatrix:
    if node == "identity":
        return TransferMatrix.identity(dim)
    if isinstance(node, dict) and "gain" in node:
        return TransferMatrix.gain(float(node["gain"]), dim)
    if isinstance(node, dict) and "scalar" in node:
        return TransferMatrix.scalar(_rational(node["scalar"], f"{where}.scalar"), dim)
    if isinstance(node, dict) and "entries" in node:
        return _grid(node["entries"], dim, f"{where}.entries")
    raise ConfigError(f"{where}: expected 'identity', gain, scalar, or entries")


def _controller_structure(node, where: str) -> ControllerStructure:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping")
    try:
        dim = int(node["dim"])
        den = Polynomial(node["denominator"])
    except KeyError as exc:
        raise ConfigError(f"{where}: missing key {exc}") from exc
    if "degrees" in node:
        degrees = node["degrees"]
    else:
        degrees = [[int(node.get("degree", den.degree))] * dim for _ in range(dim)]
    mask = node.get("mask", [[True] * dim for _ in range(dim)])
    try:
        return ControllerStructure(n=dim, den=den,
                                   degrees=tuple(tuple(r) for r in degrees),
                                   mask=tuple(tuple(bool(m) for m in r) for r in mask))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _slot(node, key: str):
    v = node.get(key)
    if v is None or v == "free":
        return None
    return float(v)


def _template(node, where: str) -> EntryTemplate:
    if not isinstance(node, dict) or "kind" not in node:
        raise ConfigError(f"{where}: expected a mapping with a 'kind'")
    kind = node["kind"]
    try:
        return EntryTemplate(
            kind=kind,
            poles=tuple(node.get("poles", ())),
            rel_degree=int(node.get("rel_degree", 1)),
            num=tuple(node.get("num", ())),
            c1=_slot(node, "c1") if kind in ("free", "coupling") else None,
            c0=_slot(node, "c0") if kind in ("free", "coupling") else None,
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _refmodel_spec(node, dim: int, where: str) -> RefModelSpec:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping")
    structure = node.get("structure", "diagonal")
    row = node.get("row")
    entries_node = _need(node, "entries")
    if not isinstance(entries_node, list) or len(entries_node) != dim:
        raise ConfigError(f"{where}.entries: expected {dim} rows")
    grid = []
    for i, r in enumerate(entries_node):
        if not isinstance(r, list) or len(r) != dim:
            raise ConfigError(f"{where}.entries: row {i + 1} must have {dim} entries")
        grid.append(tuple(_template(e, f"{where}.entries[{i + 1}][{j + 1}]")
                          for j, e in enumerate(r)))
    try:
        return RefModelSpec(n=dim, entries=tuple(grid), structure=structure,
                            row_k=None if row is None else int(row) - 1)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    raw = load_config_dict(path)
    structure = _controller_structure(_need(raw, "controller"), "controller")
    dim = structure.n

    plant = None
    if "plant" in raw and raw["plant"] is not None:
        plant = _transfer_matrix(raw["plant"], dim, "plant")

    noise = raw.get("noise", {})
    cov_node = noise.get("covariance", 0)
    if cov_node == 0 or cov_node is None:
        cov = np.zeros((dim, dim))
    else:
        cov = np.asarray(cov_node, dtype=float)
        if cov.shape != (dim, dim):
            raise ConfigError("noise.covariance must be dim x dim")
    h0 = _transfer_matrix(noise.get("h0", "identity"), dim, "noise.h0")

    c0 = _transfer_matrix(_need(raw, "initial_controller"), dim, "initial_controller")

    exc_node = raw.get("excitation", {})
    excitation = ExcitationSettings(
        amplitude=float(exc_node.get("amplitude", 1.0)),
        hold=int(exc_node.get("hold", 20)),
        length=int(exc_node.get("length", 1260)),
    )

    refspec = _refmodel_spec(_need(raw, "reference_model"), dim, "reference_model")

    opt_node = raw.get("optimizer", {})
    unknown = set(opt_node) - set(_OPTIM_FIELDS)
    if unknown:
        raise ConfigError(f"optimizer: unknown keys {sorted(unknown)}")
    try:
        optim = OptimOptions(**opt_node)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"optimizer: {exc}") from exc

    protocol = EvaluationProtocol(n_eval=int(raw.get("evaluation", {}).get("n_eval", 120)))
    mc_node = raw.get("monte_carlo", {})
    mc = MonteCarloSettings(runs=int(mc_node.get("runs", 100)),
                            base_seed=int(mc_node.get("base_seed", 12345)))

    try:
        return ExperimentConfig(
            plant=plant, h0=h0, noise_cov=cov, c0=c0, excitation=excitation,
            structure=structure, refspec=refspec, optim=optim, protocol=protocol,
            mc=mc, seed=int(raw.get("seed", 0)),
            transient_skip=int(raw.get("transient_skip", 0)),
            init_scan_zeros=tuple(raw.get("init_scan_zeros", ()) or ()),
            label=str(raw.get("label", "")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
