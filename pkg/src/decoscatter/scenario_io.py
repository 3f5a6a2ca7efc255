"""
Scenario files (JSON) and CSV results tables.

Complex matrices are nested lists whose entries are ``[re, im]`` pairs
(plain reals are accepted too). Diagonal shortcuts exist for the
Hamiltonian and Lindblad operator (``{"diagonal": [...]}``) and for the
initial state (``{"diagonal_probs": [...]}``). Unknown keys are rejected.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .linalg import DensityMatrixError, validate_density_matrix
from .lindblad import NotHermitianError
from .scattering import (
    DEFAULT_STEPS,
    ExplicitModel,
    OscillatorModel,
    PhaseLatticeModel,
    Scenario,
)

RESULTS_HEADER = ("q", "k", "tau_sc", "method", "rate", "imag_residual",
                  "ratio")

_TOP_FIELDS = {
    "dim", "hamiltonian", "lindblad_op", "rho0", "coupling", "nq", "q_grid",
    "k_grid", "tau_sc_grid", "quadrature_steps", "force_superoperator",
}
_REQUIRED = {"dim", "hamiltonian", "lindblad_op", "rho0", "nq", "q_grid",
             "k_grid", "tau_sc_grid"}


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario document.

    `path` names the offending field, e.g. ``rho0`` or ``nq.matrix[1]``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioError(path, "must be finite")
    return float(value)


def _number_list(value, path):
    if not isinstance(value, list) or not value:
        raise ScenarioError(path, "expected a non-empty list of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _keys(obj, path, allowed, required=()):
    if not isinstance(obj, dict):
        raise ScenarioError(path, f"expected an object, got {obj!r}")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ScenarioError(f"{path}.{unknown[0]}" if path else unknown[0],
                            "unknown field")
    missing = sorted(set(required) - set(obj))
    if missing:
        raise ScenarioError(f"{path}.{missing[0]}" if path else missing[0],
                            "missing required field")


def _entry(value, path):
    if isinstance(value, list):
        if len(value) != 2:
            raise ScenarioError(path, "complex entry must be [re, im]")
        return complex(_number(value[0], path), _number(value[1], path))
    return complex(_number(value, path))


def parse_matrix(value, dim, path):
    """Dense ``dim x dim`` complex matrix from nested lists."""
    if not isinstance(value, list) or len(value) != dim:
        raise ScenarioError(path, f"expected {dim} rows")
    out = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != dim:
            raise ScenarioError(f"{path}[{i}]", f"expected {dim} entries")
        for j, v in enumerate(row):
            out[i, j] = _entry(v, f"{path}[{i}][{j}]")
    return out


def _operator(value, dim, path):
    if isinstance(value, dict):
        _keys(value, path, {"diagonal"}, {"diagonal"})
        diag = _number_list(value["diagonal"], f"{path}.diagonal")
        if len(diag) != dim:
            raise ScenarioError(f"{path}.diagonal",
                                f"expected {dim} entries, got {len(diag)}")
        return np.diag(diag).astype(complex)
    return parse_matrix(value, dim, path)


def _rho(value, dim):
    if isinstance(value, dict):
        _keys(value, "rho0", {"diagonal_probs"}, {"diagonal_probs"})
        probs = _number_list(value["diagonal_probs"], "rho0.diagonal_probs")
        if len(probs) != dim:
            raise ScenarioError("rho0.diagonal_probs",
                                f"expected {dim} entries, got {len(probs)}")
        m = np.diag(probs).astype(complex)
    else:
        m = parse_matrix(value, dim, "rho0")
    try:
        return validate_density_matrix(m)
    except DensityMatrixError as exc:
        raise ScenarioError("rho0", str(exc)) from exc


def _nq_model(value, dim):
    if not isinstance(value, dict) or "model" not in value:
        raise ScenarioError("nq", "expected an object with a 'model' field")
    model = value["model"]
    if model == "phase_lattice":
        _keys(value, "nq", {"model", "phases"}, {"phases"})
        phases = _number_list(value["phases"], "nq.phases")
        if len(phases) != dim:
            raise ScenarioError("nq.phases",
                                f"expected {dim} entries, got {len(phases)}")
        return PhaseLatticeModel(tuple(phases))
    if model == "oscillator":
        _keys(value, "nq", {"model", "x_scale", "padding"})
        x_scale = _number(value.get("x_scale", 1.0), "nq.x_scale")
        padding = value.get("padding")
        if padding is not None and (isinstance(padding, bool) or
                                    not isinstance(padding, int) or
                                    padding < 0):
            raise ScenarioError("nq.padding", "expected an integer >= 0")
        if dim < 2:
            raise ScenarioError("nq", "oscillator model needs dim >= 2")
        return OscillatorModel(x_scale, padding)
    if model == "explicit":
        _keys(value, "nq", {"model", "matrix", "matrices"})
        if "matrix" not in value and "matrices" not in value:
            raise ScenarioError("nq", "explicit model needs 'matrix' or "
                                      "'matrices'")
        matrix = None
        if "matrix" in value:
            matrix = parse_matrix(value["matrix"], dim, "nq.matrix")
        per_q = {}
        entries = value.get("matrices", [])
        if not isinstance(entries, list):
            raise ScenarioError("nq.matrices", "expected a list")
        for i, item in enumerate(entries):
            path = f"nq.matrices[{i}]"
            _keys(item, path, {"q", "matrix"}, {"q", "matrix"})
            q = _number(item["q"], f"{path}.q")
            per_q[q] = parse_matrix(item["matrix"], dim, f"{path}.matrix")
        return ExplicitModel(matrix, per_q)
    raise ScenarioError("nq.model", f"unknown model {model!r}")


def parse_scenario(document):
    """Build a validated :class:`Scenario` from a JSON string or dict.

    Raises
    ------
    ScenarioError
        With the path of the offending field.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError("<document>", f"malformed JSON: {exc}") from exc
    _keys(document, "", _TOP_FIELDS, _REQUIRED)
    dim = document["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ScenarioError("dim", "expected a positive integer")

    h = _operator(document["hamiltonian"], dim, "hamiltonian")
    x = _operator(document["lindblad_op"], dim, "lindblad_op")
    rho = _rho(document["rho0"], dim)
    model = _nq_model(document["nq"], dim)
    coupling = _number(document.get("coupling", 1.0), "coupling")
    q_grid = _number_list(document["q_grid"], "q_grid")
    k_grid = _number_list(document["k_grid"], "k_grid")
    tau_grid = _number_list(document["tau_sc_grid"], "tau_sc_grid")
    steps = document.get("quadrature_steps", DEFAULT_STEPS)
    if isinstance(steps, bool) or not isinstance(steps, int):
        raise ScenarioError("quadrature_steps", "expected an integer")
    force = document.get("force_superoperator", False)
    if not isinstance(force, bool):
        raise ScenarioError("force_superoperator", "expected true or false")

    for name, grid, check in (("k_grid", k_grid, lambda v: v >= 0),
                              ("tau_sc_grid", tau_grid, lambda v: v > 0)):
        for i, v in enumerate(grid):
            if not check(v):
                raise ScenarioError(f"{name}[{i}]", f"invalid value {v}")
    if coupling <= 0:
        raise ScenarioError("coupling", "must be > 0")
    if steps < 4 or steps % 2:
        raise ScenarioError("quadrature_steps", "must be even and >= 4")
    if isinstance(model, ExplicitModel) and model.matrix is None:
        for i, q in enumerate(q_grid):
            if q not in model.per_q:
                raise ScenarioError(f"q_grid[{i}]",
                                    f"no explicit n(q) matrix for q = {q}")

    try:
        return Scenario(h, x, rho, model, k=k_grid[0], coupling=coupling,
                        q_grid=q_grid, tau_sc_grid=tau_grid, k_grid=k_grid,
                        quadrature_steps=steps, force_superoperator=force)
    except NotHermitianError as exc:
        raise ScenarioError(exc.name, str(exc)) from exc
    except (ValueError, KeyError) as exc:
        raise ScenarioError("<scenario>", str(exc)) from exc


def load_scenario(path):
    """Parse a scenario file. ``@name`` selects a bundled scenario."""
    path = str(path)
    if path.startswith("@"):
        text = bundled_scenario_path(path[1:]).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ScenarioError("<file>", f"cannot read {path}: {exc}") from exc
    return parse_scenario(text)


def bundled_scenario_path(name):
    ref = resources.files("decoscatter") / "scenarios" / f"{name}.json"
    if not ref.is_file():
        raise ScenarioError("<file>", f"no bundled scenario named {name!r}")
    return Path(str(ref))


def _matrix_doc(m):
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def scenario_to_document(scenario):
    """Canonical document form: dense matrices, every default spelled out."""
    model = scenario.nq_model
    if isinstance(model, PhaseLatticeModel):
        nq = {"model": "phase_lattice", "phases": list(model.phases)}
    elif isinstance(model, OscillatorModel):
        nq = {"model": "oscillator", "x_scale": model.x_scale}
        if model.padding is not None:
            nq["padding"] = model.padding
    elif isinstance(model, ExplicitModel):
        nq = {"model": "explicit"}
        if model.matrix is not None:
            nq["matrix"] = _matrix_doc(model.matrix)
        if model.per_q:
            nq["matrices"] = [{"q": q, "matrix": _matrix_doc(m)}
                              for q, m in sorted(model.per_q.items())]
    else:
        raise TypeError(f"cannot serialise n(q) model {model!r}")
    return {
        "dim": scenario.dim,
        "hamiltonian": _matrix_doc(scenario.hamiltonian),
        "lindblad_op": _matrix_doc(scenario.lindblad_op),
        "rho0": _matrix_doc(scenario.rho0.op),
        "coupling": scenario.coupling,
        "nq": nq,
        "q_grid": list(scenario.q_grid),
        "k_grid": list(scenario.k_grid),
        "tau_sc_grid": list(scenario.tau_sc_grid),
        "quadrature_steps": scenario.quadrature_steps,
        "force_superoperator": scenario.force_superoperator,
    }


def format_float(value):
    """17 significant digits; None becomes ``NA``."""
    if value is None:
        return "NA"
    return format(float(value), ".17g")


def results_rows(table):
    """CSV rows for a ReductionTable, in grid-index order."""
    for row in table.rows:
        yield (format_float(row.q), format_float(row.k),
               format_float(row.tau_sc), row.method, format_float(row.rate),
               format_float(row.imag_residual), format_float(row.ratio))


def emit_csv(header, rows, destination):
    """Write `header` and `rows` as CSV to a path or text stream.

    Output is byte-identical for identical input: ``\\n`` line endings and
    no locale-dependent formatting.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    text = buf.getvalue()
    if hasattr(destination, "write"):
        destination.write(text)
        return
    try:
        with open(destination, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {destination}: {exc}") from exc
