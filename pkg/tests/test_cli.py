import copy
import csv
import io
import json
import math

import numpy as np
import pytest

from decoscatter.cli import main, run_command
from decoscatter.analysis import ReductionRow, ReductionTable
from decoscatter.scenario_io import (
    RESULTS_HEADER,
    ScenarioError,
    bundled_scenario_path,
    emit_csv,
    load_scenario,
    parse_scenario,
    results_rows,
    scenario_to_document,
)

SHORTFALL_K1 = (1 + math.exp(-math.pi / 2)) / 2

MINIMAL = {
    "dim": 2,
    "hamiltonian": {"diagonal": [0.0, 1.0]},
    "lindblad_op": {"diagonal": [0.0, 1.0]},
    "rho0": {"diagonal_probs": [0.5, 0.5]},
    "nq": {"model": "explicit", "matrix": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]},
    "q_grid": [1.0],
    "k_grid": [0.0, 1.0],
    "tau_sc_grid": [math.pi / 2],
}


def doc(**changes):
    d = copy.deepcopy(MINIMAL)
    d.update(changes)
    return d


def write(tmp_path, document, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# --- parsing ------------------------------------------------------------

def test_parse_minimal():
    s = parse_scenario(MINIMAL)
    assert s.dim == 2
    assert s.coupling == 1.0
    assert s.quadrature_steps == 512
    assert s.force_superoperator is False
    np.testing.assert_array_equal(s.nq(1.0), [[0, 1], [1, 0]])


def test_parse_json_text():
    assert parse_scenario(json.dumps(MINIMAL)).dim == 2


@pytest.mark.parametrize("document, path", [
    (doc(rho0={"diagonal_probs": [0.5, 0.4]}), "rho0"),
    (doc(dim=3), "hamiltonian.diagonal"),
    (doc(hamiltonian=[[[0, 0], [0, 0]], [[0, 0], [1, 0]]], dim=3),
     "hamiltonian"),
    (doc(extra=1), "extra"),
    (doc(nq={"model": "explicit", "matrix": [[1, 0], [0, 1]], "foo": 2}),
     "nq.foo"),
    (doc(nq={"model": "nope"}), "nq.model"),
    (doc(tau_sc_grid=[0.0]), "tau_sc_grid[0]"),
    (doc(k_grid=[-1.0]), "k_grid[0]"),
    (doc(quadrature_steps=5), "quadrature_steps"),
    (doc(coupling="1"), "coupling"),
    (doc(hamiltonian=[[[0, 0], [1, 0]], [[0, 0], [1, 0]]]), "hamiltonian"),
    (doc(q_grid=[]), "q_grid"),
    (doc(hamiltonian={"diagonal": [0.0, 1.0], "off": 1}),
     "hamiltonian.off"),
])
def test_parse_errors_name_field(document, path):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(document)
    assert info.value.path == path


def test_trace_error_reports_residual():
    with pytest.raises(ScenarioError, match="trace residual 1.000e-01"):
        parse_scenario(doc(rho0={"diagonal_probs": [0.5, 0.4]}))


def test_missing_field():
    d = doc()
    del d["nq"]
    with pytest.raises(ScenarioError) as info:
        parse_scenario(d)
    assert info.value.path == "nq"


def test_malformed_json():
    with pytest.raises(ScenarioError, match="malformed"):
        parse_scenario("{not json")


def test_nq_models():
    s = parse_scenario(doc(nq={"model": "phase_lattice", "phases": [0, 1]}))
    np.testing.assert_allclose(s.nq(1.0), np.diag([1, np.exp(-1j)]))
    s = parse_scenario(doc(nq={"model": "oscillator", "x_scale": 0.5,
                               "padding": 4}))
    assert s.nq(1.0).shape == (2, 2)
    s = parse_scenario(doc(q_grid=[1.0, 2.0], nq={
        "model": "explicit",
        "matrices": [{"q": 1.0, "matrix": [[0, 1], [1, 0]]},
                     {"q": 2.0, "matrix": [[1, 0], [0, 1]]}]}))
    np.testing.assert_array_equal(s.nq(2.0), np.eye(2))
    with pytest.raises(ScenarioError) as info:
        parse_scenario(doc(q_grid=[3.0], nq={
            "model": "explicit",
            "matrices": [{"q": 1.0, "matrix": [[0, 1], [1, 0]]}]}))
    assert info.value.path == "q_grid[0]"


def test_round_trip(rng):
    docs = [
        MINIMAL,
        doc(nq={"model": "oscillator", "x_scale": 0.7, "padding": 3},
            coupling=2.5, quadrature_steps=64, force_superoperator=True),
        doc(nq={"model": "phase_lattice", "phases": [0.1, -0.3]},
            rho0=[[[0.6, 0], [0.1, 0.2]], [[0.1, -0.2], [0.4, 0]]]),
    ]
    for d in docs:
        s = parse_scenario(d)
        canon = scenario_to_document(s)
        again = parse_scenario(json.loads(json.dumps(canon)))
        assert scenario_to_document(again) == canon
        for name in ("hamiltonian", "lindblad_op"):
            assert np.array_equal(getattr(s, name), getattr(again, name))
        assert np.array_equal(s.rho0.op, again.rho0.op)
        for q in s.q_grid:
            assert np.array_equal(s.nq(q), again.nq(q))
        assert (s.q_grid, s.k_grid, s.tau_sc_grid) == \
            (again.q_grid, again.k_grid, again.tau_sc_grid)


def test_bundled_scenario():
    assert bundled_scenario_path("two_level").is_file()
    assert load_scenario("@two_level").dim == 2
    with pytest.raises(ScenarioError):
        load_scenario("@missing")


# --- CSV ----------------------------------------------------------------

def test_emit_csv_single_row_and_na(tmp_path):
    table = ReductionTable(
        (ReductionRow(1.0, 2.0, 0.0, 0.0, None, "analytic", 0.0),), {})
    out = tmp_path / "t.csv"
    emit_csv(RESULTS_HEADER, results_rows(table), out)
    rows = read_csv(out)
    assert rows[0] == list(RESULTS_HEADER)
    assert rows[1] == ["1", "0", "2", "analytic", "0", "0", "NA"]


def test_emit_csv_seventeen_digits():
    buf = io.StringIO()
    emit_csv(("x",), [(f"{0.1:.17g}",)], buf)
    assert buf.getvalue() == "x\n0.10000000000000001\n"
    assert float("0.10000000000000001") == 0.1


def test_emit_csv_unwritable(tmp_path):
    with pytest.raises(OSError, match="cannot write"):
        emit_csv(("x",), [], tmp_path / "missing" / "t.csv")


# --- commands -----------------------------------------------------------

def test_validate_command(tmp_path, capsys):
    assert main(["validate", "--scenario", write(tmp_path, MINIMAL)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert out.count("PASS") == 6


def test_parse_error_exit_code(tmp_path, capsys):
    path = write(tmp_path, doc(rho0={"diagonal_probs": [0.5, 0.4]}))
    assert main(["validate", "--scenario", path]) == 1
    assert "rho0" in capsys.readouterr().err


def test_unknown_command_exit_code(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["bogus", "--scenario", write(tmp_path, MINIMAL)])
    assert info.value.code == 1


def test_rate_command(tmp_path):
    out = tmp_path / "rate.csv"
    assert main(["rate", "--scenario", write(tmp_path, MINIMAL),
                 "--out", str(out), "--method", "quadrature"]) == 0
    rows = read_csv(out)
    assert rows[0] == list(RESULTS_HEADER)
    k1 = [r for r in rows[1:] if r[1] == "1"][0]
    assert k1[3] == "quadrature"
    assert float(k1[4]) == pytest.approx(SHORTFALL_K1, abs=1e-8)


def test_scan_command_rows(tmp_path):
    out = tmp_path / "scan.csv"
    path = write(tmp_path, doc(q_grid=[1.0, 2.0], k_grid=[0.5, 1.0],
                               tau_sc_grid=[0.5, 1.0, 1.5]))
    assert main(["scan", "--scenario", path, "--out", str(out)]) == 0
    rows = read_csv(out)
    # K = 0 is prepended to the grid
    assert len(rows) - 1 == 2 * 3 * 3


def test_correlation_command(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["correlation", "--scenario", write(tmp_path, MINIMAL),
                 "--out", str(out), "--taus", "5"]) == 0
    rows = read_csv(out)
    assert rows[0] == ["q", "k", "tau", "re", "im"]
    assert len(rows) == 1 + 2 * 5
    for q, k, tau, re, im in rows[1:]:
        expected = math.cos(float(tau)) * math.exp(-float(k) * float(tau))
        assert float(re) == pytest.approx(expected, abs=1e-12)


def test_oracle_check_commuting(tmp_path, capsys):
    assert main(["oracle-check", "--scenario",
                 write(tmp_path, MINIMAL)]) == 0
    out = capsys.readouterr().out
    assert "analytic path: available" in out
    assert "FAIL" not in out


def test_oracle_check_noncommuting(tmp_path, capsys):
    path = write(tmp_path, doc(lindblad_op=[[0, 1], [1, 0]]))
    assert main(["oracle-check", "--scenario", path]) == 0
    out = capsys.readouterr().out
    assert "analytic path: unavailable" in out
    assert "PASS semigroup property" in out
    assert "SKIP closed-form vs superoperator evolution" in out


def test_oracle_failure_exit_code(monkeypatch):
    from decoscatter import cli, oracles

    def failing(scenario):
        return oracles.OracleReport([oracles.Check("x", 1.0, 0.0)], True)

    monkeypatch.setattr(cli, "run_oracle_checks", failing)
    assert run_command("oracle-check", load_scenario("@two_level")) == 3


def test_analytic_method_on_noncommuting_is_computation_error(tmp_path):
    path = write(tmp_path, doc(lindblad_op=[[0, 1], [1, 0]]))
    out = tmp_path / "r.csv"
    assert main(["rate", "--scenario", path, "--method", "analytic",
                 "--out", str(out)]) == 2
    assert all(r[4] == "NA" for r in read_csv(out)[1:])


def test_bundled_oscillator_scenario(tmp_path):
    out = tmp_path / "osc.csv"
    assert main(["scan", "--scenario", "@oscillator", "--out", str(out)]) == 0
    rows = read_csv(out)[1:]
    assert len(rows) == 2 * 4 * 2
    assert main(["oracle-check", "--scenario", "@oscillator"]) == 0
