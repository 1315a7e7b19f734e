import json
import math

import numpy as np
import pytest

from parametric_modes import io
from parametric_modes.analysis import SweepRecord, sweep_K
from parametric_modes.grid import make_grid
from parametric_modes.modes import extract_mode_structure, synthesize_state, verify_appendix
from parametric_modes.propagator import FIBER, PropagationConfig, PumpModel, propagate

GRID = make_grid(-6.0, 6.0, 31)


@pytest.fixture(scope="module")
def state():
    return propagate(PropagationConfig(PumpModel(1.2, *FIBER), GRID, 40))


@pytest.mark.parametrize("fmt", ["csv", "json", "both"])
def test_kernel_bundle_round_trip_is_exact(tmp_path, state, fmt):
    io.write_kernels(state, tmp_path, fmt)
    back = io.read_kernels(tmp_path)
    for name in io.KERNEL_NAMES:
        np.testing.assert_array_equal(back.kernel(name).values, state.kernel(name).values)
    assert back.grid_a == state.grid_a and back.steps == state.steps


def test_csv_bundle_layout(tmp_path, state):
    io.write_kernels(state, tmp_path, "csv")
    raw = (tmp_path / "h2a.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "row,col,re,im"
    assert len(lines) == 1 + GRID.n ** 2
    header = json.loads((tmp_path / "grid.json").read_text())
    assert header["version"] == io.FORMAT_VERSION and header["grid_a"]["n"] == GRID.n


def test_kernel_reader_rejects_bad_input(tmp_path, state):
    io.write_kernels(state, tmp_path, "json")
    doc = json.loads((tmp_path / "kernels.json").read_text())
    doc["version"] = 99
    (tmp_path / "kernels.json").write_text(json.dumps(doc))
    with pytest.raises(io.BundleError):
        io.read_kernels(tmp_path)
    (tmp_path / "empty").mkdir()
    with pytest.raises(io.BundleError):
        io.read_kernels(tmp_path / "empty")
    doc["version"] = io.FORMAT_VERSION
    doc["kernels"]["h2a"] = doc["kernels"]["h2a"][:-1]
    (tmp_path / "kernels.json").write_text(json.dumps(doc))
    with pytest.raises(io.BundleError):
        io.read_kernels(tmp_path / "kernels.json")


def test_contour_round_trip(tmp_path, state):
    io.write_contour(tmp_path / "c.csv", state)
    table = io.read_contour(tmp_path / "c.csv")
    assert table.shape == (GRID.n ** 2, 3)
    np.testing.assert_array_equal(table[:, 2].reshape(GRID.n, GRID.n), np.abs(state.h2a))
    assert table[1, 1] == GRID.points[1] and table[1, 0] == GRID.points[0]


def test_modes_round_trip(tmp_path, state):
    m = extract_mode_structure(state)
    io.write_modes(tmp_path / "modes.json", m)
    back = io.read_modes(tmp_path / "modes.json")
    assert back.G == m.G and back.n_modes_kept == m.n_modes_kept
    np.testing.assert_array_equal(back.r, m.r)
    for name in ("psi_a", "psi_b", "phi_a", "phi_b"):
        np.testing.assert_array_equal(getattr(back, name), getattr(m, name))


def test_appendix_json(tmp_path, small_grid, mode_families):
    pa, pb, fa, fb = mode_families(2)
    st = synthesize_state(np.array([0.8, 0.6]), 2.0, pa, pb, fa, fb, small_grid)
    m = extract_mode_structure(st)
    rep = verify_appendix(st, m)
    io.write_appendix(tmp_path / "a.json", rep, True)
    doc = io.read_json(tmp_path / "a.json")
    assert doc["overlaps_pass"] is True and doc["modes_evaluated"] == 2
    assert doc["psi_overlap_a"] == rep.psi_overlap_a.tolist()


def test_sweep_csv_and_json_round_trip(tmp_path):
    recs = sweep_K(PropagationConfig(PumpModel(0.0, *FIBER), GRID, 30), [0.0, 0.4, 1e200, 1.1])
    io.write_sweep_csv(tmp_path / "s.csv", recs)
    header, table = io.read_sweep_csv(tmp_path / "s.csv")
    assert header == ["K", "M", "g2", "fwhm_mode1", "r2_r1", "r3_r1", "r4_r1", "r5_r1", "r6_r1", "residual", "G"]
    assert table.shape == (4, 11)
    assert table[1, 1] == recs[1].M and table[3, 4] == recs[3].r_over_r1[0]
    assert math.isnan(table[2, 1])

    io.write_sweep_json(tmp_path / "s.json", recs)
    back = io.read_sweep_json(tmp_path / "s.json")
    assert [r.status for r in back] == ["limit", "ok", "diverged", "ok"]
    assert back[1].to_dict() == recs[1].to_dict()
    assert math.isnan(back[2].M)


def test_figure_files(tmp_path):
    recs = [SweepRecord(K=0.5, M=1.5, g2=1 + 1 / 1.5, fwhm_mode1=4.0, r_over_r1=[0.5, 0.25, 0.1, 0.05, 0.01])]
    paths = io.figure_files(recs, tmp_path, "fig8")
    assert [p.name for p in paths] == ["fig4_inset.csv", "fig8.csv", "fig7.csv"]
    header, rows = io.read_csv(tmp_path / "fig8.csv")
    assert header == ["K", "r2_r1", "r3_r1", "r4_r1", "r5_r1", "r6_r1"]
    assert float(rows[0][1]) == 0.5
    header, rows = io.read_csv(tmp_path / "fig7.csv")
    assert header == ["K", "M", "g2"] and float(rows[0][1]) == 1.5


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, 2.0 ** -1074, 1.7976931348623157e308, -0.0):
        assert float(io.fmt(x)) == x
