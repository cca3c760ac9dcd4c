import json

import numpy as np
import pytest

from lglab import fixtures, io
from lglab.cli import main
from lglab.datum import BoundaryDatum
from lglab.grid import GridField, GridSpec


class TestFormats:
    @pytest.mark.parametrize(
        "inst",
        [
            fixtures.rect_hump(4, 1),
            fixtures.opc_violation(6),
            fixtures.dcc_violation(6, 1),
            fixtures.c2_tight(),
            fixtures.InfiniteHumps().instance(4),
        ],
        ids=["rect", "opc", "dcc", "c2", "wedge"],
    )
    def test_instance_round_trip_is_byte_stable(self, inst, tmp_path):
        paths = io.save_instance(inst, tmp_path)
        back = io.load_instance(paths["domain"], paths["datum"], paths["instance"])
        assert io.domain_to_json(back.polygon) == paths["domain"].read_text()
        assert io.datum_to_json(back.datum) == paths["datum"].read_text()
        assert back.tag == inst.tag

    def test_grid_round_trip(self, tmp_path):
        spec = GridSpec(-1.0, 0.5, 0.125, 5, 3)
        vals = np.arange(15, dtype=float).reshape(3, 5) / 7
        vals[0, 0] = np.nan
        g = GridField(spec, vals, np.isfinite(vals))
        back = io.load_grid(io.save_grid(g, tmp_path / "g.grid"))
        assert back.spec == spec
        assert np.array_equal(back.values, vals, equal_nan=True)
        assert np.array_equal(back.mask, g.mask)

    def test_bad_json_has_line(self):
        with pytest.raises(io.InputError) as ei:
            io.domain_from_json('{\n  "vertices": [\n  [0, 0],,\n]}', "d.json")
        assert str(ei.value).startswith("d.json:3:")

    def test_nonconvex_vertex_line(self):
        text = '{\n"vertices": [\n[0, 0],\n[1, 0],\n[0.5, 0.1],\n[1, 1],\n[0, 1]\n]}'
        with pytest.raises(io.InputError) as ei:
            io.domain_from_json(text, "d.json")
        assert ei.value.line == 5

    def test_datum_error_points_at_side(self):
        inst = fixtures.rect_hump(4, 1)
        d = inst.datum.to_dict()
        d["sides"][2]["pieces"][0]["coeffs"][0] += 1.0
        text = json.dumps(d, indent=2)
        with pytest.raises(io.InputError) as ei:
            io.datum_from_json(text, inst.polygon, "f.json")
        line = text.splitlines()[ei.value.line - 1]
        assert '"side": 2' in line or '"side": 1' in line

    def test_bad_grid_header(self):
        with pytest.raises(io.InputError):
            io.grid_from_text("grid 1 1 1 0 0\n1\n")

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        io.atomic_write(tmp_path / "a.txt", "x")
        assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]

    def test_svg_well_formed(self):
        from xml.etree import ElementTree

        from lglab.chord_solver import SolverConfig, solve

        svg = io.solution_svg(solve(fixtures.rect_hump(4, 1).datum, SolverConfig(levels=32)))
        root = ElementTree.fromstring(svg)
        assert root.tag.endswith("svg") and len(root) > 10


class TestCli:
    @pytest.mark.parametrize(
        "argv, code",
        [
            (["--fixture", "rect-hump"], 0),
            (["--fixture", "opc-violation"], 1),
            (["--fixture", "dcc-violation"], 1),
            (["--fixture", "c2-tight"], 1),
            (["--fixture", "infinite-humps", "--k", "8"], 0),
        ],
    )
    def test_check_exit_codes(self, argv, code, capsys):
        assert main(["check", *argv]) == code
        assert "verdict" in capsys.readouterr().out

    def test_check_reports_crossing(self, capsys):
        main(["check", "--fixture", "opc-violation"])
        out = capsys.readouterr().out
        assert "inadmissible(OPC,DCC)" in out and "(-5, 0)" in out

    def test_bad_parameter_is_usage_error(self, capsys):
        assert main(["example", "rect-hump", "--L", "1.5"]) == 2
        assert "error" in capsys.readouterr().err

    def test_fixture_and_files_conflict(self, tmp_path):
        assert main(["check", "--fixture", "rect-hump", "--domain", str(tmp_path / "d.json")]) == 2

    def test_example_then_check_files(self, tmp_path, capsys):
        assert main(["example", "rect-hump", "--lambda", "1", "--out", str(tmp_path)]) == 0
        assert main(["check", "--domain", str(tmp_path / "domain.json"), "--datum", str(tmp_path / "datum.json")]) == 0

    def test_malformed_datum_file(self, tmp_path, capsys):
        main(["example", "rect-hump", "--out", str(tmp_path)])
        (tmp_path / "datum.json").write_text("{ nope")
        assert main(["check", "--domain", str(tmp_path / "domain.json"), "--datum", str(tmp_path / "datum.json")]) == 2
        assert "datum.json:1:" in capsys.readouterr().err

    def test_solve_writes_outputs(self, tmp_path, capsys):
        assert main(["solve", "--fixture", "rect-hump", "--grid", "32", "--levels", "64", "--out", str(tmp_path)]) == 0
        summary = json.loads((tmp_path / "solution.json").read_text())
        assert summary["tv"] == pytest.approx(28.0)
        g = io.load_grid(tmp_path / "solution.grid")
        assert g.masked().max() <= 7.0 + 1e-9

    def test_solve_refuses_then_forces(self, tmp_path, capsys):
        assert main(["solve", "--fixture", "dcc-violation", "--out", str(tmp_path)]) == 1
        assert not (tmp_path / "solution.json").exists()
        assert main(["solve", "--fixture", "dcc-violation", "--force", "--grid", "16", "--levels", "32", "--out", str(tmp_path)]) == 1
        assert json.loads((tmp_path / "solution.json").read_text())["diagnostic"] is True
        assert "warning" in capsys.readouterr().out

    def test_grid_limit(self, tmp_path):
        assert main(["solve", "--fixture", "rect-hump", "--grid", "5000", "--out", str(tmp_path)]) == 2

    def test_oracle_small(self, tmp_path, capsys):
        code = main(["oracle", "--fixture", "rect-hump", "--h", "1/8", "--levels", "64", "--out", str(tmp_path)])
        assert code == 0
        rep = json.loads((tmp_path / "oracle.json").read_text())
        assert rep["nonexistence_flag"] is False and rep["tv"] > 20

    def test_oracle_rejects_nonpositive_h(self):
        assert main(["oracle", "--fixture", "rect-hump", "--h", "0"]) == 2

    def test_compare_marginal(self, tmp_path, capsys):
        code = main(["compare", "--fixture", "rect-hump", "--lambda", "2.5", "--h", "1/16", "--levels", "64", "--out", str(tmp_path)])
        payload = json.loads((tmp_path / "compare.json").read_text())
        assert code == (0 if payload["agree"] else 1)
        assert payload["verdict"] == "inadmissible(C2)"

    def test_render_field(self, tmp_path, capsys):
        main(["solve", "--fixture", "rect-hump", "--grid", "16", "--levels", "32", "--out", str(tmp_path)])
        assert main(["render", "--fixture", "rect-hump", "--field", str(tmp_path / "solution.grid"), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "render.svg").read_text().startswith("<svg")


def test_module_round_trip_preserves_values():
    f = fixtures.InfiniteHumps().instance(5).datum
    g = BoundaryDatum.from_dict(f.polygon, json.loads(io.datum_to_json(f)))
    s = np.linspace(0, f.polygon.perimeter, 777, endpoint=False)
    assert np.array_equal(f.eval(s), g.eval(s))
