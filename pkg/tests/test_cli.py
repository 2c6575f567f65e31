import json
import subprocess
import sys

import pytest

from mmot.cli import main
from mmot.octree import OccupancyOctree


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestSimulate:
    def test_smoke(self, tmp_path, capsys):
        m, rep, diag = tmp_path / "m.mmot", tmp_path / "r.txt", tmp_path / "d.ndjson"
        code, out, _ = run(capsys, "simulate", "occluded-shelf", "--duration", "0.1",
                           "--out-map", str(m), "--out-report", str(rep), "--diagnostics", str(diag))
        assert code == 0
        assert len(OccupancyOctree.load(m)) > 0
        assert rep.read_text().startswith("# mmot-report v1")
        records = [json.loads(ln) for ln in diag.read_text().splitlines()]
        assert [r["tick"] for r in records] == [0, 1, 2]
        assert "occupied = " in out

    def test_csv_report_and_stderr_diagnostics(self, tmp_path, capsys):
        rep = tmp_path / "r.csv"
        code, _, err = run(capsys, "simulate", "--scenario", "occluded-shelf", "--duration", "0.05",
                           "--sensors", "proximity", "--out-map", str(tmp_path / "m.mmot"),
                           "--out-report", str(rep))
        assert code == 0
        assert rep.read_text().splitlines()[0] == "category,count"
        assert json.loads(err.splitlines()[0])["tick"] == 0

    def test_missing_scenario_is_usage_error(self, capsys):
        code, _, err = run(capsys, "simulate")
        assert code == 2 and "scenario" in err

    def test_bad_scenario_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[trajectory]\nradius = -1\n")
        code, _, err = run(capsys, "simulate", str(bad), "--out-map", str(tmp_path / "m.mmot"))
        assert code == 3 and "line 2" in err


class TestOtherCommands:
    def test_curves(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        code, msg, _ = run(capsys, "curves", str(out))
        assert code == 0 and "401 rows" in msg
        lines = out.read_text().splitlines()
        assert len(lines) == 402 and lines[0] == "distance,p_proximity,p_depth"

    def test_groundtruth_then_compare_self(self, tmp_path, capsys):
        gt = tmp_path / "gt.mmot"
        code, out, _ = run(capsys, "groundtruth", "occluded-shelf", str(gt))
        assert code == 0 and "occupied = " in out
        code, out, _ = run(capsys, "compare", str(gt), str(gt), "--out-report", str(tmp_path / "r.txt"))
        assert code == 0
        assert "missed = 0" in out and "incorrect = 0" in out

    def test_info(self, tmp_path, capsys):
        t = OccupancyOctree()
        t.apply_update((0, 0, 0), 0.93)
        t.save(tmp_path / "m.mmot")
        code, out, _ = run(capsys, "info", str(tmp_path / "m.mmot"))
        assert code == 0 and "nodes = 1" in out and "occupied = 1" in out

    def test_info_truncated(self, tmp_path, capsys):
        t = OccupancyOctree()
        t.apply_update((0, 0, 0), 0.93)
        data = t.serialize()
        (tmp_path / "m.mmot").write_bytes(data[:-3])
        code, _, err = run(capsys, "info", str(tmp_path / "m.mmot"))
        assert code == 3 and "offset" in err

    def test_info_missing_file(self, tmp_path, capsys):
        code, _, _ = run(capsys, "info", str(tmp_path / "nope.mmot"))
        assert code == 4

    def test_usage_errors(self, capsys):
        code, _, err = run(capsys)
        assert code == 2 and "usage" in err
        with pytest.raises(SystemExit) as exc:
            main(["curves"])
        assert exc.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_backend_info_module_entry(self):
        res = subprocess.run([sys.executable, "-m", "mmot", "--backend-info"], capture_output=True, text=True)
        assert res.returncode == 0 and res.stdout.strip() in ("compiled", "python")
