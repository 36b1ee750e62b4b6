import csv
import io
import subprocess
import sys
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import numpy as np
import pytest

from squintsense.cli import main
from squintsense.scenario import load_scenario


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        try:
            code = main(argv)
        except SystemExit as exc:  # argparse usage errors
            code = exc.code
    return code, out.getvalue(), err.getvalue()


def read_pattern(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    freqs = sorted({float(r["freq_hz"]) for r in rows})
    angles = sorted({float(r["angle_deg"]) for r in rows})
    gain = np.array([float(r["gain"]) for r in rows]).reshape(len(freqs), len(angles))
    return np.array(freqs), np.array(angles), gain


def ridges(row, m, fraction=0.9):
    """Number of separate angle intervals where the gain is near its maximum M."""
    above = row >= fraction * m
    return int(np.sum(above[1:] & ~above[:-1]) + above[0])


class TestBeampattern:
    def test_half_wavelength_single_trajectory(self, tmp_path):
        out = tmp_path / "p1.csv"
        code, _, _ = run(["beampattern", "--p", "1", "--theta0", "-30", "--thetac", "30", "--n", "7",
                          "--angle-grid", "3601", "--out", str(out)])
        assert code == 0
        freqs, angles, gain = read_pattern(out)
        assert len(freqs) == 7
        assert all(ridges(g, 128) == 1 for g in gain)
        peaks = angles[np.argmax(gain, axis=1)]
        assert np.all(np.diff(peaks) > 0)

    def test_p3_three_disjoint_trajectories(self, tmp_path):
        out = tmp_path / "p3.csv"
        code, _, _ = run(["beampattern", "--p", "3", "--bw", "6GHz", "--theta0", "-10", "--thetac", "10",
                          "--n", "7", "--angle-grid", "7201", "--out", str(out)])
        assert code == 0
        _, angles, gain = read_pattern(out)
        assert all(ridges(g, 128) >= 3 for g in gain)

    def test_seven_gain_ridges(self, tmp_path):
        out = tmp_path / "p2.csv"
        run(["beampattern", "--p", "2", "--theta0", "-25", "--thetac", "5", "--n", "7",
             "--angle-grid", "7201", "--out", str(out)])
        freqs, angles, gain = read_pattern(out)
        main_peaks = [angles[np.argmax(np.where(angles < 10, g, 0))] for g in gain]
        assert len(set(np.round(main_peaks, 2))) == 7

    def test_fixed_phase_shifters_default(self):
        code, out, _ = run(["beampattern", "--angle-grid", "5", "--n", "2"])
        assert code == 0
        assert out.splitlines()[0] == "freq_hz,angle_deg,gain"
        assert len(out.splitlines()) == 1 + 2 * 5

    def test_invalid_flag(self):
        assert run(["beampattern", "--m", "1"])[0] == 2
        assert run(["beampattern", "--angle-grid", "1"])[0] == 2
        assert run(["beampattern", "--fc", "fast"])[0] == 2

    def test_io_error(self, tmp_path):
        assert run(["beampattern", "--out", str(tmp_path / "no" / "x.csv")])[0] == 1


class TestSense:
    def test_squint_noiseless(self):
        code, out, _ = run(["sense", "--method", "squint", "--user-angle", "10", "--snr", "inf"])
        assert code == 0
        est = float(out.split("estimate_deg:")[1].split()[0])
        assert abs(est - 10) < 0.1
        assert "blocks_used: 1" in out

    def test_split(self):
        code, out, _ = run(["sense", "--method", "split", "--p", "2", "--user-angle", "-30", "--snr", "20"])
        assert code == 0
        assert "blocks_used: 2" in out
        assert out.count("candidates_deg[") == 2

    def test_outside_range(self):
        code, _, err = run(["sense", "--method", "squint", "--user-angle", "60", "--theta0", "0",
                            "--thetac", "20"])
        assert code == 3
        assert "not in range" in err

    def test_split_with_half_wavelength(self):
        assert run(["sense", "--method", "split", "--p", "1", "--user-angle", "10"])[0] == 2

    def test_bad_user_angle(self):
        assert run(["sense", "--method", "squint", "--user-angle", "95"])[0] == 2

    def test_seeded_noise_is_reproducible(self):
        argv = ["sense", "--method", "squint", "--user-angle", "12", "--snr", "0", "--seed", "5"]
        assert run(argv)[1] == run(argv)[1]


SWEEP = """\
output: {out}
method: squint-only
base: {{spacing_ratio: 1, carrier_hz: 30GHz, bandwidth_hz: 6GHz}}
aod_range_deg: [-20, 20]
sensing_range_deg: [-30, 30]
snr_db_list: [0, 20]
n_list: [64]
m_list: [16]
trials: 8
seed: 2
"""


class TestSweep:
    def test_runs_and_writes(self, tmp_path):
        out = tmp_path / "nested" / "r.csv"
        path = tmp_path / "s.yaml"
        path.write_text(SWEEP.format(out=out))
        code, _, err = run(["sweep", str(path)])
        assert code == 0
        assert len(out.read_text().splitlines()) == 3
        assert "SNR=20" in err

    def test_dry_run_round_trip(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text(SWEEP.format(out=tmp_path / "r.csv"))
        code, out, _ = run(["sweep", "--dry-run", str(path)])
        assert code == 0
        assert not (tmp_path / "r.csv").exists()
        assert load_scenario(out) == load_scenario(path.read_text())

    def test_missing_key(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text(SWEEP.format(out="r.csv").replace("trials: 8\n", ""))
        code, _, err = run(["sweep", str(path)])
        assert code == 2
        assert "trials" in err

    def test_parse_error_reports_line_and_column(self, tmp_path):
        path = tmp_path / "s.yaml"
        path.write_text(SWEEP.format(out="r.csv") + "bogus: 1\n")
        code, _, err = run(["sweep", str(path)])
        assert code == 2
        assert f"{path}:11:1:" in err

    def test_missing_file(self, tmp_path):
        assert run(["sweep", str(tmp_path / "nope.yaml")])[0] == 2

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        path = tmp_path / "s.yaml"
        path.write_text(SWEEP.format(out=blocker / "r.csv"))
        assert run(["sweep", str(path)])[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "squintsense", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "beampattern" in proc.stdout


@pytest.mark.parametrize("name", ["fig5_squint_full.yaml", "fig8_split_p2.yaml"])
def test_shipped_dry_run(name):
    path = Path(__file__).parent.parent / "scenarios" / name
    assert run(["sweep", "--dry-run", str(path)])[0] == 0
