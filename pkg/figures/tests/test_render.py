import json
import subprocess
import sys

import pytest

from gmshadow_figures import FigureSpec, SchemaError, UsageError, render
from gmshadow_figures.cli import main


@pytest.fixture(scope="session")
def run_dir(tmp_path_factory):
    """A real run produced through the primary package's CLI."""
    root = tmp_path_factory.mktemp("figrun")
    config = {
        "grid_nodes": 257, "grid_min_spacing": 1e-4, "c_dt": 2e-2,
        "dt_max": 2e-6, "blowup_threshold": 1e8, "frame_nodes": 1024,
    }
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(config))
    out = root / "run"
    proc = subprocess.run(
        [sys.executable, "-m", "gmshadow.cli", "simulate",
         "--config", str(cfg_path), "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.mark.parametrize("kind", ["profile-overlay", "theta", "rate-fit",
                                  "lk-scaling", "margins"])
def test_all_kinds_render(run_dir, tmp_path, kind):
    out = tmp_path / f"{kind}.svg"
    path = render(FigureSpec(run_dir=str(run_dir), kind=kind,
                             out_path=str(out)))
    assert path.exists()
    assert path.stat().st_size > 1000


def test_svg_rerender_text_identical(run_dir, tmp_path):
    spec_a = FigureSpec(run_dir=str(run_dir), kind="theta",
                        out_path=str(tmp_path / "a.svg"))
    spec_b = FigureSpec(run_dir=str(run_dir), kind="theta",
                        out_path=str(tmp_path / "b.svg"))
    a = render(spec_a).read_text()
    b = render(spec_b).read_text()
    assert a == b


def test_png_renders(run_dir, tmp_path):
    out = tmp_path / "theta.png"
    render(FigureSpec(run_dir=str(run_dir), kind="theta",
                      out_path=str(out), fmt="png"))
    assert out.stat().st_size > 1000


def test_rate_fit_annotation_matches_report(run_dir, tmp_path):
    with open(run_dir / "reports" / "diagnostics.json") as fh:
        slope = json.load(fh)["rate_fit"]["slope"]
    out = tmp_path / "rate.svg"
    render(FigureSpec(run_dir=str(run_dir), kind="rate-fit",
                      out_path=str(out)))
    text = out.read_text()
    assert repr(slope) in text  # annotated value is the report value, verbatim


def test_profile_overlay_has_three_curve_pairs(run_dir, tmp_path):
    out = tmp_path / "overlay.svg"
    render(FigureSpec(run_dir=str(run_dir), kind="profile-overlay",
                      out_path=str(out)))
    text = out.read_text()
    assert text.count("W at s =") == 3
    assert text.count("profile at s =") == 3


def test_theta_annotation_matches_report(run_dir, tmp_path):
    with open(run_dir / "reports" / "diagnostics.json") as fh:
        theta_star = json.load(fh)["theta"]["theta_star"]
    out = tmp_path / "theta.svg"
    render(FigureSpec(run_dir=str(run_dir), kind="theta", out_path=str(out)))
    assert repr(theta_star) in out.read_text()


def test_unknown_kind_usage_error(run_dir, tmp_path):
    with pytest.raises(UsageError):
        FigureSpec(run_dir=str(run_dir), kind="pie-chart",
                   out_path=str(tmp_path / "x.svg"))


def test_missing_column_schema_error(run_dir, tmp_path):
    broken = tmp_path / "broken_run"
    broken.mkdir()
    (broken / "manifest.json").write_text(
        json.dumps({"config": {"params": {"p": 2.0}}}))
    (broken / "timeseries.csv").write_text("t,dt\n0,1\n")
    (broken / "reports").mkdir()
    (broken / "reports" / "diagnostics.json").write_text("{}")
    with pytest.raises(SchemaError) as err:
        render(FigureSpec(run_dir=str(broken), kind="rate-fit",
                          out_path=str(tmp_path / "x.svg")))
    assert "sup_u" in str(err.value) or "rate_fit" in str(err.value)


def test_not_a_run_dir(tmp_path):
    with pytest.raises(SchemaError):
        render(FigureSpec(run_dir=str(tmp_path), kind="theta",
                          out_path=str(tmp_path / "x.svg")))


def test_cli_roundtrip(run_dir, tmp_path, capsys):
    out = tmp_path / "cli.svg"
    code = main(["--run", str(run_dir), "--kind", "margins",
                 "--out", str(out)])
    assert code == 0
    assert out.exists()


def test_cli_usage_error(run_dir, tmp_path):
    code = main(["--run", str(run_dir), "--kind", "nonsense",
                 "--out", str(tmp_path / "x.svg")])
    assert code == 2
