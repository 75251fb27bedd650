from pathlib import Path

import pytest

from rowsim_plots import FigureSpec, PlotError, render
from rowsim_plots.cli import main

GOLDEN = Path(__file__).parent / "golden"


def spec_for(kind, out, **inputs):
    return FigureSpec(kind, {k: str(GOLDEN / v) for k, v in inputs.items()},
                      str(out))


ALL_KINDS = [
    ("acmin-distribution", dict(results="sweep_results.csv")),
    ("acmin-sweep", dict(summary="sweep_summary.csv")),
    ("sidedness-difference", dict(single="crossover_single_summary.csv",
                                  double="crossover_double_summary.csv")),
    ("poc-bars", dict(poc="poc_summary.csv")),
]


@pytest.mark.parametrize("kind,inputs", ALL_KINDS)
def test_renders_all_kinds_from_golden_csvs(kind, inputs, tmp_path):
    out = render(spec_for(kind, tmp_path / f"{kind}.png", **inputs))
    assert out.exists() and out.stat().st_size > 0


def test_sweep_plot_is_log_log_with_reference_line(tmp_path):
    # inspect the axes before saving
    from rowsim_plots.figures import _render_sweep

    fig = _render_sweep(spec_for("acmin-sweep", tmp_path / "s.png",
                                 summary="sweep_summary.csv"))
    ax = fig.axes[0]
    assert ax.get_xscale() == "log"
    assert ax.get_yscale() == "log"
    ref_lines = [ln for ln in ax.lines
                 if ln.get_linestyle() == "--" and ln.get_color() == "red"]
    assert ref_lines and ref_lines[0].get_ydata()[0] == 1.0


def test_deterministic_bytes(tmp_path):
    a = render(spec_for("acmin-sweep", tmp_path / "a.png",
                        summary="sweep_summary.csv"))
    b = render(spec_for("acmin-sweep", tmp_path / "b.png",
                        summary="sweep_summary.csv"))
    assert a.read_bytes() == b.read_bytes()


def test_empty_csv_is_error_and_writes_nothing(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("t_on_ns,mean,min,max\n")
    out = tmp_path / "out.png"
    with pytest.raises(PlotError):
        render(FigureSpec("acmin-sweep", {"summary": str(empty)}, str(out)))
    assert not out.exists()


def test_missing_column_is_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t_on_ns,mean\n36,100\n")
    with pytest.raises(PlotError, match="min"):
        render(FigureSpec("acmin-sweep", {"summary": str(bad)},
                          str(tmp_path / "out.png")))


def test_unknown_kind_rejected():
    with pytest.raises(PlotError):
        FigureSpec("pie-chart", {}, "x.png")


class TestCli:
    def test_render_via_cli(self, tmp_path):
        out = tmp_path / "fig.png"
        rc = main(["acmin-sweep",
                   "--csv", f"summary={GOLDEN / 'sweep_summary.csv'}",
                   "-o", str(out)])
        assert rc == 0 and out.exists()

    def test_empty_input_nonzero_exit(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("t_on_ns,mean,min,max\n")
        rc = main(["acmin-sweep", "--csv", f"summary={empty}",
                   "-o", str(tmp_path / "fig.png")])
        assert rc == 1
        assert "no data" in capsys.readouterr().err

    def test_bad_role_syntax(self, tmp_path):
        assert main(["poc-bars", "--csv", "nonsense",
                     "-o", str(tmp_path / "f.png")]) == 2
