import ast
import importlib
import math
import pathlib

import numpy as np
import pytest

R = importlib.import_module("cranfigs.render")

HEADER = "seed,K,gamma_db,fronthaul_cap,algorithm,feasible,power_w,objective_f,active_rrhs,socp_solves,wall_time_ms"


def write_csv(path, rows, header=HEADER):
    path.write_text("\n".join([header] + rows) + "\n")
    return path


def row(seed=0, K=6, gamma=0.0, cap="4", algorithm="inflation", feasible=1,
        power=20.0, active=5, solves=7):
    obj = "" if not feasible else f"{power - 8.6:.9g}"
    pw = "" if not feasible else f"{power:.9g}"
    return f"{seed},{K},{gamma:.9g},{cap},{algorithm},{int(feasible)},{pw},{obj},{active},{solves},0"


def test_plotting_package_never_imports_solver():
    package_dir = pathlib.Path(R.__file__).parent
    for source in package_dir.rglob("*.py"):
        tree = ast.parse(source.read_text())
        for node in ast.walk(tree):
            if isinstance(node, ast.Import):
                names = [alias.name for alias in node.names]
            elif isinstance(node, ast.ImportFrom):
                names = [node.module or ""]
            else:
                continue
            for name in names:
                assert not name.startswith("cranopt"), f"{source.name} imports {name}"


def test_missing_column_is_named(tmp_path):
    bad_header = HEADER.replace("power_w,", "")
    src = write_csv(tmp_path / "bad.csv",
                    ["0,6,0,4,inflation,1,12,5,7,0"], header=bad_header)
    with pytest.raises(R.SchemaError, match="power_w"):
        R.load_rows(src)


def test_unknown_figure_rejected():
    with pytest.raises(ValueError, match="spectral_vs_sinr"):
        R.figure_series([], "spectral_vs_sinr")


def test_series_mean_and_stderr(tmp_path):
    src = write_csv(tmp_path / "s.csv", [
        row(seed=0, gamma=0.0, power=10.0),
        row(seed=1, gamma=0.0, power=14.0),
        row(seed=2, gamma=0.0, power=0.0, feasible=0),  # excluded
        row(seed=0, gamma=2.0, power=18.0),
    ])
    series = R.figure_series(R.load_rows(src), "power_vs_sinr")
    xs, means, ses = series[("inflation", 6)]
    assert list(xs) == [0.0, 2.0]
    assert means[0] == pytest.approx(12.0)
    # two samples: se = sd/sqrt(2) with ddof=1
    assert ses[0] == pytest.approx(np.std([10.0, 14.0], ddof=1) / math.sqrt(2))
    assert means[1] == pytest.approx(18.0) and ses[1] == 0.0


def test_mixed_cap_budget_plots_at_mean(tmp_path):
    src = write_csv(tmp_path / "c.csv", [row(cap="1;3", power=9.0)])
    series = R.figure_series(R.load_rows(src), "power_vs_fronthaul")
    xs, _, _ = series[("inflation", 6)]
    assert list(xs) == [2.0]


def test_single_point_draws_marker_without_line(tmp_path):
    src = write_csv(tmp_path / "one.csv", [row()])
    series = R.figure_series(R.load_rows(src), "power_vs_sinr")
    fig = R.build_figure(series, "power_vs_sinr")
    try:
        (ax,) = fig.axes
        assert len(ax.containers) == 1
        assert ax.containers[0].get_label() == "inflation (K=6)"
        data_line = ax.containers[0].lines[0]
        assert data_line.get_linestyle() in ("None", "none", "")
        assert data_line.get_marker() not in ("", "None", None)
    finally:
        import matplotlib.pyplot as plt

        plt.close(fig)


def test_greedy_curve_sits_below_baseline(tmp_path):
    rows = []
    for gamma, infl, lte in [(0.0, 13.5, 19.1), (2.0, 13.9, 21.3), (4.0, 14.2, 18.8)]:
        for seed, jitter in [(0, -0.5), (1, 0.5)]:
            rows.append(row(seed=seed, gamma=gamma, power=infl + jitter))
            rows.append(row(seed=seed, gamma=gamma, algorithm="lte_a",
                            power=lte + jitter, active=6))
    src = write_csv(tmp_path / "below.csv", rows)
    series = R.figure_series(R.load_rows(src), "power_vs_sinr")
    _, infl_means, _ = series[("inflation", 6)]
    _, lte_means, _ = series[("lte_a", 6)]
    assert np.all(infl_means < lte_means)


def test_baseline_active_line_is_flat_at_rrh_count(tmp_path):
    rows = [
        row(seed=s, cap=str(c), algorithm="lte_a", active=6)
        for c in (1, 2, 3) for s in (0, 1, 2)
    ]
    src = write_csv(tmp_path / "flat.csv", rows)
    series = R.figure_series(R.load_rows(src), "active_vs_fronthaul")
    xs, means, ses = series[("lte_a", 6)]
    assert list(xs) == [1.0, 2.0, 3.0]
    assert np.all(means == 6.0) and np.all(ses == 0.0)


def test_render_is_byte_deterministic(tmp_path):
    src = write_csv(tmp_path / "d.csv", [
        row(seed=s, gamma=g, power=10.0 + g + s) for g in (0.0, 2.0) for s in (0, 1)
    ])
    a = R.render(src, "power_vs_sinr", tmp_path / "a.svg")
    b = R.render(src, "power_vs_sinr", tmp_path / "b.svg")
    data = a.read_bytes()
    assert data == b.read_bytes()
    assert b"<svg" in data


def test_cli_round_trip(tmp_path):
    src = write_csv(tmp_path / "in.csv", [row(), row(seed=1, gamma=2.0, power=22.0)])
    out = tmp_path / "out.svg"
    assert R.main(["--csv", str(src), "--figure", "power_vs_sinr", "--out", str(out)]) == 0
    assert out.exists() and out.stat().st_size > 0


def test_cli_errors(tmp_path):
    out = tmp_path / "o.svg"
    assert R.main(["--csv", str(tmp_path / "nope.csv"),
                   "--figure", "power_vs_sinr", "--out", str(out)]) == 2
    bad = write_csv(tmp_path / "bad.csv", ["0,6,0,4,x,1,1,1,1,1"],
                    header=HEADER.replace("seed,", "id,"))
    assert R.main(["--csv", str(bad), "--figure", "power_vs_sinr", "--out", str(out)]) == 2
    with pytest.raises(SystemExit):
        R.main(["--csv", str(tmp_path / "in.csv"), "--figure", "bogus", "--out", str(out)])
