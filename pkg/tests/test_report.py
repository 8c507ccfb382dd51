from veloqual.quality import SurfaceGrid
from veloqual.report import render_report, write_cells_csv

from conftest import make_grid


def test_empty_grid_writes_header_only_csv(tmp_path, params):
    written = render_report(SurfaceGrid(params=params), tmp_path)
    assert [p.name for p in written] == ["cells.csv"]
    lines = (tmp_path / "cells.csv").read_text(encoding="utf-8").strip().split("\n")
    assert len(lines) == 1


def test_csv_row_per_cell_sorted(tmp_path, params):
    grid = make_grid(params, {(2, 1): [1, 0, 0, 0, 0], (0, 0): [0, 0, 0, 0, 3], (-1, 5): [0, 2, 0, 0, 0]})
    count = write_cells_csv(grid, tmp_path / "cells.csv")
    assert count == 3
    lines = (tmp_path / "cells.csv").read_text(encoding="utf-8").strip().split("\n")[1:]
    keys = [tuple(map(int, ln.split(",")[:2])) for ln in lines]
    assert keys == sorted(keys)


def test_figures_rendered_for_nonempty_grid(tmp_path, params):
    grid = make_grid(params, {(i, 0): [5 - i, 0, 0, 0, i] for i in range(5)})
    written = render_report(grid, tmp_path, top=4)
    names = {p.name for p in written}
    assert names == {"cells.csv", "quality_map.png", "distributions.png"}
    for p in written:
        assert p.stat().st_size > 0
