"""The IF x noise grid from a key = value file, written to a results directory."""

import sys
from pathlib import Path

from balsel import harness

spec = Path(__file__).resolve().parent.parent / "configs" / "desk_grid.ini"
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("grid_out")

grid = harness.load_grid(spec)
print("cells:", grid.cells(), " methods:", grid.methods)
table = harness.run_grid(grid, out)
print(table.format())
print("wrote", out / "results.csv", "and", out / "deltas.csv")
