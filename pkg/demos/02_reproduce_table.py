"""Feed published PID gains back into the plant and diff the reported figures.

Each row of the bundled reference table is simulated; every published metric
is compared against its tolerance and the row is flagged when any figure
disagrees.  The CSV report is written to the working directory.
"""
from pathlib import Path

from avrpid import bench

entries = bench.load_reference_table()
report = bench.reproduce_table(entries)

for row in report.rows:
    off = [c.metric for c in row.comparisons if not c.passed]
    detail = f"mismatch on {', '.join(off)}" if off else f"{len(row.comparisons)} figures agree"
    print(f"{row.algorithm:>6} [{row.objective}] {row.status:<18} {detail}")

out = Path("table_report.csv")
bench.emit_report(report, out)
print("wrote", out)
