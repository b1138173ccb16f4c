"""End-to-end run through the CLI: synthesize, preprocess, ensemble, forecast.

Run:  python3 demos/full_pipeline.py
Creates ./demo_run/ with every artifact the harness produces.
"""

import shutil
import sys
from pathlib import Path

from qforecast.cli import main

run_dir = Path("demo_run")
if run_dir.exists():
    shutil.rmtree(run_dir)

steps = [
    ["synth", "--hours", "600", "--seed", "9", "--out", str(run_dir / "weather.csv")],
    ["preprocess", "--run", str(run_dir), "--csv", str(run_dir / "weather.csv"), "--force"],
    ["ensemble", "--run", str(run_dir), "--arch", "genhyb", "--inline",
     "--epochs", "5", "--seed", "9"],
    ["forecast", "--run", str(run_dir), "--horizon", "24"],
    ["evaluate", "--run", str(run_dir)],
    ["rerun", "--manifest", str(run_dir / "ensemble-genhyb" / "manifest.json")],
]

for argv in steps:
    print(f"\n$ qforecast {' '.join(argv)}")
    code = main(argv)
    if code != 0:
        sys.exit(code)

print("\nartifacts:")
for path in sorted(run_dir.rglob("*")):
    if path.is_file():
        print(" ", path)
