"""Run the full pipeline on the bundled four-cell fixture city and print
the manifest and the analysis summary.

Run:  python3 demos/04_fixture_pipeline.py
"""
import json
import tempfile
from pathlib import Path

from morphogrid.cli import main

CONFIG = Path(__file__).parent.parent / "tests" / "fixtures" / "fixture_city.cfg"

with tempfile.TemporaryDirectory() as tmp:
    code = main(["-c", str(CONFIG), "-o", tmp, "run"])
    assert code == 0, f"pipeline exited with {code}"
    manifest = json.loads((Path(tmp) / "manifest.json").read_text())
    print(f"seed: {manifest['seed']}")
    print(f"artifacts ({len(manifest['artifacts'])}):")
    for name in sorted(manifest["artifacts"]):
        print(f"  {name}")
    analysis = json.loads((Path(tmp) / "analysis.json").read_text())
    print("\nstats by category:")
    for cat, stats in analysis["stats_by_category"].items():
        print(f"  {cat:>10}: mean={stats['mean']:.1f} n={stats['n']}")
