"""Walk the 20-product air conditioner fixture through every stage offline.

    python demos/replay_pipeline.py [run_dir]

Agent answers come from the recorded replay store, so no API key is needed.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from kgforge.cli import main

ROOT = Path(__file__).resolve().parents[1]
CONFIG = ROOT / "fixtures" / "aircon20" / "kgforge.toml"


def run(run_dir: Path) -> None:
    args = ["--config", str(CONFIG), "--run-dir", str(run_dir)]
    for stage in (["ontology", "build"], ["ontology", "refine"], ["populate"]):
        print(f"$ kgforge {' '.join(stage)}")
        code = main([*stage, *args])
        if code:
            sys.exit(code)

    trace = json.loads((run_dir / "trace.json").read_text())["traces"][0]
    print(f"\nexpansion stopped by {trace['stop_reason']}:")
    for it in trace["iterations"]:
        print(f"  {it['index']}. {it['stage']:<9} +{it['new_classes']} classes +{it['new_properties']} properties")

    refinement = json.loads((run_dir / "refinement.json").read_text())
    for old, new in refinement["rename_map"].items():
        print(f"refined {old.rsplit('#', 1)[-1]} -> {', '.join(n.rsplit('#', 1)[-1] for n in new)}")

    print("\n$ kgforge report")
    main(["report", *args])


if __name__ == "__main__":
    if len(sys.argv) > 1:
        run(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            run(Path(tmp))
