"""Driving the command line in-process: sweep, inspect, verify.

A run writes three artifacts per grid cell: a trace (one JSON line per
round, enough to replay the run), a report (metrics plus every bound row
with its verdict), and a shared summary.csv.  ``verify`` rebuilds a
report from the trace alone and must reproduce the original byte for
byte; that replay is the integrity story, so this script checks it with
a direct byte comparison rather than trusting the exit code.
"""

import json
import tempfile
from pathlib import Path

import yaml

from driftlab.cli import main

# algorithm tau is the comparator path budget fed to the bound checks; it
# stays above every swept drift so all premise-gated rows apply
config = {
    "environment": {"kind": "drifting-quadratic", "params": {"tau": 1.0}},
    "T": 200,
    "seeds": [0, 1],
    "algorithm": {"name": "diomd", "schedule": "adaptive", "tau": 10.0},
    "sweep": {"environment.params.tau": [0.5, 8.0]},
}

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg = tmp / "config.yaml"
    cfg.write_text(yaml.safe_dump(config))
    out = tmp / "out"

    print("$ driftlab sweep config.yaml --output-dir out")
    assert main(["sweep", str(cfg), "--output-dir", str(out)]) == 0

    print()
    print("artifacts:")
    for p in sorted(out.iterdir()):
        print(f"  {p.name}  ({p.stat().st_size} bytes)")

    report_path = sorted(out.glob("*.report.json"))[0]
    report = json.loads(report_path.read_text())
    print()
    print(f"inside {report_path.name}:")
    m = report["metrics"]
    shown = {k: m[k] for k in ("rounds", "regret", "ct", "vt_signed", "lam_final")}
    print("  metrics:", "  ".join(
        f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
        for k, v in shown.items()))
    print(f"  bounds passed: {report['bounds_summary']['passed']}"
          f"/{report['bounds_summary']['checked']}")

    trace = report_path.with_name(report_path.name.replace(".report.json",
                                                           ".trace.jsonl"))
    redo = tmp / "redo"
    print()
    print(f"$ driftlab verify {trace.name} --output-dir redo")
    assert main(["verify", str(trace), "--output-dir", str(redo)]) == 0
    rebuilt = redo / report_path.name
    same = rebuilt.read_bytes() == report_path.read_bytes()
    print(f"replayed report byte-identical to the original: {same}")
    assert same
