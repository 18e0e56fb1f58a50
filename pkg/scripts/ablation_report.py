"""Print ablation deltas and family gain shares from an existing run directory.

    python3 scripts/ablation_report.py runs/synthetic20
"""
import json
import sys
from pathlib import Path

import pandas as pd


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    run = Path(argv[0])
    table = pd.read_csv(run / "ablation" / "ablation.csv")
    for protocol, grp in table.groupby("protocol"):
        full = grp.loc[grp["variant"] == "full", "auprc_mean"]
        grp = grp.set_index("variant")[["auprc_mean", "auprc_std", "auroc_mean"]]
        if len(full):
            grp["delta_vs_full"] = grp["auprc_mean"] - float(full.iloc[0])
        print(f"[{protocol}]")
        print(grp.sort_values("auprc_mean", ascending=False).round(4).to_string())
        print()
    imp = run / "importance" / "importance.json"
    if imp.exists():
        doc = json.loads(imp.read_text())
        print("gain share by family (seed mean):")
        for fam, share in sorted(doc["mean"].items(), key=lambda kv: -kv[1]):
            print(f"  {fam:<20s} {share:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
