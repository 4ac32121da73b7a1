"""Run the offline acceptance protocols (stream-length trend + eps ablation).

Usage: python scripts/run_offline_ablation.py [outdir]
"""

from __future__ import annotations

import sys
from pathlib import Path

from semcache.cli import main

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/offline")
ROOT = Path(__file__).resolve().parents[1]

rc = main(
    [
        "offline-ablation",
        "--config", str(ROOT / "configs" / "offline_acceptance.toml"),
        "--out", str(OUT / "trend"),
    ]
)
rc |= main(
    [
        "offline-ablation",
        "--config", str(ROOT / "configs" / "offline_eps_ablation.toml"),
        "--out", str(OUT / "eps"),
    ]
)
sys.exit(rc)
