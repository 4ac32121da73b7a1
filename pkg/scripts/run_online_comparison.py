"""Run the online T=5000 policy comparison (treatment, frozen, baselines).

Usage: python scripts/run_online_comparison.py [outdir]
"""

from __future__ import annotations

import sys
from pathlib import Path

from semcache.cli import main

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/online")
ROOT = Path(__file__).resolve().parents[1]

sys.exit(
    main(
        [
            "online-run",
            "--config", str(ROOT / "configs" / "online_acceptance.toml"),
            "--out", str(OUT),
        ]
    )
)
