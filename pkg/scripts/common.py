"""Shared helpers for the experiment scripts."""
import argparse
import json
from pathlib import Path

from gmsransac.bench import records_to_text


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--hardware", default="unspecified")
    return p


def save(out_dir, stem, records, summary=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}.csv").write_text(records_to_text(records))
    if summary is not None:
        (out / f"{stem}.json").write_text(json.dumps(summary, indent=2, default=str) + "\n")
    print(f"wrote {out / stem}.csv ({len(records)} rows)")
