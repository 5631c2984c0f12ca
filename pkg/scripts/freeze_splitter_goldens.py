"""Regenerate tests/data/splitter_goldens.json from the reference oracle.

Run from the repo root. The goldens are frozen; rerun only when the pinned
splitting rules themselves change, never to make the library pass.
"""

import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from oracles import oracle_split  # noqa: E402

CASES = [
    ("dress_code", ROOT / "src/maestro/data/corpus/dress_code.txt", 120, 20),
    ("travel_policy", ROOT / "tests/data/fixture_travel_policy.txt", 80, 0),
    ("build_log", ROOT / "tests/data/fixture_build_log.txt", 64, 16),
]


def main():
    goldens = {}
    for name, path, chunk_size, overlap in CASES:
        text = path.read_text(encoding="utf-8")
        chunks = oracle_split(text, chunk_size, overlap)
        goldens[name] = {
            "file": str(path.relative_to(ROOT)),
            "chunk_size": chunk_size,
            "overlap": overlap,
            "chunks": [{"char_offset": off, "text": t} for off, t in chunks],
        }
    out = ROOT / "tests/data/splitter_goldens.json"
    out.write_text(json.dumps(goldens, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    total = sum(len(g["chunks"]) for g in goldens.values())
    print(f"wrote {out} ({total} chunks across {len(goldens)} fixtures)")


if __name__ == "__main__":
    main()
