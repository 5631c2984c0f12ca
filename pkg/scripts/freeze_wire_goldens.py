"""Freeze the serialized generation wire requests as byte goldens.

The bodies are composed here by hand from the workflow configs and scenario
prompts, so the goldens stay independent of the adapter code they check.
Serialization mirrors the transport layer: json.dumps with default separators,
UTF-8.  Rerun after changing the generation prompts or configs.
"""

import base64
import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "src" / "maestro" / "data"
OUT = ROOT / "tests" / "data"


def node_config(workflow_file: str, node_name: str) -> dict:
    doc = json.loads((DATA / "workflows" / workflow_file).read_text(encoding="utf-8"))
    node = next(n for n in doc["nodes"] if n["name"] == node_name)
    return node["config"]


def scenario_query(scenario_file: str) -> str:
    doc = json.loads((DATA / "scenarios" / scenario_file).read_text(encoding="utf-8"))
    return doc["turns"][0]["input"]["text"]


def main() -> None:
    image_cfg = node_config("image_gen.json", "Image Generate Agent")
    video_cfg = node_config("video_gen.json", "Video Generate Agent")

    text_to_image = {
        "model": image_cfg["model"],
        "input": {
            "prompt": scenario_query("s3_image.json") + "\n" + image_cfg["query_suffix"],
        },
    }

    png = (DATA / "scenarios" / "media" / "sample_code.png").read_bytes()
    b64 = base64.b64encode(png).decode("ascii")
    image_to_video = {
        "model": video_cfg["model"],
        "input": {
            "prompt": scenario_query("s4_video.json") + "\n" + video_cfg["query_suffix"],
            "image": f"data:image/png;base64,{b64}",
        },
    }

    OUT.mkdir(parents=True, exist_ok=True)
    for name, body in (
        ("wire_text_to_image.json", text_to_image),
        ("wire_image_to_video.json", image_to_video),
    ):
        raw = json.dumps(body).encode("utf-8")
        (OUT / name).write_bytes(raw)
        print(f"{name}: {len(raw)} bytes, model={body['model']}")


if __name__ == "__main__":
    main()
