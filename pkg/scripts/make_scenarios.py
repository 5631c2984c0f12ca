"""Write the bundled scenario files.

Kept as a script so the multi-line code block in s1 stays readable here
instead of hand-escaped inside JSON.
"""

import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "src/maestro/data/scenarios"

COMPLETED_CODE = '''from datetime import date
from lunarcalendar import LunarDate

def solar_to_lunar(year, month, day):
    """Convert a solar calendar date to a lunar calendar date.
    :param year: Year in the solar calendar
    :param month: Month in the solar calendar
    :param day: Day in the solar calendar
    :return: A tuple representing the lunar calendar date (year, month, day)"""

    # Create a date object for the solar date
    solar_date = date(year, month, day)

    # Convert the solar date to a lunar date
    lunar_date = LunarDate.fromSolarDate(solar_date.year,
    solar_date.month, solar_date.day)

    # Return the lunar date as a tuple
    return (lunar_date.year, lunar_date.month, lunar_date.day)'''

SCENARIOS = {
    "s1_code": {
        "id": "s1_code",
        "workflow": "code_review",
        "rerun_identical": True,
        "turns": [
            {
                "input": {
                    "text": "Analyze the image and complete the code",
                    "image": "media/sample_code.png",
                },
                "expect": {
                    "worker_order": ["Senior Programmer", "Quality Assurance Engineer"],
                    "final_contains": [COMPLETED_CODE, "approved"],
                    "degraded": False,
                    "max_seconds": 2.0,
                },
            }
        ],
    },
    "s2_rag": {
        "id": "s2_rag",
        "workflow": "rag",
        "rerun_identical": True,
        "turns": [
            {
                "input": {"text": "What is the men's dress code?"},
                "expect": {
                    "worker_order": ["RAG Contents Searcher"],
                    "tool_calls": ["search_dress_code"],
                    "final_source": "rag",
                    "final_contains": [
                        "collared shirts or knit polos",
                        "suit and tie",
                    ],
                    "degraded": False,
                },
            },
            {
                "input": {"text": "What is the population of South Korea in 2024?"},
                "expect": {
                    "worker_order": ["Web Searcher"],
                    "tool_calls": ["google-custom-search"],
                    "final_source": "web",
                    "final_contains": ["51.7 million"],
                    "degraded": False,
                },
            },
            {
                "input": {"audio": "media/population_question.wav"},
                "expect": {
                    "worker_order": ["Web Searcher"],
                    "tool_calls": ["google-custom-search"],
                    "final_source": "web",
                    "final_contains": ["51.7 million"],
                    "transcribed": True,
                    "final_matches_turn": 2,
                    "degraded": False,
                },
            },
        ],
    },
    "s3_image": {
        "id": "s3_image",
        "workflow": "image_gen",
        "rerun_identical": True,
        "turns": [
            {
                "input": {
                    "text": (
                        "Wait for the bus. A snowy winter scene with large "
                        "snowflakes falling from the sky. a stunning girl sat on "
                        "a bench on the bus platform and looked into the "
                        "distance. She was wearing a dark thick coat and a "
                        "bright red scarf."
                    )
                },
                "expect": {
                    "worker_order": ["Image Generate Agent"],
                    "final_media_type": "image/png",
                    "final_source": "generation",
                    "final_contains": ["Generated image for:"],
                    "degraded": False,
                },
            }
        ],
    },
    "s4_video": {
        "id": "s4_video",
        "workflow": "video_gen",
        "rerun_identical": True,
        "turns": [
            {
                "input": {"text": "A dog walks on the grass, realistic style video"},
                "expect": {
                    "worker_order": ["Video Generate Agent"],
                    "final_media_type": "video/mp4",
                    "final_source": "generation",
                    "final_contains": ["Generated video for:"],
                    "degraded": False,
                },
            }
        ],
    },
}

if __name__ == "__main__":
    for name, body in SCENARIOS.items():
        path = OUT / f"{name}.json"
        path.write_text(json.dumps(body, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        print("wrote", path.relative_to(ROOT))
