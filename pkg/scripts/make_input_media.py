"""Generate the committed binary scenario inputs.

One-time generator; outputs are committed and referenced by digest in the
frozen backend fixtures, so rerunning this script requires re-running
freeze_backend_fixtures.py afterwards.
"""

import math
import pathlib
import struct
import wave

from PIL import Image, ImageDraw

ROOT = pathlib.Path(__file__).resolve().parent.parent
MEDIA = ROOT / "src/maestro/data/scenarios/media"

SKETCH_CODE = '''from datetime import date
from lunarcalendar import LunarDate

def solar_to_lunar(year, month, day):
    """Convert a solar calendar date to a lunar calendar date.
    :param year: Year in the solar calendar
    :param month: Month in the solar calendar
    :param day: Day in the solar calendar
    :return: A tuple representing the lunar calendar date (year, month, day)"""

    # Create a date object for the solar date
    solar_date = date(year, month, day)

    # TODO: convert the solar date to a lunar date and return it
'''


def make_code_image() -> None:
    lines = SKETCH_CODE.splitlines()
    img = Image.new("RGB", (640, 16 * (len(lines) + 2)), "white")
    draw = ImageDraw.Draw(img)
    for i, line in enumerate(lines):
        draw.text((8, 8 + 16 * i), line, fill="black")
    img.save(MEDIA / "sample_code.png", optimize=True)


def make_question_audio() -> None:
    # half a second of a 440 Hz tone; the transcription mock keys on bytes,
    # not on actual speech content
    rate = 16000
    with wave.open(str(MEDIA / "population_question.wav"), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        for i in range(rate // 2):
            sample = int(12000 * math.sin(2 * math.pi * 440 * i / rate))
            w.writeframes(struct.pack("<h", sample))


if __name__ == "__main__":
    MEDIA.mkdir(parents=True, exist_ok=True)
    make_code_image()
    make_question_audio()
    for f in sorted(MEDIA.iterdir()):
        print(f.name, f.stat().st_size, "bytes")
