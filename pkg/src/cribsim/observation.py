"""The per-tick observation frame and its fixed binary layout.

Layout and sizes are identical at every step of every stage (fetal vision
is zeroed, never omitted), and no reward field exists anywhere. Binary
blocks are packed in the fixed order given by `layout_manifest`; the
touch bitfield uses MSB-first bit order (numpy packbits convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .body import N_PROPRIO, N_TOUCH
from .curriculum import Stage
from .scenario import Utterance
from .vision import VisionFrame

TOUCH_BYTES = (N_TOUCH + 7) // 8  # 264


@dataclass
class ObservationFrame:
    step: int
    sim_age: float
    stage: Stage
    episode: int
    vision: VisionFrame
    touch: np.ndarray          # (2110,) uint8 bits
    proprioception: np.ndarray  # (106,) float
    vestibular: np.ndarray     # (6,) float
    interoception: float
    audio: Utterance
    gaze_dir: np.ndarray       # (3,) float
    fixated_entity: Optional[int]

    def binary_blocks(self) -> dict[str, bytes]:
        """Fixed-order binary payload blocks."""
        vis = b"".join(img.to_bytes() for _, img in self.vision.retinas())
        return {
            "vision": vis,
            "touch": np.packbits(self.touch.astype(np.uint8)).tobytes(),
            "proprioception": self.proprioception.astype("<f4").tobytes(),
            "vestibular": self.vestibular.astype("<f4").tobytes(),
            "interoception": np.float32(self.interoception).tobytes(),
            "gaze_dir": self.gaze_dir.astype("<f4").tobytes(),
        }

    def header_fields(self) -> dict:
        return {
            "step": self.step,
            "sim_age": self.sim_age,
            "stage": self.stage.label,
            "episode": self.episode,
            "audio": {"token": self.audio.token, "amplitude": self.audio.amplitude},
            "fixated_entity": -1 if self.fixated_entity is None else self.fixated_entity,
        }


def layout_manifest(retina_size: int = 32) -> dict:
    """Byte offsets of every binary block in an OBS payload, relative to
    the start of the binary section; agents should never hardcode these."""
    s = retina_size
    image_bytes = s * s * 3
    blocks = []
    offset = 0
    for name, size, meta in [
        ("vision", 4 * image_bytes,
         {"dtype": "u1", "images": ["left_central", "left_peripheral",
                                    "right_central", "right_peripheral"],
          "shape": [s, s, 3],
          "fov_deg": [8.0, 100.0, 8.0, 100.0]}),
        ("touch", TOUCH_BYTES,
         {"dtype": "u1", "bits": N_TOUCH, "bit_order": "msb_first"}),
        ("proprioception", N_PROPRIO * 4, {"dtype": "<f4", "count": N_PROPRIO}),
        ("vestibular", 6 * 4, {"dtype": "<f4", "count": 6}),
        ("interoception", 4, {"dtype": "<f4", "count": 1}),
        ("gaze_dir", 3 * 4, {"dtype": "<f4", "count": 3}),
    ]:
        blocks.append({"name": name, "offset": offset, "size": size, **meta})
        offset += size
    return {"binary_size": offset, "blocks": blocks}
