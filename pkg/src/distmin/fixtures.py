"""Bundled example inputs, addressable from the command line as ``@name``.

The files under ``distmin/data`` are produced by :func:`write_all`; each can also
be rebuilt in memory with :func:`build`.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DistminError
from .geometry import ClosedCurve
from .morphing import Morph
from .shapes import circle_of_length, icosphere

CIRCLE_KNOTS = 2048


class FixtureError(DistminError):
    code = "unknown-fixture"


def _folding_pair() -> tuple[ClosedCurve, ClosedCurve]:
    """An ellipse and its mirror image far to the right: straight-line interpolation flips it."""
    theta = 2.0 * np.pi * np.arange(64) / 64
    src = np.stack([2.0 * np.cos(theta), np.sin(theta)], axis=1)
    tgt = src * np.array([-1.0, 1.0]) + np.array([10.0, 0.0])
    return ClosedCurve(src), ClosedCurve(tgt)


def _half_stretch_morph(n: int = 256, K: int = 16) -> Morph:
    """Unit circle whose upper half bulges out to radius up to 1.5 while the lower half stays put."""
    theta = 2.0 * np.pi * np.arange(n) / n
    src = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rad = 1.0 + 0.5 * np.clip(np.sin(theta), 0.0, None)
    tgt = rad[:, None] * src
    t = np.linspace(0.0, 1.0, K + 1)[:, None, None]
    return Morph((1.0 - t) * src[None] + t * tgt[None])


def build(name: str):
    if name == "circle_2pi":
        return circle_of_length(2.0 * np.pi, CIRCLE_KNOTS)
    if name == "circle_4pi":
        return circle_of_length(4.0 * np.pi, CIRCLE_KNOTS)
    if name == "circle_pi":
        return circle_of_length(np.pi, CIRCLE_KNOTS)
    if name == "icosphere3":
        return icosphere(3)
    if name == "fold_source":
        return _folding_pair()[0]
    if name == "fold_target":
        return _folding_pair()[1]
    if name == "half_stretch_morph":
        return _half_stretch_morph()
    raise FixtureError(f"unknown fixture '{name}'")


FILES = {
    "circle_2pi": "circle_2pi.json",
    "circle_4pi": "circle_4pi.json",
    "circle_pi": "circle_pi.json",
    "icosphere3": "icosphere3.obj",
    "fold_source": "fold_source.json",
    "fold_target": "fold_target.json",
    "half_stretch_morph": "half_stretch_morph.json",
}


def path(name: str) -> Path:
    """Filesystem path of a bundled fixture."""
    if name not in FILES:
        raise FixtureError(f"unknown fixture '@{name}'; available: {', '.join(sorted(FILES))}")
    return Path(str(resources.files("distmin") / "data" / FILES[name]))


def resolve(arg: str) -> Path:
    """``@name`` becomes the bundled file; anything else is taken as a path."""
    return path(arg[1:]) if arg.startswith("@") else Path(arg)


def write_all(directory) -> None:
    from . import formats

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, fname in FILES.items():
        obj = build(name)
        if fname.endswith(".obj"):
            formats.write_mesh(d / fname, obj)
        elif isinstance(obj, Morph):
            formats.write_morph(d / fname, obj)
        else:
            formats.write_curve(d / fname, obj)


if __name__ == "__main__":
    write_all(Path(__file__).with_name("data"))
