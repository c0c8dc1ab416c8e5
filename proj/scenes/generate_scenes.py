#!/usr/bin/env python3
"""Regenerates the bundled scene fixtures. Deterministic: fixed RNG seed per
scene, so re-running leaves the JSON files unchanged."""

import json
import random


def _features_on_box_faces(rng, box_min, box_max, counts):
    """Scatter features on box faces. counts: dict face -> n with faces in
    {x-, x+, y-, y+, top}."""
    x0, y0, z0 = box_min
    x1, y1, z1 = box_max
    features = []

    def u(a, b):
        return a + (b - a) * rng.random()

    for face, n in counts.items():
        for _ in range(n):
            if face == "x-":
                features.append([x0, u(y0, y1), u(z0, z1)])
            elif face == "x+":
                features.append([x1, u(y0, y1), u(z0, z1)])
            elif face == "y-":
                features.append([u(x0, x1), y0, u(z0, z1)])
            elif face == "y+":
                features.append([u(x0, x1), y1, u(z0, z1)])
            elif face == "top":
                features.append([u(x0, x1), u(y0, y1), z1])
    return features


def _round(features):
    return [[round(c, 4) for c in f] for f in features]


def empty_room():
    rng = random.Random(3)
    features = []
    # Sparse texture on the two long walls.
    for x in range(-8, 9, 2):
        for z in (1.0, 2.0, 3.0):
            features.append([float(x), 5.5, z])
            features.append([float(x) + rng.random() * 0.5, -5.5, z + rng.random() * 0.4])
    return {
        "bounds": {"min": [-10.0, -6.0, 0.0], "max": [10.0, 6.0, 4.0]},
        "features": _round(features),
        "obstacles": [],
    }


def textured_box_room():
    """A pile of textured boxes in the middle of an otherwise bare room.
    Exactly 500 features, all on box faces."""
    rng = random.Random(7)
    big = ([-1.6, -1.2, 0.0], [1.6, 1.2, 2.4])
    medium = ([-0.8, -3.0, 0.0], [0.8, -1.4, 1.2])
    small = ([2.0, 1.6, 0.0], [2.8, 2.4, 0.9])
    features = []
    features += _features_on_box_faces(
        rng, *big, {"x-": 60, "x+": 60, "y-": 60, "y+": 60, "top": 40})
    features += _features_on_box_faces(
        rng, *medium, {"x-": 30, "x+": 30, "y-": 30, "y+": 20, "top": 20})
    features += _features_on_box_faces(
        rng, *small, {"x-": 20, "x+": 20, "y-": 20, "y+": 20, "top": 10})
    assert len(features) == 500, len(features)
    return {
        "bounds": {"min": [-12.0, -8.0, 0.0], "max": [12.0, 8.0, 5.0]},
        "features": _round(features),
        "obstacles": [
            {"type": "box", "min": list(big[0]), "max": list(big[1])},
            {"type": "box", "min": list(medium[0]), "max": list(medium[1])},
            {"type": "box", "min": list(small[0]), "max": list(small[1])},
        ],
    }


def textured_cluster():
    """The end-to-end fixture: a ~20 m corridor with a textured box sitting on
    the straight line and a second textured box off to the side of the detour."""
    rng = random.Random(11)
    center = ([-1.0, -0.9, 0.0], [1.0, 1.1, 2.2])
    side = ([3.2, -3.4, 0.0], [4.2, -2.4, 1.6])
    features = []
    features += _features_on_box_faces(
        rng, *center, {"x-": 45, "x+": 45, "y-": 55, "y+": 30, "top": 25})
    features += _features_on_box_faces(
        rng, *side, {"x-": 25, "x+": 15, "y-": 15, "y+": 25, "top": 10})
    return {
        "bounds": {"min": [-12.0, -6.0, 0.0], "max": [12.0, 6.0, 4.0]},
        "features": _round(features),
        "obstacles": [
            {"type": "box", "min": list(center[0]), "max": list(center[1])},
            {"type": "box", "min": list(side[0]), "max": list(side[1])},
        ],
    }


def main():
    for name, scene in [
        ("empty_room", empty_room()),
        ("textured_box_room", textured_box_room()),
        ("textured_cluster", textured_cluster()),
    ]:
        path = f"{name}.json"
        with open(path, "w") as f:
            json.dump(scene, f, indent=1)
            f.write("\n")
        print(f"wrote {path}: {len(scene['features'])} features, "
              f"{len(scene['obstacles'])} obstacles")


if __name__ == "__main__":
    main()
