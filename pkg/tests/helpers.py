"""Independent reference implementations used as test oracles.

Everything here is deliberately written with different machinery than the
package (plain Python loops, dict buckets, exhaustive scans) so agreement
is meaningful.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict

import numpy as np
from scipy.spatial.distance import cdist

from lidarloc import PointCloud, RigidTransform, axis_angle_rotation


def voxel_oracle(points, resolution, labels=None):
    """Hash-bucket voxel downsampling: floor(p/r) keys, bucket averages.

    Returns (centroids, majority_labels or None), each ordered by sorted
    voxel key for canonical comparison.
    """
    buckets = defaultdict(list)
    label_buckets = defaultdict(list)
    for i, p in enumerate(points):
        key = (
            math.floor(p[0] / resolution),
            math.floor(p[1] / resolution),
            math.floor(p[2] / resolution),
        )
        buckets[key].append(p)
        if labels is not None:
            label_buckets[key].append(int(labels[i]))

    keys = sorted(buckets)
    centroids = np.array(
        [np.mean(np.asarray(buckets[k], dtype=np.float64), axis=0) for k in keys]
    )
    if labels is None:
        return centroids, None
    majority = []
    for k in keys:
        counts = Counter(label_buckets[k])
        best = max(counts.values())
        majority.append(min(lab for lab, c in counts.items() if c == best))
    return centroids, np.array(majority)


def nn_oracle(source_points, target_points, max_distance):
    """Exhaustive nearest-neighbor scan over the full distance matrix.

    Returns (source_indices, target_indices, distances) for pairs within
    max_distance, one pair per source point.
    """
    distances = cdist(source_points, target_points)
    nearest = distances.argmin(axis=1)
    best = distances[np.arange(len(source_points)), nearest]
    keep = best <= max_distance
    return np.nonzero(keep)[0], nearest[keep], best[keep]


def edge_oracle(points, labels, grid, building_id, threshold_deg):
    """Plain-loop reimplementation of the building-edge rule.

    For each grid cell holding a building point whose wrapped horizontal
    neighbors also hold building points, computes the interior angle with
    the law of cosines and collects the point index when it is below the
    threshold.
    """
    rows, cols = grid.shape
    out = []
    for i in range(rows):
        for j in range(cols):
            center = grid[i, j]
            if center < 0 or labels[center] != building_id:
                continue
            left = grid[i, (j - 1) % cols]
            right = grid[i, (j + 1) % cols]
            if left < 0 or right < 0:
                continue
            if labels[left] != building_id or labels[right] != building_id:
                continue
            a = points[left] - points[center]
            b = points[right] - points[center]
            na, nb = math.sqrt(a @ a), math.sqrt(b @ b)
            if na <= 1e-12 or nb <= 1e-12:
                continue
            cos = max(-1.0, min(1.0, float(a @ b) / (na * nb)))
            if math.degrees(math.acos(cos)) < threshold_deg:
                out.append(int(center))
    return sorted(out)


def random_rotation(rng, max_angle=math.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return axis_angle_rotation(axis, rng.uniform(0.0, max_angle))


def random_pose(rng, max_angle=math.pi, max_translation=100.0):
    return RigidTransform(
        random_rotation(rng, max_angle), rng.uniform(-max_translation, max_translation, 3)
    )


def labeled_cloud(rng, n=500, extent=20.0, label_pool=(10, 40, 48, 50, 70, 80, 81)):
    points = rng.uniform(-extent, extent, (n, 3))
    labels = rng.choice(label_pool, size=n)
    return PointCloud(points, labels=labels)
