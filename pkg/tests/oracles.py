"""Independent oracles used by the tests.

Everything here deliberately avoids the library's own code paths: direct
scans instead of FFTs, grid searches and gradient descent instead of SVD
closed forms, exhaustive enumeration instead of vectorized sweeps.
"""

import numpy as np


def circular_xcorr_max_direct(x, y):
    """Exhaustive lag scan of the normalized circular cross-correlation."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    x = x - x.mean()
    y = y - y.mean()
    n = max(x.size, y.size)
    xp = np.zeros(n)
    xp[: x.size] = x
    yp = np.zeros(n)
    yp[: y.size] = y
    nx = np.linalg.norm(xp)
    ny = np.linalg.norm(yp)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    best = -np.inf
    for k in range(n):
        best = max(best, float(np.dot(np.roll(xp, k), yp)))
    return best / (nx * ny)


def circular_xcorr_all_lags(x, y):
    x = np.asarray(x, float) - np.mean(x)
    y = np.asarray(y, float) - np.mean(y)
    n = max(x.size, y.size)
    xp = np.zeros(n)
    xp[: x.size] = x
    yp = np.zeros(n)
    yp[: y.size] = y
    denom = np.linalg.norm(xp) * np.linalg.norm(yp)
    return np.array([np.dot(np.roll(xp, k), yp) for k in range(n)]) / denom


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_3d(params):
    """Rodrigues' formula for the rotation with axis-angle vector ``params``."""
    params = np.asarray(params, float)
    angle = float(np.linalg.norm(params))
    if angle < 1e-15:
        return np.eye(3)
    axis = params / angle
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def make_rotation(params, m):
    if m == 2:
        return rotation_2d(float(np.atleast_1d(params)[0]))
    if m == 3:
        return rotation_3d(params)
    raise ValueError("oracle rotations support m in {2, 3}")


def random_rotation(rng, m, max_angle=np.pi / 2):
    if m == 2:
        return rotation_2d(rng.uniform(-max_angle, max_angle))
    if m == 3:
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        return rotation_3d(axis * rng.uniform(0, max_angle))
    # general m: QR with determinant fix
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def kabsch_angle_grid(reference, observed, resolution=1e-4):
    """Brute-force search over 2-D rotation angles for the rigid fit.

    For each candidate angle the optimal translation aligns the centroids,
    so the residual reduces to maximizing trace(R H) with H the centered
    cross-covariance. Returns the grid angle with the best objective.
    """
    reference = np.asarray(reference, float)
    observed = np.asarray(observed, float)
    x = reference - reference.mean(axis=0)
    y = observed - observed.mean(axis=0)
    h = x.T @ y
    angles = np.arange(-np.pi, np.pi, resolution)
    scores = np.cos(angles) * (h[0, 0] + h[1, 1]) + np.sin(angles) * (h[0, 1] - h[1, 0])
    return float(angles[np.argmax(scores)])


def rotation_fusion_objective(rotation, rotations, weights):
    return float(
        sum(w * np.sum((rotation - rk) ** 2) for w, rk in zip(weights, rotations))
    )


def gradient_descent_rotation_fusion(rotations, weights, m, rng, restarts=10):
    """Best objective found by plain gradient descent over rotation params.

    Numeric central-difference gradients, backtracking line search, multiple
    random restarts. Returns the lowest objective value seen.
    """
    num_params = 1 if m == 2 else 3

    def objective(params):
        return rotation_fusion_objective(make_rotation(params, m), rotations, weights)

    best = np.inf
    for _ in range(restarts):
        params = rng.uniform(-np.pi, np.pi, size=num_params)
        value = objective(params)
        step = 0.25
        for _ in range(250):
            grad = np.zeros(num_params)
            h = 1e-6
            for i in range(num_params):
                up = params.copy()
                up[i] += h
                down = params.copy()
                down[i] -= h
                grad[i] = (objective(up) - objective(down)) / (2 * h)
            moved = False
            while step > 1e-13:
                trial = params - step * grad
                trial_value = objective(trial)
                if trial_value < value - 1e-15:
                    params, value = trial, trial_value
                    moved = True
                    step = min(step * 2.0, 0.5)
                    break
                step *= 0.5
            if not moved:
                break
        best = min(best, value)
    return best


def exhaustive_threshold_sweep(legit, attackers, margin=0.1):
    """Independent re-derivation of the calibration rule by full enumeration."""
    legit = [float(v) for v in legit]
    attackers = [float(v) for v in attackers]
    if not attackers:
        return max(legit) * (1.0 + margin)
    distinct = sorted(set(legit) | set(attackers))
    if len(distinct) == 1:
        return distinct[0]
    best_tau = None
    best_score = -1.0
    for lo, hi in zip(distinct[:-1], distinct[1:]):
        tau = (lo + hi) / 2.0
        accept = sum(1 for v in legit if v <= tau) / len(legit)
        reject = sum(1 for v in attackers if v > tau) / len(attackers)
        score = (accept + reject) / 2.0
        if score > best_score:
            best_score = score
            best_tau = tau
    return best_tau


def inverse_route_distance(observed, reference, transform):
    """Distance computed by undoing the transform on the observation instead
    of applying it to the reference (the matrix-inversion route)."""
    from envauth.distance import bhattacharyya_gaussian
    from envauth.fingerprint import FingerprintMatrix, summarize

    undone = (observed.values - transform.translation) @ transform.rotation
    undone_matrix = FingerprintMatrix(
        values=undone,
        object_id=observed.object_id,
        window_index=observed.window_index,
        feature_names=observed.feature_names,
    )
    return bhattacharyya_gaussian(
        summarize(undone_matrix), summarize(reference.matrix)
    )
