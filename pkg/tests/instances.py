"""Instance matrix shared by the invariant tests and the acceptance gate."""

import numpy as np

from conftest import INF, LAM0, LAM_1D, LAM_ALL, LAM_PRIME, SIGMA_MINUS

LAM3 = np.full((4, 4), INF)
LAM3[0, 1:] = LAM3[1:, 0] = 1e-3
np.fill_diagonal(LAM3, 0.0)

INSTANCES = {
    "1d-standard": ([[1.0]], [[1.0]], LAM_1D, 141),
    "1d-asymmetric": ([[1.0]], [[1.0]], [[0, 0], [2e-3, 0]], 141),
    "1d-scaled": ([[0.5]], [[2.0]], [[0, 1e-3], [3e-3, 0]], 101),
    "1d-zero-cost": ([[1.0]], [[1.0]], [[0, 0], [0, 0]], 21),
    "2d-uncorrelated": (np.eye(2), np.eye(2), LAM0, 61),
    "2d-neg-correlation": (SIGMA_MINUS, SIGMA_MINUS, LAM0, 61),
    "2d-asymmetric": (np.eye(2), np.eye(2), LAM_PRIME, 61),
    "2d-all-transfers": (np.eye(2), np.eye(2), LAM_ALL, 61),
    "2d-all-neg-correlation": (SIGMA_MINUS, SIGMA_MINUS, LAM_ALL, 61),
    "2d-anisotropic": (np.diag([1.0, 0.5]), np.diag([0.8, 1.2]), LAM0, 61),
    "3d-cash-only": (np.eye(3), np.eye(3), LAM3, 21),
    "3d-all-transfers": (np.eye(3), np.eye(3), np.where(np.eye(4) > 0, 0.0, 1e-3), 21),
}
