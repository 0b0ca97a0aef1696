"""Independent derivation of the rotation-matrix test constants.

Composes the three elementary rotations one axis at a time with plain
trigonometry (no shared code with dragekf.geometry) and prints the frozen
values used in tests/test_geometry.py.  Cross-checks the composition
against scipy's Rotation as a second, library-grade opinion.
"""

import numpy as np
from scipy.spatial.transform import Rotation


def rx(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)


def ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)


def rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)


def main():
    np.set_printoptions(precision=17)
    phi, theta, psi = 0.1, 0.2, 0.3
    r = rz(psi) @ ry(theta) @ rx(phi)
    print("R(0.1, 0.2, 0.3) by axis-by-axis composition:")
    print(repr(r))
    print("column 3 (body z in world):", repr(r[:, 2]))
    r_scipy = Rotation.from_euler("ZYX", [psi, theta, phi]).as_matrix()
    print("max |R - scipy ZYX|:", np.abs(r - r_scipy).max())

    near = rz(0.0) @ ry(np.pi / 2 - 0.01) @ rx(0.0)
    print("orthonormality defect at theta = pi/2 - 0.01:",
          np.abs(near.T @ near - np.eye(3)).max())


if __name__ == "__main__":
    main()
