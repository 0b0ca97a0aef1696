"""Symbolic derivation of the Euler-angle rate mapping.

Starts from Rdot = R * skew(omega_body) with R = Rz(psi) Ry(theta) Rx(phi),
solves for (phi_dot, theta_dot, psi_dot) symbolically, and prints the
mapping matrix plus the numeric cases frozen in tests/test_geometry.py.
Everything here is derived from first principles in sympy; none of the
package code is imported.
"""

import sympy as sp


def main():
    phi, theta, psi = sp.symbols("phi theta psi")
    wx, wy, wz = sp.symbols("wx wy wz")

    def rot_x(a):
        return sp.Matrix([[1, 0, 0], [0, sp.cos(a), -sp.sin(a)], [0, sp.sin(a), sp.cos(a)]])

    def rot_y(a):
        return sp.Matrix([[sp.cos(a), 0, sp.sin(a)], [0, 1, 0], [-sp.sin(a), 0, sp.cos(a)]])

    def rot_z(a):
        return sp.Matrix([[sp.cos(a), -sp.sin(a), 0], [sp.sin(a), sp.cos(a), 0], [0, 0, 1]])

    R = rot_z(psi) * rot_y(theta) * rot_x(phi)

    t = sp.symbols("t")
    phit = sp.Function("phit")(t)
    thetat = sp.Function("thetat")(t)
    psit = sp.Function("psit")(t)
    Rt = R.subs({phi: phit, theta: thetat, psi: psit})
    omega_skew = sp.simplify(Rt.T * Rt.diff(t))
    om = sp.Matrix([omega_skew[2, 1], omega_skew[0, 2], omega_skew[1, 0]])

    dots = sp.Matrix([phit.diff(t), thetat.diff(t), psit.diff(t)])
    sol = sp.solve(sp.Eq(om, sp.Matrix([wx, wy, wz])), list(dots), dict=True)[0]
    rates = sp.Matrix([sol[d] for d in dots])
    rates = rates.subs({phit: phi, thetat: theta, psit: psi})
    rates = sp.simplify(rates)
    print("euler rate mapping (phi_dot, theta_dot, psi_dot):")
    sp.pprint(rates)

    cases = [
        ({phi: 0, theta: 0}, (1, 2, 3)),
        ({phi: 0, theta: sp.pi / 4}, (0, 0, 1)),
        ({phi: sp.pi / 2, theta: 0}, (0, 1, 0)),
    ]
    for subs, w in cases:
        vals = rates.subs(subs).subs({wx: w[0], wy: w[1], wz: w[2]})
        print(f"att subs {subs}, rates {w} ->", [sp.nsimplify(sp.simplify(v)) for v in vals])


if __name__ == "__main__":
    main()
