"""Regenerate the shipped OCP tables (theta, U [V], dU/dT [V/K]).

Cathode: NMC fit (tanh form), anode: graphite fit (exp/power form).
Both are strictly decreasing in stoichiometry over the tabulated range.
"""
import numpy as np

def u_nmc(x):
    return (-0.8090 * x + 4.4875 - 0.0428 * np.tanh(18.5138 * (x - 0.5542))
            - 17.7326 * np.tanh(15.7890 * (x - 0.3117))
            + 17.5842 * np.tanh(15.9308 * (x - 0.3120)))

def du_dt_nmc(x):
    # small negative entropic coefficient, V/K
    return -1.0e-4 + 6.0e-5 * (x - 0.6)

def u_graphite(x):
    return (0.7222 + 0.1387 * x + 0.029 * x ** 0.5 - 0.0172 / x + 0.0019 / x ** 1.5
            + 0.2808 * np.exp(0.9 - 15 * x) - 0.7984 * np.exp(0.4465 * x - 0.4108))

def du_dt_graphite(x):
    return 3.0e-4 * np.exp(-8.0 * x) - 1.0e-4 * np.tanh((x - 0.5) / 0.2)

def write(path, x, u, dudt, header):
    assert np.all(np.diff(x) > 0)
    assert np.all(np.diff(u) < 0), path
    with open(path, "w") as f:
        f.write(f"# {header}\n# theta  U_V  dUdT_V_per_K\n")
        for a, b, c in zip(x, u, dudt):
            f.write(f"{a:.4f} {b:.10f} {c:.6e}\n")

if __name__ == "__main__":
    xp = np.round(np.linspace(0.20, 0.99, 159), 4)
    write("crates/core/data/ocp_cathode_nmc.txt", xp, u_nmc(xp), du_dt_nmc(xp),
          "NMC cathode open-circuit potential, 25 C, version 1")
    xn = np.round(np.linspace(0.01, 0.99, 197), 4)
    write("crates/core/data/ocp_anode_graphite.txt", xn, u_graphite(xn), du_dt_graphite(xn),
          "graphite anode open-circuit potential, 25 C, version 1")
    for name, f, lo, hi in [("nmc", u_nmc, 0.36, 0.90), ("gr", u_graphite, 0.05, 0.85)]:
        x = np.linspace(lo, hi, 20001)
        s = np.gradient(f(x), x)
        print(name, "slope range in window", s.min(), s.max())
