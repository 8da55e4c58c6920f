"""Independent NumPy evaluation of the two architectures.

Parameters are filled in canonical checkpoint order with
p[j] = 0.3 * sin(1.7 * j + 0.5); inputs are x[t][j] = cos(0.9 * t + 0.4 * j).
Prints C++ initializers for tests/test_golden.cpp.
"""
import numpy as np


def sig(x):
    return 1.0 / (1.0 + np.exp(-x))


class Filler:
    def __init__(self):
        self.j = 0

    def take(self, rows, cols):
        idx = np.arange(self.j, self.j + rows * cols, dtype=np.float64)
        self.j += rows * cols
        return (0.3 * np.sin(1.7 * idx + 0.5)).reshape(rows, cols)


def cell(f, n, d):
    p = {}
    for g in "ifco":
        p["Wx" + g] = f.take(n, d)
    for g in "ifco":
        p["Wh" + g] = f.take(n, n)
    for g in "ifo":
        p["p" + g] = f.take(n, 1)[:, 0]
    for g in "ifco":
        p["b" + g] = f.take(n, 1)[:, 0]
    return p


def step(p, x, h, c, act):
    g = np.tanh if act == "tanh" else sig
    i = sig(p["Wxi"] @ x + p["Whi"] @ h + p["pi"] * c + p["bi"])
    f = sig(p["Wxf"] @ x + p["Whf"] @ h + p["pf"] * c + p["bf"])
    cn = f * c + i * g(p["Wxc"] @ x + p["Whc"] @ h + p["bc"])
    o = sig(p["Wxo"] @ x + p["Who"] @ h + p["po"] * cn + p["bo"])
    return o * g(cn), cn


def predict(kind, c, m, n1, n2, T, act):
    f = Filler()
    if kind == "stacked":
        l1 = [cell(f, n1, c * m)]
    else:
        l1 = [cell(f, n1 // c, m) for _ in range(c)]
    l2 = cell(f, n2, n1)
    w = f.take(n2, 1)[:, 0]
    b = f.take(1, 1)[0, 0]
    hs = [np.zeros(q["bi"].shape[0]) for q in l1]
    cs = [np.zeros(q["bi"].shape[0]) for q in l1]
    h2 = np.zeros(n2)
    c2 = np.zeros(n2)
    for t in range(T):
        x = np.cos(0.9 * t + 0.4 * np.arange(c * m))
        if kind == "stacked":
            hs[0], cs[0] = step(l1[0], x, hs[0], cs[0], act)
        else:
            for k in range(c):
                hs[k], cs[k] = step(l1[k], x[k * m:(k + 1) * m], hs[k], cs[k], act)
        h2, c2 = step(l2, np.concatenate(hs), h2, c2, act)
    return float(w @ h2 + b)


if __name__ == "__main__":
    for kind in ("stacked", "st_stacked"):
        for act in ("tanh", "sigmoid"):
            y = predict(kind, 2, 3, 4, 3, 4, act)
            print(f'{{"{kind}", "{act}", {y!r}}},')
    # Single cell, one step from a nonzero state.
    f = Filler()
    p = cell(f, 3, 2)
    x = np.cos(0.4 * np.arange(2))
    h0 = 0.2 * np.sin(np.arange(3) + 1.0)
    c0 = 0.5 * np.cos(np.arange(3) + 2.0)
    for act in ("tanh", "sigmoid"):
        h, cn = step(p, x, h0, c0, act)
        print(act, "h", [repr(v) for v in h], "c", [repr(v) for v in cn])
