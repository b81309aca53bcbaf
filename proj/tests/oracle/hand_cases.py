"""Independent reference values for the unit tests.

Run: python3 tests/oracle/hand_cases.py
Each printed value is frozen into the C++ tests that cite this script.
"""
from fractions import Fraction as F

import numpy as np
from scipy import integrate


def motion_field(f, up, vp, T, w, d):
    # Standard motion-field equation (Longuet-Higgins & Prazdny form).
    A = np.array([[-f, 0, up], [0, -f, vp]], dtype=float)
    B = np.array([[up * vp / f, -(f * f + up * up) / f, vp],
                  [(f * f + vp * vp) / f, -up * vp / f, -up]], dtype=float)
    return A @ np.asarray(T, float) / d + B @ np.asarray(w, float)


def flow_cases():
    print("flow centred, T=(1,0,0), d=10:", motion_field(100, 0, 0, (1, 0, 0), (0, 0, 0), 10))
    print("flow u'=50, T=(0,0,1), d=5:   ", motion_field(100, 50, 0, (0, 0, 1), (0, 0, 0), 5))
    for d in (1, 10, 1e9):
        print(f"flow v'=20, w=(0,0,1), d={d}:", motion_field(100, 0, 20, (0, 0, 0), (0, 0, 1), d))
    print("flow general case u'=-13.5 v'=7.25 f=200 T=(0.3,-0.2,0.5) w=(0.01,0.02,-0.03) d=4:",
          repr(motion_field(200, -13.5, 7.25, (0.3, -0.2, 0.5), (0.01, 0.02, -0.03), 4).tolist()))


def warp_case():
    x, y, flow = 10.0, 10.0, (-10.0, 0.0)
    for dt in (0.1, -0.1):
        print(f"warp (10,10) t-t_ref={dt} flow=(-10,0):", (x + flow[0] * dt, y + flow[1] * dt))


def interpolation_cases():
    ramp = lambda t: 2.0 * t
    print("ramp mean on [0,1]:", integrate.quad(ramp, 0, 1)[0])
    # Track (0,0) (1,2) (3,2): mean over [0.5, 2].
    track = lambda t: np.interp(t, [0, 1, 3], [0, 2, 2])
    print("three-sample mean on [0.5,2]:", integrate.quad(track, 0.5, 2, points=[1])[0] / 1.5)


def windows_cases():
    ts = [F(5 * i, 100) for i in range(10)]
    out, begin = [], 0
    while begin < len(ts):
        end = begin + 1
        while end < len(ts) and end - begin < 8 and ts[end] - ts[begin] <= F(2, 10):
            end += 1
        out.append(end - begin)
        begin = end
    print("form_windows 10 events @0.05 s, max 8 / 0.2 s ->", out)


def iwe_cases():
    g = np.zeros((5, 5))
    x, y = 2.5, 3.0
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    ax, ay = x - x0, y - y0
    g[y0, x0] += (1 - ax) * (1 - ay)
    g[y0, x0 + 1] += ax * (1 - ay)
    print("bilinear (2.5,3.0): (2,3)=", g[3, 2], "(3,3)=", g[3, 3])
    print("block sum [[1,2],[3,4]] ->", np.array([[1, 2], [3, 4]]).sum())


def focus_cases():
    img = np.array([0, 0, 0, 4], float)
    print("var {0,0,0,4} =", img.var())
    print("combine |1|+|-1|+|2| =", sum(abs(v) for v in (1, -1, 2, 0, 0, 0)))
    print("window energy single R=3, r=3:", np.sqrt(3.0 ** 2))
    print("sosa all-zero 4x3, lambda 1:", np.exp(-np.zeros(12)).sum())


def costvol_cases():
    c = [F(0), F(0), F(4), F(0), F(0)]
    pad = [c[0]] + c + [c[-1]]
    print("trend (0,0,4,0,0) ->", [str(pad[i] / 4 + pad[i + 1] / 2 + pad[i + 2] / 4) for i in range(5)])
    l, m, r = F(1), F(3), F(2)
    print("parabola (1,3,2) offset =", (l - r) / (2 * (l - 2 * m + r)))
    # Vertex of the parabola through (-1,l) (0,m) (1,r), independently via polyfit.
    a, b, _ = np.polyfit([-1, 0, 1], [1, 3, 2], 2)
    print("parabola vertex by fit =", -b / (2 * a))


def metric_cases():
    def report(p, g):
        p, g = np.asarray(p, float), np.asarray(g, float)
        ratio = np.maximum(p / g, g / p)
        return dict(abs_rel=np.mean(np.abs(p - g) / g), sq_rel=np.mean((p - g) ** 2 / g),
                    rmse=np.sqrt(np.mean((p - g) ** 2)), rmse_log=np.sqrt(np.mean((np.log(p) - np.log(g)) ** 2)),
                    d1=np.mean(ratio < 1.25), d2=np.mean(ratio < 1.25 ** 2), d3=np.mean(ratio < 1.25 ** 3),
                    epe=np.mean(np.abs(p - g)))
    print("metrics [11]/[10]:", report([11], [10]))
    print("metrics [13]/[10]:", report([13], [10]))
    print("metrics [12.5]/[10]:", report([12.5], [10]))
    print("metrics [8]/[10]:", report([8], [10]))
    print("metrics [2,9,25,40]/[4,10,20,50]:", report([2, 9, 25, 40], [4, 10, 20, 50]))


def synth_cases():
    f, tx, duration, d = 200, 1.0, 0.1, 10.0
    print("streak length px:", f * tx * duration / d)


if __name__ == "__main__":
    flow_cases()
    warp_case()
    interpolation_cases()
    windows_cases()
    iwe_cases()
    focus_cases()
    costvol_cases()
    metric_cases()
    synth_cases()
