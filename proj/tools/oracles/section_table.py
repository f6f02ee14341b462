"""Computes the cross-section table embedded in src/frame/sections.cpp.

Square HSS: square-corner box formulas on nominal wall thickness.
W-shapes: three-plate idealisation from published d, bf, tf, tw (fillets ignored).
Unit weight follows from area and a steel density of 490 pcf.
"""
RHO = 490.0  # lb/ft^3

def hss(b, t):
    bi = b - 2 * t
    area = b * b - bi * bi
    inertia = (b ** 4 - bi ** 4) / 12.0
    torsion = t * (b - t) ** 3  # thin-wall Bredt: 4 Am^2 t / pm
    return area, inertia, inertia, torsion

def wshape(d, bf, tf, tw):
    hw = d - 2 * tf
    area = 2 * bf * tf + hw * tw
    ix = (bf * d ** 3 - (bf - tw) * hw ** 3) / 12.0
    iy = 2 * tf * bf ** 3 / 12.0 + hw * tw ** 3 / 12.0
    j = (2 * bf * tf ** 3 + (d - tf) * tw ** 3) / 3.0
    return area, ix, iy, j

cols = [0.375, 0.5, 0.625, 0.75, 0.875]
beams = {
    44: (20.7, 6.50, 0.450, 0.350),
    48: (20.6, 8.14, 0.430, 0.350),
    50: (20.8, 6.53, 0.535, 0.380),
    57: (21.1, 6.56, 0.650, 0.405),
    62: (21.0, 8.24, 0.615, 0.400),
    68: (21.1, 8.27, 0.685, 0.430),
    73: (21.2, 8.30, 0.740, 0.455),
    83: (21.4, 8.36, 0.835, 0.515),
    93: (21.6, 8.42, 0.930, 0.580),
}
rows = []
for t in cols:
    rows.append((f"HSSQ 16x16x{t:g}", "column") + hss(16.0, t))
for w, dims in beams.items():
    rows.append((f"W 21 x {w}", "beam") + wshape(*dims))
for name, kind, a, ix, iy, j in rows:
    print(f'    {{"{name}", BarKind::{kind}, {a!r}, {ix!r}, {iy!r}, {j!r}, {a * RHO / 144.0!r}}},')
