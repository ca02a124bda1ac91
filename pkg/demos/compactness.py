"""Oscillation of stopped paths in the J topology.

For the insurance pair model the probability that the J modulus of the
stopped max-sum path exceeds 0.1 is estimated for a few window half-widths.
Wider windows admit more oscillation, smaller scales concentrate the paths.
"""
from maxsum.diagnostics import j_compactness_probe
from maxsum.presets import get_preset
from maxsum.triangular_array import child_rng

model, _ = get_preset("example2").make()
table = j_compactness_probe(model, [1e-2, 1e-3], [0.005, 0.01, 0.05], 0.5, 2.0, 0.1, 200, child_rng(3, 0, 0),
                            stopped=True)
for row in table.rows():
    print(row)
print("monotone in window width:", table.monotone_in_c)
