"""Readout cost of truncated versus encapsulated networks, and how often random distortion breaks alignment.

Run: python3 demos/03_cost_model.py
"""

from asyt import diagnostics as dg
from asyt.netcore import NetworkSpec

for sizes in ((784, 256, 256, 10), (784, 512, 512, 512, 10), (4, 4, 3)):
    inp = dg.CostModelInput.for_spec(NetworkSpec(sizes))
    print(f"{list(sizes)}: M={inp.m} P={inp.p} N={inp.n}")
    for row in dg.cost_table(inp.m, inp.p, inp.n):
        print(f"  {row['mode']:>12}: {row['accesses']:>5} accesses, {row['timesteps']} timesteps, "
              f"T={row['t_extract_s']:.3e} s, E={row['energy_j']:.3e} J")

print("\nprobability that a distorted update leaves the 90 degree cone:")
for frac in (0.1, 0.25, 0.5, 1.0):
    p = dg.alignment_break_probability(frac, 200_000, seed=0)
    print(f"  distortion {frac:4.2f}: {p:.5f}")
