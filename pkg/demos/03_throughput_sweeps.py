# Throughput scaling: flat in tree count and depth (the search is one CAM
# operation regardless of model size), bounded by feature streaming width,
# and compared against the depth-limited LUT-accelerator baseline.

from xtime import ChipConfig, SweepSpec, analytic_throughput, sweep


def show(rows, label):
    print(f"\n{label}")
    for r in rows:
        if r["feasible"]:
            print(f"  {r['param']}={r['value']:>4}: "
                  f"{r['throughput_sps'] / 1e6:8.2f} MSamples/s   "
                  f"(II {r['initiation_interval']}, {r['cores_used']} cores)")
        else:
            print(f"  {r['param']}={r['value']:>4}: infeasible ({r['error']})")


show(sweep(SweepSpec(param="n_trees", values=[64, 256, 1024, 4096], depth=2,
                     n_feat=16, n_samples=500)),
     "trees 64 -> 4096 (depth 2, 16 features): constant")

show(sweep(SweepSpec(param="depth", values=[2, 3, 4, 5, 6, 7, 8], n_trees=64,
                     n_feat=16, n_samples=500)),
     "depth 2 -> 8 (64 trees): constant while <= 4 trees/core")

show(sweep(SweepSpec(param="n_feat", values=[10, 30, 50, 70, 90, 110, 130],
                     n_trees=16, depth=3, n_samples=500)),
     "features 10 -> 130: streaming-limited, non-increasing")

print("\nanalytic comparison at 1 GHz:")
for depth in (2, 4, 8):
    table = analytic_throughput(ChipConfig(), n_trees_core=1, depth=depth)
    print(f"  depth {depth}: this architecture {table['core_samples_per_s'] / 1e6:.0f} "
          f"MSamples/s/core vs depth-limited baseline "
          f"{table['booster_samples_per_s'] / 1e6:.2f} MSamples/s")
