"""Wave quantization basics.

A kernel's thread blocks run in waves of `occupancy x num_sms` concurrent
blocks. When the block count is not a multiple of that capacity, the last
wave runs partially empty and utilization drops. This demo reproduces the
published utilization of two dependent GeMMs at three batch sizes on an
80-SM device with occupancy 2 (160 blocks per wave).
"""

from tilesync_sim import Dim3, GpuConfig, tbs_per_wave, utilization, waves

gpu = GpuConfig(num_sms=80)
occupancy = 2
print(f"Device: {gpu.num_sms} SMs, occupancy {occupancy} "
      f"-> {tbs_per_wave(gpu, occupancy)} blocks per wave\n")

rows = [
    ("batch 256", "producer", Dim3(1, 96, 2)),
    ("batch 256", "consumer", Dim3(1, 96, 1)),
    ("batch 512", "producer", Dim3(2, 48, 2)),
    ("batch 512", "consumer", Dim3(2, 96, 1)),
    ("batch 1024", "producer", Dim3(4, 48, 1)),
    ("batch 1024", "consumer", Dim3(4, 96, 1)),
]

print(f"{'config':<11} {'role':<9} {'grid':<8} {'blocks':>6} "
      f"{'waves':>7} {'util':>6}")
for config, role, grid in rows:
    tbs = grid.total()
    frac, ceil = waves(tbs, gpu, occupancy)
    util = utilization(tbs, gpu, occupancy)
    print(f"{config:<11} {role:<9} {grid!s:<8} {tbs:>6} "
          f"{float(frac):>7.2f} {float(util):>5.0f}%")

print("""
Every row wastes 20-40% of its final wave: 192 blocks need 2 waves but the
second runs only 32 blocks; 384 blocks leave 64 in their third wave. The
fractional wave count is kept as an exact rational, so 192/160 == 6/5
exactly, not 1.2000000000000002.""")
