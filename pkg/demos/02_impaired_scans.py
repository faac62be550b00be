"""What the impairment chain does to a LiDAR scan.

A constant 5 m scene is pushed through noise, delay, dropout and forward
outliers at 30 Hz. We print a few delivered scans and then the long-run
statistics.
"""

import math

import numpy as np

from gatedrive.impairments import ImpairmentConfig, ImpairmentPipeline
from gatedrive.lidar import LidarGeometry, LidarScan
from gatedrive.verify import impairment_statistics

geom = LidarGeometry()
pipe = ImpairmentPipeline(ImpairmentConfig(p_out=0.4, seed=3))
truth = np.full(geom.beam_count, 5.0)

print(" tick  now[s]  stamp[s]  age[ms]  shortest[m]  note")
prev = None
for k in range(20):
    now = k / 30.0
    out = pipe(LidarScan(now, truth, geom), now)
    if out is None:
        print(f"{k:5d}  {now:6.3f}        -        -            -  nothing due yet")
        continue
    note = "held" if out.stamp == prev else ""
    if out.ranges.min() < 1.0:
        i = int(np.argmin(out.ranges))
        note += f" outlier at {math.degrees(geom.angles[i]):+.1f} deg"
    prev = out.stamp
    print(f"{k:5d}  {now:6.3f}  {out.stamp:8.3f}  {(now - out.stamp) * 1e3:7.1f}  {out.ranges.min():11.3f}  {note}")

st = impairment_statistics(scans=10_000, p_out=0.4)
print()
print("over 10k scans:")
for key, val in st.items():
    print(f"  {key:<17} {val:.4f}" if isinstance(val, float) else f"  {key:<17} {val}")
