"""Energy table: the reference spiking row, the static baselines and the toy
tracker's own per-frame estimate."""
import numpy as np

from spiketrack.ann import record_lambdas
from spiketrack.config import RunConfig
from spiketrack.conversion import convert
from spiketrack.energy import PUBLISHED_BASELINES, estimate, report
from spiketrack.tracking import generate_sequence, suite_params, track
from spiketrack.zoo import calibration_crops, toy_branch

cfg = RunConfig()
ann = toy_branch(0)
snn = convert(ann, record_lambdas(ann, calibration_crops(8)))
res = track(generate_sequence(suite_params(0)), snn, cfg.tracker("snn"))
toy = estimate(int(round(np.mean(res.ops_per_frame))), cfg.T)

print(report(estimate(3.94e8, 20), name="reference spiking row"))
print(report(toy, baselines=(), name="toy tracker (T=20)"))
print("baseline consistency, W x s vs J:")
for b in PUBLISHED_BASELINES:
    derived = b.watts * b.ms / 1000
    print(f"  {b.name:<10} {derived:8.4f} J vs {b.joules:g} J  ({abs(derived - b.joules) / b.joules:.2%})")
