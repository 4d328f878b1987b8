"""Peak agreement and response correlation with the ANN versus simulation length.

    python3 scripts/latency_sweep.py --schedules two_status constant --T 5 10 20 50 100 1000
"""
import argparse
import json

import numpy as np

from spiketrack.ann import record_lambdas
from spiketrack.config import RunConfig
from spiketrack.conversion import convert
from spiketrack.tracking import generate_sequence, response_agreement, suite_params, track
from spiketrack.zoo import calibration_crops, toy_branch


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--schedules", nargs="+", default=["two_status", "constant"])
    ap.add_argument("--T", type=int, nargs="+", default=[5, 10, 20, 50, 100])
    ap.add_argument("--sequences", type=int, default=10)
    ap.add_argument("--model-seed", type=int, default=0)
    ap.add_argument("--json", help="write results here")
    args = ap.parse_args()

    ann = toy_branch(args.model_seed)
    snn = convert(ann, record_lambdas(ann, calibration_crops(8)))
    cfg = RunConfig()
    seqs = [generate_sequence(suite_params(s)) for s in range(args.sequences)]
    refs = [track(s, ann, cfg.tracker("ann")) for s in seqs]
    results = []
    print(f"{'schedule':<12} {'T':>5} {'agree':>7} {'mean r':>8} {'min r':>8}")
    for name in args.schedules:
        for T in args.T:
            tc = cfg.tracker("snn", schedule=name, T=T)
            reps = [response_agreement(s, r, snn, tc) for s, r in zip(seqs, refs)]
            corr = np.concatenate([rep["pearson"] for rep in reps])
            row = {
                "schedule": name,
                "T": T,
                "agreement": float(np.mean([rep["agreement_rate"] for rep in reps])),
                "mean_pearson": float(corr.mean()),
                "min_pearson": float(corr.min()),
            }
            results.append(row)
            print(f"{name:<12} {T:>5} {row['agreement']:>7.3f} {row['mean_pearson']:>8.4f} {row['min_pearson']:>8.4f}", flush=True)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
