"""Compare threshold schedules on the seeded suite (mean IoU, centre error,
agreement with the ANN, latency to plateau)."""
import argparse
import tempfile
from pathlib import Path

from spiketrack import modelio
from spiketrack.ann import record_lambdas
from spiketrack.cli import main as cli_main
from spiketrack.conversion import convert
from spiketrack.tracking import generate_sequence, suite_params
from spiketrack.zoo import calibration_crops, toy_branch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--schedules", nargs="+", default=["constant", "phase", "burst", "two_status"])
    ap.add_argument("--sequences", type=int, default=4)
    ap.add_argument("--out", default=None, help="JSON table path")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        ann = toy_branch(0)
        modelio.save_model(ann, d / "ann.json")
        modelio.save_model(convert(ann, record_lambdas(ann, calibration_crops(8))), d / "snn.json")
        argv = ["compare-coding", "--snn", str(d / "snn.json"), "--ann", str(d / "ann.json"), "--schedules", *args.schedules]
        for s in range(args.sequences):
            modelio.save_sequence(generate_sequence(suite_params(s)), d / f"seq{s}")
            argv += ["--sequence", str(d / f"seq{s}")]
        if args.out:
            argv += ["--out", args.out]
        raise SystemExit(cli_main(argv))


if __name__ == "__main__":
    main()
