"""Build (or resume) the ensemble records used by tests/test_acceptance.py.

    python acceptance/run_records.py [name ...]

Records land in acceptance/records/<name>/ and are resumable.
"""
import sys
import time
from pathlib import Path

from qwalk.harness import EnsembleSpec, run_ensemble

HERE = Path(__file__).resolve().parent
ORDER = ["rem_heuristic", "sk_heuristic", "ssk_opt", "sk_complete_opt", "remgc_opt", "rem_opt", "sk_opt"]


def main(names):
    for name in names or ORDER:
        spec = EnsembleSpec.load(HERE / "specs" / f"{name}.json")
        start = time.time()

        def progress(row):
            print(f"{name} n={row['n']} i={row['index']} {row['wall_time']:.2f}s "
                  f"elapsed={time.time() - start:.0f}s", flush=True)

        run_ensemble(spec, HERE / "records" / name, resume=True, progress=progress)
        print(f"{name} done in {time.time() - start:.0f}s", flush=True)


if __name__ == "__main__":
    main(sys.argv[1:])
