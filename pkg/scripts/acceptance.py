"""Run the acceptance criteria outside pytest and print one line each.

    python scripts/acceptance.py          # all criteria
    python scripts/acceptance.py 4 9      # a subset
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import acceptance_lib as lib  # noqa: E402


def main(argv):
    picks = [int(a) for a in argv] or list(lib.CRITERIA)
    failed = 0
    for i in picks:
        t0 = time.perf_counter()
        ok, summary, _ = lib.CRITERIA[i]()
        failed += not ok
        print(f"[criterion {i:2d}] {'PASS' if ok else 'FAIL'} {summary} "
              f"({time.perf_counter() - t0:.1f}s)", flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
