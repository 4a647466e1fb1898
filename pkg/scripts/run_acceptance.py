"""Run the acceptance suite and print one line per criterion.

    python scripts/run_acceptance.py
"""
import os
import subprocess
import sys

root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
cmd = [sys.executable, "-m", "pytest", "-q", "-s", os.path.join(root, "tests", "test_acceptance.py")]
proc = subprocess.run(cmd, cwd=root, capture_output=True, text=True)
lines = [ln for ln in proc.stdout.splitlines() if ln.startswith(("[PASS]", "[FAIL]"))]
seen = []
for ln in lines:
    if ln not in seen:
        seen.append(ln)
        print(ln)
if proc.returncode:
    print(proc.stdout[-3000:], file=sys.stderr)
sys.exit(proc.returncode)
