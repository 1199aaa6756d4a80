import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", "") or "")
            if m is None:
                continue
            num = int(m.group(1))
            label = m.group(2).replace("_", " ")
            prev = results.get(num, (label, True))
            results[num] = (label, prev[1] and outcome == "passed")
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(results):
        label, ok = results[num]
        terminalreporter.write_line(
            "criterion %2d (%s): %s" % (num, label, "PASS" if ok else "FAIL"))
