import sys


def pytest_terminal_summary(terminalreporter):
    """Print one PASS/FAIL line per acceptance criterion, then its checks."""
    results = {}
    for mod in list(sys.modules.values()):
        found = getattr(mod, "ACCEPTANCE_RESULTS", None)
        if found:
            results = {k: v for k, v in found.items() if v[1]}
            break
    if not results:
        return
    write = terminalreporter.write_line
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(results):
        title, checks = results[criterion]
        status = "PASS" if all(c[3] for c in checks) else "FAIL"
        write(f"criterion {criterion} {title}: {status} ({sum(c[3] for c in checks)}/{len(checks)} checks)")
        for label, value, tol, ok in checks:
            write(f"    [{'pass' if ok else 'FAIL'}] {label}: {value:.3g} (limit {tol:.3g})")
