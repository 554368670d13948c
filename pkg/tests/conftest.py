import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line('markers', 'criterion(number, title): acceptance criterion covered by the test')


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker('criterion')
    if mark is None or rep.when != 'call' and not (rep.when == 'setup' and rep.failed):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {'title': title, 'ok': True, 'seconds': 0.0, 'tests': 0})
    entry['ok'] = entry['ok'] and rep.passed
    entry['seconds'] += rep.duration
    entry['tests'] += 1


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section('acceptance criteria')
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        terminalreporter.write_line('criterion %d: %s  %s  (%d tests, %.2fs)'
                                    % (number, 'PASS' if e['ok'] else 'FAIL', e['title'], e['tests'], e['seconds']))
