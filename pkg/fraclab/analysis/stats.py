from collections import namedtuple

import numpy as np
import pandas as pd

CheckResult = namedtuple('CheckResult', 'name passed value threshold detail skipped',
                         defaults=[np.nan, np.nan, '', False])


def skip(name, detail):
    """Returns the result of a check that was not evaluated; it neither passes nor fails"""
    return CheckResult(name, False, detail=detail, skipped=True)


def failures(results):
    """Returns the evaluated checks that failed"""
    return [r for r in results if not r.skipped and not r.passed]


def summary(results):
    """Returns a table with one row per check result"""
    frame = pd.DataFrame([r._asdict() for r in results], columns=CheckResult._fields)
    frame['passed'] = frame['passed'].astype(bool)
    frame['skipped'] = frame['skipped'].astype(bool)
    return frame.set_index('name')


def render(table):
    """Renders a `summary` table as fixed-width text for summary.txt"""
    formatters = {
        'value': lambda x: '' if pd.isna(x) else '{:.6e}'.format(x),
        'threshold': lambda x: '' if pd.isna(x) else '{:.3e}'.format(x),
        'detail': lambda x: str(x)
    }
    status = np.where(table['skipped'], 'SKIP', np.where(table['passed'], 'PASS', 'FAIL'))
    shown = table.drop(columns=['passed', 'skipped'])
    shown.insert(0, 'status', status)

    evaluated = int((~table['skipped']).sum())
    passed = int((table['passed'] & ~table['skipped']).sum())
    header = '{} of {} checks passed'.format(passed, evaluated)
    if evaluated < len(table):
        header += ', {} skipped'.format(len(table) - evaluated)
    return header + '\n\n' + shown.to_string(formatters=formatters) + '\n'
