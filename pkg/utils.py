# utils.py

import logging
import math

import pandas as pd

from analysis import ExAnteReport, FairnessReport, VerificationReport
from core import Allocation, Instance

LOG_FORMAT = '%(asctime)s |%(levelname)s: %(message)s'


def configure_logging(level=logging.INFO):
    """Route package logs to stderr in the house format. Called by the CLI and the dashboard only."""
    logging.basicConfig(format=LOG_FORMAT, level=level, force=True)


def _fmt_set(items):
    return "{" + ", ".join(str(x) for x in items) + "}"


def _finite(value):
    return None if math.isinf(value) else value


# === RUN TABLES ===

def allocation_frame(allocation: Allocation, instance: Instance):
    """One row per agent: turn position, chosen set and its value."""
    rows = []
    for agent, bundle in enumerate(allocation.bundles):
        spec = instance.agents[agent]
        rows.append({
            'Agent': agent,
            'Position': allocation.position(agent) + 1,
            'Objective': spec.objective.family,
            'Constraint': spec.constraint.family,
            'Declared p': spec.constraint.declared_p,
            'Solutions': " | ".join(_fmt_set(s) for s in bundle.solutions),
            'Chosen': _fmt_set(bundle.chosen),
            'Value': spec.objective.value(bundle.chosen),
        })
    return pd.DataFrame(rows)


# === VERIFICATION TABLES ===

def verification_frame(report: VerificationReport):
    """One row per bound check, with OPT, OPT⁻ and the achieved value of the checked agent."""
    rows = []
    for check in report.checks:
        rows.append({
            'agent': check.agent,
            'other': check.other,
            'theorem': check.theorem,
            'OPT': report.opt[check.agent],
            'OPT_minus': report.opt_minus[check.agent],
            'achieved': check.achieved,
            'benchmark': check.benchmark,
            'factor': str(check.factor),
            'bound': check.bound,
            'margin': _finite(check.margin),
            'passed': check.passed,
        })
    columns = ['agent', 'other', 'theorem', 'OPT', 'OPT_minus', 'achieved', 'benchmark', 'factor', 'bound',
               'margin', 'passed']
    return pd.DataFrame(rows, columns=columns)


def agent_summary_frame(report: VerificationReport):
    rows = [{'agent': agent, 'OPT': report.opt[agent], 'OPT_minus': report.opt_minus[agent],
             'achieved': report.achieved[agent]} for agent in range(report.instance.n)]
    return pd.DataFrame(rows)


def fairness_frame(report: FairnessReport):
    rows = [{
        'i': pair.i,
        'j': pair.j,
        'EF1 alpha': _finite(pair.ef1),
        'FEF1 alpha': _finite(pair.fef1),
        'first-pick alpha': _finite(pair.theorem_alpha),
    } for pair in report.pairs]
    return pd.DataFrame(rows, columns=['i', 'j', 'EF1 alpha', 'FEF1 alpha', 'first-pick alpha'])


def exante_frame(report: ExAnteReport):
    rows = [{
        'agent': row.agent,
        'expected': row.expected,
        'OPT': row.opt,
        'beta': str(row.beta),
        'factor': str(row.factor),
        'bound': row.bound,
        'ci_low': row.ci_low,
        'ci_high': row.ci_high,
        'samples': row.samples,
        'exact': row.exact,
        'passed': row.passed,
    } for row in report.rows]
    return pd.DataFrame(rows)


# === EXPERIMENT TABLES ===

def summarize_experiment(frame):
    """Average value and ratio per sweep point and turn position, plus the per-point mean over agents."""
    by_position = (frame.groupby(['sweep', 'position'], as_index=False)[['value', 'ratio', 'baseline']].mean())
    by_position['position'] = by_position['position'].astype(str)
    overall = frame.groupby('sweep', as_index=False)[['value', 'ratio', 'baseline']].mean()
    overall['position'] = 'average'
    return pd.concat([by_position, overall], ignore_index=True)[['sweep', 'position', 'value', 'ratio', 'baseline']]
