import csv
import logging
import os
import sys
from abc import ABC
import textwrap
import shutil
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .engine.histories import DecoherenceReport


# -------------------------------------------------------------------------
# ABSTRACT

class UserIo(ABC):
    def handle_basic_output(self, text: str):
        pass

    def handle_report_output(self, text: str):
        self.handle_basic_output(text)

    def handle_error_output(self, text: str):
        self.handle_basic_output(text)


# -------------------------------------------------------------------------
# IMPLEM: TERMINAL

class TermIo(UserIo):
    def handle_basic_output(self, text: str):
        for line in text.split("\n"):
            print("\n".join(textwrap.wrap(line, self.get_width())))

    def handle_report_output(self, text: str):
        # tables keep their columns
        print(text)

    def handle_error_output(self, text: str):
        print(text, file=sys.stderr)

    def get_width(self):
        terminal_size = shutil.get_terminal_size((80, 20))
        return terminal_size.columns


# -------------------------------------------------------------------------
# ARTIFACTS

def fmt(value) -> str:
    """repr of floats so that reruns are byte-identical"""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class ArtifactWriter:
    """the single writer of a run's output directory"""

    LOG_FILE = 'run.log'

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self._log_handler: Optional[logging.Handler] = None

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write_text(self, name: str, text: str):
        with open(self.path(name), "w", encoding="utf8", newline="\n") as f:
            f.write(text)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]):
        with open(self.path(name), "w", encoding="utf8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])

    def attach_log(self, logger: logging.Logger):
        self._log_handler = logging.FileHandler(self.path(self.LOG_FILE), mode="w", encoding="utf8")
        self._log_handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(self._log_handler)

    def detach_log(self, logger: logging.Logger):
        if self._log_handler is not None:
            logger.removeHandler(self._log_handler)
            self._log_handler.close()
            self._log_handler = None


# -------------------------------------------------------------------------
# RENDERING

def label_path(labels: Sequence[str]) -> str:
    return '/'.join(labels)


def probability_rows(report: DecoherenceReport) -> List[List]:
    rows = []
    for labels, weight, norm in zip(report.labels, report.diagonal, report.branch_norms):
        probability = min(1.0, max(0.0, float(weight))) if report.certified else None
        rows.append(list(labels) + [probability, float(norm)])
    return rows


def decoherence_rows(report: DecoherenceReport) -> List[List]:
    """upper triangle of D, diagonal included, in coordinate form"""
    rows = []
    paths = [label_path(labels) for labels in report.labels]
    d = report.functional
    for a in range(report.history_count):
        for b in range(a, report.history_count):
            rows.append([paths[a], paths[b], float(d[a, b].real), float(d[a, b].imag)])
    return rows


def render_certificate(report: DecoherenceReport) -> List[str]:
    status = 'CERTIFIED' if report.certified else 'NOT CERTIFIED'
    return [
        "decoherence:      {}".format(status),
        "max |D_ab|:       {}".format(fmt(report.max_offdiag)),
        "max |Re D_ab|:    {}".format(fmt(report.max_offdiag_real)),
        "epsilon:          {}".format(fmt(report.epsilon)),
        "histories:        {}".format(report.history_count),
        "mode:             {}".format(report.mode),
    ]


def render_probability_table(report: DecoherenceReport, limit: int = 64) -> List[str]:
    heading = 'probability' if report.certified else 'weight D_aa (not a probability)'
    lines = ["{:<40} {}".format('history', heading)]
    for labels, weight in list(zip(report.labels, report.diagonal))[:limit]:
        lines.append("{:<40} {}".format(label_path(labels), fmt(float(weight))))
    if report.history_count > limit:
        lines.append("... {} more rows in probabilities.csv".format(report.history_count - limit))
    return lines
