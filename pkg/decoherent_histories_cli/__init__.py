#!/usr/bin/env python3

import logging
import sys
from typing import List, Optional, Sequence

from .impl.utils.debug_print import activate_debug, debug_print, logger, log_event
from .impl.api.client import HistoriesClient, InferenceResult, ScanResult, SimulationResult, describe_run
from .impl.conf import Config, RunConfig, load_document
from .impl.engine.models import describe_models
from .impl.errors import CertificationRefused, HistoriesError
from .impl.user_interaction import (ArtifactWriter, TermIo, UserIo, decoherence_rows, fmt,
                                    probability_rows, render_certificate, render_probability_table)


# -------------------------------------------------------------------------
# EXIT CODES

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUSED = 2


# -------------------------------------------------------------------------
# SESSION LOGIC

class HistoriesSession:
    def __init__(self, client: HistoriesClient, run: RunConfig, user_io: UserIo, writer: ArtifactWriter):
        self.client = client
        self.run = run
        self.user_io = user_io
        self.writer = writer

    def start(self) -> int:
        describe_run(self.run)
        operation = {
            'simulate': self.simulate,
            'check-decoherence': self.check_decoherence,
            'predict': self.infer,
            'retrodict': self.infer,
            'scan-realms': self.scan_realms,
        }[self.run.operation]
        return operation()

    def _header(self) -> List[str]:
        model = self.client.model()
        lines = ["operation:        {}".format(self.run.operation),
                 "model:            {}".format(model.name),
                 "grid:             {} (families {})".format(
                     self.client.grid_name(), ', '.join(self.client.grid().names))]
        if model.notes:
            lines.append("notes:            {}".format(model.notes))
        return lines

    def _write_report(self, lines: List[str]):
        text = "\n".join(lines) + "\n"
        self.writer.write_text('report.txt', text)
        self.user_io.handle_report_output(text)

    def _write_tables(self, result: SimulationResult):
        report = result.report
        self.writer.write_csv('probabilities.csv', list(report.label_columns) + ['probability', 'branch_norm'],
                              probability_rows(report))
        self.writer.write_csv('decoherence.csv', ['alpha', 'beta', 're', 'im'], decoherence_rows(report))

    def simulate(self) -> int:
        result = self.client.simulate()
        self._write_tables(result)
        self._write_report(self._header() + render_certificate(result.report) + [''] +
                           render_probability_table(result.report))
        return EXIT_OK

    def check_decoherence(self) -> int:
        result = self.client.check_decoherence()
        self._write_tables(result)
        lines = self._header() + render_certificate(result.report) + [''] + render_probability_table(result.report)
        if not result.report.certified:
            lines += ['', "refused: {}".format(
                CertificationRefused(result.report.max_offdiag, result.report.epsilon))]
        self._write_report(lines)
        return EXIT_OK if result.report.certified else EXIT_REFUSED

    def infer(self) -> int:
        if self.run.operation == 'predict':
            result: InferenceResult = self.client.predict()
        else:
            result = self.client.retrodict()
        grid = result.grid
        lines = self._header() + render_certificate(result.report) + [
            "conditions:       {}".format(result.conditions.describe(grid)),
            "{}:    {}".format('future' if result.kind == 'predict' else 'past  ', result.targets.describe(grid)),
            "probability:      {}".format(fmt(result.probability) if not result.refused else 'refused'),
        ]
        self.writer.write_csv('inference.csv',
                              ['kind', 'conditions', 'target', 'probability', 'max_offdiag', 'epsilon', 'mode'],
                              [[result.kind, result.conditions.describe(grid), result.targets.describe(grid),
                                result.probability, result.report.max_offdiag, result.report.epsilon,
                                result.report.mode]])
        if result.refused:
            lines += ['', "refused: {}".format(CertificationRefused(
                result.report.max_offdiag, result.report.epsilon, what='joint set'))]
        self._write_report(lines)
        return EXIT_REFUSED if result.refused else EXIT_OK

    def scan_realms(self) -> int:
        result: ScanResult = self.client.scan_realms()
        rows = []
        lines = self._header() + [
            "epsilon:          {}".format(fmt(result.constraints.epsilon)),
            "mode:             {}".format(result.constraints.mode),
            "ranking:          {}; all-coarse baseline last".format(', '.join(result.constraints.order)),
            "measure:          {}".format(result.ranked[0][1].measure),
            "candidates:       {}".format(len(result.ranked)),
            '',
        ]
        for rank, (candidate, score) in enumerate(result.ranked, start=1):
            rows.append([rank, candidate.describe(), score.certified, score.max_offdiag, score.entropy,
                         score.persistence, 'x'.join(str(n) for n in score.n_classes), candidate.is_trivial])
            lines.append("{:>4}  {:<13} persistence={} entropy={} max|D|={}  {}".format(
                rank, 'certified' if score.certified else 'not certified', fmt(score.persistence),
                fmt(score.entropy), fmt(score.max_offdiag), candidate.describe()))
        self.writer.write_csv('realms.csv', ['rank', 'candidate', 'certified', 'max_offdiag', 'entropy',
                                             'persistence', 'classes', 'baseline'], rows)
        self._write_report(lines)
        return EXIT_OK


def list_models(user_io: UserIo) -> int:
    for name, summary, defaults in describe_models():
        params = ', '.join('{}={!r}'.format(k, v) for k, v in defaults.items())
        user_io.handle_report_output("{:<14} {}\n{:<14} ({})".format(name, summary, '', params))
    return EXIT_OK


# -------------------------------------------------------------------------
# MAIN

def _stderr_handler() -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    return handler


def main(argv: Optional[Sequence[str]] = None) -> int:
    term_io = TermIo()
    stderr_handler = _stderr_handler()
    logger.addHandler(stderr_handler)
    if logger.level == logging.NOTSET:
        logger.setLevel(logging.INFO)
    logger.propagate = False
    writer = None

    try:
        # command line wins over environment, environment over the run document
        cli_args_conf = Config.loaded_from_cli_args(argv)
        env_conf = Config.loaded_from_env()
        conf = Config.merged([env_conf, cli_args_conf])

        if conf.debug:
            activate_debug()

        if conf.command == 'models':
            return list_models(term_io)

        document = load_document(conf.config_path)
        file_conf = Config.loaded_from_document(document)
        conf = Config.merged([file_conf, env_conf, cli_args_conf])
        run = RunConfig.from_document(document, conf)

        writer = ArtifactWriter(run.out_dir)
        writer.attach_log(logger)
        debug_print("writing artifacts to {}".format(run.out_dir))

        session = HistoriesSession(HistoriesClient(run), run, term_io, writer)
        status = session.start()
        log_event('done', status=status)
        return status

    except CertificationRefused as err:
        log_event('refused', max_offdiag=err.max_offdiag, epsilon=err.epsilon)
        term_io.handle_error_output("refused: {}".format(err))
        return EXIT_REFUSED

    except HistoriesError as err:
        log_event('error', kind=type(err).__name__)
        term_io.handle_error_output("error: {}".format(err))
        for violation in getattr(err, 'violations', []):
            term_io.handle_error_output("  - {}".format(violation.describe()))
        return EXIT_ERROR

    except KeyboardInterrupt:
        term_io.handle_error_output("Received Keyboard Interrupt. Bye Bye...")
        return EXIT_ERROR

    finally:
        if writer is not None:
            writer.detach_log(logger)
        logger.removeHandler(stderr_handler)


if __name__ == "__main__":
    sys.exit(main())
