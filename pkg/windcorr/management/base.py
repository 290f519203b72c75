"""Shared plumbing of the windcorr management commands."""
from __future__ import annotations

import argparse
import logging

from django.core.management.base import BaseCommand, CommandError, DjangoHelpFormatter

from windcorr.conf import get_setting

logger = logging.getLogger(__name__)


class HelpFormatter(DjangoHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    """Django's formatter, with every default printed in ``--help``."""


class WindcorrCommand(BaseCommand):
    """Base for the pipeline subcommands.

    Subclasses implement :meth:`run`. Domain exceptions (``ValueError``,
    ``RuntimeError`` and I/O errors) leave the command as ``CommandError`` so
    the process exits non-zero with the message on stderr.
    """

    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        kwargs.setdefault("formatter_class", HelpFormatter)
        return super().create_parser(prog_name, subcommand, **kwargs)

    def add_jobs_argument(self, parser) -> None:
        parser.add_argument(
            "--jobs",
            type=int,
            default=get_setting("JOBS"),
            help="worker threads for independent windows or bins",
        )

    def handle(self, *args, **options):
        verbosity = int(options.get("verbosity", 1))
        if verbosity >= 2:
            logging.getLogger("windcorr").setLevel(logging.DEBUG)
        elif verbosity == 0:
            logging.getLogger("windcorr").setLevel(logging.WARNING)
        try:
            return self.run(**options)
        except CommandError:
            raise
        except (ValueError, RuntimeError, OSError, KeyError) as exc:
            logger.debug("Command failed", exc_info=True)
            raise CommandError(str(exc)) from exc

    def run(self, **options):
        raise NotImplementedError

    def done(self, message: str) -> None:
        self.stdout.write(self.style.SUCCESS(message))
