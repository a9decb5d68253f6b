# Logging setup shared by the CLI and long-running harness jobs

import json
import logging
from logging import Formatter, Logger, LogRecord, StreamHandler
from logging.handlers import MemoryHandler
from typing import Dict, Optional

from .constants import Env

ROOT_LOGGER = logging.getLogger()

# Package loggers that follow FPT_LOG_LEVEL instead of the root level
PACKAGE_LOGGERS = (
    "fpt_autodiff",
    "fpt_encoders",
    "fpt_attacks",
    "fpt_defense",
    "fpt_harness",
    "fpt_utils",
)

LOG_FORMAT = "[%(asctime)s: %(name)s %(levelname)s] %(message)s"


class DelayedJSONStreamHandler(MemoryHandler):
    """Holds every record of a run in memory and writes them out as one JSON document,
    `{"context": {...}, "logs": [...]}`, when `flush` is called. A train, eval or sweep
    command therefore leaves a single parseable line on stderr however many records
    the per-image workers produced.

    Args:
        target (StreamHandler, optional): formats each record and owns the output
            stream. Nothing is written until one is set.
        context (Dict, optional): run metadata placed under "context"; `flush` can add
            more keys.
    """

    def __init__(
        self,
        target: Optional[StreamHandler] = None,
        context: Optional[Dict] = None,
    ):
        super().__init__(capacity=int(1e7), target=target, flushOnClose=False)
        self.context: Dict = dict(context or {})

    def shouldFlush(self, record: LogRecord) -> bool:
        return False  # only an explicit flush() writes

    def flush(self, context: Optional[Dict] = None) -> None:
        """Write the buffered records, merged with `context`, and empty the buffer."""
        self.context.update(context or {})

        self.acquire()
        try:
            target = self.target
            if not self.buffer or target is None:
                return
            blob = json.dumps(
                {
                    "context": self.context,
                    "logs": [target.format(record) for record in self.buffer],
                },
                default=str,
            )
            target.stream.write(blob + target.terminator)  # type: ignore
            target.stream.flush()  # type: ignore
            self.buffer = []
        finally:
            self.release()


def configure_logger(logger: Logger, context: Optional[Dict] = None) -> DelayedJSONStreamHandler:
    """Route every record of the process into one DelayedJSONStreamHandler on stderr.

    Third-party loggers follow FPT_ROOT_LOG_LEVEL; `logger` and the fpt_* packages
    follow FPT_LOG_LEVEL. Handlers already attached to the root logger are removed.
    """
    ROOT_LOGGER.setLevel(Env.ROOT_LOG_LEVEL)
    for handler in list(ROOT_LOGGER.handlers):
        ROOT_LOGGER.removeHandler(handler)

    logger.setLevel(Env.LOG_LEVEL)
    for name in PACKAGE_LOGGERS:
        logging.getLogger(name).setLevel(Env.LOG_LEVEL)

    stderr = logging.StreamHandler()
    stderr.setFormatter(Formatter(LOG_FORMAT))
    handler = DelayedJSONStreamHandler(target=stderr, context=context)
    ROOT_LOGGER.addHandler(handler)
    return handler


def flush_delayed_handlers(context: Optional[Dict] = None) -> None:
    for handler in ROOT_LOGGER.handlers:
        if isinstance(handler, DelayedJSONStreamHandler):
            handler.flush(context=context)
