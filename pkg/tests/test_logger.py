import io
import json
import logging

import pytest

from fpt_utils.logger import DelayedJSONStreamHandler


def _handler(context=None):
    stream = io.StringIO()
    target = logging.StreamHandler(stream)
    target.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    return DelayedJSONStreamHandler(target=target, context=context), stream


def _record(message):
    return logging.LogRecord("fpt_harness", logging.INFO, __file__, 1, message, None, None)


class TestDelayedJSONStreamHandler:
    def test_nothing_written_before_flush(self):
        handler, stream = _handler()
        handler.handle(_record("first"))
        assert stream.getvalue() == ""

    def test_flush_writes_one_blob(self):
        handler, stream = _handler({"code_version": "dev"})
        handler.handle(_record("first"))
        handler.handle(_record("second"))
        handler.flush({"exit_code": 0})
        lines = stream.getvalue().splitlines()
        assert len(lines) == 1
        blob = json.loads(lines[0])
        assert blob["context"] == {"code_version": "dev", "exit_code": 0}
        assert blob["logs"] == ["INFO first", "INFO second"]

    def test_buffer_is_emptied(self):
        handler, stream = _handler()
        handler.handle(_record("only"))
        handler.flush()
        handler.flush()
        assert len(stream.getvalue().splitlines()) == 1

    def test_without_target(self):
        handler = DelayedJSONStreamHandler()
        handler.handle(_record("kept"))
        handler.flush()
        assert len(handler.buffer) == 1

    def test_unknown_arguments_rejected(self):
        with pytest.raises(TypeError):
            DelayedJSONStreamHandler(capacity=10)
