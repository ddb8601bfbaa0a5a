import logging

import pytest
from bloch_rates._util.logging import PrefixLogger, init_logging


def test_init_logging_sets_level():
    init_logging("debug")
    assert logging.getLogger("bloch_rates").level == logging.DEBUG
    init_logging("error")
    assert logging.getLogger("bloch_rates").level == logging.ERROR


def test_init_logging_reads_environment(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv("BLOCH_RATES_LOG_LEVEL", "info")
    init_logging()
    assert logging.getLogger("bloch_rates").level == logging.INFO


def test_package_logger_does_not_propagate():
    init_logging("warning")
    assert not logging.getLogger("bloch_rates").propagate


def test_prefix_logger():
    adapter = PrefixLogger(logging.getLogger("bloch_rates.test"), "eps=0.1")
    msg, kwargs = adapter.process("fit done", {})
    assert msg == "[eps=0.1] fit done"
    assert kwargs == {}
