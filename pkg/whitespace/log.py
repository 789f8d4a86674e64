"""
Logging helpers.
"""
import logging


class ModuleNameFilter(logging.Filter):
    """
    Sets record.module to the last component of the logger name, so records
    logged on behalf of another module (e.g. 'whitespace.mmpp') report it.
    """

    def filter(self, record):
        record.module = record.name.rsplit('.', 1)[-1]
        return True
