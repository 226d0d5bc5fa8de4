"""Exception hierarchy.

Every error carries a machine-readable ``code``.  The CLI maps the three
families onto its exit codes: data errors exit 1, config errors exit 2,
numeric failures exit 3.
"""


class HierDialogError(Exception):
    exit_code = 1

    def __init__(self, code: str, message: str = ""):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}" if message else code)


class DataError(HierDialogError):
    exit_code = 1


class ConfigError(HierDialogError):
    exit_code = 2


class NumericError(HierDialogError):
    exit_code = 3
