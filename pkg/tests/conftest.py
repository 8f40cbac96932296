# Makes oracle_helpers importable from the test modules.
