# Shared pytest configuration. Presence of this file also puts the tests
# directory on sys.path, making the oracle helpers importable as modules.
