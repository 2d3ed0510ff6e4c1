"""hylam test suite."""
