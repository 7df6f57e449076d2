"""Command-line tools for the IRMv1 unit-test benchmark."""
