"""Tests for invbench."""
