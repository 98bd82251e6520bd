"""Module definition for test_cli."""
