"""Test suite for talk-to-me-claude-cli."""
