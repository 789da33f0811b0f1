"""Tests for equity_tune."""
