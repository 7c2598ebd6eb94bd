"""Scenario-driven experiment harness."""
