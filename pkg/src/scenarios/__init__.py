"""Bundled experiment scenarios in the ssm-scenario v1 format."""
