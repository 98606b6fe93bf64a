"""Scenario harness: boots the full cell and replays the evaluation tasks."""
