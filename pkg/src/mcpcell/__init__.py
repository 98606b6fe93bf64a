"""Desk-scale manufacturing cell orchestrated over MCP tool servers."""

__version__ = "0.1.0"
