"""Shared helpers: logging facade and JSON output."""
