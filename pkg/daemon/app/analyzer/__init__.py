"""Offline dissection and analysis of capture files."""
