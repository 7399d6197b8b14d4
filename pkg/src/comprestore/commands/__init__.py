"""Command handlers for the comprestore CLI."""
