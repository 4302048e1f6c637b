"""Quasipot CLI commands. Each module exports get_commands()."""
