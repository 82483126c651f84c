"""Command-line shell: config parsing, subcommands, deterministic plots."""
