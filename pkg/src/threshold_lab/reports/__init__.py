"""Report tables, run-file schema and project settings."""
