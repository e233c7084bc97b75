# Integration tests for alekahler CLI
