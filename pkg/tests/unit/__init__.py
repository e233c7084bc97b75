# Unit tests for alekahler modules
