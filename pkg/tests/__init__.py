# Test suites for the hidden-rule benchmark
