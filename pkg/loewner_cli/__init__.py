"""Command line harness tabulating the comb product approximations."""
